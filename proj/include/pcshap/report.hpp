#pragma once

// Serialization of analysis results: sensitivity reports, coefficient
// trajectories, time-resolved indices and heat maps. Number formatting is
// locale-independent so identical inputs give byte-identical files.

#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcshap/galerkin.hpp"
#include "pcshap/models.hpp"
#include "pcshap/monte_carlo.hpp"
#include "pcshap/sensitivity.hpp"

namespace pcshap {

inline std::string fmt(double v, int digits = 10) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::string fmt_exact(double v) { return fmt(v, 17); }

/// Everything one static analysis produced; absent parts stay empty.
struct SensitivityReport {
    std::string model;
    std::string method;
    int degree = 0;
    std::vector<std::string> variables;
    double mean = 0.0;
    double variance = 0.0;
    std::optional<SobolDecomposition> sobol;
    std::optional<CoalitionWorths> worths;
    std::vector<double> shapley;
    std::vector<double> borgonovo;
    std::optional<PickFreezeResult> pick_freeze;
    BenchmarkReferences references;
    std::vector<std::string> warnings;

    std::size_t dims() const { return variables.size(); }
};

namespace detail {

inline std::string opt_cell(const std::vector<double>& v, std::size_t i) { return i < v.size() ? fmt(v[i]) : ""; }

inline std::string ref_cell(const std::vector<ReferenceValue>& v, std::size_t i) {
    return i < v.size() ? fmt(v[i].value) : "";
}

inline std::string ref_cell(const std::map<VariableSubset, ReferenceValue>& m, const VariableSubset& u) {
    auto it = m.find(u);
    return it == m.end() ? "" : fmt(it->second.value);
}

inline std::vector<double> ref_values(const std::vector<ReferenceValue>& v) {
    std::vector<double> out;
    for (const auto& r : v) out.push_back(r.value);
    return out;
}

inline nlohmann::json ranking_json(const std::vector<RankEntry>& r) {
    auto a = nlohmann::json::array();
    for (const auto& e : r)
        a.push_back({{"variable", e.variable + 1}, {"value", e.value}, {"rank", e.rank}, {"tied", e.tied}});
    return a;
}

}  // namespace detail

/// One row per nonempty subset; per-variable columns are filled on singleton
/// rows. Reference columns carry the built-in benchmark values, if any.
inline void write_report_csv(const SensitivityReport& r, std::ostream& out) {
    out << "subset,sobol,total_sobol,shapley,borgonovo,worth,"
           "reference_sobol,reference_total_sobol,reference_shapley,reference_borgonovo,reference_worth\n";
    const std::size_t d = r.dims();
    std::vector<double> total = r.sobol ? r.sobol->totals() : std::vector<double>{};
    for (const auto& u : detail::nonempty_subsets(d)) {
        const bool single = u.size() == 1;
        const std::size_t i = single ? static_cast<std::size_t>(u.members()[0]) : d;
        out << '"' << u.to_string() << '"' << ',' << (r.sobol ? fmt(r.sobol->index(u)) : "") << ','
            << detail::opt_cell(total, i) << ',' << detail::opt_cell(r.shapley, i) << ','
            << detail::opt_cell(r.borgonovo, i) << ',' << (r.worths ? fmt(r.worths->at(u)) : "") << ','
            << detail::ref_cell(r.references.sobol, u) << ',' << detail::ref_cell(r.references.total, i) << ','
            << detail::ref_cell(r.references.shapley, i) << ',' << detail::ref_cell(r.references.borgonovo, i) << ','
            << detail::ref_cell(r.references.worths, u) << '\n';
    }
}

/// metric,position,variable,value,rank,tied
inline void write_rankings_csv(const SensitivityReport& r, std::ostream& out) {
    out << "metric,position,variable,value,rank,tied\n";
    auto emit = [&](const char* name, const std::vector<double>& metric) {
        if (metric.empty()) return;
        const auto ranking = rank_variables(metric);
        for (std::size_t p = 0; p < ranking.size(); ++p)
            out << name << ',' << p + 1 << ',' << r.variables[ranking[p].variable] << ',' << fmt(ranking[p].value)
                << ',' << ranking[p].rank << ',' << (ranking[p].tied ? 1 : 0) << '\n';
    };
    if (r.sobol) {
        emit("sobol", r.sobol->first_orders());
        emit("total_sobol", r.sobol->totals());
    }
    emit("shapley", r.shapley);
    emit("borgonovo", r.borgonovo);
    if (r.pick_freeze) {
        emit("mc_sobol", r.pick_freeze->first_order);
        emit("mc_total_sobol", r.pick_freeze->total);
    }
}

/// variable,sobol,sobol_se,total_sobol,total_sobol_se
inline void write_pick_freeze_csv(const SensitivityReport& r, std::ostream& out) {
    out << "variable,sobol,sobol_se,total_sobol,total_sobol_se\n";
    if (!r.pick_freeze) return;
    const auto& pf = *r.pick_freeze;
    for (std::size_t i = 0; i < pf.first_order.size(); ++i)
        out << r.variables[i] << ',' << fmt(pf.first_order[i]) << ',' << fmt(pf.first_order_se[i]) << ','
            << fmt(pf.total[i]) << ',' << fmt(pf.total_se[i]) << '\n';
}

inline nlohmann::json report_to_json(const SensitivityReport& r) {
    nlohmann::json j;
    j["model"] = r.model;
    j["method"] = r.method;
    if (r.degree > 0) j["degree"] = r.degree;
    j["variables"] = r.variables;
    if (r.sobol) {
        j["mean"] = r.mean;
        j["variance"] = r.variance;
        auto rows = nlohmann::json::array();
        for (const auto& u : detail::nonempty_subsets(r.dims())) {
            nlohmann::json row{{"subset", u.to_string()}, {"sobol", r.sobol->index(u)}};
            if (r.worths) row["worth"] = r.worths->at(u);
            if (auto it = r.references.sobol.find(u); it != r.references.sobol.end())
                row["reference_sobol"] = it->second.value;
            if (auto it = r.references.worths.find(u); it != r.references.worths.end())
                row["reference_worth"] = it->second.value;
            rows.push_back(row);
        }
        j["subsets"] = rows;
    }
    auto vars = nlohmann::json::array();
    for (std::size_t i = 0; i < r.dims(); ++i) {
        nlohmann::json v{{"variable", r.variables[i]}};
        if (r.sobol) {
            v["sobol"] = r.sobol->first_order(i);
            v["total_sobol"] = r.sobol->total(i);
        }
        if (i < r.shapley.size()) v["shapley"] = r.shapley[i];
        if (i < r.borgonovo.size()) v["borgonovo"] = r.borgonovo[i];
        if (r.pick_freeze) {
            v["mc_sobol"] = r.pick_freeze->first_order[i];
            v["mc_sobol_se"] = r.pick_freeze->first_order_se[i];
            v["mc_total_sobol"] = r.pick_freeze->total[i];
            v["mc_total_sobol_se"] = r.pick_freeze->total_se[i];
        }
        if (i < r.references.total.size()) v["reference_total_sobol"] = r.references.total[i].value;
        if (i < r.references.shapley.size()) v["reference_shapley"] = r.references.shapley[i].value;
        if (i < r.references.borgonovo.size()) v["reference_borgonovo"] = r.references.borgonovo[i].value;
        vars.push_back(v);
    }
    j["per_variable"] = vars;
    nlohmann::json rankings = nlohmann::json::object();
    if (r.sobol) rankings["total_sobol"] = detail::ranking_json(rank_variables(r.sobol->totals()));
    if (!r.shapley.empty()) rankings["shapley"] = detail::ranking_json(rank_variables(r.shapley));
    if (!r.borgonovo.empty()) rankings["borgonovo"] = detail::ranking_json(rank_variables(r.borgonovo));
    j["rankings"] = rankings;
    j["warnings"] = r.warnings;
    return j;
}

// --- convergence tables ----------------------------------------------------------

/// One column per degree, one row per quantity (Sobol of every subset, totals,
/// worths, Shapley).
struct ConvergenceTable {
    std::vector<int> degrees;
    std::vector<std::string> rows;
    std::vector<std::vector<double>> values;  ///< values[row][column]
    std::vector<std::string> reference;       ///< formatted reference value or ""
};

inline ConvergenceTable convergence_table(const std::vector<int>& degrees,
                                          const std::vector<SobolDecomposition>& fits,
                                          const BenchmarkReferences& refs) {
    ConvergenceTable t;
    t.degrees = degrees;
    if (fits.empty()) return t;
    const std::size_t d = fits.front().dims();
    const auto subsets = detail::nonempty_subsets(d);
    std::vector<std::vector<double>> cols;
    for (const auto& f : fits) {
        std::vector<double> col;
        for (const auto& u : subsets) col.push_back(f.index(u));
        for (std::size_t i = 0; i < d; ++i) col.push_back(f.total(i));
        const auto w = worths_from_sobol(f);
        for (const auto& u : subsets) col.push_back(w.at(u));
        const auto sh = shapley_from_worths(w);
        for (std::size_t i = 0; i < d; ++i) col.push_back(sh[i]);
        cols.push_back(std::move(col));
    }
    for (const auto& u : subsets) {
        t.rows.push_back("S" + u.to_string());
        t.reference.push_back(detail::ref_cell(refs.sobol, u));
    }
    for (std::size_t i = 0; i < d; ++i) {
        t.rows.push_back("ST" + std::to_string(i + 1));
        t.reference.push_back(detail::ref_cell(refs.total, i));
    }
    for (const auto& u : subsets) {
        t.rows.push_back("c" + u.to_string());
        t.reference.push_back(detail::ref_cell(refs.worths, u));
    }
    for (std::size_t i = 0; i < d; ++i) {
        t.rows.push_back("Sh" + std::to_string(i + 1));
        t.reference.push_back(detail::ref_cell(refs.shapley, i));
    }
    t.values.assign(t.rows.size(), std::vector<double>(fits.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < t.rows.size(); ++r) t.values[r][c] = cols[c][r];
    return t;
}

inline void write_convergence_csv(const ConvergenceTable& t, std::ostream& out) {
    out << "quantity,reference";
    for (int p : t.degrees) out << ",P=" << p;
    out << '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out << '"' << t.rows[r] << "\"," << t.reference[r];
        for (double v : t.values[r]) out << ',' << fmt(v);
        out << '\n';
    }
}

inline nlohmann::json convergence_to_json(const ConvergenceTable& t) {
    nlohmann::json j{{"degrees", t.degrees}};
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        nlohmann::json row{{"quantity", t.rows[r]}, {"values", t.values[r]}};
        if (!t.reference[r].empty()) row["reference"] = std::stod(t.reference[r]);
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j;
}

// --- trajectories -------------------------------------------------------------------

/// t,state,index,coefficient (coefficients at full precision).
inline void write_trajectory_csv(const CoefficientTrajectory& traj, std::ostream& out) {
    out << "t,state,index,coefficient\n";
    const auto& idx = traj.basis().indices();
    for (std::size_t k = 0; k < traj.size(); ++k)
        for (std::size_t s = 0; s < traj.states().size(); ++s) {
            const auto c = traj.coeffs(k, s);
            for (std::size_t i = 0; i < c.size(); ++i)
                out << fmt_exact(traj.times()[k]) << ',' << traj.states()[s] << ",\"" << idx[i].to_string() << "\","
                    << fmt_exact(c[i]) << '\n';
        }
}

/// {"times", "states", "indices", "coeffs"[state][time][term], "variables"}.
inline nlohmann::json trajectory_to_json(const CoefficientTrajectory& traj) {
    nlohmann::json j = variables_to_json(traj.basis().variables());
    j["degree"] = traj.basis().degree();
    j["times"] = traj.times();
    j["states"] = traj.states();
    auto indices = nlohmann::json::array();
    for (const auto& a : traj.basis().indices()) indices.push_back(a.degrees());
    j["indices"] = indices;
    auto coeffs = nlohmann::json::array();
    for (std::size_t s = 0; s < traj.states().size(); ++s) {
        auto per_state = nlohmann::json::array();
        for (std::size_t k = 0; k < traj.size(); ++k) {
            const auto c = traj.coeffs(k, s);
            per_state.push_back(std::vector<double>(c.begin(), c.end()));
        }
        coeffs.push_back(per_state);
    }
    j["coeffs"] = coeffs;
    return j;
}

/// t,state,mean,variance and, with a Monte Carlo baseline on the same grid,
/// mc_mean,mc_variance,abs_error_mean,abs_error_variance.
inline void write_moments_csv(const CoefficientTrajectory& traj, const EnsembleMoments* mc, std::ostream& out) {
    out << "t,state,mean,variance";
    if (mc) out << ",mc_mean,mc_variance,abs_error_mean,abs_error_variance";
    out << '\n';
    if (mc && mc->times.size() != traj.size())
        throw ConfigError("Monte Carlo baseline and trajectory use different time grids");
    for (std::size_t k = 0; k < traj.size(); ++k)
        for (std::size_t s = 0; s < traj.states().size(); ++s) {
            const auto m = traj.moments(k, s);
            out << fmt(traj.times()[k]) << ',' << traj.states()[s] << ',' << fmt(m.mean) << ',' << fmt(m.variance);
            if (mc) {
                const double mm = mc->mean[s][k], mv = mc->variance[s][k];
                out << ',' << fmt(mm) << ',' << fmt(mv) << ',' << fmt(std::abs(m.mean - mm)) << ','
                    << fmt(std::abs(m.variance - mv));
            }
            out << '\n';
        }
}

/// Per time and variable: first-order, total and Shapley values (the sandwich
/// band) plus both rank positions. Undefined rows (zero variance) are marked.
inline void write_series_csv(const std::vector<TimeSensitivity>& series, const std::vector<std::string>& names,
                             std::ostream& out) {
    out << "t,variable,defined,sobol,total_sobol,shapley,rank_total_sobol,rank_shapley\n";
    for (const auto& ts : series)
        for (std::size_t i = 0; i < names.size(); ++i) {
            out << fmt(ts.time) << ',' << names[i] << ',' << (ts.defined ? 1 : 0) << ',';
            if (!ts.defined) {
                out << ",,,,\n";
                continue;
            }
            int rt = 0, rs = 0;
            for (const auto& e : ts.total_ranking)
                if (e.variable == i) rt = e.rank;
            for (const auto& e : ts.shapley_ranking)
                if (e.variable == i) rs = e.rank;
            out << fmt(ts.first_order[i]) << ',' << fmt(ts.total[i]) << ',' << fmt(ts.shapley[i]) << ',' << rt << ','
                << rs << '\n';
        }
}

/// t,subset,sobol for every subset of two or more variables.
inline void write_interaction_series_csv(const std::vector<TimeSensitivity>& series, std::size_t dims,
                                         std::ostream& out) {
    out << "t,subset,sobol\n";
    for (const auto& ts : series) {
        if (!ts.defined) continue;
        for (const auto& u : detail::nonempty_subsets(dims))
            if (u.size() >= 2) out << fmt(ts.time) << ",\"" << u.to_string() << "\"," << fmt(ts.sobol_by_mask[u.mask()]) << '\n';
    }
}

/// Rows are time bins, columns magnitude bins, cells counts.
inline void write_heatmap_csv(const PeakHeatmap& h, std::ostream& out) {
    out << "time_start,time_end";
    for (std::size_t j = 0; j < h.magnitude_bins(); ++j)
        out << ",m[" << fmt(h.magnitude_edges[j], 6) << ':' << fmt(h.magnitude_edges[j + 1], 6) << ')';
    out << '\n';
    for (std::size_t i = 0; i < h.time_bins(); ++i) {
        out << fmt(h.time_edges[i]) << ',' << fmt(h.time_edges[i + 1]);
        for (std::size_t j = 0; j < h.magnitude_bins(); ++j) out << ',' << h.count(i, j);
        out << '\n';
    }
}

inline nlohmann::json heatmap_to_json(const PeakHeatmap& h) {
    return {{"time_edges", h.time_edges},         {"magnitude_edges", h.magnitude_edges},
            {"counts", h.counts},                 {"samples", h.samples},
            {"boundary_peaks", h.boundary_peaks}, {"time_bins", h.time_bins()},
            {"magnitude_bins", h.magnitude_bins()}};
}

}  // namespace pcshap
