// pcshap: command-line front end.
//
//   pcshap analyze --model ishigami --degree 9 --method pce-projection
//   pcshap ode --model seir --degree 4 --t-end 15 --dt 0.01 --heatmap
//   pcshap compare --model ishigami --degrees 3,5,7,9
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcshap/pcshap.hpp"

namespace fs = std::filesystem;
using namespace pcshap;

namespace {

struct Common {
    std::string model;
    std::string output_dir = ".";
    std::vector<std::string> formats{"csv"};
    std::uint64_t seed = 7;
    std::string param_file;
};

struct AnalyzeOptions {
    std::vector<std::string> methods{"pce-projection"};
    int degree = 5;
    int quadrature = 0;
    std::size_t samples = 0;
    std::size_t slices = BorgonovoConfig{}.slices;
    std::size_t output_bins = BorgonovoConfig{}.output_bins;
};

struct OdeOptions {
    int degree = 4;
    double t_end = std::numeric_limits<double>::quiet_NaN();  // NaN: use the model's
    double dt = std::numeric_limits<double>::quiet_NaN();
    std::size_t stride = 1;
    bool heatmap = false;
    std::size_t heatmap_samples = 100'000;
    std::size_t heatmap_time_bins = 30;
    std::size_t heatmap_magnitude_bins = 30;
    std::string heatmap_state;
    std::size_t mc_baseline = 0;
};

struct CompareOptions {
    std::vector<int> degrees;
    int quadrature = 0;
};

/// Output files are staged in memory and written only after every
/// computation succeeded, so a failure never leaves partial results.
class OutputSet {
public:
    std::ostream& add(const std::string& name) {
        files_.emplace_back(name, std::make_unique<std::ostringstream>());
        return *files_.back().second;
    }

    void write(const std::string& dir) const {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
        for (const auto& [name, buf] : files_) {
            const auto path = fs::path(dir) / name;
            std::ofstream out(path, std::ios::binary);
            if (!out) throw ConfigError("cannot write '" + path.string() + "'");
            out << buf->str();
        }
    }

    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& f : files_) n.push_back(f.first);
        return n;
    }

private:
    std::vector<std::pair<std::string, std::unique_ptr<std::ostringstream>>> files_;
};

bool wants(const Common& c, const std::string& fmt_name) {
    return std::find(c.formats.begin(), c.formats.end(), fmt_name) != c.formats.end();
}

void check_formats(const Common& c) {
    if (c.formats.empty()) throw ConfigError("--format needs at least one of csv, json");
    for (const auto& f : c.formats)
        if (f != "csv" && f != "json") throw ConfigError("unknown format '" + f + "' (expected csv or json)");
}

BenchmarkSpec resolve_model(const Common& c) {
    std::optional<BergmanConstants> constants;
    if (!c.param_file.empty()) constants = BergmanConstants::from_json(read_json_file(c.param_file));
    if (c.model.find('/') != std::string::npos || c.model.ends_with(".json")) return load_model_file(c.model);
    return builtin_model(c.model, constants);
}

std::vector<std::string> variable_names(const BenchmarkSpec& spec) {
    std::vector<std::string> n;
    for (std::size_t i = 0; i < spec.variables.size(); ++i)
        n.push_back(spec.variables[i].name.empty() ? "x" + std::to_string(i + 1) : spec.variables[i].name);
    return n;
}

void print_rank(std::ostream& out, const char* label, const std::vector<double>& metric) {
    const auto r = rank_variables(metric);
    out << "  " << label << " ranking:";
    for (const auto& e : r) out << ' ' << e.variable + 1 << (e.tied ? "*" : "");
    out << (has_ties(r) ? "   (* tied)" : "") << '\n';
}

// --- analyze -------------------------------------------------------------------

int run_analyze(const Common& c, const AnalyzeOptions& o) {
    check_formats(c);
    const auto spec = resolve_model(c);
    if (spec.kind != ModelKind::Static || !spec.function)
        throw ConfigError("analyze needs a static model; '" + spec.name + "' is an ODE model (use 'ode')");

    std::set<std::string> methods;
    for (const auto& m : o.methods) {
        if (m != "pce-projection" && m != "pce-regression" && m != "mc-sobol" && m != "borgonovo")
            throw ConfigError("unknown method '" + m + "'");
        methods.insert(m);
    }
    if (methods.empty()) throw ConfigError("at least one --method is required");
    const bool projection = methods.count("pce-projection") > 0;
    const bool regression = methods.count("pce-regression") > 0;
    if (projection && regression) throw ConfigError("choose one of pce-projection and pce-regression per run");
    if ((projection || regression) && o.degree < 1) throw ConfigError("--degree must be >= 1 for PCE methods");

    SensitivityReport report;
    report.model = spec.name;
    report.variables = variable_names(spec);
    report.references = spec.references;
    std::string method_list;
    for (const auto& m : methods) method_list += (method_list.empty() ? "" : ",") + m;
    report.method = method_list;

    std::optional<PceSurrogate> surrogate;
    if (projection || regression) {
        PceBasis basis(spec.variables, o.degree);
        if (projection) {
            const int q = o.quadrature > 0 ? o.quadrature : default_quadrature_points(o.degree);
            surrogate = fit_projection(*spec.function, basis, q);
        } else {
            const std::size_t n = o.samples > 0 ? o.samples : 4 * basis.size();
            std::mt19937_64 rng(c.seed);
            const auto flat = draw_physical(spec.variables, n, rng);
            std::vector<std::vector<double>> xs(n);
            std::vector<double> ys(n);
            for (std::size_t r = 0; r < n; ++r) {
                xs[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * spec.dims()),
                             flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * spec.dims()));
            }
            parallel_for(n, [&](std::size_t r) { ys[r] = (*spec.function)(xs[r]); });
            surrogate = fit_regression(xs, ys, basis);
        }
        report.degree = o.degree;
        report.mean = surrogate->mean();
        report.variance = surrogate->variance();
        report.sobol = sobol_from_pce(*surrogate);
        report.worths = worths_from_sobol(*report.sobol);
        report.shapley = shapley_from_worths(*report.worths).values;
    }
    if (methods.count("mc-sobol")) {
        report.pick_freeze = mc_sobol_pick_freeze(*spec.function, spec.variables, o.samples > 0 ? o.samples : 100'000,
                                                  c.seed);
        for (const auto& w : report.pick_freeze->warnings) report.warnings.push_back(w);
    }
    if (methods.count("borgonovo")) {
        BorgonovoConfig cfg;
        if (o.samples > 0) cfg.samples = o.samples;
        cfg.slices = o.slices;
        cfg.output_bins = o.output_bins;
        cfg.seed = c.seed;
        report.borgonovo = borgonovo_deltas(*spec.function, spec.variables, cfg).values;
    }

    OutputSet files;
    const std::string stem = spec.name;
    if (wants(c, "csv")) {
        write_report_csv(report, files.add(stem + "_report.csv"));
        write_rankings_csv(report, files.add(stem + "_rankings.csv"));
        if (report.pick_freeze) write_pick_freeze_csv(report, files.add(stem + "_mc_sobol.csv"));
    }
    if (wants(c, "json")) files.add(stem + "_report.json") << report_to_json(report).dump(2) << '\n';
    if (surrogate) files.add(stem + "_surrogate.json") << to_json(*surrogate).dump() << '\n';
    files.write(c.output_dir);

    auto& out = std::cout;
    out << "model " << spec.name << ", methods " << report.method;
    if (report.degree) out << ", degree " << report.degree;
    out << '\n';
    if (report.sobol) {
        out << "  mean " << fmt(report.mean, 8) << ", variance " << fmt(report.variance, 8) << '\n';
        out << "  variable  sobol     total     shapley\n";
        for (std::size_t i = 0; i < report.dims(); ++i)
            out << "  " << report.variables[i] << "  " << fmt(report.sobol->first_order(i), 6) << "  "
                << fmt(report.sobol->total(i), 6) << "  " << fmt(report.shapley[i], 6) << '\n';
        print_rank(out, "total-sobol", report.sobol->totals());
        print_rank(out, "shapley", report.shapley);
    }
    if (report.pick_freeze)
        for (std::size_t i = 0; i < report.dims(); ++i)
            out << "  mc " << report.variables[i] << ": S=" << fmt(report.pick_freeze->first_order[i], 5) << " +- "
                << fmt(report.pick_freeze->first_order_se[i], 2) << ", ST=" << fmt(report.pick_freeze->total[i], 5)
                << " +- " << fmt(report.pick_freeze->total_se[i], 2) << '\n';
    if (!report.borgonovo.empty()) {
        out << "  borgonovo:";
        for (double d : report.borgonovo) out << ' ' << fmt(d, 4);
        out << '\n';
        print_rank(out, "borgonovo", report.borgonovo);
    }
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& f : files.names()) out << "  wrote " << (fs::path(c.output_dir) / f).string() << '\n';
    return 0;
}

// --- ode -------------------------------------------------------------------------

int run_ode(const Common& c, const OdeOptions& o) {
    check_formats(c);
    const auto spec = resolve_model(c);
    if (spec.kind != ModelKind::Ode || !spec.ode)
        throw ConfigError("ode needs an ODE model; '" + spec.name + "' is static (use 'analyze')");
    if (o.degree < 1) throw ConfigError("--degree must be >= 1");
    if (!std::isnan(o.t_end) && !(o.t_end > 0.0)) throw ConfigError("--t-end must be > 0");
    if (!std::isnan(o.dt) && !(o.dt > 0.0)) throw ConfigError("--dt must be > 0");
    const double t_end = std::isnan(o.t_end) ? spec.horizon : o.t_end;
    const double dt = std::isnan(o.dt) ? spec.dt : o.dt;
    if (!(t_end > 0.0)) throw ConfigError("no horizon: pass --t-end");
    if (!(dt > 0.0)) throw ConfigError("no step: pass --dt");

    const auto& model = *spec.ode;
    PceBasis basis(spec.variables, o.degree);
    const auto sys = expand(model, basis);
    const auto traj = integrate(sys, t_end, dt, o.stride);
    const auto names = variable_names(spec);

    std::optional<EnsembleMoments> mc;
    if (o.mc_baseline > 0) {
        if (o.stride != 1) throw ConfigError("--mc-baseline needs --stride 1 so both series share a grid");
        mc = mc_baseline(model, o.mc_baseline, t_end, dt, c.seed);
    }
    std::optional<PeakHeatmap> heat;
    const std::string heat_state = o.heatmap_state.empty() ? spec.output_state : o.heatmap_state;
    if (o.heatmap)
        heat = peak_heatmap(traj, heat_state, o.heatmap_samples, {o.heatmap_time_bins, o.heatmap_magnitude_bins},
                            c.seed);

    OutputSet files;
    const std::string stem = spec.name;
    if (wants(c, "csv")) write_trajectory_csv(traj, files.add(stem + "_trajectory.csv"));
    if (wants(c, "json")) files.add(stem + "_trajectory.json") << trajectory_to_json(traj).dump() << '\n';
    write_moments_csv(traj, mc ? &*mc : nullptr, files.add(stem + "_moments.csv"));
    for (const auto& state : model.states) {
        const auto series = sensitivity_series(traj, state);
        write_series_csv(series, names, files.add(stem + "_series_" + state + ".csv"));
        write_interaction_series_csv(series, basis.dims(), files.add(stem + "_interactions_" + state + ".csv"));
    }
    if (heat) {
        if (wants(c, "csv")) write_heatmap_csv(*heat, files.add(stem + "_heatmap_" + heat_state + ".csv"));
        if (wants(c, "json")) files.add(stem + "_heatmap_" + heat_state + ".json") << heatmap_to_json(*heat).dump(2) << '\n';
    }
    files.write(c.output_dir);

    auto& out = std::cout;
    out << "model " << spec.name << ", degree " << o.degree << ", " << basis.size() << " terms per state, "
        << traj.size() << " time points to t=" << fmt(t_end) << '\n';
    const std::size_t s = traj.state_index(spec.output_state);
    const auto last = traj.moments(traj.size() - 1, s);
    out << "  " << spec.output_state << "(t_end): mean " << fmt(last.mean, 8) << ", variance " << fmt(last.variance, 8)
        << '\n';
    if (mc) {
        double em = 0.0, ev = 0.0;
        for (std::size_t k = 0; k < traj.size(); ++k) {
            const auto m = traj.moments(k, s);
            em = std::max(em, std::abs(m.mean - mc->mean[s][k]));
            ev = std::max(ev, std::abs(m.variance - mc->variance[s][k]));
        }
        out << "  vs Monte Carlo (n=" << mc->samples << "): max |mean error| " << fmt(em, 4)
            << ", max |variance error| " << fmt(ev, 4) << '\n';
    }
    if (heat) {
        const auto [ti, mi] = heat->modal_bin();
        out << "  peak heat map: modal bin t in [" << fmt(heat->time_edges[ti], 4) << ", "
            << fmt(heat->time_edges[ti + 1], 4) << "), " << heat_state << " in [" << fmt(heat->magnitude_edges[mi], 4)
            << ", " << fmt(heat->magnitude_edges[mi + 1], 4) << "); " << heat->boundary_peaks
            << " peaks on the time boundary\n";
    }
    for (const auto& f : files.names()) out << "  wrote " << (fs::path(c.output_dir) / f).string() << '\n';
    return 0;
}

// --- compare ------------------------------------------------------------------------

int run_compare(const Common& c, const CompareOptions& o) {
    check_formats(c);
    const auto spec = resolve_model(c);
    if (spec.kind != ModelKind::Static || !spec.function)
        throw ConfigError("compare needs a static model; '" + spec.name + "' is an ODE model");
    if (o.degrees.empty()) throw ConfigError("--degrees needs at least one degree");
    std::vector<SobolDecomposition> fits;
    for (int p : o.degrees) {
        if (p < 1) throw ConfigError("degrees must be >= 1");
        PceBasis basis(spec.variables, p);
        const int q = o.quadrature > 0 ? o.quadrature : default_quadrature_points(p);
        fits.push_back(sobol_from_pce(fit_projection(*spec.function, basis, q)));
    }
    const auto table = convergence_table(o.degrees, fits, spec.references);

    OutputSet files;
    if (wants(c, "csv")) write_convergence_csv(table, files.add(spec.name + "_convergence.csv"));
    if (wants(c, "json")) files.add(spec.name + "_convergence.json") << convergence_to_json(table).dump(2) << '\n';
    files.write(c.output_dir);

    auto& out = std::cout;
    out << "quantity    reference";
    for (int p : o.degrees) out << "  P=" << p << std::string(p < 10 ? 5 : 4, ' ');
    out << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::string label = table.rows[r];
        label.resize(std::max<std::size_t>(label.size(), 12), ' ');
        std::string ref = table.reference[r];
        ref.resize(std::max<std::size_t>(ref.size(), 9), ' ');
        out << label << ref;
        for (double v : table.values[r]) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "  %-8.4f", v);
            out << buf;
        }
        out << '\n';
    }
    for (const auto& f : files.names()) out << "  wrote " << (fs::path(c.output_dir) / f).string() << '\n';
    return 0;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--model", c.model, "built-in model (ishigami, quartic, seir, bergman) or a JSON model file")
        ->required();
    sub->add_option("--output-dir", c.output_dir, "directory for output files")->capture_default_str();
    sub->add_option("--format", c.formats, "output formats: csv, json (repeatable or comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--param-file", c.param_file, "JSON file with model constants (bergman: G_b, I_b, d, p4)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polynomial chaos sensitivity analysis: Sobol indices, Shapley effects, Borgonovo deltas"};
    app.require_subcommand(1);

    Common common;
    AnalyzeOptions ao;
    OdeOptions oo;
    CompareOptions co;

    auto* analyze = app.add_subcommand("analyze", "sensitivity report for a static model");
    add_common(analyze, common);
    analyze
        ->add_option("--method", ao.methods, "pce-projection, pce-regression, mc-sobol, borgonovo (repeatable)")
        ->delimiter(',')
        ->capture_default_str();
    analyze->add_option("--degree", ao.degree, "total PCE degree P")->capture_default_str();
    analyze->add_option("--quadrature", ao.quadrature, "Gauss points per dimension (default 2P+2)");
    analyze->add_option("--samples", ao.samples,
                        "sample count for mc-sobol (default 1e5), borgonovo (3e5), pce-regression (4 n_C)");
    analyze->add_option("--slices", ao.slices, "borgonovo: equal-probability slices per input")->capture_default_str();
    analyze->add_option("--output-bins", ao.output_bins, "borgonovo: output histogram bins")->capture_default_str();

    auto* ode = app.add_subcommand("ode", "intrusive Galerkin propagation and time-resolved sensitivity");
    add_common(ode, common);
    ode->add_option("--degree", oo.degree, "total PCE degree P")->capture_default_str();
    ode->add_option("--t-end", oo.t_end, "integration horizon (default from the model)");
    ode->add_option("--dt", oo.dt, "RK4 step (default from the model)");
    ode->add_option("--stride", oo.stride, "store every n-th step")->capture_default_str();
    ode->add_flag("--heatmap", oo.heatmap, "histogram of peak time and magnitude over surrogate draws");
    ode->add_option("--heatmap-samples", oo.heatmap_samples, "surrogate draws for the heat map")->capture_default_str();
    ode->add_option("--heatmap-time-bins", oo.heatmap_time_bins)->capture_default_str();
    ode->add_option("--heatmap-magnitude-bins", oo.heatmap_magnitude_bins)->capture_default_str();
    ode->add_option("--heatmap-state", oo.heatmap_state, "state for the heat map (default: model output state)");
    ode->add_option("--mc-baseline", oo.mc_baseline, "Monte Carlo sample count for a moment baseline");

    auto* compare = app.add_subcommand("compare", "convergence table over PCE degrees");
    add_common(compare, common);
    compare->add_option("--degrees", co.degrees, "comma separated degrees, e.g. 3,5,7,9")->delimiter(',')->required();
    compare->add_option("--quadrature", co.quadrature, "Gauss points per dimension (default 2P+2)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (analyze->parsed()) return run_analyze(common, ao);
        if (ode->parsed()) return run_ode(common, oo);
        return run_compare(common, co);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
