#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pcshap/basis.hpp"
#include "pcshap/error.hpp"
#include "pcshap/orthopoly.hpp"
#include "pcshap/parallel.hpp"

namespace pcshap {

/// A deterministic scalar model of M physical-space inputs. Fitting may
/// call eval concurrently.
struct ModelFunction {
    std::size_t dims = 0;
    std::function<double(std::span<const double>)> eval;

    double operator()(std::span<const double> x) const { return eval(x); }
};

/// Coefficients a_alpha over a basis: y(zeta) = sum_alpha a_alpha Phi_alpha(zeta).
class PceSurrogate {
public:
    PceSurrogate(PceBasis basis, std::vector<double> coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
        if (coeffs_.size() != basis_.size())
            throw ConfigError("surrogate has " + std::to_string(coeffs_.size()) + " coefficients for a basis of " +
                              std::to_string(basis_.size()) + " terms");
    }

    const PceBasis& basis() const { return basis_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    std::size_t dims() const { return basis_.dims(); }

    double mean() const { return coeffs_[0]; }

    double variance() const {
        double v = 0.0;
        for (std::size_t i = 1; i < coeffs_.size(); ++i) v += coeffs_[i] * coeffs_[i] * basis_.norms()[i];
        return v;
    }

    /// Value at a standard-space point (no domain check).
    double evaluate_standard(std::span<const double> zeta) const {
        thread_local std::vector<double> phi;
        phi.resize(basis_.size());
        basis_.eval_all(zeta, phi);
        double y = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) y += coeffs_[i] * phi[i];
        return y;
    }

    /// Value at a physical-space point; bounded inputs outside their
    /// support raise DomainError.
    double evaluate(std::span<const double> x) const {
        if (x.size() != dims())
            throw ConfigError("evaluate: expected " + std::to_string(dims()) + " inputs, got " +
                              std::to_string(x.size()));
        std::vector<double> zeta(dims());
        for (std::size_t k = 0; k < dims(); ++k) {
            const auto& map = basis_.variable(k).map;
            if (!std::isfinite(x[k])) throw DomainError("evaluate: input " + std::to_string(k + 1) + " is not finite");
            if (map.is_bounded()) {
                const double slack = 1e-12 * (map.upper() - map.lower());
                if (x[k] < map.lower() - slack || x[k] > map.upper() + slack)
                    throw DomainError("evaluate: input " + std::to_string(k + 1) + " = " + std::to_string(x[k]) +
                                      " outside [" + std::to_string(map.lower()) + ", " +
                                      std::to_string(map.upper()) + "]");
                zeta[k] = std::clamp(map.from_physical(x[k]), -1.0, 1.0);
            } else {
                zeta[k] = map.from_physical(x[k]);
            }
        }
        return evaluate_standard(zeta);
    }

private:
    PceBasis basis_;
    std::vector<double> coeffs_;
};

inline double mean(const PceSurrogate& s) { return s.mean(); }
inline double variance(const PceSurrogate& s) { return s.variance(); }
inline double evaluate(const PceSurrogate& s, std::span<const double> x) { return s.evaluate(x); }

/// Default tensor-quadrature level for projection.
inline int default_quadrature_points(int degree) { return 2 * degree + 2; }

inline constexpr double kDefaultEvaluationBudget = 1e7;

/// Spectral projection a_alpha = E[f Phi_alpha] / E[Phi_alpha^2] with a
/// tensor Gauss rule of quad_points_per_dim points in every dimension.
inline PceSurrogate fit_projection(const ModelFunction& model, const PceBasis& basis, int quad_points_per_dim,
                                   double evaluation_budget = kDefaultEvaluationBudget) {
    const std::size_t m = basis.dims();
    if (model.dims != m)
        throw ConfigError("fit_projection: model has " + std::to_string(model.dims) + " inputs, basis has " +
                          std::to_string(m));
    if (quad_points_per_dim < basis.degree() + 1)
        throw ConfigError("fit_projection: need at least P+1 = " + std::to_string(basis.degree() + 1) +
                          " quadrature points per dimension");
    const double total_points = std::pow(static_cast<double>(quad_points_per_dim), static_cast<double>(m));
    if (total_points > evaluation_budget)
        throw ConfigError("fit_projection: " + std::to_string(quad_points_per_dim) + "^" + std::to_string(m) +
                          " model evaluations exceed the budget of " + std::to_string(evaluation_budget));

    std::vector<QuadratureRule> rules;
    rules.reserve(m);
    for (std::size_t k = 0; k < m; ++k) rules.push_back(gauss_rule(basis.family(k), quad_points_per_dim));

    const auto n_points = static_cast<std::size_t>(total_points);
    const auto q = static_cast<std::size_t>(quad_points_per_dim);
    auto node_of = [&](std::size_t flat, std::vector<double>& zeta) {
        double w = 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t j = flat % q;
            flat /= q;
            zeta[k] = rules[k].nodes[j];
            w *= rules[k].weights[j];
        }
        return w;
    };

    std::vector<double> values(n_points);
    parallel_for(n_points, [&](std::size_t p) {
        std::vector<double> zeta(m);
        node_of(p, zeta);
        const auto x = basis.to_physical(zeta);
        values[p] = model(x);
    });

    std::vector<double> acc(basis.size(), 0.0);
    std::vector<double> zeta(m);
    std::vector<double> phi(basis.size());
    for (std::size_t p = 0; p < n_points; ++p) {
        const double w = node_of(p, zeta);
        if (!std::isfinite(values[p])) throw NumericError("fit_projection: model returned a non-finite value");
        basis.eval_all(zeta, phi);
        const double wf = w * values[p];
        for (std::size_t i = 0; i < phi.size(); ++i) acc[i] += wf * phi[i];
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= basis.norms()[i];
    return PceSurrogate(basis, std::move(acc));
}

inline PceSurrogate fit_projection(const ModelFunction& model, const PceBasis& basis) {
    return fit_projection(model, basis, default_quadrature_points(basis.degree()));
}

inline constexpr double kRegressionOversampling = 2.0;

/// Least-squares fit over physical-space samples. Requires at least
/// 2 n_C samples; a rank-deficient design raises NumericError naming the
/// basis terms that could not be determined.
inline PceSurrogate fit_regression(std::span<const std::vector<double>> inputs, std::span<const double> outputs,
                                   const PceBasis& basis) {
    if (inputs.size() != outputs.size())
        throw ConfigError("fit_regression: " + std::to_string(inputs.size()) + " inputs but " +
                          std::to_string(outputs.size()) + " outputs");
    const std::size_t n = inputs.size();
    const std::size_t nc = basis.size();
    if (static_cast<double>(n) < kRegressionOversampling * static_cast<double>(nc))
        throw ConfigError("fit_regression: " + std::to_string(n) + " samples, need at least " +
                          std::to_string(static_cast<std::size_t>(kRegressionOversampling * nc)) + " for " +
                          std::to_string(nc) + " basis terms");

    // Columns are scaled to unit norm under the input measure.
    Eigen::MatrixXd design(n, nc);
    Eigen::VectorXd rhs(n);
    std::vector<double> phi(nc);
    std::vector<double> zeta(basis.dims());
    for (std::size_t r = 0; r < n; ++r) {
        const auto& x = inputs[r];
        if (x.size() != basis.dims())
            throw ConfigError("fit_regression: sample " + std::to_string(r) + " has " + std::to_string(x.size()) +
                              " inputs");
        for (std::size_t k = 0; k < basis.dims(); ++k) {
            const auto& map = basis.variable(k).map;
            if (map.is_bounded()) {
                const double slack = 1e-12 * (map.upper() - map.lower());
                if (!(x[k] >= map.lower() - slack && x[k] <= map.upper() + slack))
                    throw DomainError("fit_regression: sample " + std::to_string(r) + " input " +
                                      std::to_string(k + 1) + " outside its bounds");
                zeta[k] = std::clamp(map.from_physical(x[k]), -1.0, 1.0);
            } else {
                zeta[k] = map.from_physical(x[k]);
            }
        }
        basis.eval_all(zeta, phi);
        for (std::size_t c = 0; c < nc; ++c) design(r, c) = phi[c] / std::sqrt(basis.norms()[c]);
        rhs[r] = outputs[r];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < nc) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (std::size_t c = static_cast<std::size_t>(qr.rank()); c < nc; ++c) {
            if (!names.empty()) names += ", ";
            names += basis.index(static_cast<std::size_t>(perm[c])).to_string();
        }
        throw NumericError("fit_regression: design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                           " of " + std::to_string(nc) + "); undetermined basis directions: " + names);
    }
    const Eigen::VectorXd scaled = qr.solve(rhs);
    std::vector<double> coeffs(nc);
    for (std::size_t c = 0; c < nc; ++c) coeffs[c] = scaled[c] / std::sqrt(basis.norms()[c]);
    return PceSurrogate(basis, std::move(coeffs));
}

/// Draws of the standard inputs, sample-major, n x M.
inline std::vector<double> draw_standard(const PceBasis& basis, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> zeta(n * basis.dims());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < basis.dims(); ++k) zeta[i * basis.dims() + k] = basis.variable(k).sample_standard(rng);
    return zeta;
}

/// Surrogate outputs at n i.i.d. draws of the input distribution.
inline std::vector<double> sample_outputs(const PceSurrogate& s, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_outputs: n must be >= 1");
    const auto zeta = draw_standard(s.basis(), n, seed);
    const std::size_t m = s.dims();
    std::vector<double> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = s.evaluate_standard(std::span<const double>(zeta).subspan(i * m, m)); });
    return out;
}

// --- JSON -------------------------------------------------------------------

inline constexpr int kSurrogateFormatVersion = 1;

inline nlohmann::json variables_to_json(const std::vector<InputVariable>& vars) {
    auto families = nlohmann::json::array();
    auto bounds = nlohmann::json::array();
    auto names = nlohmann::json::array();
    for (const auto& v : vars) {
        families.push_back(std::string(family_name(v.family)));
        if (v.map.is_bounded())
            bounds.push_back({v.map.lower(), v.map.upper()});
        else
            bounds.push_back({v.map.offset(), v.map.scale()});
        names.push_back(v.name);
    }
    return {{"families", families}, {"bounds", bounds}, {"names", names}};
}

inline nlohmann::json to_json(const PceSurrogate& s) {
    nlohmann::json j = variables_to_json(s.basis().variables());
    j["format"] = "pcshap-surrogate";
    j["version"] = kSurrogateFormatVersion;
    j["dims"] = s.dims();
    j["degree"] = s.basis().degree();
    auto indices = nlohmann::json::array();
    for (const auto& a : s.basis().indices()) indices.push_back(a.degrees());
    j["indices"] = indices;
    j["coeffs"] = s.coeffs();
    return j;
}

inline PceSurrogate surrogate_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != kSurrogateFormatVersion)
            throw ConfigError("unsupported surrogate version " + j.at("version").dump());
        const auto dims = j.at("dims").get<std::size_t>();
        const auto degree = j.at("degree").get<int>();
        const auto& families = j.at("families");
        const auto& bounds = j.at("bounds");
        if (families.size() != dims || bounds.size() != dims)
            throw ConfigError("surrogate JSON: families/bounds length does not match dims");
        std::vector<InputVariable> vars;
        for (std::size_t k = 0; k < dims; ++k) {
            const auto fam = parse_family(families[k].get<std::string>());
            const double b0 = bounds[k].at(0).get<double>();
            const double b1 = bounds[k].at(1).get<double>();
            std::string name = j.contains("names") ? j["names"][k].get<std::string>() : std::string{};
            vars.push_back(fam == PolynomialFamily::Legendre ? InputVariable::uniform(b0, b1, name)
                                                             : InputVariable::normal(b0, b1, name));
        }
        PceBasis basis(std::move(vars), degree);
        const auto& indices = j.at("indices");
        const auto& coeffs = j.at("coeffs");
        if (indices.size() != coeffs.size())
            throw ConfigError("surrogate JSON: indices and coeffs differ in length");
        if (indices.size() != basis.size())
            throw ConfigError("surrogate JSON: expected " + std::to_string(basis.size()) + " terms, found " +
                              std::to_string(indices.size()));
        std::vector<double> c(basis.size(), 0.0);
        std::vector<bool> seen(basis.size(), false);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            MultiIndex alpha(indices[i].get<std::vector<int>>());
            auto pos = basis.find(alpha);
            if (!pos || seen[*pos])
                throw ConfigError("surrogate JSON: unexpected or repeated index " + alpha.to_string());
            seen[*pos] = true;
            c[*pos] = coeffs[i].get<double>();
        }
        return PceSurrogate(std::move(basis), std::move(c));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("surrogate JSON: ") + e.what());
    }
}

}  // namespace pcshap
