#pragma once

// Univariate orthogonal polynomial families under the probabilists'
// normalization: the weight is the density of the standard random variable
// (U(-1,1) for Legendre, N(0,1) for Hermite), so every Gauss rule has
// weights summing to one and E[Phi_n^2] is carried explicitly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pcshap/error.hpp"

namespace pcshap {

enum class PolynomialFamily { Legendre, Hermite };

inline std::string_view family_name(PolynomialFamily family) {
    switch (family) {
        case PolynomialFamily::Legendre: return "legendre";
        case PolynomialFamily::Hermite: return "hermite";
    }
    return "unknown";
}

inline PolynomialFamily parse_family(std::string_view name) {
    if (name == "legendre" || name == "uniform") return PolynomialFamily::Legendre;
    if (name == "hermite" || name == "normal" || name == "gaussian") return PolynomialFamily::Hermite;
    throw ConfigError("unknown polynomial family '" + std::string(name) + "'");
}

/// True when the standard domain is [-1, 1].
inline bool is_bounded(PolynomialFamily family) { return family == PolynomialFamily::Legendre; }

/// Coefficients of Phi_{n+1}(x) = (a x + b) Phi_n(x) - c Phi_{n-1}(x).
struct Recurrence {
    double a;
    double b;
    double c;
};

inline Recurrence recurrence(PolynomialFamily family, int n) {
    const double nn = n;
    switch (family) {
        case PolynomialFamily::Legendre: return {(2.0 * nn + 1.0) / (nn + 1.0), 0.0, nn / (nn + 1.0)};
        case PolynomialFamily::Hermite: return {1.0, 0.0, nn};
    }
    return {0.0, 0.0, 0.0};
}

/// Phi_degree(x) by the three-term recurrence.
inline double eval_univariate(PolynomialFamily family, int degree, double x) {
    if (degree <= 0) return 1.0;
    double prev = 1.0;
    double cur = x;  // Phi_1(x) = x for both families
    for (int n = 1; n < degree; ++n) {
        const auto r = recurrence(family, n);
        const double next = (r.a * x + r.b) * cur - r.c * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

/// Fills out[k] = Phi_k(x) for k = 0..out.size()-1.
inline void eval_all(PolynomialFamily family, double x, std::span<double> out) {
    if (out.empty()) return;
    out[0] = 1.0;
    if (out.size() == 1) return;
    out[1] = x;
    for (std::size_t n = 1; n + 1 < out.size(); ++n) {
        const auto r = recurrence(family, static_cast<int>(n));
        out[n + 1] = (r.a * x + r.b) * out[n] - r.c * out[n - 1];
    }
}

/// E[Phi_degree^2] under the family's probability weight.
inline double norm_sq(PolynomialFamily family, int degree) {
    switch (family) {
        case PolynomialFamily::Legendre: return 1.0 / (2.0 * degree + 1.0);
        case PolynomialFamily::Hermite: {
            double f = 1.0;
            for (int k = 2; k <= degree; ++k) f *= k;
            return f;
        }
    }
    return 1.0;
}

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Monic recurrence p_{n+1} = (x - alpha_n) p_n - beta_n p_{n-1}; both
// implemented families are symmetric so alpha_n = 0.
inline double monic_beta(PolynomialFamily family, int n) {
    const double nn = n;
    switch (family) {
        case PolynomialFamily::Legendre: return nn * nn / (4.0 * nn * nn - 1.0);
        case PolynomialFamily::Hermite: return nn;
    }
    return 0.0;
}

// Phi_n(x) and its derivative.
inline std::pair<double, double> eval_with_derivative(PolynomialFamily family, int n, double x) {
    double p0 = 1.0, d0 = 0.0;
    if (n == 0) return {p0, d0};
    double p1 = x, d1 = 1.0;
    for (int k = 1; k < n; ++k) {
        const auto r = recurrence(family, k);
        const double p2 = (r.a * x + r.b) * p1 - r.c * p0;
        const double d2 = r.a * p1 + (r.a * x + r.b) * d1 - r.c * d0;
        p0 = p1;
        d0 = d1;
        p1 = p2;
        d1 = d2;
    }
    return {p1, d1};
}

}  // namespace detail

/// n-point Gauss rule for the family's probability weight.
///
/// Nodes come from the eigenvalues of the Jacobi matrix (Golub-Welsch), are
/// polished by Newton steps on Phi_n and symmetrized; weights use the
/// Christoffel sum 1 / sum_k Phi_k(x)^2 / E[Phi_k^2].
inline QuadratureRule gauss_rule(PolynomialFamily family, int n_points) {
    if (n_points < 1) throw ConfigError("gauss_rule: n_points must be >= 1");
    const int n = n_points;
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 1.0;
        return rule;
    }

    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(detail::monic_beta(family, k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("gauss_rule: eigenvalue solve failed");

    for (int i = 0; i < n; ++i) rule.nodes[i] = solver.eigenvalues()[i];
    std::sort(rule.nodes.begin(), rule.nodes.end());

    for (auto& x : rule.nodes) {
        for (int it = 0; it < 3; ++it) {
            const auto [p, dp] = detail::eval_with_derivative(family, n, x);
            if (dp == 0.0) break;
            const double step = p / dp;
            x -= step;
            if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
        }
    }
    for (int i = 0; i < n / 2; ++i) {
        const double s = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
        rule.nodes[i] = -s;
        rule.nodes[n - 1 - i] = s;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;

    std::vector<double> phi(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        eval_all(family, rule.nodes[i], phi);
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += phi[k] * phi[k] / norm_sq(family, k);
        rule.weights[i] = 1.0 / s;
        total += rule.weights[i];
    }
    for (auto& w : rule.weights) w /= total;
    for (int i = 0; i < n / 2; ++i) {
        const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// theta = offset + scale * zeta, mapping the standard variable onto the
/// physical one. Bounded maps also remember [lower, upper].
class AffineInputMap {
public:
    static AffineInputMap bounded(double lower, double upper) {
        if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper))
            throw ConfigError("affine map requires finite lower < upper (got [" + std::to_string(lower) + ", " +
                              std::to_string(upper) + "])");
        return AffineInputMap(0.5 * (lower + upper), 0.5 * (upper - lower), true, lower, upper);
    }

    static AffineInputMap unbounded(double mean, double scale) {
        if (!std::isfinite(mean) || !std::isfinite(scale) || !(scale > 0.0))
            throw ConfigError("affine map requires finite mean and scale > 0");
        return AffineInputMap(mean, scale, false, -INFINITY, INFINITY);
    }

    double to_physical(double zeta) const { return offset_ + scale_ * zeta; }
    double from_physical(double x) const { return (x - offset_) / scale_; }

    double offset() const { return offset_; }
    double scale() const { return scale_; }
    bool is_bounded() const { return bounded_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }

    bool operator==(const AffineInputMap&) const = default;

private:
    AffineInputMap(double offset, double scale, bool bounded, double lower, double upper)
        : offset_(offset), scale_(scale), bounded_(bounded), lower_(lower), upper_(upper) {}

    double offset_;
    double scale_;
    bool bounded_;
    double lower_;
    double upper_;
};

/// One independent input: its polynomial family and physical map.
struct InputVariable {
    PolynomialFamily family = PolynomialFamily::Legendre;
    AffineInputMap map = AffineInputMap::bounded(-1.0, 1.0);
    std::string name;

    static InputVariable uniform(double lower, double upper, std::string name = {}) {
        return {PolynomialFamily::Legendre, AffineInputMap::bounded(lower, upper), std::move(name)};
    }
    static InputVariable normal(double mean, double sd, std::string name = {}) {
        return {PolynomialFamily::Hermite, AffineInputMap::unbounded(mean, sd), std::move(name)};
    }

    /// Draw of the standard variable zeta.
    template <class Rng>
    double sample_standard(Rng& rng) const {
        if (family == PolynomialFamily::Legendre) return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        return std::normal_distribution<double>(0.0, 1.0)(rng);
    }
};

}  // namespace pcshap
