#pragma once

// Intrusive Galerkin expansion of ODE systems whose right-hand side is a sum
// of terms  scale * theta * F, with theta a constant or an uncertain
// parameter theta0 + theta1 * zeta_p, and F one of: 1, a state, a product of
// two states, or a deterministic time signal. Projecting onto every basis
// function gives deterministic ODEs for the PCE coefficients of each state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pcshap/basis.hpp"
#include "pcshap/error.hpp"
#include "pcshap/orthopoly.hpp"
#include "pcshap/parallel.hpp"
#include "pcshap/sensitivity.hpp"
#include "pcshap/surrogate.hpp"

namespace pcshap {

// --- model description ------------------------------------------------------

struct UncertainParameter {
    std::string name;
    InputVariable variable;
};

struct TimeSignal {
    std::string name;
    std::function<double(double)> value;
};

/// scale * [theta_parameter] * prod(states) * [signal(t)]
struct OdeTerm {
    std::size_t target = 0;
    double scale = 1.0;
    std::optional<std::size_t> parameter;
    std::vector<std::size_t> states;
    std::optional<std::size_t> signal;
};

/// Initial value: a fixed number, or the value of an uncertain parameter.
struct InitialValue {
    double value = 0.0;
    std::optional<std::size_t> parameter;
};

struct StochasticOdeModel {
    std::string name;
    std::vector<std::string> states;
    std::vector<UncertainParameter> parameters;
    std::vector<TimeSignal> signals;
    std::vector<OdeTerm> terms;
    std::vector<InitialValue> initial;

    std::size_t state_count() const { return states.size(); }

    std::size_t state_index(const std::string& s) const {
        auto it = std::find(states.begin(), states.end(), s);
        if (it == states.end()) throw ConfigError("model '" + name + "': unknown state '" + s + "'");
        return static_cast<std::size_t>(it - states.begin());
    }

    std::vector<InputVariable> input_variables() const {
        std::vector<InputVariable> v;
        for (const auto& p : parameters) {
            auto var = p.variable;
            var.name = p.name;
            v.push_back(std::move(var));
        }
        return v;
    }

    /// Rejects dangling references and terms outside the bilinear-affine form.
    void validate() const {
        if (states.empty()) throw ConfigError("model '" + name + "' has no states");
        if (initial.size() != states.size())
            throw ConfigError("model '" + name + "': " + std::to_string(initial.size()) + " initial values for " +
                              std::to_string(states.size()) + " states");
        for (const auto& iv : initial)
            if (iv.parameter && *iv.parameter >= parameters.size())
                throw ConfigError("model '" + name + "': initial value references an unknown parameter");
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const auto& term = terms[t];
            const std::string where = "model '" + name + "', term " + std::to_string(t + 1) + ": ";
            if (term.target >= states.size()) throw ConfigError(where + "unknown target state");
            if (term.parameter && *term.parameter >= parameters.size()) throw ConfigError(where + "unknown parameter");
            if (term.signal && *term.signal >= signals.size()) throw ConfigError(where + "unknown signal");
            for (auto s : term.states)
                if (s >= states.size()) throw ConfigError(where + "unknown state factor");
            if (term.states.size() > 2)
                throw ConfigError(where + "product of " + std::to_string(term.states.size()) +
                                  " states; right-hand sides must be at most bilinear in the states");
            if (term.signal && !term.states.empty())
                throw ConfigError(where + "a time signal cannot multiply states");
            if (!std::isfinite(term.scale)) throw ConfigError(where + "non-finite scale");
        }
    }

    /// Deterministic right-hand side at physical parameter values.
    void rhs(double t, std::span<const double> params, std::span<const double> x, std::span<double> dx) const {
        std::fill(dx.begin(), dx.end(), 0.0);
        for (const auto& term : terms) {
            double v = term.scale;
            if (term.parameter) v *= params[*term.parameter];
            for (auto s : term.states) v *= x[s];
            if (term.signal) v *= signals[*term.signal].value(t);
            dx[term.target] += v;
        }
    }

    std::vector<double> initial_state(std::span<const double> params) const {
        std::vector<double> x0(states.size());
        for (std::size_t s = 0; s < states.size(); ++s)
            x0[s] = initial[s].parameter ? params[*initial[s].parameter] : initial[s].value;
        return x0;
    }

    /// Parameter values at the midpoint (mean) of each distribution.
    std::vector<double> mean_parameters() const {
        std::vector<double> p;
        for (const auto& q : parameters) p.push_back(q.variable.map.offset());
        return p;
    }
};

// --- fixed-step RK4 -----------------------------------------------------------

struct TimeGrid {
    double t_end = 0.0;
    double dt = 0.0;

    /// Full steps, plus one shortened step when dt does not divide t_end.
    std::size_t steps() const {
        const double r = t_end / dt;
        const auto full = static_cast<std::size_t>(std::floor(r + 1e-9));
        return (t_end - static_cast<double>(full) * dt > 1e-12 * std::max(1.0, t_end)) ? full + 1 : full;
    }
    double time(std::size_t k) const { return std::min(static_cast<double>(k) * dt, t_end); }
};

inline TimeGrid make_grid(double t_end, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integration step dt must be > 0");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("integration horizon t_end must be > 0");
    return {t_end, dt};
}

inline constexpr double kBlowUpThreshold = 1e12;

/// Classic RK4 over the grid; observer(k, t, y) is called at k = 0..steps.
template <class Rhs, class Observer>
void integrate_rk4(Rhs&& rhs, std::vector<double> y, const TimeGrid& grid, Observer&& observer) {
    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    observer(std::size_t{0}, 0.0, std::span<const double>(y));
    const std::size_t steps = grid.steps();
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.time(k);
        const double h = grid.time(k + 1) - t;
        rhs(t, std::span<const double>(y), std::span<double>(k1));
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, std::span<const double>(tmp), std::span<double>(k2));
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, std::span<const double>(tmp), std::span<double>(k3));
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(t + h, std::span<const double>(tmp), std::span<double>(k4));
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!(std::abs(y[i]) <= kBlowUpThreshold))
                throw NumericError("integration blew up at t = " + std::to_string(t + h) + " (|y| > 1e12)");
        }
        observer(k + 1, grid.time(k + 1), std::span<const double>(y));
    }
}

/// Trajectory of the deterministic model at fixed parameter values;
/// returns values[k * n_states + s].
inline std::vector<double> solve_deterministic(const StochasticOdeModel& model, std::span<const double> params,
                                               const TimeGrid& grid) {
    const std::size_t ns = model.state_count();
    std::vector<double> out((grid.steps() + 1) * ns);
    integrate_rk4([&](double t, std::span<const double> y, std::span<double> dy) { model.rhs(t, params, y, dy); },
                  model.initial_state(params), grid,
                  [&](std::size_t k, double, std::span<const double> y) { std::copy(y.begin(), y.end(), out.begin() + k * ns); });
    return out;
}

// --- projection tensors -------------------------------------------------------

struct PairEntry {
    std::uint32_t a;
    double value;
};

struct TripleEntry {
    std::uint32_t a;
    std::uint32_t b;
    double value;
};

inline constexpr double kTensorDropTolerance = 1e-14;

/// E[Phi_a Phi_b Phi_w], E[zeta_p Phi_a Phi_b Phi_w] and E[zeta_p Phi_a Phi_w]
/// stored sparsely and grouped by the test index w.
class GalerkinTensors {
public:
    explicit GalerkinTensors(const PceBasis& basis) : basis_(basis) {
        const std::size_t m = basis.dims();
        const int p = basis.degree();
        const int top = p + 1;  // zeta = Phi_1 is needed even when P = 0
        tables_.reserve(m);
        for (std::size_t k = 0; k < m; ++k) tables_.push_back(univariate_tables(basis.family(k), top));

        const std::size_t nc = basis.size();
        triple_.assign(nc, {});
        quad_.assign(m, std::vector<std::vector<TripleEntry>>(nc));
        pair_.assign(m, std::vector<std::vector<PairEntry>>(nc));
        const auto& idx = basis.indices();
        const MultiIndex zero(std::vector<int>(m, 0));
        // Each test index w owns its rows, so rows fill independently.
        parallel_for(nc, [&](std::size_t w) {
            for (std::size_t a = 0; a < nc; ++a) {
                for (std::size_t b = 0; b < nc; ++b) {
                    const double t = product3(idx[a], idx[b], idx[w], m);
                    if (std::abs(t) > kTensorDropTolerance)
                        triple_[w].push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), t});
                    for (std::size_t d = 0; d < m; ++d) {
                        const double q = product4(idx[a], idx[b], idx[w], d, m);
                        if (std::abs(q) > kTensorDropTolerance)
                            quad_[d][w].push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), q});
                    }
                }
                for (std::size_t d = 0; d < m; ++d) {
                    const double q = product4(idx[a], zero, idx[w], d, m);
                    if (std::abs(q) > kTensorDropTolerance) pair_[d][w].push_back({static_cast<std::uint32_t>(a), q});
                }
            }
        });
    }

    const PceBasis& basis() const { return basis_; }
    const std::vector<double>& norms() const { return basis_.norms(); }

    const std::vector<TripleEntry>& triple_for(std::size_t w) const { return triple_[w]; }
    const std::vector<TripleEntry>& quad_weighted_for(std::size_t p, std::size_t w) const { return quad_[p][w]; }
    const std::vector<PairEntry>& pair_weighted_for(std::size_t p, std::size_t w) const { return pair_[p][w]; }

    /// E[Phi_a Phi_b Phi_c] (0 for dropped entries).
    double triple(std::size_t a, std::size_t b, std::size_t c) const {
        for (const auto& e : triple_[c])
            if (e.a == a && e.b == b) return e.value;
        return 0.0;
    }

    double quad_weighted(std::size_t p, std::size_t a, std::size_t b, std::size_t c) const {
        for (const auto& e : quad_[p][c])
            if (e.a == a && e.b == b) return e.value;
        return 0.0;
    }

    double pair_weighted(std::size_t p, std::size_t a, std::size_t c) const {
        for (const auto& e : pair_[p][c])
            if (e.a == a) return e.value;
        return 0.0;
    }

    std::size_t nonzeros() const {
        std::size_t n = 0;
        for (const auto& v : triple_) n += v.size();
        return n;
    }

    /// Univariate E[phi_i phi_j phi_k] (e3) and E[zeta phi_i phi_j phi_k] (e4)
    /// for degrees 0..top, exactly symmetric in (i, j, k).
    struct UnivariateTables {
        int size = 0;
        std::vector<double> e3;
        std::vector<double> e4;

        double at3(int i, int j, int k) const { return e3[(static_cast<std::size_t>(i) * size + j) * size + k]; }
        double at4(int i, int j, int k) const { return e4[(static_cast<std::size_t>(i) * size + j) * size + k]; }
    };

    static UnivariateTables univariate_tables(PolynomialFamily family, int top) {
        UnivariateTables t;
        t.size = top + 1;
        const auto s = static_cast<std::size_t>(t.size);
        t.e3.assign(s * s * s, 0.0);
        t.e4.assign(s * s * s, 0.0);
        // Integrand degree is at most 3 top + 1.
        const int points = (3 * top + 2) / 2 + 1;
        const auto rule = gauss_rule(family, points);
        std::vector<double> phi(s);
        std::vector<std::vector<double>> vals(rule.size(), std::vector<double>(s));
        for (std::size_t q = 0; q < rule.size(); ++q) eval_all(family, rule.nodes[q], vals[q]);
        for (int i = 0; i <= top; ++i)
            for (int j = i; j <= top; ++j)
                for (int k = j; k <= top; ++k) {
                    double a3 = 0.0, a4 = 0.0;
                    for (std::size_t q = 0; q < rule.size(); ++q) {
                        const double v = rule.weights[q] * vals[q][i] * vals[q][j] * vals[q][k];
                        a3 += v;
                        a4 += v * rule.nodes[q];
                    }
                    if (std::abs(a3) < kTensorDropTolerance * 1e-2) a3 = 0.0;
                    if (std::abs(a4) < kTensorDropTolerance * 1e-2) a4 = 0.0;
                    const int perm[6][3] = {{i, j, k}, {i, k, j}, {j, i, k}, {j, k, i}, {k, i, j}, {k, j, i}};
                    for (const auto& pr : perm) {
                        const std::size_t at = (static_cast<std::size_t>(pr[0]) * s + pr[1]) * s + pr[2];
                        t.e3[at] = a3;
                        t.e4[at] = a4;
                    }
                }
        return t;
    }

private:
    double product3(const MultiIndex& a, const MultiIndex& b, const MultiIndex& c, std::size_t m) const {
        double v = 1.0;
        for (std::size_t k = 0; k < m && v != 0.0; ++k) v *= tables_[k].at3(a[k], b[k], c[k]);
        return v;
    }

    double product4(const MultiIndex& a, const MultiIndex& b, const MultiIndex& c, std::size_t p, std::size_t m) const {
        double v = 1.0;
        for (std::size_t k = 0; k < m && v != 0.0; ++k)
            v *= (k == p) ? tables_[k].at4(a[k], b[k], c[k]) : tables_[k].at3(a[k], b[k], c[k]);
        return v;
    }

    PceBasis basis_;
    std::vector<UnivariateTables> tables_;
    std::vector<std::vector<TripleEntry>> triple_;
    std::vector<std::vector<std::vector<TripleEntry>>> quad_;
    std::vector<std::vector<std::vector<PairEntry>>> pair_;
};

inline std::shared_ptr<const GalerkinTensors> build_tensors(const PceBasis& basis) {
    return std::make_shared<const GalerkinTensors>(basis);
}

// --- expanded system -----------------------------------------------------------

/// Coefficient ODEs: state s occupies slots [s * n_C, (s+1) * n_C).
class ExpandedOdeSystem {
public:
    ExpandedOdeSystem(StochasticOdeModel model, std::shared_ptr<const GalerkinTensors> tensors)
        : model_(std::move(model)), tensors_(std::move(tensors)) {
        model_.validate();
        const auto& basis = tensors_->basis();
        if (basis.dims() != model_.parameters.size())
            throw ConfigError("expand: basis has " + std::to_string(basis.dims()) + " dimensions but model '" +
                              model_.name + "' has " + std::to_string(model_.parameters.size()) +
                              " uncertain parameters");
        for (std::size_t p = 0; p < basis.dims(); ++p) {
            const auto& v = model_.parameters[p].variable;
            if (v.family != basis.family(p) || !(v.map == basis.variable(p).map))
                throw ConfigError("expand: basis variable " + std::to_string(p + 1) +
                                  " does not match parameter '" + model_.parameters[p].name + "'");
        }
        linear_.resize(basis.dims());
        for (std::size_t p = 0; p < basis.dims(); ++p)
            linear_[p] = basis.degree() >= 1 ? std::optional<std::size_t>(basis.linear_index(p)) : std::nullopt;
    }

    const StochasticOdeModel& model() const { return model_; }
    const PceBasis& basis() const { return tensors_->basis(); }
    const GalerkinTensors& tensors() const { return *tensors_; }
    std::size_t terms_per_state() const { return basis().size(); }
    std::size_t size() const { return model_.state_count() * basis().size(); }

    /// theta0 and theta1 of a term's coefficient (theta1 = 0 when deterministic).
    std::pair<double, double> coefficient(const OdeTerm& term) const {
        if (!term.parameter) return {term.scale, 0.0};
        const auto& map = model_.parameters[*term.parameter].variable.map;
        return {term.scale * map.offset(), term.scale * map.scale()};
    }

    std::vector<double> initial_coefficients() const {
        const std::size_t nc = terms_per_state();
        std::vector<double> y(size(), 0.0);
        for (std::size_t s = 0; s < model_.state_count(); ++s) {
            const auto& iv = model_.initial[s];
            if (!iv.parameter) {
                y[s * nc] = iv.value;
                continue;
            }
            const auto& map = model_.parameters[*iv.parameter].variable.map;
            y[s * nc] = map.offset();
            if (linear_[*iv.parameter]) y[s * nc + *linear_[*iv.parameter]] = map.scale();
        }
        return y;
    }

    void rhs(double t, std::span<const double> y, std::span<double> dy) const {
        const std::size_t nc = terms_per_state();
        const auto& norms = tensors_->norms();
        std::fill(dy.begin(), dy.end(), 0.0);
        for (const auto& term : model_.terms) {
            const auto [c0, c1] = coefficient(term);
            double* out = dy.data() + term.target * nc;
            const std::size_t p = term.parameter.value_or(0);
            if (term.states.empty()) {
                const double s = term.signal ? model_.signals[*term.signal].value(t) : 1.0;
                out[0] += c0 * s;
                if (c1 != 0.0 && linear_[p]) out[*linear_[p]] += c1 * s;
            } else if (term.states.size() == 1) {
                const double* x = y.data() + term.states[0] * nc;
                for (std::size_t w = 0; w < nc; ++w) out[w] += c0 * x[w];
                if (c1 != 0.0) {
                    for (std::size_t w = 0; w < nc; ++w) {
                        double acc = 0.0;
                        for (const auto& e : tensors_->pair_weighted_for(p, w)) acc += e.value * x[e.a];
                        out[w] += c1 * acc / norms[w];
                    }
                }
            } else {
                const double* x = y.data() + term.states[0] * nc;
                const double* z = y.data() + term.states[1] * nc;
                for (std::size_t w = 0; w < nc; ++w) {
                    double acc = 0.0;
                    for (const auto& e : tensors_->triple_for(w)) acc += e.value * x[e.a] * z[e.b];
                    double acc1 = 0.0;
                    if (c1 != 0.0)
                        for (const auto& e : tensors_->quad_weighted_for(p, w)) acc1 += e.value * x[e.a] * z[e.b];
                    out[w] += (c0 * acc + c1 * acc1) / norms[w];
                }
            }
        }
    }

private:
    StochasticOdeModel model_;
    std::shared_ptr<const GalerkinTensors> tensors_;
    std::vector<std::optional<std::size_t>> linear_;
};

inline ExpandedOdeSystem expand(const StochasticOdeModel& model, const PceBasis& basis) {
    model.validate();
    return ExpandedOdeSystem(model, build_tensors(basis));
}

inline ExpandedOdeSystem expand(const StochasticOdeModel& model, std::shared_ptr<const GalerkinTensors> tensors) {
    return ExpandedOdeSystem(model, std::move(tensors));
}

// --- trajectories ---------------------------------------------------------------

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

class CoefficientTrajectory {
public:
    CoefficientTrajectory(std::shared_ptr<const PceBasis> basis, std::vector<std::string> states)
        : basis_(std::move(basis)), states_(std::move(states)) {}

    const PceBasis& basis() const { return *basis_; }
    const std::vector<std::string>& states() const { return states_; }
    const std::vector<double>& times() const { return times_; }
    std::size_t size() const { return times_.size(); }
    std::size_t terms() const { return basis_->size(); }

    std::size_t state_index(const std::string& s) const {
        auto it = std::find(states_.begin(), states_.end(), s);
        if (it == states_.end()) throw ConfigError("trajectory has no state '" + s + "'");
        return static_cast<std::size_t>(it - states_.begin());
    }

    std::span<const double> coeffs(std::size_t time_index, std::size_t state) const {
        const std::size_t nc = terms();
        return std::span<const double>(data_).subspan((time_index * states_.size() + state) * nc, nc);
    }

    /// Appends one time slice holding every state's coefficients.
    void append(double t, std::span<const double> all_states) {
        if (!times_.empty() && !(t > times_.back())) throw ConfigError("trajectory times must increase strictly");
        if (all_states.size() != states_.size() * terms()) throw ConfigError("trajectory slice has the wrong size");
        times_.push_back(t);
        data_.insert(data_.end(), all_states.begin(), all_states.end());
    }

    Moments moments(std::size_t time_index, std::size_t state) const { return moments_of(coeffs(time_index, state)); }

    Moments moments_of(std::span<const double> c) const {
        Moments m{c[0], 0.0};
        for (std::size_t i = 1; i < c.size(); ++i) m.variance += c[i] * c[i] * basis_->norms()[i];
        return m;
    }

    /// Coefficients at time t, linearly interpolated between grid points.
    std::vector<double> coeffs_at(std::size_t state, double t) const {
        if (times_.empty()) throw ConfigError("empty trajectory");
        const double span_tol = 1e-12 * std::max(1.0, std::abs(times_.back()));
        if (t < times_.front() - span_tol || t > times_.back() + span_tol)
            throw ConfigError("time " + std::to_string(t) + " outside the trajectory span");
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - times_.begin());
        if (hi >= times_.size()) hi = times_.size() - 1;
        if (hi == 0) hi = std::min<std::size_t>(1, times_.size() - 1);
        const std::size_t lo = hi == 0 ? 0 : hi - 1;
        const auto a = coeffs(lo, state);
        const auto b = coeffs(hi, state);
        const double frac = hi == lo ? 0.0 : std::clamp((t - times_[lo]) / (times_[hi] - times_[lo]), 0.0, 1.0);
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + frac * (b[i] - a[i]);
        return out;
    }

    PceSurrogate surrogate(std::size_t time_index, std::size_t state) const {
        const auto c = coeffs(time_index, state);
        return PceSurrogate(*basis_, std::vector<double>(c.begin(), c.end()));
    }

private:
    std::shared_ptr<const PceBasis> basis_;
    std::vector<std::string> states_;
    std::vector<double> times_;
    std::vector<double> data_;
};

/// RK4 with a fixed step; the last step is shortened to land on t_end.
/// Every `record_stride`-th step and the final step are stored.
inline CoefficientTrajectory integrate(const ExpandedOdeSystem& sys, double t_end, double dt,
                                       std::size_t record_stride = 1) {
    const auto grid = make_grid(t_end, dt);
    if (record_stride < 1) throw ConfigError("record stride must be >= 1");
    CoefficientTrajectory traj(std::make_shared<const PceBasis>(sys.basis()), sys.model().states);
    const std::size_t last = grid.steps();
    integrate_rk4([&](double t, std::span<const double> y, std::span<double> dy) { sys.rhs(t, y, dy); },
                  sys.initial_coefficients(), grid, [&](std::size_t k, double t, std::span<const double> y) {
                      if (k % record_stride == 0 || k == last) traj.append(t, y);
                  });
    return traj;
}

inline Moments moments_at(const CoefficientTrajectory& traj, const std::string& state, double t) {
    const auto c = traj.coeffs_at(traj.state_index(state), t);
    return traj.moments_of(c);
}

// --- time-resolved sensitivity ------------------------------------------------------

inline constexpr double kMinSeriesVariance = 1e-12;

struct TimeSensitivity {
    double time = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    bool defined = false;  ///< false when variance < 1e-12; indices are then empty
    std::vector<double> sobol_by_mask;
    std::vector<double> first_order;
    std::vector<double> total;
    std::vector<double> shapley;
    std::vector<RankEntry> total_ranking;
    std::vector<RankEntry> shapley_ranking;
};

inline std::vector<TimeSensitivity> sensitivity_series(const CoefficientTrajectory& traj, const std::string& state,
                                                       std::size_t stride = 1) {
    if (stride < 1) throw ConfigError("sensitivity_series: stride must be >= 1");
    const std::size_t s = traj.state_index(state);
    std::vector<TimeSensitivity> out;
    for (std::size_t k = 0; k < traj.size(); k += stride) {
        TimeSensitivity ts;
        ts.time = traj.times()[k];
        const auto mom = traj.moments(k, s);
        ts.mean = mom.mean;
        ts.variance = mom.variance;
        if (mom.variance >= kMinSeriesVariance) {
            const auto d = sobol_from_pce(traj.surrogate(k, s));
            const auto sh = shapley_from_worths(worths_from_sobol(d));
            ts.defined = true;
            ts.sobol_by_mask = d.by_mask();
            ts.first_order = d.first_orders();
            ts.total = d.totals();
            ts.shapley = sh.values;
            ts.total_ranking = rank_variables(ts.total);
            ts.shapley_ranking = rank_variables(ts.shapley);
        }
        out.push_back(std::move(ts));
    }
    return out;
}

// --- Monte Carlo baseline --------------------------------------------------------------

struct EnsembleMoments {
    std::vector<double> times;
    std::vector<std::string> states;
    std::size_t samples = 0;
    /// mean[s][k], variance[s][k] (population variance)
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> variance;
};

/// Mean and variance over deterministic solves at the given physical
/// parameter draws (draw-major, one row per sample).
inline EnsembleMoments ensemble_moments(const StochasticOdeModel& model, std::span<const double> draws,
                                        std::size_t n, double t_end, double dt) {
    model.validate();
    const auto grid = make_grid(t_end, dt);
    const std::size_t np = model.parameters.size();
    const std::size_t ns = model.state_count();
    const std::size_t nt = grid.steps() + 1;
    if (draws.size() != n * np) throw ConfigError("ensemble_moments: draw matrix has the wrong size");

    // Welford per fixed-size chunk, merged in chunk order: independent of threads.
    constexpr std::size_t chunk = 32;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    struct Acc {
        double count = 0.0;
        std::vector<double> mean, m2;
    };
    std::vector<Acc> accs(n_chunks);
    parallel_for(n_chunks, [&](std::size_t c) {
        Acc& acc = accs[c];
        acc.mean.assign(nt * ns, 0.0);
        acc.m2.assign(nt * ns, 0.0);
        for (std::size_t r = c * chunk; r < std::min(n, (c + 1) * chunk); ++r) {
            const auto traj = solve_deterministic(model, draws.subspan(r * np, np), grid);
            acc.count += 1.0;
            for (std::size_t i = 0; i < traj.size(); ++i) {
                const double d = traj[i] - acc.mean[i];
                acc.mean[i] += d / acc.count;
                acc.m2[i] += d * (traj[i] - acc.mean[i]);
            }
        }
    });
    Acc total = std::move(accs[0]);
    for (std::size_t c = 1; c < n_chunks; ++c) {
        const Acc& b = accs[c];
        const double nab = total.count + b.count;
        for (std::size_t i = 0; i < total.mean.size(); ++i) {
            const double d = b.mean[i] - total.mean[i];
            total.mean[i] += d * b.count / nab;
            total.m2[i] += b.m2[i] + d * d * total.count * b.count / nab;
        }
        total.count = nab;
    }

    EnsembleMoments out;
    out.states = model.states;
    out.samples = n;
    for (std::size_t k = 0; k < nt; ++k) out.times.push_back(grid.time(k));
    out.mean.assign(ns, std::vector<double>(nt));
    out.variance.assign(ns, std::vector<double>(nt));
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t s = 0; s < ns; ++s) {
            out.mean[s][k] = total.mean[k * ns + s];
            out.variance[s][k] = total.m2[k * ns + s] / total.count;
        }
    return out;
}

/// Monte Carlo reference: n parameter draws, each solved with the same RK4 grid.
inline EnsembleMoments mc_baseline(const StochasticOdeModel& model, std::size_t n, double t_end, double dt,
                                   std::uint64_t seed) {
    if (n < 100) throw ConfigError("mc_baseline: need at least 100 samples, got " + std::to_string(n));
    const std::size_t np = model.parameters.size();
    std::mt19937_64 rng(seed);
    std::vector<double> draws(n * np);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t p = 0; p < np; ++p) {
            const auto& v = model.parameters[p].variable;
            draws[r * np + p] = v.map.to_physical(v.sample_standard(rng));
        }
    return ensemble_moments(model, draws, n, t_end, dt);
}

// --- peak heat map --------------------------------------------------------------

struct PeakHeatmap {
    std::vector<double> time_edges;
    std::vector<double> magnitude_edges;
    /// counts[i * magnitude_bins + j]: time bin i, magnitude bin j
    std::vector<std::size_t> counts;
    std::size_t samples = 0;
    std::size_t boundary_peaks = 0;  ///< realizations whose maximum sits at the first or last time

    std::size_t time_bins() const { return time_edges.size() - 1; }
    std::size_t magnitude_bins() const { return magnitude_edges.size() - 1; }
    std::size_t count(std::size_t i, std::size_t j) const { return counts[i * magnitude_bins() + j]; }
    std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    /// (time bin, magnitude bin) of the largest count.
    std::pair<std::size_t, std::size_t> modal_bin() const {
        const auto it = std::max_element(counts.begin(), counts.end());
        const auto at = static_cast<std::size_t>(it - counts.begin());
        return {at / magnitude_bins(), at % magnitude_bins()};
    }
};

/// 2-D histogram of (argmax time, max value) of a state over surrogate
/// realizations drawn from the input distribution.
inline PeakHeatmap peak_heatmap(const CoefficientTrajectory& traj, const std::string& state, std::size_t n_samples,
                                std::pair<std::size_t, std::size_t> n_bins, std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("peak_heatmap: n_samples must be >= 1");
    if (n_bins.first < 1 || n_bins.second < 1) throw ConfigError("peak_heatmap: bin counts must be >= 1");
    if (traj.size() < 2) throw ConfigError("peak_heatmap: trajectory needs at least two time points");
    const std::size_t s = traj.state_index(state);
    const auto& basis = traj.basis();
    const std::size_t nc = basis.size();
    const std::size_t nt = traj.size();

    Eigen::MatrixXd coeffs(nc, nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const auto c = traj.coeffs(k, s);
        for (std::size_t i = 0; i < nc; ++i) coeffs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = c[i];
    }
    const auto zeta = draw_standard(basis, n_samples, seed);

    std::vector<double> peak_t(n_samples), peak_v(n_samples);
    std::vector<char> at_boundary(n_samples, 0);
    constexpr std::size_t block = 512;
    const std::size_t n_blocks = (n_samples + block - 1) / block;
    parallel_for(n_blocks, [&](std::size_t bi) {
        const std::size_t r0 = bi * block;
        const std::size_t rows = std::min(block, n_samples - r0);
        Eigen::MatrixXd phi(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(nc));
        std::vector<double> row(nc);
        for (std::size_t r = 0; r < rows; ++r) {
            basis.eval_all(std::span<const double>(zeta).subspan((r0 + r) * basis.dims(), basis.dims()), row);
            for (std::size_t i = 0; i < nc; ++i) phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = row[i];
        }
        const Eigen::MatrixXd values = phi * coeffs;
        for (std::size_t r = 0; r < rows; ++r) {
            Eigen::Index arg = 0;
            const double v = values.row(static_cast<Eigen::Index>(r)).maxCoeff(&arg);
            peak_t[r0 + r] = traj.times()[static_cast<std::size_t>(arg)];
            peak_v[r0 + r] = v;
            at_boundary[r0 + r] = (arg == 0 || static_cast<std::size_t>(arg) == nt - 1) ? 1 : 0;
        }
    });

    PeakHeatmap h;
    h.samples = n_samples;
    const double t0 = traj.times().front(), t1 = traj.times().back();
    const auto [vmin_it, vmax_it] = std::minmax_element(peak_v.begin(), peak_v.end());
    double v0 = *vmin_it, v1 = *vmax_it;
    if (!(v1 > v0)) {
        v0 -= 0.5;
        v1 += 0.5;
    }
    for (std::size_t i = 0; i <= n_bins.first; ++i)
        h.time_edges.push_back(t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n_bins.first));
    for (std::size_t j = 0; j <= n_bins.second; ++j)
        h.magnitude_edges.push_back(v0 + (v1 - v0) * static_cast<double>(j) / static_cast<double>(n_bins.second));
    h.counts.assign(n_bins.first * n_bins.second, 0);
    auto bin = [](double v, double lo, double hi, std::size_t n) {
        const auto b = static_cast<std::size_t>(std::max(0.0, (v - lo) / (hi - lo) * static_cast<double>(n)));
        return std::min(b, n - 1);
    };
    for (std::size_t r = 0; r < n_samples; ++r) {
        const auto i = bin(peak_t[r], t0, t1, n_bins.first);
        const auto j = bin(peak_v[r], v0, v1, n_bins.second);
        ++h.counts[i * n_bins.second + j];
        h.boundary_peaks += static_cast<std::size_t>(at_boundary[r]);
    }
    return h;
}

}  // namespace pcshap
