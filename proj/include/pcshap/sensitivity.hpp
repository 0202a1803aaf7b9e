#pragma once

// Variance-based indices read off a fitted surrogate: Sobol indices of every
// subset, total indices, coalition worths c(u) = Var(E[Y|X_u]) / Var(Y), and
// Shapley effects by two independent routes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "pcshap/basis.hpp"
#include "pcshap/error.hpp"
#include "pcshap/surrogate.hpp"

namespace pcshap {

/// Largest dimension for which the 2^d subset tables are built.
inline constexpr std::size_t kMaxSubsetDims = 20;

namespace detail {

inline void check_subset_dims(std::size_t dims, const char* what) {
    if (dims < 1 || dims > kMaxSubsetDims)
        throw ConfigError(std::string(what) + ": dimension must be in [1, " + std::to_string(kMaxSubsetDims) +
                          "], got " + std::to_string(dims));
}

inline std::uint64_t full_mask(std::size_t dims) { return (std::uint64_t{1} << dims) - 1; }

/// All nonempty subsets of {0..dims-1}, by cardinality then lexicographic.
inline std::vector<VariableSubset> nonempty_subsets(std::size_t dims) {
    std::vector<VariableSubset> out;
    out.reserve(full_mask(dims));
    for (std::uint64_t m = 1; m <= full_mask(dims); ++m) out.push_back(VariableSubset::from_mask(m));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// S_u for every nonempty subset, S_Ti per variable, and the variance they
/// normalize.
class SobolDecomposition {
public:
    /// by_mask[m] = S_u for the subset with bitmask m; entry 0 is ignored.
    SobolDecomposition(std::size_t dims, std::vector<double> by_mask, double variance)
        : dims_(dims), by_mask_(std::move(by_mask)), variance_(variance) {
        detail::check_subset_dims(dims, "SobolDecomposition");
        if (by_mask_.size() != detail::full_mask(dims) + 1)
            throw ConfigError("SobolDecomposition: expected 2^d entries");
        by_mask_[0] = 0.0;
        totals_.assign(dims, 0.0);
        for (std::uint64_t m = 1; m < by_mask_.size(); ++m)
            for (std::size_t i = 0; i < dims; ++i)
                if (m & (std::uint64_t{1} << i)) totals_[i] += by_mask_[m];
    }

    /// Builds from an explicit subset -> index table; absent subsets are 0.
    static SobolDecomposition from_subsets(std::size_t dims, const std::map<VariableSubset, double>& values,
                                           double variance = 1.0) {
        detail::check_subset_dims(dims, "SobolDecomposition");
        std::vector<double> by_mask(detail::full_mask(dims) + 1, 0.0);
        for (const auto& [u, s] : values) {
            if (u.empty()) throw ConfigError("Sobol index of the empty set is not defined");
            if ((u.mask() & ~detail::full_mask(dims)) != 0)
                throw ConfigError("subset " + u.to_string() + " outside the variable range");
            by_mask[u.mask()] = s;
        }
        return SobolDecomposition(dims, std::move(by_mask), variance);
    }

    std::size_t dims() const { return dims_; }
    double variance() const { return variance_; }
    double index(const VariableSubset& u) const { return by_mask_.at(u.mask()); }
    double index_by_mask(std::uint64_t mask) const { return by_mask_.at(mask); }
    double first_order(std::size_t i) const { return by_mask_[std::uint64_t{1} << i]; }
    double total(std::size_t i) const { return totals_[i]; }
    const std::vector<double>& totals() const { return totals_; }
    const std::vector<double>& by_mask() const { return by_mask_; }
    std::vector<double> first_orders() const {
        std::vector<double> s(dims_);
        for (std::size_t i = 0; i < dims_; ++i) s[i] = first_order(i);
        return s;
    }
    double sum() const { return std::accumulate(by_mask_.begin(), by_mask_.end(), 0.0); }
    std::vector<VariableSubset> subsets() const { return detail::nonempty_subsets(dims_); }

private:
    std::size_t dims_;
    std::vector<double> by_mask_;
    double variance_;
    std::vector<double> totals_;
};

/// S_u = sum over indices whose support is exactly u of a^2 E[Phi^2] / V.
inline SobolDecomposition sobol_from_pce(const PceSurrogate& s) {
    const auto& basis = s.basis();
    detail::check_subset_dims(basis.dims(), "sobol_from_pce");
    const double v = s.variance();
    if (!(v > 0.0) || !std::isfinite(v))
        throw NumericError("sobol_from_pce: surrogate variance is " + std::to_string(v) +
                           "; Sobol indices are undefined");
    std::vector<double> partial(detail::full_mask(basis.dims()) + 1, 0.0);
    const auto& masks = basis.support_masks();
    for (std::size_t i = 1; i < basis.size(); ++i)
        partial[masks[i]] += s.coeffs()[i] * s.coeffs()[i] * basis.norms()[i];
    for (auto& p : partial) p /= v;
    return SobolDecomposition(basis.dims(), std::move(partial), v);
}

/// c(u) for subsets u of d variables, including c(empty) = 0.
class CoalitionWorths {
public:
    explicit CoalitionWorths(std::size_t dims)
        : dims_((detail::check_subset_dims(dims, "CoalitionWorths"), dims)),
          values_(detail::full_mask(dims) + 1, 0.0),
          present_(values_.size(), false) {}

    std::size_t dims() const { return dims_; }

    void set(const VariableSubset& u, double value) {
        const auto m = u.mask();
        if (m >= values_.size()) throw ConfigError("coalition " + u.to_string() + " outside the variable range");
        values_[m] = value;
        present_[m] = true;
    }

    bool contains(const VariableSubset& u) const {
        const auto m = u.mask();
        return m < values_.size() && present_[m];
    }

    double at(const VariableSubset& u) const {
        if (!contains(u)) throw ConfigError("coalition worth c(" + u.to_string() + ") is missing");
        return values_[u.mask()];
    }

    double at_mask(std::uint64_t mask) const {
        if (mask >= values_.size() || !present_[mask])
            throw ConfigError("coalition worth c(" + VariableSubset::from_mask(mask).to_string() + ") is missing");
        return values_[mask];
    }

    bool is_complete() const { return std::all_of(present_.begin(), present_.end(), [](bool b) { return b; }); }

private:
    std::size_t dims_;
    std::vector<double> values_;
    std::vector<bool> present_;
};

/// c(u) = sum of S_v over nonempty v contained in u.
inline CoalitionWorths worths_from_sobol(const SobolDecomposition& d) {
    const std::size_t dims = d.dims();
    // Subset-sum transform over the bitmask lattice.
    std::vector<double> c = d.by_mask();
    c[0] = 0.0;
    for (std::size_t i = 0; i < dims; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        for (std::uint64_t m = 0; m < c.size(); ++m)
            if (m & bit) c[m] += c[m ^ bit];
    }
    CoalitionWorths w(dims);
    for (std::uint64_t m = 0; m < c.size(); ++m) w.set(VariableSubset::from_mask(m), c[m]);
    return w;
}

struct ShapleyEffects {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }
};

namespace detail {

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t c = 1;
    for (std::uint64_t j = 1; j <= k; ++j) c = c * (n - k + j) / j;
    return c;
}

}  // namespace detail

/// Sh_i = (1/d!) sum_{u not containing i} |u|! (d-1-|u|)! (c(u+i) - c(u)).
///
/// Marginal contributions are grouped by |u|; each group is divided once by
/// the integer d * C(d-1, |u|), which equals d! / (|u|! (d-1-|u|)!).
inline ShapleyEffects shapley_from_worths(const CoalitionWorths& w) {
    const std::size_t d = w.dims();
    const std::uint64_t full = detail::full_mask(d);
    ShapleyEffects sh;
    sh.values.assign(d, 0.0);
    std::vector<double> by_size(d);
    for (std::size_t i = 0; i < d; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        std::fill(by_size.begin(), by_size.end(), 0.0);
        for (std::uint64_t u = 0; u <= full; ++u) {
            if (u & bit) continue;
            by_size[static_cast<std::size_t>(std::popcount(u))] += w.at_mask(u | bit) - w.at_mask(u);
        }
        double total = 0.0;
        for (std::size_t s = 0; s < d; ++s)
            total += by_size[s] / static_cast<double>(d * detail::binomial(d - 1, s));
        sh.values[i] = total;
    }
    return sh;
}

/// Sh_i = sum over subsets u containing i of S_u / |u|.
inline ShapleyEffects shapley_from_sobol(const SobolDecomposition& d) {
    ShapleyEffects sh;
    sh.values.assign(d.dims(), 0.0);
    const auto& s = d.by_mask();
    for (std::uint64_t m = 1; m < s.size(); ++m) {
        const double share = s[m] / std::popcount(m);
        for (std::size_t i = 0; i < d.dims(); ++i)
            if (m & (std::uint64_t{1} << i)) sh.values[i] += share;
    }
    return sh;
}

struct RankEntry {
    std::size_t variable;  ///< 0-based
    double value;
    int rank;    ///< 1-based; tied entries share a rank
    bool tied;   ///< within the tie tolerance of another entry
};

inline constexpr double kRankTieTolerance = 1e-9;

/// Stable descending order of a per-variable metric with ties flagged.
inline std::vector<RankEntry> rank_variables(const std::vector<double>& metric,
                                             double tie_tolerance = kRankTieTolerance) {
    for (double v : metric)
        if (!std::isfinite(v)) throw ConfigError("rank_variables: metric contains a non-finite value");
    std::vector<std::size_t> order(metric.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return metric[a] > metric[b]; });
    std::vector<RankEntry> out;
    out.reserve(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t v = order[pos];
        RankEntry e{v, metric[v], static_cast<int>(pos) + 1, false};
        if (pos > 0 && out.back().value - metric[v] <= tie_tolerance) {
            e.rank = out.back().rank;
            e.tied = true;
            out.back().tied = true;
        }
        out.push_back(e);
    }
    return out;
}

/// 1-based variable numbers in rank order, e.g. {2, 1, 3}.
inline std::vector<int> rank_order(const std::vector<RankEntry>& ranking) {
    std::vector<int> out;
    out.reserve(ranking.size());
    for (const auto& e : ranking) out.push_back(static_cast<int>(e.variable) + 1);
    return out;
}

inline bool has_ties(const std::vector<RankEntry>& ranking) {
    return std::any_of(ranking.begin(), ranking.end(), [](const RankEntry& e) { return e.tied; });
}

}  // namespace pcshap
