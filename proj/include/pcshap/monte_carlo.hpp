#pragma once

// Sampling-based estimators used as oracles for the surrogate route.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pcshap/error.hpp"
#include "pcshap/orthopoly.hpp"
#include "pcshap/parallel.hpp"
#include "pcshap/surrogate.hpp"

namespace pcshap {

using InputDistribution = std::vector<InputVariable>;

/// n x M physical-space draws, sample-major.
inline std::vector<double> draw_physical(const InputDistribution& dist, std::size_t n, std::mt19937_64& rng) {
    const std::size_t m = dist.size();
    std::vector<double> x(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) x[i * m + k] = dist[k].map.to_physical(dist[k].sample_standard(rng));
    return x;
}

struct PickFreezeResult {
    std::vector<double> first_order;
    std::vector<double> total;
    std::vector<double> first_order_se;
    std::vector<double> total_se;
    double variance = 0.0;
    std::size_t n = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::pair<double, double> mean_and_se(const std::vector<double>& terms) {
    const double n = static_cast<double>(terms.size());
    const double mean = std::accumulate(terms.begin(), terms.end(), 0.0) / n;
    double ss = 0.0;
    for (double t : terms) ss += (t - mean) * (t - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

/// Saltelli paired-matrix estimators: first order from
/// mean(f_B (f_ABi - f_A)), total (Jansen) from mean((f_A - f_ABi)^2) / 2,
/// both over Var(Y) from the pooled A and B outputs. All sample matrices are
/// drawn before any model call, so results depend only on the seed.
inline PickFreezeResult mc_sobol_pick_freeze(const ModelFunction& model, const InputDistribution& dist, std::size_t n,
                                             std::uint64_t seed) {
    if (n < 1000) throw ConfigError("mc_sobol_pick_freeze: need n >= 1000 samples, got " + std::to_string(n));
    const std::size_t m = dist.size();
    if (model.dims != m) throw ConfigError("mc_sobol_pick_freeze: model and distribution dimensions differ");

    std::mt19937_64 rng(seed);
    const auto a = draw_physical(dist, n, rng);
    const auto b = draw_physical(dist, n, rng);

    // Row blocks: A, B, then AB_i for each i.
    std::vector<double> f((m + 2) * n);
    parallel_for((m + 2) * n, [&](std::size_t job) {
        const std::size_t block = job / n;
        const std::size_t r = job % n;
        std::vector<double> x(m);
        if (block == 0) {
            std::copy_n(a.begin() + r * m, m, x.begin());
        } else if (block == 1) {
            std::copy_n(b.begin() + r * m, m, x.begin());
        } else {
            std::copy_n(a.begin() + r * m, m, x.begin());
            x[block - 2] = b[r * m + block - 2];
        }
        f[job] = model(x);
    });

    std::span<const double> fa(f.data(), n), fb(f.data() + n, n);
    const double mu = (std::accumulate(fa.begin(), fa.end(), 0.0) + std::accumulate(fb.begin(), fb.end(), 0.0)) /
                      (2.0 * static_cast<double>(n));
    double ss = 0.0;
    for (double v : fa) ss += (v - mu) * (v - mu);
    for (double v : fb) ss += (v - mu) * (v - mu);
    const double var = ss / (2.0 * static_cast<double>(n) - 1.0);
    if (!(var > 0.0)) throw NumericError("mc_sobol_pick_freeze: sampled output variance is zero");

    PickFreezeResult res;
    res.variance = var;
    res.n = n;
    std::vector<double> t1(n), t2(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::span<const double> fab(f.data() + (i + 2) * n, n);
        for (std::size_t r = 0; r < n; ++r) {
            t1[r] = (fb[r] - mu) * (fab[r] - fa[r]);
            t2[r] = 0.5 * (fa[r] - fab[r]) * (fa[r] - fab[r]);
        }
        const auto [v1, se1] = detail::mean_and_se(t1);
        const auto [vt, set] = detail::mean_and_se(t2);
        res.first_order.push_back(v1 / var);
        res.first_order_se.push_back(se1 / var);
        res.total.push_back(vt / var);
        res.total_se.push_back(set / var);
        if (v1 < 0.0)
            res.warnings.push_back("negative first-order estimate for variable " + std::to_string(i + 1) + ": " +
                                   std::to_string(v1 / var));
    }
    return res;
}

struct BorgonovoConfig {
    std::size_t samples = 300'000;
    std::size_t slices = 30;        ///< equal-probability partitions of x_i
    std::size_t output_bins = 100;  ///< histogram bins over the pooled output range
    std::uint64_t seed = 7;
};

struct BorgonovoDeltas {
    std::vector<double> values;
    BorgonovoConfig config;
};

inline constexpr std::size_t kMinSamplesPerSlice = 500;

namespace detail {

inline void check_borgonovo_config(const BorgonovoConfig& cfg) {
    if (cfg.samples < 10'000)
        throw ConfigError("borgonovo_delta: need at least 10000 samples, got " + std::to_string(cfg.samples));
    if (cfg.slices < 5) throw ConfigError("borgonovo_delta: need at least 5 slices");
    if (cfg.output_bins < 1) throw ConfigError("borgonovo_delta: need at least one output bin");
    if (cfg.samples / cfg.slices < kMinSamplesPerSlice)
        throw ConfigError("borgonovo_delta: " + std::to_string(cfg.samples / cfg.slices) +
                          " samples per slice, need at least " + std::to_string(kMinSamplesPerSlice));
}

// delta_i from the output sample y and the input column x_i.
inline double borgonovo_from_sample(std::span<const double> y, std::span<const double> xi, std::size_t slices,
                                    std::size_t bins, double lo, double hi) {
    const std::size_t n = y.size();
    const double width = (hi - lo) / static_cast<double>(bins);
    auto bin_of = [&](double v) {
        if (!(width > 0.0)) return std::size_t{0};
        const auto b = static_cast<std::size_t>((v - lo) / width);
        return std::min(b, bins - 1);
    };
    std::vector<double> p(bins, 0.0);
    for (double v : y) p[bin_of(v)] += 1.0;
    for (auto& v : p) v /= static_cast<double>(n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xi[a] < xi[b]; });

    // Slice sizes differ by at most one sample.
    double shift = 0.0;
    std::vector<double> q(bins);
    std::size_t start = 0;
    for (std::size_t s = 0; s < slices; ++s) {
        const std::size_t len = n / slices + (s < n % slices ? 1 : 0);
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t j = start; j < start + len; ++j) q[bin_of(y[order[j]])] += 1.0;
        double l1 = 0.0;
        for (std::size_t k = 0; k < bins; ++k) l1 += std::abs(q[k] / static_cast<double>(len) - p[k]);
        shift += static_cast<double>(len) / static_cast<double>(n) * l1;
        start += len;
    }
    return 0.5 * shift;
}

}  // namespace detail

/// Histogram estimate of delta_i = E[ int |f_Y - f_{Y|X_i}| dy ] / 2 for every
/// variable, from one shared sample.
inline BorgonovoDeltas borgonovo_deltas(const ModelFunction& model, const InputDistribution& dist,
                                        const BorgonovoConfig& cfg = {}) {
    detail::check_borgonovo_config(cfg);
    const std::size_t m = dist.size();
    if (model.dims != m) throw ConfigError("borgonovo_delta: model and distribution dimensions differ");
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = cfg.samples;
    const auto x = draw_physical(dist, n, rng);
    std::vector<double> y(n);
    parallel_for(n, [&](std::size_t r) { y[r] = model(std::span<const double>(x).subspan(r * m, m)); });
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());

    BorgonovoDeltas out;
    out.config = cfg;
    std::vector<double> col(n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < n; ++r) col[r] = x[r * m + i];
        out.values.push_back(detail::borgonovo_from_sample(y, col, cfg.slices, cfg.output_bins, *lo_it, *hi_it));
    }
    return out;
}

/// delta for a single variable i (0-based).
inline double borgonovo_delta(const ModelFunction& model, const InputDistribution& dist, std::size_t i, std::size_t n,
                              std::size_t n_slices, std::uint64_t seed, std::size_t output_bins = 100) {
    if (i >= dist.size()) throw ConfigError("borgonovo_delta: variable index out of range");
    BorgonovoConfig cfg{n, n_slices, output_bins, seed};
    return borgonovo_deltas(model, dist, cfg).values[i];
}

}  // namespace pcshap
