#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "pcshap/models.hpp"
#include "pcshap/sensitivity.hpp"

using namespace pcshap;

namespace {

SobolDecomposition random_decomposition(std::size_t d, std::mt19937_64& rng, double zero_prob = 0.3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(std::size_t{1} << d, 0.0);
    double total = 0.0;
    for (std::size_t m = 1; m < s.size(); ++m) {
        s[m] = u(rng) < zero_prob ? 0.0 : u(rng);
        total += s[m];
    }
    if (total == 0.0) {
        s[1] = 1.0;
        total = 1.0;
    }
    for (auto& v : s) v /= total;
    return SobolDecomposition(d, s, 1.0);
}

SobolDecomposition ishigami_analytic() {
    const auto v = oracle::ishigami_variances();
    return SobolDecomposition::from_subsets(3, {{{0}, v.v1 / v.total}, {{1}, v.v2 / v.total}, {{0, 2}, v.v13 / v.total}});
}

SobolDecomposition quartic_analytic() {
    const auto v = oracle::quartic_variances();
    return SobolDecomposition::from_subsets(
        4, {{{0}, v.v1 / v.total}, {{1}, v.v2 / v.total}, {{3}, v.v4 / v.total}, {{0, 2}, v.v13 / v.total}});
}

}  // namespace

TEST(Sobol, IshigamiDegreeNine) {
    const auto spec = ishigami();
    const auto d = sobol_from_pce(fit_projection(*spec.function, PceBasis(spec.variables, 9)));
    EXPECT_NEAR(d.first_order(0), 0.3140, 5e-4);
    EXPECT_NEAR(d.first_order(1), 0.4423, 5e-4);
    EXPECT_NEAR(d.index({0, 2}), 0.2437, 5e-4);
    EXPECT_NEAR(d.total(0), 0.5577, 5e-4);
    EXPECT_NEAR(d.sum(), 1.0, 1e-12);
}

TEST(Sobol, QuarticMatchesAnalytic) {
    const auto spec = quartic();
    const auto d = sobol_from_pce(fit_projection(*spec.function, PceBasis(spec.variables, 4)));
    const auto ref = quartic_analytic();
    for (std::uint64_t m = 1; m < 16; ++m) EXPECT_NEAR(d.index_by_mask(m), ref.index_by_mask(m), 1e-12) << m;
    EXPECT_NEAR(d.first_order(0), 0.4169, 1e-4);
    EXPECT_NEAR(d.first_order(3), 0.0530, 1e-4);
    EXPECT_NEAR(d.index({0, 2}), 0.0682, 1e-4);
    // Every reference table entry, at its printed precision.
    for (const auto& [u, r] : spec.references.sobol) EXPECT_NEAR(d.index(u), r.value, 5e-5) << u.to_string();
}

TEST(Sobol, QuarticFromRegression) {
    const auto spec = quartic();
    std::mt19937_64 rng(17);
    const auto flat = draw_physical(spec.variables, 5000, rng);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < 5000; ++i) {
        xs.emplace_back(flat.begin() + 4 * i, flat.begin() + 4 * i + 4);
        ys.push_back((*spec.function)(xs.back()));
    }
    const auto d = sobol_from_pce(fit_regression(xs, ys, PceBasis(spec.variables, 4)));
    for (const auto& [u, r] : spec.references.sobol) EXPECT_NEAR(d.index(u), r.value, 0.01) << u.to_string();
}

TEST(Sobol, LinearSingleVariable) {
    PceBasis b({InputVariable::uniform(0, 1)}, 3);
    const auto d = sobol_from_pce(fit_projection(ModelFunction{1, [](std::span<const double> x) { return x[0]; }}, b));
    EXPECT_NEAR(d.first_order(0), 1.0, 1e-14);
    EXPECT_NEAR(d.total(0), 1.0, 1e-14);
}

TEST(Sobol, ZeroVarianceIsAnError) {
    PceBasis b({InputVariable::uniform(0, 1), InputVariable::uniform(0, 1)}, 2);
    PceSurrogate s(b, std::vector<double>(b.size(), 0.0));
    EXPECT_THROW(sobol_from_pce(s), NumericError);
}

TEST(Sobol, Validation) {
    EXPECT_THROW(SobolDecomposition(3, std::vector<double>(7, 0.0), 1.0), ConfigError);
    EXPECT_THROW(SobolDecomposition::from_subsets(2, {{{2}, 0.5}}), ConfigError);
    EXPECT_THROW(SobolDecomposition::from_subsets(2, {{VariableSubset{}, 0.5}}), ConfigError);
    EXPECT_THROW(SobolDecomposition::from_subsets(21, {}), ConfigError);
}

TEST(Worths, PublishedTables) {
    const auto wi = worths_from_sobol(ishigami_analytic());
    EXPECT_NEAR(wi.at({0, 1}), 0.7563, 5e-5);
    EXPECT_NEAR(wi.at({0, 2}), 0.5576, 5e-5);
    EXPECT_NEAR(wi.at({1, 2}), 0.4424, 5e-5);
    EXPECT_DOUBLE_EQ(wi.at({}), 0.0);
    EXPECT_NEAR(wi.at({0, 1, 2}), 1.0, 1e-14);

    const auto wq = worths_from_sobol(quartic_analytic());
    EXPECT_NEAR(wq.at({0, 1}), 0.8788, 5e-5);
    EXPECT_NEAR(wq.at({2, 3}), 0.0530, 5e-5);
    EXPECT_NEAR(wq.at({0, 1, 2}), 0.9470, 5e-5);
    for (const auto& [u, r] : quartic().references.worths) EXPECT_NEAR(wq.at(u), r.value, 5e-5) << u.to_string();
}

TEST(Worths, AdditiveModelSumsFirstOrders) {
    const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
    std::map<VariableSubset, double> t;
    for (int i = 0; i < 4; ++i) t[{i}] = s[i];
    const auto w = worths_from_sobol(SobolDecomposition::from_subsets(4, t));
    for (std::uint64_t m = 0; m < 16; ++m) {
        double expect = 0.0;
        for (int i = 0; i < 4; ++i)
            if (m >> i & 1) expect += s[i];
        EXPECT_NEAR(w.at_mask(m), expect, 1e-15);
    }
}

TEST(Worths, MonotoneUnderInclusion) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto w = worths_from_sobol(random_decomposition(5, rng));
        for (std::uint64_t m = 0; m < 32; ++m)
            for (int i = 0; i < 5; ++i) EXPECT_LE(w.at_mask(m), w.at_mask(m | (1u << i)) + 1e-15);
    }
}

TEST(Shapley, PublishedValues) {
    const auto shi = shapley_from_worths(worths_from_sobol(ishigami_analytic()));
    EXPECT_NEAR(shi[0], 0.4357, 5e-5);
    EXPECT_NEAR(shi[1], 0.4424, 5e-5);
    EXPECT_NEAR(shi[2], 0.1218, 5e-5);
    const auto shq = shapley_from_worths(worths_from_sobol(quartic_analytic()));
    EXPECT_NEAR(shq[0], 0.4510, 5e-5);
    EXPECT_NEAR(shq[2], 0.0341, 5e-5);
}

TEST(Shapley, WeightedSobolFormula) {
    const auto d = ishigami_analytic();
    const auto sh = shapley_from_sobol(d);
    EXPECT_NEAR(sh[0], d.index({0}) + 0.5 * d.index({0, 1}) + 0.5 * d.index({0, 2}) + d.index({0, 1, 2}) / 3.0, 1e-15);
    EXPECT_NEAR(sh[0], 0.4357, 5e-5);

    // Weights by order: a single S_u of order k gives 1/k to each member.
    for (std::uint64_t m : {1u, 3u, 7u}) {
        std::vector<double> s(8, 0.0);
        s[m] = 1.0;
        const auto w = shapley_from_sobol(SobolDecomposition(3, s, 1.0));
        EXPECT_DOUBLE_EQ(w[0], 1.0 / std::popcount(m));
    }
}

TEST(Shapley, NoInteractionsGivesFirstOrder) {
    const auto d = SobolDecomposition::from_subsets(3, {{{0}, 0.2}, {{1}, 0.5}, {{2}, 0.3}});
    const auto sh = shapley_from_sobol(d);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(sh[i], d.first_order(i), 1e-15);
        EXPECT_NEAR(sh[i], d.total(i), 1e-15);
    }
}

TEST(Shapley, RoutesAgree) {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = 1 + rep % 5;
        const auto dec = random_decomposition(d, rng);
        const auto a = shapley_from_worths(worths_from_sobol(dec));
        const auto b = shapley_from_sobol(dec);
        for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
        EXPECT_NEAR(a.sum(), 1.0, 1e-10);
        EXPECT_NEAR(b.sum(), 1.0, 1e-10);
    }
}

TEST(Shapley, MatchesPermutationEnumeration) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const auto w = worths_from_sobol(random_decomposition(3, rng));
        const auto brute = oracle::shapley_by_permutations(3, [&](unsigned m) { return w.at_mask(m); });
        const auto sh = shapley_from_worths(w);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(sh[i], brute[i], 1e-14);
    }
    // Also d = 5 against 120 orderings.
    const auto w = worths_from_sobol(random_decomposition(5, rng));
    const auto brute = oracle::shapley_by_permutations(5, [&](unsigned m) { return w.at_mask(m); });
    const auto sh = shapley_from_worths(w);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(sh[i], brute[i], 1e-14);
}

TEST(Shapley, DummyIsExactlyZero) {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        auto dec = random_decomposition(4, rng);
        auto s = dec.by_mask();
        for (std::size_t m = 0; m < s.size(); ++m)
            if (m & 4) s[m] = 0.0;
        const SobolDecomposition clean(4, s, 1.0);
        EXPECT_EQ(shapley_from_worths(worths_from_sobol(clean))[2], 0.0);
        EXPECT_EQ(shapley_from_sobol(clean)[2], 0.0);
    }
}

TEST(Shapley, Sandwich) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const auto dec = random_decomposition(4, rng);
        const auto sh = shapley_from_sobol(dec);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_LE(dec.first_order(i), sh[i] + 1e-10);
            EXPECT_LE(sh[i], dec.total(i) + 1e-10);
        }
    }
    const auto spec = ishigami();
    const auto dec = sobol_from_pce(fit_projection(*spec.function, PceBasis(spec.variables, 7)));
    const auto sh = shapley_from_sobol(dec);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_LE(dec.first_order(i), sh[i] + 1e-10);
        EXPECT_LE(sh[i], dec.total(i) + 1e-10);
    }
}

TEST(Shapley, SymmetricTwoPlayerGame) {
    CoalitionWorths w(2);
    w.set({}, 0.0);
    w.set({0}, 0.4);
    w.set({1}, 0.4);
    w.set({0, 1}, 1.0);
    const auto sh = shapley_from_worths(w);
    EXPECT_DOUBLE_EQ(sh[0], 0.5);
    EXPECT_DOUBLE_EQ(sh[1], 0.5);
}

TEST(Shapley, IncompleteWorthsAreAnError) {
    CoalitionWorths w(3);
    w.set({}, 0.0);
    w.set({0}, 0.1);
    w.set({1}, 0.1);
    w.set({2}, 0.1);
    w.set({0, 1}, 0.5);
    w.set({0, 2}, 0.5);
    w.set({0, 1, 2}, 1.0);
    EXPECT_FALSE(w.is_complete());
    try {
        shapley_from_worths(w);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("{2,3}"), std::string::npos);
    }
    EXPECT_THROW(w.set({3}, 0.2), ConfigError);
}

TEST(Ranking, PublishedOrders) {
    const auto di = ishigami_analytic();
    EXPECT_EQ(rank_order(rank_variables(shapley_from_sobol(di).values)), (std::vector<int>{2, 1, 3}));
    EXPECT_EQ(rank_order(rank_variables(di.totals())), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(rank_order(rank_variables(shapley_from_sobol(quartic_analytic()).values)), (std::vector<int>{2, 1, 4, 3}));
}

TEST(Ranking, TiesAndStability) {
    const auto r = rank_variables({0.2, 0.5, 0.2 + 1e-12, 0.1});
    EXPECT_EQ(rank_order(r), (std::vector<int>{2, 3, 1, 4}));
    EXPECT_TRUE(has_ties(r));
    EXPECT_EQ(r[1].rank, 2);
    EXPECT_EQ(r[2].rank, 2);
    EXPECT_TRUE(r[1].tied && r[2].tied);
    EXPECT_FALSE(r[0].tied || r[3].tied);
    EXPECT_EQ(r[3].rank, 4);

    const auto z = rank_variables({0.0, 0.0, 0.0});
    EXPECT_EQ(rank_order(z), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(z[2].rank, 1);
    EXPECT_FALSE(has_ties(rank_variables({0.3, 0.2})));
    EXPECT_THROW(rank_variables({0.1, std::nan("")}), ConfigError);
}
