#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pcshap/models.hpp"
#include "pcshap/monte_carlo.hpp"
#include "pcshap/sensitivity.hpp"

using namespace pcshap;

TEST(PickFreeze, IshigamiFirstOrder) {
    const auto spec = ishigami();
    const auto r = mc_sobol_pick_freeze(*spec.function, spec.variables, 100'000, 1);
    EXPECT_NEAR(r.first_order[0], 0.3139, 0.02);
    EXPECT_NEAR(r.first_order[1], 0.4424, 0.02);
    EXPECT_NEAR(r.total[0], 0.5576, 0.02);
    EXPECT_NEAR(r.total[2], 0.2437, 0.02);
}

TEST(PickFreeze, AgreesWithSurrogateWithinStandardErrors) {
    const auto spec = ishigami();
    const auto r = mc_sobol_pick_freeze(*spec.function, spec.variables, 100'000, 2);
    const auto d = sobol_from_pce(fit_projection(*spec.function, PceBasis(spec.variables, 9)));
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_LE(std::abs(r.first_order[i] - d.first_order(i)), 3.0 * r.first_order_se[i] + 1e-3) << i;
        EXPECT_LE(std::abs(r.total[i] - d.total(i)), 3.0 * r.total_se[i] + 1e-3) << i;
    }
}

TEST(PickFreeze, AdditiveSymmetry) {
    const InputDistribution dist{InputVariable::uniform(0, 1), InputVariable::uniform(0, 1)};
    const ModelFunction f{2, [](std::span<const double> x) { return x[0] + x[1]; }};
    const auto r = mc_sobol_pick_freeze(f, dist, 100'000, 3);
    EXPECT_NEAR(r.first_order[0], 0.5, 0.02);
    EXPECT_NEAR(r.first_order[1], 0.5, 0.02);
    EXPECT_NEAR(r.total[0], 0.5, 0.02);
}

TEST(PickFreeze, QuarticTotalOfThird) {
    const auto spec = quartic();
    const auto r = mc_sobol_pick_freeze(*spec.function, spec.variables, 100'000, 4);
    EXPECT_NEAR(r.total[2], 0.0682, 0.02);
    EXPECT_NEAR(r.first_order[2], 0.0, 0.02);
}

TEST(PickFreeze, DeterministicAndValidated) {
    const auto spec = ishigami();
    const auto a = mc_sobol_pick_freeze(*spec.function, spec.variables, 2000, 9);
    const auto b = mc_sobol_pick_freeze(*spec.function, spec.variables, 2000, 9);
    EXPECT_EQ(a.first_order, b.first_order);
    EXPECT_EQ(a.total, b.total);
    EXPECT_THROW(mc_sobol_pick_freeze(*spec.function, spec.variables, 999, 9), ConfigError);
    EXPECT_THROW(mc_sobol_pick_freeze(ModelFunction{2, spec.function->eval}, spec.variables, 2000, 9), ConfigError);
    const ModelFunction flat{3, [](std::span<const double>) { return 1.0; }};
    EXPECT_THROW(mc_sobol_pick_freeze(flat, spec.variables, 2000, 9), NumericError);
}

TEST(Borgonovo, IgnoredInputIsNearZero) {
    const InputDistribution dist{InputVariable::uniform(0, 1), InputVariable::uniform(0, 1)};
    const ModelFunction f{2, [](std::span<const double> x) { return std::exp(x[0]); }};
    const double d = borgonovo_delta(f, dist, 1, 100'000, 5, 11);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 0.03);
    EXPECT_GT(borgonovo_delta(f, dist, 0, 100'000, 5, 11), 0.5);
}

TEST(Borgonovo, BoundedAndDeterministic) {
    const auto spec = quartic();
    BorgonovoConfig cfg;
    cfg.samples = 50'000;
    cfg.slices = 20;
    const auto a = borgonovo_deltas(*spec.function, spec.variables, cfg);
    const auto b = borgonovo_deltas(*spec.function, spec.variables, cfg);
    EXPECT_EQ(a.values, b.values);
    for (double v : a.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Borgonovo, ConfigErrors) {
    const auto spec = ishigami();
    const auto& f = *spec.function;
    EXPECT_THROW(borgonovo_delta(f, spec.variables, 0, 9'999, 5, 1), ConfigError);
    EXPECT_THROW(borgonovo_delta(f, spec.variables, 0, 20'000, 4, 1), ConfigError);
    EXPECT_THROW(borgonovo_delta(f, spec.variables, 0, 20'000, 41, 1), ConfigError);
    EXPECT_THROW(borgonovo_delta(f, spec.variables, 0, 20'000, 10, 1, 0), ConfigError);
    EXPECT_THROW(borgonovo_delta(f, spec.variables, 3, 20'000, 10, 1), ConfigError);
}

TEST(Borgonovo, QuarticRanking) {
    const auto spec = quartic();
    const auto d = borgonovo_deltas(*spec.function, spec.variables);
    const std::vector<double> ref{0.2734, 0.3309, 0.0178, 0.0800};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(d.values[i], ref[i], 0.03) << i;
    EXPECT_EQ(rank_order(rank_variables(d.values)), (std::vector<int>{2, 1, 4, 3}));
}
