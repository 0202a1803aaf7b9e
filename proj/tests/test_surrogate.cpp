#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pcshap/models.hpp"
#include "pcshap/surrogate.hpp"

using namespace pcshap;

namespace {

struct Sample {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
};

Sample physical_sample(const BenchmarkSpec& spec, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto flat = draw_physical(spec.variables, n, rng);
    const std::size_t m = spec.dims();
    Sample s;
    for (std::size_t i = 0; i < n; ++i) {
        s.x.emplace_back(flat.begin() + i * m, flat.begin() + (i + 1) * m);
        s.y.push_back((*spec.function)(s.x.back()));
    }
    return s;
}

}  // namespace

TEST(Projection, ConstantModel) {
    const auto spec = quartic();
    PceBasis basis(spec.variables, 3);
    const auto s = fit_projection(ModelFunction{4, [](std::span<const double>) { return 2.5; }}, basis);
    EXPECT_NEAR(s.mean(), 2.5, 1e-13);
    EXPECT_NEAR(s.variance(), 0.0, 1e-24);
}

TEST(Projection, QuarticIsExactAtDegreeFour) {
    const auto spec = quartic();
    const auto ref = oracle::quartic_variances();
    const auto s = fit_projection(*spec.function, PceBasis(spec.variables, 4));
    EXPECT_NEAR(s.mean(), ref.mean, 1e-12);
    EXPECT_NEAR(s.variance(), ref.total, 1e-10);
    const std::vector<double> x{0.5, -0.5, 0.2, 0.9};
    EXPECT_NEAR(s.evaluate(x), (*spec.function)(x), 1e-10);
}

TEST(Projection, IshigamiVariance) {
    const auto spec = ishigami();
    const auto s = fit_projection(*spec.function, PceBasis(spec.variables, 9), 16);
    EXPECT_NEAR(s.variance(), oracle::ishigami_variances().total, 0.01);
    EXPECT_NEAR(s.mean(), 3.5, 1e-3);
}

TEST(Projection, IshigamiPointwiseError) {
    // The degree-9 truncation of sin on [-pi, pi] leaves a pointwise error of
    // about 0.13 at worst over random points; the bound is set just above it.
    const auto spec = ishigami();
    const auto s = fit_projection(*spec.function, PceBasis(spec.variables, 9));
    const auto sample = physical_sample(spec, 100, 11);
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.x.size(); ++i)
        worst = std::max(worst, std::abs(s.evaluate(sample.x[i]) - sample.y[i]));
    EXPECT_LT(worst, 0.2);
    RecordProperty("max_abs_error", std::to_string(worst));
}

TEST(Projection, Errors) {
    const auto spec = ishigami();
    PceBasis basis(spec.variables, 4);
    EXPECT_THROW(fit_projection(*spec.function, basis, 4), ConfigError);
    EXPECT_NO_THROW(fit_projection(*spec.function, basis, 5));
    EXPECT_THROW(fit_projection(*spec.function, basis, 10, 100.0), ConfigError);
    EXPECT_THROW(fit_projection(ModelFunction{2, spec.function->eval}, basis), ConfigError);
    const ModelFunction nan_model{3, [](std::span<const double>) { return std::nan(""); }};
    EXPECT_THROW(fit_projection(nan_model, basis), NumericError);
}

TEST(Projection, NestedDegreesImprove) {
    const auto spec = ishigami();
    const double truth = oracle::ishigami_variances().total;
    double prev = 1e300;
    for (int p : {3, 5, 7, 9, 11}) {
        const auto s = fit_projection(*spec.function, PceBasis(spec.variables, p));
        const double err = std::abs(s.variance() - truth);
        EXPECT_LT(err, prev) << "P=" << p;
        prev = err;
    }
}

TEST(Regression, RecoversPolynomialExactly) {
    const auto spec = quartic();
    PceBasis basis(spec.variables, 4);
    const auto sample = physical_sample(spec, 2 * basis.size() + 10, 3);
    const auto s = fit_regression(sample.x, sample.y, basis);
    const auto p = fit_projection(*spec.function, basis);
    for (std::size_t i = 0; i < basis.size(); ++i) EXPECT_NEAR(s.coeffs()[i], p.coeffs()[i], 1e-8);
    EXPECT_NEAR(s.variance(), oracle::quartic_variances().total, 1e-8);
}

TEST(Regression, QuarticFromRandomSample) {
    const auto spec = quartic();
    const auto ref = oracle::quartic_variances();
    const auto sample = physical_sample(spec, 5000, 5);
    const auto full = fit_regression(sample.x, sample.y, PceBasis(spec.variables, 4));
    EXPECT_NEAR(full.variance(), ref.total, 0.01);
    // x3 x1^3 lies outside the degree-3 span; the mean is still well determined.
    const auto low = fit_regression(sample.x, sample.y, PceBasis(spec.variables, 3));
    EXPECT_NEAR(low.mean(), ref.mean, 0.01);
}

TEST(Regression, ProjectionAgreementOnPolynomial) {
    const auto spec = ishigami();
    PceBasis basis(spec.variables, 3);
    // A polynomial inside the span: both routes reproduce it.
    const ModelFunction poly{3, [](std::span<const double> x) { return 1.0 + x[0] - 0.5 * x[1] * x[2] + x[2] * x[2] * x[0]; }};
    std::mt19937_64 rng(9);
    const auto flat = draw_physical(spec.variables, 400, rng);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < 400; ++i) {
        xs.emplace_back(flat.begin() + 3 * i, flat.begin() + 3 * i + 3);
        ys.push_back(poly(xs.back()));
    }
    const auto r = fit_regression(xs, ys, basis);
    const auto p = fit_projection(poly, basis);
    for (std::size_t i = 0; i < basis.size(); ++i) EXPECT_NEAR(r.coeffs()[i], p.coeffs()[i], 1e-6);
}

TEST(Regression, ConstantData) {
    const auto spec = quartic();
    PceBasis basis(spec.variables, 2);
    auto sample = physical_sample(spec, 100, 1);
    std::fill(sample.y.begin(), sample.y.end(), -4.0);
    const auto s = fit_regression(sample.x, sample.y, basis);
    EXPECT_NEAR(s.mean(), -4.0, 1e-10);
    EXPECT_NEAR(s.variance(), 0.0, 1e-18);
}

TEST(Regression, Errors) {
    const auto spec = quartic();
    PceBasis basis(spec.variables, 2);
    auto sample = physical_sample(spec, 20, 1);
    EXPECT_THROW(fit_regression(sample.x, sample.y, basis), ConfigError);

    // Every sample shares x4, so the x4 directions are undetermined.
    sample = physical_sample(spec, 100, 2);
    for (auto& x : sample.x) x[3] = 0.25;
    try {
        fit_regression(sample.x, sample.y, basis);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("rank deficient"), std::string::npos);
    }

    sample = physical_sample(spec, 100, 2);
    sample.x[5][0] = 3.0;
    EXPECT_THROW(fit_regression(sample.x, sample.y, basis), DomainError);
    sample.y.pop_back();
    EXPECT_THROW(fit_regression(sample.x, sample.y, basis), ConfigError);
}

TEST(Evaluate, DomainChecks) {
    const auto spec = ishigami();
    const auto s = fit_projection(*spec.function, PceBasis(spec.variables, 3));
    EXPECT_THROW(s.evaluate(std::vector<double>{4.0, 0.0, 0.0}), DomainError);
    EXPECT_THROW(s.evaluate(std::vector<double>{std::nan(""), 0.0, 0.0}), DomainError);
    EXPECT_THROW(s.evaluate(std::vector<double>{0.0, 0.0}), ConfigError);
    EXPECT_NO_THROW(s.evaluate(std::vector<double>{std::numbers::pi, -std::numbers::pi, 0.0}));

    PceBasis normal_basis({InputVariable::normal(1.0, 2.0)}, 2);
    PceSurrogate g(normal_basis, {1.0, 2.0, 0.5});
    // 1 + 2 z + 0.5 (z^2 - 1) at x = 5, z = 2.
    EXPECT_NEAR(g.evaluate(std::vector<double>{5.0}), 1.0 + 4.0 + 1.5, 1e-14);
    EXPECT_NEAR(g.variance(), 4.0 + 0.25 * 2.0, 1e-14);
}

TEST(Sampling, MeanAndParseval) {
    const auto spec = quartic();
    const auto s = fit_projection(*spec.function, PceBasis(spec.variables, 4));
    const std::size_t n = 1'000'000;
    const auto y = sample_outputs(s, n, 21);
    double m = 0.0;
    for (double v : y) m += v;
    m /= n;
    double v2 = 0.0;
    for (double v : y) v2 += (v - m) * (v - m);
    v2 /= (n - 1);
    EXPECT_NEAR(m, s.mean(), 0.02);
    // Standard error of the sample variance from the fourth central moment.
    double m4 = 0.0;
    for (double v : y) m4 += std::pow(v - m, 4);
    m4 /= n;
    const double se = std::sqrt((m4 - v2 * v2) / n);
    EXPECT_NEAR(v2, s.variance(), 3.0 * se);
}

TEST(Sampling, Deterministic) {
    const auto spec = ishigami();
    const auto s = fit_projection(*spec.function, PceBasis(spec.variables, 4));
    EXPECT_EQ(sample_outputs(s, 1000, 4), sample_outputs(s, 1000, 4));
    EXPECT_NE(sample_outputs(s, 1000, 4), sample_outputs(s, 1000, 5));
    EXPECT_THROW(sample_outputs(s, 0, 1), ConfigError);
}

TEST(Json, RoundTripIsBitExact) {
    const auto spec = ishigami();
    std::vector<InputVariable> vars = spec.variables;
    vars[2] = InputVariable::normal(0.3, 1.7, "z");
    const ModelFunction f{3, [](std::span<const double> x) { return std::exp(0.1 * x[2]) * std::sin(x[0]) + x[1] / 3.0; }};
    const auto s = fit_projection(f, PceBasis(vars, 5));
    const auto text = to_json(s).dump();
    const auto back = surrogate_from_json(nlohmann::json::parse(text));
    ASSERT_EQ(back.coeffs().size(), s.coeffs().size());
    for (std::size_t i = 0; i < s.coeffs().size(); ++i) EXPECT_EQ(back.coeffs()[i], s.coeffs()[i]);
    EXPECT_EQ(back.basis().indices(), s.basis().indices());
    EXPECT_EQ(back.basis().variable(2).family, PolynomialFamily::Hermite);
    EXPECT_EQ(back.basis().variable(2).map.scale(), 1.7);
    EXPECT_EQ(to_json(back).dump(), text);
}

TEST(Json, Rejections) {
    const auto spec = quartic();
    auto j = to_json(fit_projection(*spec.function, PceBasis(spec.variables, 2)));
    auto bad = j;
    bad["version"] = 99;
    EXPECT_THROW(surrogate_from_json(bad), ConfigError);
    bad = j;
    bad["coeffs"].erase(0);
    EXPECT_THROW(surrogate_from_json(bad), ConfigError);
    bad = j;
    bad.erase("indices");
    EXPECT_THROW(surrogate_from_json(bad), ConfigError);
    bad = j;
    bad["indices"][1] = {9, 9, 9, 9};
    EXPECT_THROW(surrogate_from_json(bad), ConfigError);
}
