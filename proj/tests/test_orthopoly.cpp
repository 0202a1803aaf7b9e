#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pcshap/orthopoly.hpp"

using namespace pcshap;
using PF = PolynomialFamily;

TEST(Orthopoly, LegendreExamples) {
    EXPECT_DOUBLE_EQ(eval_univariate(PF::Legendre, 2, 0.0), -0.5);
    EXPECT_DOUBLE_EQ(eval_univariate(PF::Legendre, 0, 0.73), 1.0);
    for (double x : {-1.0, 0.5, 1.0}) EXPECT_DOUBLE_EQ(eval_univariate(PF::Legendre, 1, x), x);
}

TEST(Orthopoly, RecurrenceMatchesClosedForms) {
    for (double x = -1.0; x <= 1.0; x += 0.0625) {
        EXPECT_NEAR(eval_univariate(PF::Legendre, 2, x), (3 * x * x - 1) / 2, 1e-14);
        EXPECT_NEAR(eval_univariate(PF::Legendre, 3, x), (5 * x * x * x - 3 * x) / 2, 1e-14);
    }
    for (double x = -4.0; x <= 4.0; x += 0.25) {
        EXPECT_NEAR(eval_univariate(PF::Hermite, 1, x), x, 1e-14);
        EXPECT_NEAR(eval_univariate(PF::Hermite, 2, x), x * x - 1, 1e-14);
        EXPECT_NEAR(eval_univariate(PF::Hermite, 3, x), x * x * x - 3 * x, 1e-13);
    }
}

TEST(Orthopoly, MatchesStandardLibraryPolynomials) {
    for (int n = 0; n <= 12; ++n)
        for (double x = -1.0; x <= 1.0; x += 0.1) {
            EXPECT_NEAR(eval_univariate(PF::Legendre, n, x), oracle::legendre(n, x), 1e-13) << n << " " << x;
            EXPECT_NEAR(eval_univariate(PF::Hermite, n, 3 * x), oracle::hermite_e(n, 3 * x),
                        1e-12 * std::max(1.0, std::abs(oracle::hermite_e(n, 3 * x))));
        }
}

TEST(Orthopoly, EvalAllAgreesWithSingleEvaluation) {
    std::vector<double> out(9);
    for (auto fam : {PF::Legendre, PF::Hermite}) {
        eval_all(fam, 0.37, out);
        for (int n = 0; n < 9; ++n) EXPECT_DOUBLE_EQ(out[n], eval_univariate(fam, n, 0.37));
    }
}

TEST(Orthopoly, NormsAgainstSimpsonOracle) {
    EXPECT_DOUBLE_EQ(norm_sq(PF::Legendre, 0), 1.0);
    for (int n = 1; n <= 3; ++n) {
        EXPECT_DOUBLE_EQ(norm_sq(PF::Legendre, n), 1.0 / (2 * n + 1));
        EXPECT_DOUBLE_EQ(norm_sq(PF::Hermite, n), oracle::factorial(n));
    }
    for (int n = 0; n <= 8; ++n) {
        const double l = oracle::uniform_expectation([n](double x) { return std::pow(oracle::legendre(n, x), 2); });
        EXPECT_NEAR(norm_sq(PF::Legendre, n), l, 1e-10 * l);
        const double h = oracle::normal_expectation([n](double x) { return std::pow(oracle::hermite_e(n, x), 2); });
        EXPECT_NEAR(norm_sq(PF::Hermite, n), h, 1e-9 * h);
    }
}

TEST(Orthopoly, GaussWeightsSumToOne) {
    for (auto fam : {PF::Legendre, PF::Hermite})
        for (int n = 1; n <= 64; ++n) {
            const auto r = gauss_rule(fam, n);
            ASSERT_EQ(r.size(), static_cast<std::size_t>(n));
            double s = 0.0;
            for (double w : r.weights) {
                EXPECT_GT(w, 0.0);
                s += w;
            }
            EXPECT_NEAR(s, 1.0, 1e-14) << n;
        }
}

TEST(Orthopoly, GaussExamples) {
    const auto r2 = gauss_rule(PF::Legendre, 2);
    double m2 = 0.0;
    for (std::size_t i = 0; i < r2.size(); ++i) m2 += r2.weights[i] * r2.nodes[i] * r2.nodes[i];
    EXPECT_NEAR(m2, 1.0 / 3.0, 1e-14);

    const auto r4 = gauss_rule(PF::Legendre, 4);
    double p23 = 0.0;
    for (std::size_t i = 0; i < r4.size(); ++i)
        p23 += r4.weights[i] * eval_univariate(PF::Legendre, 2, r4.nodes[i]) * eval_univariate(PF::Legendre, 3, r4.nodes[i]);
    EXPECT_NEAR(p23, 0.0, 1e-13);
}

TEST(Orthopoly, GaussRuleExactness) {
    // Degree 2n-1 monomials are exact, against the closed-form moments.
    for (int n = 1; n <= 12; ++n) {
        const auto r = gauss_rule(PF::Legendre, n);
        const auto h = gauss_rule(PF::Hermite, n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double ql = 0.0, qh = 0.0;
            for (int i = 0; i < n; ++i) {
                ql += r.weights[i] * std::pow(r.nodes[i], k);
                qh += h.weights[i] * std::pow(h.nodes[i], k);
            }
            const double ul = (k % 2) ? 0.0 : 1.0 / (k + 1);
            double uh = (k % 2) ? 0.0 : 1.0;
            if (k % 2 == 0)
                for (int j = k - 1; j > 0; j -= 2) uh *= j;  // (k-1)!!
            EXPECT_NEAR(ql, ul, 1e-14) << n << " " << k;
            // Odd moments vanish; scale by E|x|^k's size, bounded by the next even moment.
            double scale = 1.0;
            for (int j = k + (k % 2) - 1; j > 0; j -= 2) scale *= j;
            EXPECT_NEAR(qh, uh, 1e-12 * std::max(1.0, scale)) << n << " " << k;
        }
    }
}

TEST(Orthopoly, OrthogonalityResiduals) {
    // Rule of 13 points is exact to degree 25 >= i + j. Residuals are scaled by
    // sqrt(norm_i norm_j): Hermite norms reach 12! and absolute residuals grow
    // with them.
    for (auto fam : {PF::Legendre, PF::Hermite}) {
        const auto r = gauss_rule(fam, 13);
        for (int i = 0; i <= 12; ++i)
            for (int j = 0; j <= 12; ++j) {
                double s = 0.0;
                for (std::size_t q = 0; q < r.size(); ++q)
                    s += r.weights[q] * eval_univariate(fam, i, r.nodes[q]) * eval_univariate(fam, j, r.nodes[q]);
                const double scale = std::sqrt(norm_sq(fam, i) * norm_sq(fam, j));
                if (i == j)
                    EXPECT_NEAR(s / norm_sq(fam, i), 1.0, 1e-12);
                else
                    EXPECT_LE(std::abs(s) / scale, 1e-12) << family_name(fam) << " " << i << " " << j;
            }
    }
}

TEST(Orthopoly, RejectsBadRules) {
    EXPECT_THROW(gauss_rule(PF::Legendre, 0), ConfigError);
    EXPECT_THROW(AffineInputMap::bounded(1.0, 1.0), ConfigError);
    EXPECT_THROW(AffineInputMap::bounded(2.0, 1.0), ConfigError);
    EXPECT_THROW(AffineInputMap::unbounded(0.0, 0.0), ConfigError);
    EXPECT_THROW(parse_family("laguerre"), ConfigError);
}

TEST(Orthopoly, AffineMapExamples) {
    const auto beta = AffineInputMap::bounded(2.5, 5.5);
    EXPECT_DOUBLE_EQ(beta.to_physical(0.0), 4.0);
    EXPECT_DOUBLE_EQ(beta.offset(), 4.0);
    EXPECT_DOUBLE_EQ(beta.scale(), 1.5);
    const auto pi = AffineInputMap::bounded(-std::numbers::pi, std::numbers::pi);
    EXPECT_DOUBLE_EQ(pi.to_physical(1.0), std::numbers::pi);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto normal = AffineInputMap::unbounded(3.0, 0.5);
    for (int k = 0; k < 1000; ++k) {
        const double z = u(rng);
        EXPECT_NEAR(beta.from_physical(beta.to_physical(z)), z, 1e-15);
        EXPECT_NEAR(normal.from_physical(normal.to_physical(4 * z)), 4 * z, 1e-15);
    }
}

TEST(Orthopoly, FamilyNames) {
    EXPECT_EQ(parse_family(family_name(PF::Legendre)), PF::Legendre);
    EXPECT_EQ(parse_family(family_name(PF::Hermite)), PF::Hermite);
    EXPECT_TRUE(is_bounded(PF::Legendre));
    EXPECT_FALSE(is_bounded(PF::Hermite));
}
