#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "khess/symfun.hpp"
#include "oracles.hpp"

using namespace khess;

TEST(Sigma, Examples)
{
    EXPECT_EQ(sigma({1, 1, 1}, 2), 3.0);
    EXPECT_EQ(sigma({6, 3, 3}, 2), oracle::sigma_enum({6, 3, 3}, 2));
    EXPECT_EQ(sigma({6, 3, 3}, 2), 45.0);
    EXPECT_EQ(sigma({2, -1, 5}, 1), 6.0);
    EXPECT_EQ(sigma({2, 3, 4}, 3), 24.0);
}

TEST(Sigma, OrderOutOfRange)
{
    EXPECT_THROW((void)sigma({1, 2}, 0), DomainError);
    EXPECT_THROW((void)sigma({1, 2}, 3), DomainError);
    EXPECT_THROW((void)sigma_grad({1, 2}, 3), DomainError);
}

TEST(Sigma, SpectrumValidation)
{
    EXPECT_THROW(EigenSpectrum(std::vector<double>{}), DomainError);
    EXPECT_THROW(EigenSpectrum({1.0, std::nan("")}), DomainError);
}

TEST(SigmaAll, Examples)
{
    EXPECT_EQ(sigma_all({1, 1, 1}), (std::vector<double>{3, 3, 1}));
    EXPECT_EQ(sigma_all({6, 3, 3}), (std::vector<double>{12, 45, 54}));
    EXPECT_EQ(sigma_all({0, 0}), (std::vector<double>{0, 0}));
}

TEST(SigmaAll, MatchesSigma)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 8;
        const EigenSpectrum l(oracle::uniform_vector(rng, n, -3, 3));
        const auto all = sigma_all(l);
        for (int j = 1; j <= n; ++j) {
            const double s = sigma(l, j);
            EXPECT_LE(std::abs(all[static_cast<std::size_t>(j - 1)] - s), 1e-13 * std::max(1.0, std::abs(s)));
        }
    }
}

TEST(SigmaGrad, Examples)
{
    const auto g = sigma_grad({6, 3, 3}, 2);
    EXPECT_EQ(g, (std::vector<double>{6, 9, 9}));
    for (int i = 0; i < 3; ++i) {
        const double fd = oracle::sigma_fd({6, 3, 3}, 2, i, 1e-6);
        EXPECT_NEAR(g[static_cast<std::size_t>(i)], fd, 5e-6 * std::abs(fd));
    }
    EXPECT_EQ(sigma_grad({1, 1, 1}, 1), (std::vector<double>{1, 1, 1}));
    EXPECT_EQ(sigma_grad({2, 3, 5}, 3), (std::vector<double>{15, 10, 6}));
}

TEST(InGamma, Examples)
{
    EXPECT_TRUE(in_gamma({6, 3, 3}, {2, true}));
    EXPECT_FALSE(in_gamma({0, 0, 0}, {2, true}));
    EXPECT_TRUE(in_gamma({0, 0, 0}, {2, false}));
    EXPECT_FALSE(in_gamma({1, 1, -1}, {3, true}));
    EXPECT_TRUE(in_gamma({1, 1, -0.4}, {2, true}));
}

TEST(Maclaurin, Examples)
{
    EXPECT_EQ(maclaurin_chain({1, 1, 1}, 3), (std::vector<double>{1, 1, 1}));
    const auto m = maclaurin_chain({6, 3, 3}, 2);
    EXPECT_DOUBLE_EQ(m[0], 4.0);
    EXPECT_DOUBLE_EQ(m[1], std::sqrt(15.0));
    EXPECT_GE(m[0], m[1]);
    EXPECT_EQ(maclaurin_chain({2, 2}, 2), (std::vector<double>{2, 2}));
    EXPECT_THROW((void)maclaurin_chain({1, -2, 0.5}, 2), DomainError);
}

TEST(FkValue, Examples)
{
    EXPECT_DOUBLE_EQ(fk_value({1, 1, 1}, 2), std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(fk_value({6, 3, 3}, 2), std::sqrt(45.0));
    EXPECT_DOUBLE_EQ(fk_value({0, 1, 1}, 2), 1.0);
    EXPECT_THROW((void)fk_value({1, 1, -1}, 3), DomainError);
}

TEST(Binomial, SmallValues)
{
    EXPECT_EQ(binomial(3, 2), 3.0);
    EXPECT_EQ(binomial(8, 4), 70.0);
    EXPECT_EQ(binomial(5, 0), 1.0);
    EXPECT_EQ(binomial(5, 6), 0.0);
}

// --- properties -------------------------------------------------------------

TEST(SigmaProperty, PermutationSymmetryIsExact)
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 + trial % 7;
        auto v = oracle::uniform_vector(rng, n, -2, 2);
        auto w = v;
        std::shuffle(w.begin(), w.end(), rng);
        for (int k = 1; k <= n; ++k) {
            ASSERT_EQ(sigma(EigenSpectrum(v), k), sigma(EigenSpectrum(w), k));
        }
    }
}

TEST(SigmaProperty, MatchesSubsetEnumeration)
{
    // Relative to the sum of |terms|, the scale of a signed sum's rounding.
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + trial % 8;
        const auto v = oracle::uniform_vector(rng, n, -3, 3);
        for (int k = 1; k <= n; ++k) {
            ASSERT_LE(std::abs(sigma(EigenSpectrum(v), k) - oracle::sigma_enum(v, k)), 1e-12 * oracle::sigma_abs_enum(v, k));
        }
    }
}

TEST(SigmaProperty, GradientMatchesCentralDifferences)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + trial % 8;
        const auto v = oracle::uniform_vector(rng, n, -3, 3);
        for (int k = 1; k <= n; ++k) {
            const auto g = sigma_grad(EigenSpectrum(v), k);
            for (int i = 0; i < n; ++i) {
                auto rest = v;
                rest.erase(rest.begin() + i);
                const double scale = k == 1 ? 1.0 : oracle::sigma_abs_enum(rest, k - 1);
                ASSERT_LE(std::abs(g[static_cast<std::size_t>(i)] - oracle::sigma_fd(v, k, i, 1e-6)), 5e-6 * scale);
            }
        }
    }
}

TEST(SigmaProperty, Homogeneity)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> td(0.1, 10.0);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + trial % 6;
        auto v = oracle::uniform_vector(rng, n, 0.1, 2);
        const double t = td(rng);
        auto tv = v;
        for (auto& x : tv) x *= t;
        for (int k = 1; k <= n; ++k) {
            const double a = sigma(EigenSpectrum(tv), k);
            const double b = std::pow(t, k) * sigma(EigenSpectrum(v), k);
            ASSERT_LE(std::abs(a - b), 1e-12 * std::abs(b));
        }
    }
}

TEST(SigmaProperty, EulerIdentity)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + trial % 6;
        const auto v = oracle::uniform_vector(rng, n, -1, 2);
        const EigenSpectrum l(v);
        for (int k = 1; k <= n; ++k) {
            const auto g = sigma_grad(l, k);
            double lhs = 0.0;
            for (int i = 0; i < n; ++i) lhs += v[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
            const double rhs = k * sigma(l, k);
            ASSERT_LE(std::abs(lhs - rhs), 1e-12 * k * oracle::sigma_abs_enum(v, k));
        }
    }
}

TEST(SigmaProperty, ConeNesting)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + trial % 4;
        const EigenSpectrum l(oracle::uniform_vector(rng, n, -1, 2));
        for (int k = n; k >= 1; --k) {
            if (in_gamma(l, {k, true})) {
                for (int j = 1; j <= k; ++j) ASSERT_TRUE(in_gamma(l, {j, true}));
            }
        }
    }
    // Positive spectra lie in every cone.
    for (int trial = 0; trial < 200; ++trial) {
        const EigenSpectrum l(oracle::uniform_vector(rng, 4, 0.01, 3));
        for (int k = 1; k <= 4; ++k) ASSERT_TRUE(in_gamma(l, {k, true}));
    }
}

TEST(SigmaProperty, EllipticOnCone)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + trial % 4;
        const int k = 1 + trial % n;
        const EigenSpectrum l(oracle::cone_sample(rng, n, k));
        for (double g : sigma_grad(l, k)) ASSERT_GT(g, 0.0);
    }
}

TEST(SigmaProperty, FkConcaveOnCone)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> td(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = 2 + trial % 3;
        const int k = 1 + trial % n;
        const auto a = oracle::cone_sample(rng, n, k);
        const auto b = oracle::cone_sample(rng, n, k);
        const double t = td(rng);
        std::vector<double> c(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) c[i] = t * a[i] + (1 - t) * b[i];
        const double lhs = fk_value(EigenSpectrum(c), k);
        const double rhs = t * fk_value(EigenSpectrum(a), k) + (1 - t) * fk_value(EigenSpectrum(b), k);
        ASSERT_GE(lhs, rhs - 1e-10);
    }
}

TEST(SigmaProperty, MaclaurinChainNonIncreasing)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + trial % 4;
        const int k = 1 + trial % n;
        const auto m = maclaurin_chain(EigenSpectrum(oracle::cone_sample(rng, n, k)), k);
        for (std::size_t j = 1; j < m.size(); ++j) ASSERT_GE(m[j - 1], m[j] - 1e-12 * m[j - 1]);
    }
}
