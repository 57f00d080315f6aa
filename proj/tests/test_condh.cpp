#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "khess/condh.hpp"

using namespace khess;

namespace {

const double kSixRootFive = 6.0 * std::sqrt(5.0);

DomainSpec unit_ball() { return DomainSpec::ball({0, 0, 0}, 1); }

RhsSpec example_rhs() { return RhsSpec::expression(Expression::parse("45*(x1^2+x2^2+x3^2)"), 2); }

// Hand-differentiated g with Dg and D2g, for f = g^k.
struct GOracle {
    double (*g)(const std::vector<double>&);
    std::vector<double> (*dg)(const std::vector<double>&);
    double (*min_d2g)(const std::vector<double>&);
};

// For f = g^k: |Df| / f^{1-1/k} = k |Dg| and M / f^{2-1/k} = k D2g.
std::pair<double, double> power_oracle(const GOracle& o, const Grid& grid, int k)
{
    double cg = 0, ch = 0;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto x = grid.point(p);
        double n2 = 0;
        for (double d : o.dg(x)) n2 += d * d;
        cg = std::max(cg, k * std::sqrt(n2));
        ch = std::max(ch, k * std::max(0.0, -o.min_d2g(x)));
    }
    return {cg, ch};
}

}  // namespace

TEST(Audit, WorkedExample)
{
    const Grid g = Grid::cube(3, -1.2, 1.2, 33);
    const auto r = audit(example_rhs(), g, std::nullopt, unit_ball());
    EXPECT_NEAR(r.c0_gradient, kSixRootFive, 1e-3 * kSixRootFive);
    EXPECT_LE(r.c0_hessian, 1e-9);
    EXPECT_GE(r.c0_hessian, 0.0);
    EXPECT_EQ(r.degenerate_points_checked, 1);  // the origin node
    EXPECT_EQ(r.degenerate_failures, 0);
    EXPECT_FALSE(r.pass.has_value());
    EXPECT_DOUBLE_EQ(r.spacing, g.max_spacing());
    EXPECT_TRUE(audit(example_rhs(), g, 14.0, unit_ball()).pass.value());
    EXPECT_FALSE(audit(example_rhs(), g, 13.0, unit_ball()).pass.value());
}

TEST(Audit, SampledFieldUsesStencils)
{
    // Centred differences are exact on quadratics.
    const Grid g = Grid::cube(3, -1.2, 1.2, 25);
    const auto f = sample_box(g, [](std::span<const double> x) { return 45 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); });
    const auto r = audit(RhsSpec::sampled(f, 2), g, std::nullopt, unit_ball());
    EXPECT_NEAR(r.c0_gradient, kSixRootFive, 1e-9 * kSixRootFive);
    EXPECT_LE(r.c0_hessian, 1e-9);
}

TEST(Audit, ConstantHasZeroConstants)
{
    const Grid g = Grid::cube(2, -1, 1, 9);
    for (int k : {1, 2, 3}) {
        const auto r = audit(RhsSpec::expression(Expression::parse("2.5"), k), g);
        EXPECT_EQ(r.c0_gradient, 0.0);
        EXPECT_EQ(r.c0_hessian, 0.0);
        EXPECT_EQ(r.degenerate_points_checked, 0);
    }
}

TEST(Audit, PowerOfPositiveFunctionMatchesOracle)
{
    const Grid g = Grid::cube(3, -1, 1, 17);
    const GOracle bowl{
        [](const std::vector<double>& x) { return 1 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; },
        [](const std::vector<double>& x) { return std::vector<double>{2 * x[0], 2 * x[1], 2 * x[2]}; },
        [](const std::vector<double>&) { return 2.0; },
    };
    const GOracle saddle{
        [](const std::vector<double>& x) { return 3 - x[0] * x[0] + x[1] * x[1]; },
        [](const std::vector<double>& x) { return std::vector<double>{-2 * x[0], 2 * x[1], 0.0}; },
        [](const std::vector<double>&) { return -2.0; },
    };
    struct Case {
        const char* g;
        const GOracle* oracle;
    };
    for (const Case c : {Case{"1 + x1^2 + x2^2 + x3^2", &bowl}, Case{"3 - x1^2 + x2^2", &saddle}}) {
        for (int k : {2, 3}) {
            const std::string text = "(" + std::string(c.g) + ")^" + std::to_string(k);
            const auto r = audit(RhsSpec::expression(Expression::parse(text), k), g);
            const auto [cg, ch] = power_oracle(*c.oracle, g, k);
            EXPECT_NEAR(r.c0_gradient, cg, 1e-6 * (1 + cg)) << text;
            EXPECT_NEAR(r.c0_hessian, ch, 1e-6 * (1 + ch)) << text;
        }
    }
    const auto r = audit(RhsSpec::expression(Expression::parse("(3 - x1^2 + x2^2)^2"), 2), g);
    EXPECT_NEAR(r.c0_hessian, 4.0, 1e-9);
}

TEST(Audit, RejectsNegativeRhs)
{
    const Grid g = Grid::cube(2, -1, 1, 9);
    EXPECT_THROW((void)audit(RhsSpec::expression(Expression::parse("x1"), 2), g), DomainError);
    // Rounding-level negatives are tolerated.
    EXPECT_NO_THROW((void)audit(RhsSpec::expression(Expression::parse("1 + x1^2 - 1e-14"), 2), g));
}

TEST(Audit, DegeneratePointsWithNonzeroGradientFail)
{
    // f = x2 vanishes on the edge x2 = 0 with |Df| = 1, which no C0 can cover.
    const Grid g = Grid::cube(2, 0, 1, 9);
    const auto r = audit(RhsSpec::expression(Expression::parse("x2"), 2), g);
    EXPECT_EQ(r.degenerate_points_checked, 9);
    EXPECT_EQ(r.degenerate_failures, 9);
    EXPECT_FALSE(audit(RhsSpec::expression(Expression::parse("x2"), 2), g, 1e6).pass.value());
}

TEST(Shift, NeverIncreasesConstants)
{
    const Grid g = Grid::cube(3, -1.2, 1.2, 21);
    const char* rhs[] = {"45*(x1^2+x2^2+x3^2)", "(3 - x1^2 + x2^2)^2", "exp(x1 - x2^2) + x3^2", "x1^2*x2^2 + 0.1"};
    for (const char* t : rhs) {
        for (int k : {2, 3}) {
            const auto f = RhsSpec::expression(Expression::parse(t), k);
            const auto base = audit(f, g);
            for (double eps : {1e-6, 1e-3, 1.0}) {
                const auto s = audit(shift(f, eps), g);
                EXPECT_LE(s.c0_gradient, base.c0_gradient + 1e-9) << t << " eps " << eps;
                EXPECT_LE(s.c0_hessian, base.c0_hessian + 1e-9) << t << " eps " << eps;
            }
        }
    }
    const auto zero = audit(shift(RhsSpec::expression(Expression::parse("0"), 2), 1.0), g);
    EXPECT_EQ(zero.c0_gradient, 0.0);
    EXPECT_EQ(zero.c0_hessian, 0.0);

    const auto f = example_rhs();
    const auto a = audit(f, g), b = audit(shift(f, 0.0), g);
    EXPECT_EQ(a.c0_gradient, b.c0_gradient);
    EXPECT_EQ(a.c0_hessian, b.c0_hessian);
    EXPECT_EQ(a.worst_point_gradient, b.worst_point_gradient);
    EXPECT_THROW((void)shift(f, -1e-3), DomainError);
    EXPECT_LE(audit(shift(f, 1.0), g, std::nullopt, unit_ball()).c0_gradient, kSixRootFive + 1e-9);
}

TEST(Shift, AppliesToSampledFields)
{
    const Grid g = Grid::cube(2, -1, 1, 17);
    const auto f = sample_box(g, [](std::span<const double> x) { return x[0] * x[0] + 2 * x[1] * x[1]; });
    const auto base = audit(RhsSpec::sampled(f, 2), g);
    const auto s = audit(shift(RhsSpec::sampled(f, 2), 0.5), g);
    EXPECT_LE(s.c0_gradient, base.c0_gradient + 1e-9);
    EXPECT_LE(s.c0_hessian, base.c0_hessian + 1e-9);
}

TEST(Audit, DirectionEliminationIsExact)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-0.6, 0.6);
    const auto e = Expression::parse("1 + 0.3*x1^2 - 0.2*x2*x3 + 0.1*x3 + 0.05*exp(x1*x2)");
    const int k = 3;
    std::vector<std::array<double, 3>> xis(10000);
    for (auto& xi : xis) {
        double nrm = 0;
        for (auto& c : xi) {
            c = nd(rng);
            nrm += c * c;
        }
        for (auto& c : xi) c /= std::sqrt(nrm);
    }
    for (int s = 0; s < 200; ++s) {
        const std::vector<double> x{ud(rng), ud(rng), ud(rng)};
        const Jet j = e.jet(x);
        Eigen::VectorXd df(3);
        Eigen::MatrixXd d2f(3, 3);
        for (int a = 0; a < 3; ++a) {
            df(a) = j.grad[static_cast<std::size_t>(a)];
            for (int b = 0; b < 3; ++b) d2f(a, b) = j.h(a, b);
        }
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(condition_h_matrix(j.value, df, d2f, k)).eigenvalues()(0);
        double best = INFINITY;
        for (const auto& xi : xis) {
            double fxx = 0, fx = 0;
            for (int a = 0; a < 3; ++a) {
                fx += df(a) * xi[static_cast<std::size_t>(a)];
                for (int b = 0; b < 3; ++b) fxx += d2f(a, b) * xi[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(b)];
            }
            best = std::min(best, j.value * fxx - (1.0 - 1.0 / k) * fx * fx);
        }
        EXPECT_GE(best, lmin - 1e-9);
        EXPECT_LE(best, lmin + 1e-3);
    }
}

TEST(Audit, ScalingCovariance)
{
    const Grid g = Grid::cube(3, -1, 1, 13);
    for (int k : {2, 3}) {
        const auto base = audit(RhsSpec::expression(Expression::parse("(3 - x1^2 + x2^2)^2 + x3^2"), k), g);
        ASSERT_GT(base.c0_hessian, 0.0);
        for (double c : {0.01, 7.0, 1e3}) {
            const auto text = std::to_string(c) + "*((3 - x1^2 + x2^2)^2 + x3^2)";
            const auto r = audit(RhsSpec::expression(Expression::parse(text), k), g);
            const double s = std::pow(c, 1.0 / k);
            EXPECT_NEAR(r.c0_gradient, s * base.c0_gradient, 1e-9 * s * base.c0_gradient);
            EXPECT_NEAR(r.c0_hessian, s * base.c0_hessian, 1e-9 * s * base.c0_hessian);
        }
    }
}

TEST(RootProbe, WorkedExampleIsOnlyLipschitz)
{
    const Grid g = Grid::cube(3, -1.2, 1.2, 49);
    const auto r = root_regularity_probe(example_rhs(), g, unit_ball());
    EXPECT_NEAR(r.c11_proxy_growth_exponent, -1.0, 0.15);
    EXPECT_GT(r.fit_points, 100);
    EXPECT_NEAR(r.lipschitz_estimate, std::sqrt(45.0), 1e-9);
    // sup |D f^{1/k}| = c0_gradient / k.
    const auto a = audit(example_rhs(), g, std::nullopt, unit_ball());
    EXPECT_NEAR(r.lipschitz_estimate, a.c0_gradient / 2, 1e-3 * a.c0_gradient);
    // The proxy blows up at the origin like 1/h.
    const auto coarse = root_regularity_probe(example_rhs(), Grid::cube(3, -1.2, 1.2, 25), unit_ball());
    EXPECT_GT(r.c11_proxy_max, 1.8 * coarse.c11_proxy_max);
}

TEST(RootProbe, AffineRootIsFlat)
{
    const Grid g = Grid::cube(3, 0, 1, 17);
    const auto r = root_regularity_probe(RhsSpec::expression(Expression::parse("(1 + x1)^2"), 2), g);
    EXPECT_LE(r.c11_proxy_max, 1e-8);
    EXPECT_EQ(r.fit_points, 0);
    EXPECT_NEAR(r.lipschitz_estimate, 1.0, 1e-12);
}

TEST(RootProbe, SmoothRootIsBounded)
{
    const Grid g = Grid::cube(3, -1.2, 1.2, 33);
    const auto r = root_regularity_probe(RhsSpec::expression(Expression::parse("(x1^2+x2^2+x3^2)^2"), 2), g, unit_ball());
    EXPECT_NEAR(r.c11_proxy_max, 2.0, 1e-9);
    EXPECT_NEAR(r.c11_proxy_growth_exponent, 0.0, 0.05);
}

TEST(RootProbe, PositiveRhsHasFiniteQuotients)
{
    // f bounded below: both audit constants and both quotients stay finite
    // and the Lipschitz estimate tracks c0_gradient / k.
    const Grid g = Grid::cube(3, -1, 1, 33);
    const auto f = RhsSpec::expression(Expression::parse("(2 + x1^2 - x2*x3)^3"), 3);
    const auto a = audit(f, g);
    const auto r = root_regularity_probe(f, g);
    EXPECT_TRUE(std::isfinite(a.c0_gradient) && std::isfinite(a.c0_hessian));
    EXPECT_TRUE(std::isfinite(r.c11_proxy_max));
    // |Dg| has Lipschitz constant 2, so sampling one cell in from the
    // corner where sup |Dg| sits costs at most 2 sqrt(3) h.
    EXPECT_LE(r.lipschitz_estimate, a.c0_gradient / 3 + 1e-9);
    EXPECT_GE(r.lipschitz_estimate, a.c0_gradient / 3 - 2 * std::sqrt(3.0) * g.max_spacing());
    // g = 2 + x1^2 - x2 x3 is quadratic, so its spectral radius 2 is reproduced.
    EXPECT_NEAR(r.c11_proxy_max, 2.0, 1e-8);
}
