#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <sstream>

#include "khess/geometry.hpp"

using namespace khess;

namespace {

const char* kDumbbell = "x2^2 + x3^2 - (1 - x1^2)*(0.04 + 2*x1^2)";

DomainSpec dumbbell()
{
    return DomainSpec::levelset(Expression::parse(kDumbbell), {-1, -0.8, -0.8}, {1, 0.8, 0.8});
}

// Shape operator from finite differences of phi values only.
std::vector<double> fd_curvatures(const DomainSpec& d, std::vector<double> x)
{
    const int n = d.dim();
    const double h = 1e-4;
    auto phi = [&](std::vector<double> y) { return d.phi(y).value; };
    Eigen::VectorXd g(n);
    Eigen::MatrixXd H(n, n);
    for (int a = 0; a < n; ++a) {
        auto xp = x, xm = x;
        xp[static_cast<std::size_t>(a)] += h;
        xm[static_cast<std::size_t>(a)] -= h;
        g(a) = (phi(xp) - phi(xm)) / (2 * h);
        for (int b = 0; b < n; ++b) {
            auto s = [&](double sa, double sb) {
                auto y = x;
                y[static_cast<std::size_t>(a)] += sa * h;
                y[static_cast<std::size_t>(b)] += sb * h;
                return phi(y);
            };
            H(a, b) = (s(1, 1) - s(1, -1) - s(-1, 1) + s(-1, -1)) / (4 * h * h);
        }
    }
    const Eigen::VectorXd nu = g / g.norm();
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - nu * nu.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P * H * P / g.norm());
    // Drop the eigenvalue belonging to the normal direction (the one closest to 0
    // whose eigenvector is parallel to nu).
    std::vector<double> k;
    for (int i = 0; i < n; ++i) {
        if (std::abs(es.eigenvectors().col(i).dot(nu)) < 0.5) k.push_back(es.eigenvalues()(i));
    }
    return k;
}

}  // namespace

TEST(BoundarySamples, Balls)
{
    for (const auto& s : boundary_samples(DomainSpec::ball({0, 0, 0}, 1), 200)) {
        ASSERT_EQ(s.curvatures, (std::vector<double>{1, 1}));
        double r = 0, nn = 0, dot = 0;
        for (int a = 0; a < 3; ++a) {
            r += s.x[a] * s.x[a];
            nn += s.normal[a] * s.normal[a];
            dot += s.normal[a] * s.x[a];
        }
        EXPECT_NEAR(r, 1, 1e-14);
        EXPECT_NEAR(nn, 1, 1e-12);
        EXPECT_NEAR(dot, -1, 1e-12);  // inward
    }
    for (const auto& s : boundary_samples(DomainSpec::ball({0, 0, 0}, 2), 50)) {
        EXPECT_EQ(s.curvatures, (std::vector<double>{0.5, 0.5}));
    }
    for (const auto& s : boundary_samples(DomainSpec::ball({0.5, 0}, 1), 50)) {
        EXPECT_EQ(s.curvatures, (std::vector<double>{1}));
    }
}

TEST(BoundarySamples, EllipsoidPole)
{
    // Semi-axes (1,1,2): near the pole z = 2 - (x^2+y^2) + ..., so kappa = (2, 2).
    const auto d = DomainSpec::ellipsoid({0, 0, 0}, {1, 1, 2});
    const auto s = boundary_sample_at(d, {0, 0, 2});
    ASSERT_EQ(s.curvatures.size(), 2u);
    EXPECT_NEAR(s.curvatures[0], 2.0, 1e-8);
    EXPECT_NEAR(s.curvatures[1], 2.0, 1e-8);
    const auto fd = fd_curvatures(d, {0, 0, 2});
    ASSERT_EQ(fd.size(), 2u);
    EXPECT_NEAR(fd[0], 2.0, 1e-5);
    EXPECT_NEAR(fd[1], 2.0, 1e-5);
    // Equator point (1,0,0): circle of radius 1 and ellipse curvature a/c^2 = 1/4.
    const auto e = boundary_sample_at(d, {1, 0, 0});
    EXPECT_NEAR(e.curvatures[0], 0.25, 1e-12);
    EXPECT_NEAR(e.curvatures[1], 1.0, 1e-12);
}

TEST(BoundarySamples, CurvaturesMatchFiniteDifferenceOracle)
{
    const auto d = DomainSpec::ellipsoid({0.1, 0, -0.2}, {1, 1.5, 2});
    for (const auto& s : boundary_samples(d, 40)) {
        const auto fd = fd_curvatures(d, s.x);
        ASSERT_EQ(fd.size(), 2u);
        EXPECT_NEAR(s.curvatures[0], std::min(fd[0], fd[1]), 1e-5);
        EXPECT_NEAR(s.curvatures[1], std::max(fd[0], fd[1]), 1e-5);
    }
}

TEST(BoundarySamples, SignFlipsWithNormal)
{
    const auto d = DomainSpec::ellipsoid({0, 0, 0}, {1, 1.5, 2});
    const std::vector<double> x{0, 1.5, 0};
    const Jet j = d.phi(x);
    const auto in = principal_curvatures(j, 3, true);
    const auto out = principal_curvatures(j, 3, false);
    for (double k : in) EXPECT_GT(k, 0);
    EXPECT_NEAR(out[0], -in[1], 1e-14);
    EXPECT_NEAR(out[1], -in[0], 1e-14);
}

TEST(BoundarySamples, LevelsetMatchesClosedForm)
{
    const auto ls = DomainSpec::levelset(Expression::parse("x1^2 + x2^2 + x3^2 - 4"), {-2, -2, -2}, {2, 2, 2});
    const auto samples = boundary_samples(ls, 300);
    ASSERT_EQ(samples.size(), 300u);
    for (const auto& s : samples) {
        EXPECT_NEAR(s.curvatures[0], 0.5, 1e-9);
        EXPECT_NEAR(s.curvatures[1], 0.5, 1e-9);
        double r = 0;
        for (double c : s.x) r += c * c;
        EXPECT_NEAR(std::sqrt(r), 2.0, 1e-9);
    }
}

TEST(BoundarySamples, Errors)
{
    EXPECT_THROW((void)boundary_samples(DomainSpec::ball({0, 0}, 1), 0), DomainError);
    EXPECT_THROW((void)boundary_samples(DomainSpec::box({0, 0}, {1, 1}), 10), GeometryError);
    // Vanishing gradient on the zero set.
    const auto bad = DomainSpec::levelset(Expression::parse("(x1^2 + x2^2 - 1)^3"), {-1, -1}, {1, 1});
    EXPECT_THROW((void)boundary_samples(bad, 10), GeometryError);
    const auto empty = DomainSpec::levelset(Expression::parse("x1^2 + x2^2 + 1"), {-1, -1}, {1, 1});
    EXPECT_THROW((void)boundary_samples(empty, 10), GeometryError);
}

TEST(IsK1Convex, UnitBall)
{
    const auto d = DomainSpec::ball({0, 0, 0}, 1);
    auto r2 = is_k1_convex(d, 2, 500);
    EXPECT_TRUE(r2.pass);
    EXPECT_NEAR(r2.margin, 2.0, 1e-8);
    auto r3 = is_k1_convex(d, 3, 500);
    EXPECT_TRUE(r3.pass);
    EXPECT_NEAR(r3.margin, 1.0, 1e-8);
    auto r1 = is_k1_convex(d, 1, 10);
    EXPECT_TRUE(r1.pass);
    EXPECT_TRUE(std::isinf(r1.margin));
    EXPECT_THROW((void)is_k1_convex(d, 4, 10), DomainError);
}

TEST(IsK1Convex, DumbbellNeckIsNotMeanConvex)
{
    // Surface of revolution rho(x1)^2 = (1 - x1^2)(0.04 + 2 x1^2). At the neck
    // rho = 0.2, rho' = 0, rho'' = (2 - 0.04)/0.2 = 9.8, so the meridian
    // curvature is -9.8, the parallel one 1/rho = 5 and sigma_1 = -4.8.
    const auto d = dumbbell();
    const auto s = boundary_sample_at(d, {0, 0.2, 0});
    EXPECT_NEAR(s.curvatures[0], -9.8, 1e-9);
    EXPECT_NEAR(s.curvatures[1], 5.0, 1e-9);
    const auto r = is_k1_convex(d, 2, 2000);
    EXPECT_FALSE(r.pass);
    EXPECT_LT(r.margin, 0.0);
    EXPECT_GE(r.margin, -4.8 - 1e-6);
}

TEST(IsK1Convex, SampleCountStability)
{
    const auto d = DomainSpec::ellipsoid({0, 0, 0}, {1, 1.5, 2});
    const double a = is_k1_convex(d, 2, 1000).margin;
    const double b = is_k1_convex(d, 2, 10000).margin;
    EXPECT_LE(std::abs(a - b), 0.02 * std::abs(b));
    const auto ls = DomainSpec::levelset(Expression::parse("x1^2 + (x2/1.5)^2 + (x3/2)^2 - 1"), {-1, -1.5, -2}, {1, 1.5, 2});
    const double c = is_k1_convex(ls, 3, 1000).margin;
    const double e = is_k1_convex(ls, 3, 10000).margin;
    EXPECT_LE(std::abs(c - e), 0.02 * std::abs(e));
}

TEST(Classify, UnitBallStructure)
{
    const auto d = DomainSpec::ball({0, 0, 0}, 1);
    const Grid g = Grid::cube(3, -1.2, 1.2, 33);
    const auto c = classify(d, g, Expression::parse("0"));
    int interior = 0, boundary = 0;
    const auto off = stencil_offsets(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (c.field.mask[p] == PointLabel::interior) {
            ++interior;
            for (auto o : off) EXPECT_NE(c.field.mask[p + static_cast<std::size_t>(o)], PointLabel::exterior);
        } else if (c.field.mask[p] == PointLabel::boundary) {
            ++boundary;
        }
    }
    EXPECT_GT(interior, 0);
    EXPECT_EQ(static_cast<std::size_t>(boundary), c.attachments.size());
    for (const auto& a : c.attachments) {
        EXPECT_EQ(a.value, 0.0);
        EXPECT_LE(a.distance, std::sqrt(2.0) * g.spacing(0) + 1e-12);
    }

    // interior + boundary is connected (6-neighbour flood fill).
    std::vector<char> seen(g.size(), 0);
    std::deque<std::size_t> q;
    std::size_t start = 0;
    while (c.field.mask[start] == PointLabel::exterior) ++start;
    q.push_back(start);
    seen[start] = 1;
    int reached = 0;
    while (!q.empty()) {
        const auto p = q.front();
        q.pop_front();
        ++reached;
        for (int a = 0; a < 3; ++a) {
            for (int s : {-1, 1}) {
                const int i = g.axis_index(p, a) + s;
                if (i < 0 || i >= g.points(a)) continue;
                const auto nb = p + static_cast<std::size_t>(s * g.stride(a));
                if (!seen[nb] && c.field.mask[nb] != PointLabel::exterior) {
                    seen[nb] = 1;
                    q.push_back(nb);
                }
            }
        }
    }
    EXPECT_EQ(reached, interior + boundary);
}

TEST(Classify, DirichletDataAtProjection)
{
    const auto d = DomainSpec::ball({0, 0, 0}, 1);
    const Grid g = Grid::cube(3, -1.2, 1.2, 25);
    const auto c = classify(d, g, Expression::parse("x1"));
    for (const auto& a : c.attachments) {
        const auto x = g.point(a.point);
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        EXPECT_NEAR(a.value, x[0] / r, 1e-9);
        EXPECT_EQ(c.field.values[a.point], a.value);
        EXPECT_NEAR(a.distance, 1 - r, 1e-9);
    }
}

TEST(Classify, BoxBoundaryIsExact)
{
    const auto d = DomainSpec::box({-1, -1}, {1, 1});
    const Grid g = Grid::cube(2, -1, 1, 9);
    const auto c = classify(d, g, Expression::parse("x1 + 2*x2"));
    for (std::size_t p = 0; p < g.size(); ++p) {
        EXPECT_EQ(c.field.mask[p], g.off_edge(p) ? PointLabel::interior : PointLabel::boundary);
    }
    for (const auto& a : c.attachments) {
        EXPECT_EQ(a.distance, 0.0);
        const auto x = g.point(a.point);
        EXPECT_EQ(a.value, x[0] + 2 * x[1]);
    }
}

TEST(Classify, RequiresMargin)
{
    const auto d = DomainSpec::ball({0, 0}, 1);
    EXPECT_THROW((void)classify(d, Grid::cube(2, -1.05, 1.05, 21), Expression::parse("0")), DomainError);
}

TEST(Classify, SamplesCsv)
{
    std::ostringstream os;
    write_samples_csv(os, boundary_samples(DomainSpec::ball({0, 0, 0}, 1), 3));
    const auto s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "x1,x2,x3,normal1,normal2,normal3,kappa1,kappa2");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
