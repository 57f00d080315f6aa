#pragma once

// Domains, boundary principal curvatures, (k-1)-convexity and the
// interior/boundary/exterior classification of a grid with Dirichlet data.
//
// Curvatures are taken with respect to the inner unit normal, so a ball of
// radius R has all curvatures +1/R.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "khess/errors.hpp"
#include "khess/expression.hpp"
#include "khess/grid.hpp"
#include "khess/hessop.hpp"
#include "khess/symfun.hpp"

namespace khess {

struct DomainSpec {
    enum class Kind { ball, ellipsoid, levelset, box };

    Kind kind = Kind::ball;
    std::vector<double> center;   // ball, ellipsoid
    double radius = 1.0;          // ball
    std::vector<double> axes;     // ellipsoid semi-axes
    Expression levelset_expr;     // levelset: phi < 0 inside
    std::vector<double> lo, hi;   // levelset bounding box, box corners

    static DomainSpec ball(std::vector<double> center, double radius)
    {
        if (!(radius > 0)) throw DomainError("ball: radius must be positive");
        DomainSpec d;
        d.kind = Kind::ball;
        d.center = std::move(center);
        d.radius = radius;
        d.check_dim();
        return d;
    }

    static DomainSpec ellipsoid(std::vector<double> center, std::vector<double> axes)
    {
        if (center.size() != axes.size()) throw DomainError("ellipsoid: center/axes length mismatch");
        for (double a : axes) {
            if (!(a > 0)) throw DomainError("ellipsoid: semi-axes must be positive");
        }
        DomainSpec d;
        d.kind = Kind::ellipsoid;
        d.center = std::move(center);
        d.axes = std::move(axes);
        d.check_dim();
        return d;
    }

    /// {phi < 0} contained in the box [lo, hi].
    static DomainSpec levelset(Expression phi, std::vector<double> lo, std::vector<double> hi)
    {
        if (lo.size() != hi.size()) throw DomainError("levelset: bounding box corners differ in length");
        if (phi.max_variable() > static_cast<int>(lo.size())) {
            throw DomainError("levelset: expression uses more variables than the domain dimension");
        }
        DomainSpec d;
        d.kind = Kind::levelset;
        d.levelset_expr = std::move(phi);
        d.lo = std::move(lo);
        d.hi = std::move(hi);
        d.check_dim();
        return d;
    }

    /// Axis-aligned box. Has corners, so it carries no curvature data; it is
    /// only meant for grid-aligned test problems.
    static DomainSpec box(std::vector<double> lo, std::vector<double> hi)
    {
        if (lo.size() != hi.size()) throw DomainError("box: corners differ in length");
        DomainSpec d;
        d.kind = Kind::box;
        d.lo = std::move(lo);
        d.hi = std::move(hi);
        d.check_dim();
        return d;
    }

    [[nodiscard]] int dim() const
    {
        switch (kind) {
        case Kind::ball:
        case Kind::ellipsoid: return static_cast<int>(center.size());
        default: return static_cast<int>(lo.size());
        }
    }

    [[nodiscard]] std::vector<double> box_lo() const
    {
        switch (kind) {
        case Kind::ball: return shifted(center, -radius);
        case Kind::ellipsoid: return offset(center, axes, -1.0);
        default: return lo;
        }
    }

    [[nodiscard]] std::vector<double> box_hi() const
    {
        switch (kind) {
        case Kind::ball: return shifted(center, radius);
        case Kind::ellipsoid: return offset(center, axes, 1.0);
        default: return hi;
        }
    }

    /// Defining function with exact derivatives (smooth kinds only).
    [[nodiscard]] Jet phi(std::span<const double> x) const
    {
        switch (kind) {
        case Kind::ball: {
            Jet s = Jet::constant(-radius * radius);
            for (int a = 0; a < dim(); ++a) {
                const auto t = Jet::variable(x[static_cast<std::size_t>(a)], a) - Jet::constant(center[static_cast<std::size_t>(a)]);
                s = s + t * t;
            }
            return s * Jet::constant(0.5 / radius);
        }
        case Kind::ellipsoid: {
            Jet s = Jet::constant(-1.0);
            for (int a = 0; a < dim(); ++a) {
                const auto sa = static_cast<std::size_t>(a);
                const auto t = (Jet::variable(x[sa], a) - Jet::constant(center[sa])) * Jet::constant(1.0 / axes[sa]);
                s = s + t * t;
            }
            return s * Jet::constant(0.5);
        }
        case Kind::levelset: return levelset_expr.jet(x);
        case Kind::box: break;
        }
        throw GeometryError("box domains have corners; no smooth defining function");
    }

    /// Signed inside test; for boxes the closed box counts as inside.
    [[nodiscard]] bool inside(std::span<const double> x, double tol = 0.0) const
    {
        if (kind == Kind::box) {
            for (int a = 0; a < dim(); ++a) {
                const auto sa = static_cast<std::size_t>(a);
                if (x[sa] < lo[sa] - tol || x[sa] > hi[sa] + tol) return false;
            }
            return true;
        }
        return phi(x).value < 0.0;
    }

    friend bool operator==(const DomainSpec&, const DomainSpec&) = default;

private:
    void check_dim() const
    {
        if (dim() < 2 || dim() > kMaxDim) throw DomainError("domains are supported in dimension 2 and 3");
    }

    static std::vector<double> shifted(std::vector<double> v, double s)
    {
        for (auto& x : v) x += s;
        return v;
    }

    static std::vector<double> offset(std::vector<double> v, const std::vector<double>& a, double s)
    {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * a[i];
        return v;
    }
};

struct BoundarySample {
    std::vector<double> x;
    std::vector<double> normal;       // inner unit normal
    std::vector<double> curvatures;   // n-1 principal curvatures, ascending
};

inline constexpr double kMinGradient = 1e-8;

/// Principal curvatures of the level set through a point, from the exact
/// gradient and Hessian of the defining function: eigenvalues of the
/// tangential part of Hess(phi) / |grad phi|. `inward = false` reports them
/// with respect to the outer normal (all signs flip).
[[nodiscard]] inline std::vector<double> principal_curvatures(const Jet& j, int n, bool inward = true)
{
    Eigen::VectorXd g(n);
    Eigen::MatrixXd h(n, n);
    for (int a = 0; a < n; ++a) {
        g(a) = j.grad[static_cast<std::size_t>(a)];
        for (int b = 0; b < n; ++b) h(a, b) = j.h(a, b);
    }
    const double gn = g.norm();
    if (!(gn >= kMinGradient)) throw GeometryError("boundary not resolvable: |grad phi| below threshold");
    // Orthonormal basis of the tangent space: trailing columns of a full QR of g.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd t = q.rightCols(n - 1);
    const Eigen::MatrixXd shape = t.transpose() * h * t / gn;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shape, Eigen::EigenvaluesOnly);
    std::vector<double> k(es.eigenvalues().data(), es.eigenvalues().data() + (n - 1));
    if (!inward) {
        for (auto& v : k) v = -v;
        std::sort(k.begin(), k.end());
    }
    return k;
}

namespace detail {

inline std::string coords(std::span<const double> x)
{
    std::string s = "(";
    for (std::size_t a = 0; a < x.size(); ++a) s += (a ? ", " : "") + std::to_string(x[a]);
    return s + ")";
}

inline BoundarySample make_sample(const DomainSpec& d, std::vector<double> x)
{
    const int n = d.dim();
    const Jet j = d.phi(x);
    double gn = 0.0;
    for (int a = 0; a < n; ++a) gn += j.grad[static_cast<std::size_t>(a)] * j.grad[static_cast<std::size_t>(a)];
    gn = std::sqrt(gn);
    if (!(gn >= kMinGradient)) {
        throw GeometryError("boundary not resolvable at " + coords(x) + ": |grad phi| = " + std::to_string(gn));
    }
    BoundarySample s;
    s.normal.resize(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) s.normal[static_cast<std::size_t>(a)] = -j.grad[static_cast<std::size_t>(a)] / gn;
    if (d.kind == DomainSpec::Kind::ball) {
        s.curvatures.assign(static_cast<std::size_t>(n - 1), 1.0 / d.radius);
    } else {
        s.curvatures = principal_curvatures(j, n);
    }
    s.x = std::move(x);
    return s;
}

// Newton projection onto {phi = 0} along grad phi.
inline std::vector<double> project(const DomainSpec& d, std::vector<double> x, double tol, int max_steps = 50)
{
    const int n = d.dim();
    for (int it = 0; it <= max_steps; ++it) {
        const Jet j = d.phi(x);
        double g2 = 0.0;
        for (int a = 0; a < n; ++a) g2 += j.grad[static_cast<std::size_t>(a)] * j.grad[static_cast<std::size_t>(a)];
        if (!(std::sqrt(g2) >= kMinGradient)) {
            throw GeometryError("projection: |grad phi| below threshold at " + coords(x));
        }
        if (std::abs(j.value) / std::sqrt(g2) <= tol) return x;
        if (it == max_steps) break;
        for (int a = 0; a < n; ++a) x[static_cast<std::size_t>(a)] -= j.value * j.grad[static_cast<std::size_t>(a)] / g2;
    }
    throw GeometryError("projection did not converge in " + std::to_string(max_steps) + " steps near " + coords(x));
}

// Unit directions: equally spaced on the circle, Fibonacci lattice on S^2.
inline std::vector<std::vector<double>> sphere_directions(int n, int count)
{
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        if (n == 2) {
            const double t = 2.0 * std::numbers::pi * i / count;
            out.push_back({std::cos(t), std::sin(t)});
        } else {
            const double z = 1.0 - (2.0 * i + 1.0) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double t = std::numbers::pi * (3.0 - std::sqrt(5.0)) * i;
            out.push_back({rho * std::cos(t), rho * std::sin(t), z});
        }
    }
    return out;
}

// Sign changes of phi along the edges of a sampling lattice, projected onto
// the zero set.
inline std::vector<std::vector<double>> levelset_crossings(const DomainSpec& d, int per_axis)
{
    const auto lo = d.box_lo(), hi = d.box_hi();
    const int n = d.dim();
    std::vector<double> blo(lo), bhi(hi);
    for (int a = 0; a < n; ++a) {
        const double pad = 0.05 * (hi[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)]);
        blo[static_cast<std::size_t>(a)] -= pad;
        bhi[static_cast<std::size_t>(a)] += pad;
    }
    const Grid g(blo, bhi, std::vector<int>(static_cast<std::size_t>(n), per_axis));
    std::vector<double> val(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) val[p] = d.phi(g.point(p)).value;
    const double tol = 1e-12 * g.max_spacing();
    std::vector<std::vector<double>> out;
    for (std::size_t p = 0; p < g.size(); ++p) {
        for (int a = 0; a < n; ++a) {
            if (g.axis_index(p, a) + 1 >= g.points(a)) continue;
            const std::size_t q = p + static_cast<std::size_t>(g.stride(a));
            if ((val[p] < 0.0) == (val[q] < 0.0)) continue;
            const double t = val[p] / (val[p] - val[q]);
            auto x = g.point(p);
            x[static_cast<std::size_t>(a)] += t * g.spacing(a);
            out.push_back(project(d, std::move(x), tol));
        }
    }
    return out;
}

}  // namespace detail

/// Quasi-uniform samples of the boundary with inner normals and curvatures.
[[nodiscard]] inline std::vector<BoundarySample> boundary_samples(const DomainSpec& d, int count)
{
    if (count < 1) throw DomainError("boundary_samples: count must be >= 1");
    const int n = d.dim();
    std::vector<BoundarySample> out;
    out.reserve(static_cast<std::size_t>(count));
    switch (d.kind) {
    case DomainSpec::Kind::box: throw GeometryError("box domains have corners; curvature undefined");
    case DomainSpec::Kind::ball:
    case DomainSpec::Kind::ellipsoid:
        for (auto& dir : detail::sphere_directions(n, count)) {
            std::vector<double> x(static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a) {
                const auto sa = static_cast<std::size_t>(a);
                const double r = d.kind == DomainSpec::Kind::ball ? d.radius : d.axes[sa];
                x[sa] = d.center[sa] + r * dir[sa];
            }
            out.push_back(detail::make_sample(d, std::move(x)));
        }
        return out;
    case DomainSpec::Kind::levelset: {
        std::vector<std::vector<double>> pts;
        // Lattice fine enough to yield at least `count` crossings.
        const int cap = n == 2 ? 4096 : 160;
        for (int m = 16;; m *= 2) {
            const int mm = std::min(m, cap);
            pts = detail::levelset_crossings(d, mm);
            if (static_cast<int>(pts.size()) >= count || mm == cap || (pts.empty() && mm >= 64)) break;
        }
        if (pts.empty()) throw GeometryError("levelset: no boundary found inside the bounding box");
        const double stride = static_cast<double>(pts.size()) / count;
        for (int i = 0; i < count; ++i) {
            const auto idx = std::min(pts.size() - 1, static_cast<std::size_t>(i * stride));
            out.push_back(detail::make_sample(d, pts[idx]));
        }
        return out;
    }
    }
    return out;
}

/// Curvature data at an arbitrary boundary point (projected first).
[[nodiscard]] inline BoundarySample boundary_sample_at(const DomainSpec& d, std::vector<double> x)
{
    if (d.kind == DomainSpec::Kind::box) throw GeometryError("box domains have corners; curvature undefined");
    return detail::make_sample(d, detail::project(d, std::move(x), 1e-14));
}

struct ConvexityReport {
    bool pass = false;
    double margin = 0.0;   // +inf when k = 1
    std::vector<double> worst_point;
};

/// min over samples and j = 1..k-1 of sigma_j(kappa); pass iff positive.
[[nodiscard]] inline ConvexityReport is_k1_convex(const DomainSpec& d, int k, int count)
{
    if (k < 1 || k > d.dim()) throw DomainError("is_k1_convex: k outside [1, n]");
    if (k == 1) return {true, std::numeric_limits<double>::infinity(), {}};
    ConvexityReport r{false, std::numeric_limits<double>::infinity(), {}};
    for (const auto& s : boundary_samples(d, count)) {
        const auto e = sigma_all(EigenSpectrum(s.curvatures));
        for (int j = 1; j <= k - 1; ++j) {
            if (e[static_cast<std::size_t>(j - 1)] < r.margin) {
                r.margin = e[static_cast<std::size_t>(j - 1)];
                r.worst_point = s.x;
            }
        }
    }
    r.pass = r.margin > 0.0;
    return r;
}

/// Dirichlet datum attached to a boundary grid point.
struct BoundaryAttachment {
    std::size_t point = 0;
    std::vector<double> projection;   // nearest boundary point (Newton projection)
    std::vector<double> normal;       // inner unit normal at the projection
    double distance = 0.0;            // |x - projection|
    double value = 0.0;               // boundary data at the projection
};

struct Classification {
    GridField field;   // mask; values = attached data at boundary points, NaN elsewhere
    std::vector<BoundaryAttachment> attachments;
};

/// Labels grid points: interior iff the full second-difference stencil lies
/// inside the domain, boundary for the remaining inside points (carrying
/// boundary data at their projection), exterior otherwise.
[[nodiscard]] inline Classification classify(const DomainSpec& d, const Grid& g, const Expression& boundary_data)
{
    const int n = d.dim();
    if (g.dim() != n) throw DomainError("classify: grid and domain dimensions differ");
    const auto dlo = d.box_lo(), dhi = d.box_hi();
    for (int a = 0; a < n; ++a) {
        const auto sa = static_cast<std::size_t>(a);
        const double margin = d.kind == DomainSpec::Kind::box ? -1e-12 * g.spacing(a) : 2.0 * g.spacing(a) * (1 - 1e-12);
        if (dlo[sa] - g.lo(a) < margin || g.hi(a) - dhi[sa] < margin) {
            throw DomainError("classify: grid must contain the domain with a margin of 2h");
        }
    }
    const double box_tol = 1e-9 * g.max_spacing();
    std::vector<std::uint8_t> in(g.size());
    std::vector<double> x(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.point(p, x);
        in[p] = d.inside(x, box_tol) ? 1 : 0;
    }
    const auto off = stencil_offsets(g);
    Classification c;
    std::vector<PointLabel> mask(g.size(), PointLabel::exterior);
    std::vector<double> values(g.size(), std::nan(""));
    const double tol = 1e-10 * g.max_spacing();
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!in[p]) continue;
        bool closed = g.off_edge(p);
        for (std::size_t o = 0; closed && o < off.size(); ++o) {
            closed = in[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off[o])] != 0;
        }
        if (closed) {
            mask[p] = PointLabel::interior;
            continue;
        }
        mask[p] = PointLabel::boundary;
        BoundaryAttachment at;
        at.point = p;
        g.point(p, x);
        if (d.kind == DomainSpec::Kind::box) {
            at.projection = x;
            at.normal.assign(static_cast<std::size_t>(n), 0.0);
        } else {
            at.projection = detail::project(d, x, tol);
            const Jet j = d.phi(at.projection);
            double gn = 0.0;
            for (int a = 0; a < n; ++a) gn += j.grad[static_cast<std::size_t>(a)] * j.grad[static_cast<std::size_t>(a)];
            gn = std::sqrt(gn);
            at.normal.resize(static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a) at.normal[static_cast<std::size_t>(a)] = -j.grad[static_cast<std::size_t>(a)] / gn;
        }
        double dist = 0.0;
        for (int a = 0; a < n; ++a) {
            const double t = x[static_cast<std::size_t>(a)] - at.projection[static_cast<std::size_t>(a)];
            dist += t * t;
        }
        at.distance = std::sqrt(dist);
        at.value = boundary_data(at.projection);
        values[p] = at.value;
        c.attachments.push_back(std::move(at));
    }
    c.field = GridField(g, std::move(values), std::move(mask));
    return c;
}

/// CSV dump: x_1..x_n, normal_1..normal_n, kappa_1..kappa_{n-1}.
inline void write_samples_csv(std::ostream& os, const std::vector<BoundarySample>& samples)
{
    if (samples.empty()) return;
    const auto n = samples.front().x.size();
    for (std::size_t a = 0; a < n; ++a) os << (a ? "," : "") << "x" << a + 1;
    for (std::size_t a = 0; a < n; ++a) os << ",normal" << a + 1;
    for (std::size_t a = 0; a + 1 < n; ++a) os << ",kappa" << a + 1;
    os << '\n';
    for (const auto& s : samples) {
        for (std::size_t a = 0; a < n; ++a) os << (a ? "," : "") << detail::format17(s.x[a]);
        for (double v : s.normal) os << ',' << detail::format17(v);
        for (double v : s.curvatures) os << ',' << detail::format17(v);
        os << '\n';
    }
}

}  // namespace khess
