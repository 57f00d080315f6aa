#pragma once

// Damped Newton for the regularized Dirichlet problem
//   S_k[u] = f + theta in the domain,  u = phi on its boundary,
// written as F[D^2 u] = S_k^{1/k} = (f + theta)^{1/k}, and the
// theta-continuation path driver.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "khess/condh.hpp"
#include "khess/errors.hpp"
#include "khess/expression.hpp"
#include "khess/geometry.hpp"
#include "khess/grid.hpp"
#include "khess/hessop.hpp"
#include "khess/symfun.hpp"

namespace khess {

struct ProblemSpec {
    int n = 3;
    int k = 2;
    DomainSpec domain = DomainSpec::ball({0, 0, 0}, 1);
    RhsSpec f = RhsSpec::expression(Expression::constant(0.0), 2);
    Expression phi = Expression::constant(0.0);
    double theta = 1e-6;

    void validate() const
    {
        if (n < 2 || n > kMaxDim) throw DomainError("problem: n must be 2 or 3");
        if (k < 1 || k > n) throw DomainError("problem: need 1 <= k <= n");
        if (domain.dim() != n) throw DomainError("problem: domain dimension differs from n");
        if (f.k != k) throw DomainError("problem: right-hand side was declared for a different k");
        if (!(theta > 0.0)) throw DomainError("problem: theta must be positive");
        if (phi.max_variable() > n) throw DomainError("problem: boundary data uses more than n variables");
        if (f.kind == RhsSpec::Kind::expression && f.expr.max_variable() > n) {
            throw DomainError("problem: f uses more than n variables");
        }
    }
};

/// How a boundary node, which sits inside the true boundary, is tied to the
/// data. `extrapolate` fits a quadratic along a lattice line through the
/// node, the boundary crossing and the next two nodes inward (third-order
/// local error); `project` copies phi at the nearest boundary point, which is
/// first order.
enum class BoundaryClosure { extrapolate, project };

/// `automatic` runs ILUT-preconditioned BiCGSTAB and falls back to the
/// direct LU factorization if it stalls.
enum class LinearSolverKind { automatic, sparse_lu, bicgstab };

struct IterateInfo {
    int iteration = 0;
    double residual = 0.0;
    double step = 0.0;   // accepted damping factor, 0 for the start
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> residual_history;   // sup norm, start first
    bool admissible = false;
    int damping_events = 0;
    double final_residual = 0.0;
    double tolerance = 0.0;
    double wall_time = 0.0;
    bool converged = false;
    std::string failure;
    std::vector<std::string> warnings;
};

struct SolveOptions {
    std::optional<double> tol;   // default 1e-9 (1 + max (f + theta)^{1/k})
    int max_iter = 100;
    int max_halvings = 30;
    BoundaryClosure closure = BoundaryClosure::extrapolate;
    LinearSolverKind linear = LinearSolverKind::automatic;
    bool check_convexity = true;
    std::function<void(const GridField&, const IterateInfo&)> on_accept;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, SolveReport r, GridField last)
        : Error(what), report(std::move(r)), last_iterate(std::move(last)) {}
    SolveReport report;
    GridField last_iterate;
};

/// Linear constraint u_b - sum w_j u_j = c for a boundary node.
struct BoundaryRow {
    std::size_t point = 0;
    std::vector<std::pair<std::size_t, double>> terms;
    double constant = 0.0;
};

/// Everything about (problem, grid) that does not change during Newton.
struct Discretization {
    Classification cls;
    DofMap dofs;
    std::vector<double> target;          // (f + theta)^{1/k} per interior dof
    std::vector<BoundaryRow> rows;       // per boundary dof
    double tolerance = 0.0;
};

namespace detail {

inline std::vector<double> axpy(std::vector<double> x, double s, std::span<const double> v)
{
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * v[i];
    return x;
}

// Distance from x to the boundary along the unit direction e, known to lie
// in (0, len]: bisection on the inside test, then Newton on phi.
inline double crossing(const DomainSpec& d, std::span<const double> x, std::span<const double> e, double len)
{
    const auto at = [&](double t) { return axpy(std::vector<double>(x.begin(), x.end()), t, e); };
    if (d.kind == DomainSpec::Kind::box) {
        double t = len;
        for (std::size_t a = 0; a < e.size(); ++a) {
            if (e[a] > 0) t = std::min(t, (d.hi[a] - x[a]) / e[a]);
            if (e[a] < 0) t = std::min(t, (d.lo[a] - x[a]) / e[a]);
        }
        return std::max(t, 0.0);
    }
    double lo = 0.0, hi = len;
    for (int i = 0; i < 30; ++i) {
        const double mid = 0.5 * (lo + hi);
        (d.phi(at(mid)).value < 0.0 ? lo : hi) = mid;
    }
    double t = 0.5 * (lo + hi);
    for (int i = 0; i < 4; ++i) {
        const Jet j = d.phi(at(t));
        double dphi = 0.0;
        for (std::size_t a = 0; a < e.size(); ++a) dphi += j.grad[a] * e[a];
        if (dphi == 0.0) break;
        const double next = t - j.value / dphi;
        if (!(next >= lo && next <= hi)) break;
        t = next;
    }
    return t;
}

inline BoundaryRow closure_row(const DomainSpec& dom, const Expression& phi, const GridField& layout,
                               const BoundaryAttachment& at, BoundaryClosure closure)
{
    const Grid& g = layout.grid;
    const int n = g.dim();
    BoundaryRow row;
    row.point = at.point;
    row.constant = at.value;
    if (closure == BoundaryClosure::project || at.distance <= 1e-10 * g.max_spacing()) return row;

    // Lattice lines through the node that leave the domain within one step,
    // ordered by the size of the quadratic extrapolation error tau s^2.
    const auto x = g.point(at.point);
    const auto off = stencil_offsets(g);
    struct Line {
        std::ptrdiff_t o;
        double s, tau;
    };
    std::vector<Line> lines;
    std::vector<double> e(static_cast<std::size_t>(n));
    for (auto o : off) {
        const auto q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(at.point) + o);
        const auto xq = g.point(q);
        if (dom.inside(xq, 1e-9 * g.max_spacing())) continue;
        double s = 0.0;
        for (int a = 0; a < n; ++a) {
            e[static_cast<std::size_t>(a)] = xq[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(a)];
            s += e[static_cast<std::size_t>(a)] * e[static_cast<std::size_t>(a)];
        }
        s = std::sqrt(s);
        for (auto& c : e) c /= s;
        lines.push_back({o, s, crossing(dom, x, e, s)});
    }
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.tau * a.s * a.s < b.tau * b.s * b.s; });
    auto node = [&](std::ptrdiff_t o, int j) -> std::optional<std::size_t> {
        // j steps inward along -o, staying on the grid and off the exterior
        for (int a = 0; a < n; ++a) {
            const auto sa = static_cast<std::size_t>(a);
            const int i = g.axis_index(at.point, a);
            const int step = static_cast<int>(std::llround((g.point(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(at.point) + o))[sa] - x[sa]) / g.spacing(a)));
            const int ij = i - j * step;
            if (ij < 0 || ij >= g.points(a)) return std::nullopt;
        }
        const auto q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(at.point) - j * o);
        if (layout.mask[q] == PointLabel::exterior) return std::nullopt;
        return q;
    };
    for (int order : {2, 1}) {
        for (const auto& l : lines) {
            std::vector<double> dir(static_cast<std::size_t>(n));
            const auto xo = g.point(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(at.point) + l.o));
            for (int a = 0; a < n; ++a) dir[static_cast<std::size_t>(a)] = (xo[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(a)]) / l.s;
            const double value = phi(axpy(x, l.tau, dir));
            // Lagrange weights at t = tau for nodes t = 0 (boundary), tau + s, tau + 2s.
            const double t = l.tau, s = l.s;
            if (order == 2) {
                const auto q1 = node(l.o, 1), q2 = node(l.o, 2);
                if (!q1 || !q2) continue;
                const double w1 = 2.0 * t / (t + s);
                const double w2 = -t / (t + 2.0 * s);
                row.terms = {{*q1, w1}, {*q2, w2}};
                row.constant = (1.0 - w1 - w2) * value;
                return row;
            }
            const auto q1 = node(l.o, 1);
            if (!q1) continue;
            const double w1 = t / (t + s);
            row.terms = {{*q1, w1}};
            row.constant = (1.0 - w1) * value;
            return row;
        }
    }
    return row;   // isolated node: Dirichlet data at the projection
}

// Centre of the domain used by the default start.
inline std::vector<double> centroid(const DomainSpec& d, const GridField& layout)
{
    if (d.kind == DomainSpec::Kind::ball || d.kind == DomainSpec::Kind::ellipsoid) return d.center;
    const auto lo = d.box_lo(), hi = d.box_hi();
    std::vector<double> c(lo.size());
    if (d.kind == DomainSpec::Kind::box) {
        for (std::size_t a = 0; a < c.size(); ++a) c[a] = 0.5 * (lo[a] + hi[a]);
        return c;
    }
    int count = 0;
    std::vector<double> x(c.size());
    for (std::size_t p = 0; p < layout.grid.size(); ++p) {
        if (layout.mask[p] == PointLabel::exterior) continue;
        layout.grid.point(p, x);
        for (std::size_t a = 0; a < c.size(); ++a) c[a] += x[a];
        ++count;
    }
    for (auto& v : c) v /= std::max(count, 1);
    return c;
}

}  // namespace detail

[[nodiscard]] inline Discretization discretize(const ProblemSpec& prob, const Grid& g, BoundaryClosure closure)
{
    prob.validate();
    Discretization d;
    d.cls = classify(prob.domain, g, prob.phi);
    d.dofs = DofMap(d.cls.field.mask);
    if (d.dofs.interior.empty()) throw DomainError("discretize: grid has no interior points in the domain");
    const auto fv = prob.f.values_on(g);
    double fmax = 0.0;
    for (auto p : d.dofs.interior) fmax = std::max(fmax, std::abs(fv[p]));
    double tmax = 0.0;
    d.target.reserve(d.dofs.interior.size());
    for (auto p : d.dofs.interior) {
        if (!(fv[p] >= -1e-12 * fmax)) throw DomainError("discretize: f < 0 at " + describe_point(g, p));
        const double t = std::pow(std::max(fv[p], 0.0) + prob.theta, 1.0 / prob.k);
        d.target.push_back(t);
        tmax = std::max(tmax, t);
    }
    d.tolerance = 1e-9 * (1.0 + tmax);
    std::vector<const BoundaryAttachment*> by_point(g.size(), nullptr);
    for (const auto& at : d.cls.attachments) by_point[at.point] = &at;
    for (auto p : d.dofs.boundary) {
        d.rows.push_back(detail::closure_row(prob.domain, prob.phi, d.cls.field, *by_point[p], closure));
    }
    return d;
}

/// Residual evaluation at one iterate.
struct ResidualEval {
    bool admissible = true;
    std::size_t first_bad = 0;
    double sup = 0.0;
    Eigen::VectorXd r;   // per dof
};

[[nodiscard]] inline ResidualEval residual(const Discretization& d, const GridField& u, int k)
{
    ResidualEval e;
    e.r.resize(d.dofs.active_count());
    for (std::size_t i = 0; i < d.dofs.interior.size(); ++i) {
        const auto p = d.dofs.interior[i];
        const auto lam = spectrum(hessian_at(u, p));
        if (!in_gamma(lam, {k, true})) {
            e.admissible = false;
            e.first_bad = p;
            e.sup = std::numeric_limits<double>::infinity();
            return e;
        }
        e.r(static_cast<Eigen::Index>(i)) = std::pow(sigma(lam, k), 1.0 / k) - d.target[i];
    }
    const auto ni = d.dofs.interior.size();
    for (std::size_t j = 0; j < d.rows.size(); ++j) {
        const auto& row = d.rows[j];
        double v = u.values[row.point] - row.constant;
        for (auto [q, w] : row.terms) v -= w * u.values[q];
        e.r(static_cast<Eigen::Index>(ni + j)) = v;
    }
    e.sup = e.r.size() ? e.r.lpNorm<Eigen::Infinity>() : 0.0;
    return e;
}

/// Jacobian of the residual: interior rows (1/k) S_k^{1/k-1} S_k^{ij} D_ij,
/// boundary rows the closure constraints.
[[nodiscard]] inline Eigen::SparseMatrix<double> jacobian(const Discretization& d, const GridField& u, int k)
{
    const Grid& g = u.grid;
    std::vector<Eigen::Triplet<double>> trip;
    const int stencil = 1 + 2 * g.dim() * g.dim();
    trip.reserve(d.dofs.interior.size() * static_cast<std::size_t>(stencil) + d.rows.size() * 9);
    for (std::size_t i = 0; i < d.dofs.interior.size(); ++i) {
        const auto p = d.dofs.interior[i];
        const auto h = hessian_at(u, p);
        const double s = sigma(spectrum(h), k);
        const double scale = std::pow(s, 1.0 / k - 1.0) / k;
        append_stencil_row(trip, static_cast<int>(i), p, newton_tensor(h, k), scale, g, d.dofs);
    }
    const int ni = d.dofs.interior_count();
    for (std::size_t j = 0; j < d.rows.size(); ++j) {
        const int row = ni + static_cast<int>(j);
        trip.emplace_back(row, d.dofs.dof[d.rows[j].point], 1.0);
        for (auto [q, w] : d.rows[j].terms) trip.emplace_back(row, d.dofs.dof[q], -w);
    }
    Eigen::SparseMatrix<double> J(d.dofs.active_count(), d.dofs.active_count());
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

namespace detail {

// Solves J x = b with the selected backend.
class LinearSolver {
public:
    explicit LinearSolver(LinearSolverKind kind) : kind_(kind) {}

    Eigen::VectorXd solve(const Eigen::SparseMatrix<double>& J, const Eigen::VectorXd& b)
    {
        if (kind_ != LinearSolverKind::sparse_lu) {
            Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
            it.preconditioner().setFillfactor(4);
            it.preconditioner().setDroptol(1e-6);
            it.setTolerance(1e-12);
            it.setMaxIterations(1000);
            it.compute(J);
            Eigen::VectorXd x = it.solve(b);
            if (it.info() == Eigen::Success) return x;
            if (kind_ == LinearSolverKind::bicgstab) throw DomainError("linear solve: BiCGSTAB did not converge");
        }
        if (!analyzed_) {
            lu_.analyzePattern(J);
            analyzed_ = true;
        }
        lu_.factorize(J);
        if (lu_.info() != Eigen::Success) throw DomainError("linear solve: singular Newton matrix");
        return lu_.solve(b);
    }

private:
    LinearSolverKind kind_;
    bool analyzed_ = false;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace detail

/// u0 = (A/2)|x - x_c|^2 + L(x): strictly admissible since D^2 u0 = A I with
/// C(n,k) A^k > max f + theta, and L the affine least-squares fit of the
/// remaining boundary data at the attachment projections.
struct StartFunction {
    double A = 1.0;
    std::vector<double> center;
    std::vector<double> affine;   // c_0 + sum c_a x_a

    [[nodiscard]] double operator()(std::span<const double> x) const
    {
        double q = 0.0, l = affine[0];
        for (std::size_t a = 0; a < center.size(); ++a) {
            q += (x[a] - center[a]) * (x[a] - center[a]);
            l += affine[a + 1] * x[a];
        }
        return 0.5 * A * q + l;
    }
};

[[nodiscard]] inline StartFunction start_function(const ProblemSpec& prob, const Classification& cls)
{
    const int n = prob.n;
    const auto fv = prob.f.values_on(cls.field.grid);
    double fmax = 0.0;
    for (std::size_t p = 0; p < fv.size(); ++p) {
        if (cls.field.mask[p] != PointLabel::exterior && std::isfinite(fv[p])) fmax = std::max(fmax, fv[p]);
    }
    StartFunction s;
    s.A = std::pow((fmax + prob.theta) / binomial(n, prob.k), 1.0 / prob.k) + 1.0;
    s.center = detail::centroid(prob.domain, cls.field);
    s.affine.assign(static_cast<std::size_t>(n + 1), 0.0);
    if (cls.attachments.empty()) return s;
    Eigen::MatrixXd M(static_cast<Eigen::Index>(cls.attachments.size()), n + 1);
    Eigen::VectorXd rhs(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        const auto& y = cls.attachments[static_cast<std::size_t>(i)].projection;
        M(i, 0) = 1.0;
        double q = 0.0;
        for (int a = 0; a < n; ++a) {
            M(i, a + 1) = y[static_cast<std::size_t>(a)];
            q += (y[static_cast<std::size_t>(a)] - s.center[static_cast<std::size_t>(a)]) *
                 (y[static_cast<std::size_t>(a)] - s.center[static_cast<std::size_t>(a)]);
        }
        rhs(i) = cls.attachments[static_cast<std::size_t>(i)].value - 0.5 * s.A * q;
    }
    const Eigen::VectorXd c = M.colPivHouseholderQr().solve(rhs);
    for (int a = 0; a <= n; ++a) s.affine[static_cast<std::size_t>(a)] = c(a);
    return s;
}

[[nodiscard]] inline GridField sample_start(const StartFunction& s, const GridField& layout)
{
    GridField u = layout;
    std::vector<double> x(static_cast<std::size_t>(layout.grid.dim()));
    for (std::size_t p = 0; p < u.grid.size(); ++p) {
        if (u.mask[p] == PointLabel::exterior) {
            u.values[p] = std::nan("");
            continue;
        }
        u.grid.point(p, x);
        u.values[p] = s(x);
    }
    return u;
}

[[nodiscard]] inline GridField default_start(const ProblemSpec& prob, const Grid& g)
{
    prob.validate();
    const auto cls = classify(prob.domain, g, prob.phi);
    return sample_start(start_function(prob, cls), cls.field);
}

/// Newton on a prepared discretization from u0 (same layout).
[[nodiscard]] inline std::pair<GridField, SolveReport> solve_discrete(const ProblemSpec& prob, const Discretization& d,
                                                                      GridField u, const SolveOptions& opts = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    const int k = prob.k;
    if (!u.same_layout(d.cls.field)) throw DomainError("solve: initial guess has a different grid or mask");
    SolveReport rep;
    rep.tolerance = opts.tol.value_or(d.tolerance);
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    auto res = residual(d, u, k);
    if (!res.admissible) {
        throw InitializationError("solve: initial guess is not strictly " + std::to_string(k) + "-admissible at " +
                                  describe_point(u.grid, res.first_bad));
    }
    rep.residual_history.push_back(res.sup);
    if (opts.on_accept) opts.on_accept(u, {0, res.sup, 0.0});

    auto fail = [&](const std::string& why) {
        rep.final_residual = res.sup;
        rep.admissible = true;
        rep.failure = why;
        rep.wall_time = elapsed();
        throw ConvergenceError(why, rep, u);
    };

    detail::LinearSolver lin(opts.linear);
    std::vector<double> trial(u.values.size());
    while (res.sup > rep.tolerance) {
        if (rep.iterations >= opts.max_iter) fail("Newton: no convergence in " + std::to_string(opts.max_iter) + " iterations");
        const auto J = jacobian(d, u, k);
        Eigen::VectorXd delta;
        try {
            delta = lin.solve(J, -res.r);
        } catch (const DomainError& e) {
            fail(e.what());
        }
        double t = 1.0;
        bool accepted = false;
        GridField cand = u;
        for (int halving = 0; halving <= opts.max_halvings; ++halving) {
            for (std::size_t i = 0; i < d.dofs.interior.size(); ++i) {
                cand.values[d.dofs.interior[i]] = u.values[d.dofs.interior[i]] + t * delta(static_cast<Eigen::Index>(i));
            }
            const auto ni = d.dofs.interior.size();
            for (std::size_t j = 0; j < d.dofs.boundary.size(); ++j) {
                cand.values[d.dofs.boundary[j]] = u.values[d.dofs.boundary[j]] + t * delta(static_cast<Eigen::Index>(ni + j));
            }
            auto cr = residual(d, cand, k);
            if (cr.admissible && cr.sup < res.sup) {
                u = std::move(cand);
                res = std::move(cr);
                accepted = true;
                break;
            }
            ++rep.damping_events;
            t *= 0.5;
        }
        if (!accepted) fail("Newton: damping exhausted after " + std::to_string(opts.max_halvings) + " halvings");
        ++rep.iterations;
        rep.residual_history.push_back(res.sup);
        if (opts.on_accept) opts.on_accept(u, {rep.iterations, res.sup, t});
    }
    rep.final_residual = res.sup;
    rep.admissible = all_admissible(u, k, true);
    rep.converged = true;
    rep.wall_time = elapsed();
    return {std::move(u), std::move(rep)};
}

/// Solves S_k[u] = f + theta with Dirichlet data phi. Without u0 the
/// default quadratic start is used.
[[nodiscard]] inline std::pair<GridField, SolveReport> solve(const ProblemSpec& prob, const Grid& g,
                                                             std::optional<GridField> u0 = std::nullopt,
                                                             const SolveOptions& opts = {})
{
    const auto d = discretize(prob, g, opts.closure);
    GridField start = u0 ? std::move(*u0) : sample_start(start_function(prob, d.cls), d.cls.field);
    std::vector<std::string> warnings;
    if (opts.check_convexity && prob.k >= 2 && prob.domain.kind != DomainSpec::Kind::box) {
        const auto c = is_k1_convex(prob.domain, prob.k, 2000);
        if (!c.pass) {
            warnings.push_back("domain is not (k-1)-convex: margin " + detail::format17(c.margin) + " at " +
                               detail::coords(c.worst_point));
        }
    }
    try {
        auto out = solve_discrete(prob, d, std::move(start), opts);
        out.second.warnings = std::move(warnings);
        return out;
    } catch (ConvergenceError& e) {
        e.report.warnings = warnings;
        throw;
    }
}

struct C11Proxy {
    double hessian = 0.0;    // max spectral radius of the discrete Hessian
    double sup_u = 0.0;
    double gradient = 0.0;   // max first-difference quotient
    [[nodiscard]] double value() const { return std::max({hessian, sup_u, gradient}); }
};

[[nodiscard]] inline C11Proxy c11_parts(const GridField& u)
{
    const Grid& g = u.grid;
    C11Proxy c;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (u.mask[p] == PointLabel::exterior) continue;
        c.sup_u = std::max(c.sup_u, std::abs(u.values[p]));
        for (int a = 0; a < g.dim(); ++a) {
            if (g.axis_index(p, a) + 1 >= g.points(a)) continue;
            const auto q = p + static_cast<std::size_t>(g.stride(a));
            if (u.mask[q] == PointLabel::exterior) continue;
            c.gradient = std::max(c.gradient, std::abs(u.values[q] - u.values[p]) / g.spacing(a));
        }
        if (u.interior(p)) {
            const auto ev = spectrum(hessian_at(u, p));
            c.hessian = std::max({c.hessian, std::abs(ev[0]), std::abs(ev[ev.size() - 1])});
        }
    }
    return c;
}

[[nodiscard]] inline double c11_proxy(const GridField& u) { return c11_parts(u).value(); }

struct ComparisonResult {
    bool pointwise_leq = true;
    double max_violation = 0.0;
};

/// Checks u1 <= u2 + tol at every interior point.
[[nodiscard]] inline ComparisonResult comparison_check(const GridField& u1, const GridField& u2, double tol = 0.0)
{
    if (!u1.same_layout(u2)) throw DomainError("comparison_check: fields have different grids or masks");
    ComparisonResult r;
    for (std::size_t p = 0; p < u1.grid.size(); ++p) {
        if (u1.interior(p)) r.max_violation = std::max(r.max_violation, u1.values[p] - u2.values[p]);
    }
    r.pointwise_leq = r.max_violation <= tol;
    return r;
}

/// Extreme eigenvalues of the discrete Hessian over the interior and the
/// two-sided bound min >= -(n-1) max - 10h that admissibility implies.
struct HessianBounds {
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    bool holds = true;
};

[[nodiscard]] inline HessianBounds hessian_bounds(const GridField& u)
{
    HessianBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), true};
    const int n = u.grid.dim();
    for (std::size_t p = 0; p < u.grid.size(); ++p) {
        if (!u.interior(p)) continue;
        const auto ev = spectrum(hessian_at(u, p));
        b.max_eigenvalue = std::max(b.max_eigenvalue, ev[0]);
        b.min_eigenvalue = std::min(b.min_eigenvalue, ev[n - 1]);
    }
    b.holds = b.min_eigenvalue >= -(n - 1) * b.max_eigenvalue - 10.0 * u.grid.max_spacing();
    return b;
}

/// Grid L1 distance of S_k[u] to f over interior points.
[[nodiscard]] inline double l1_residual_to_f(const GridField& u, const RhsSpec& f, int k)
{
    const auto fv = f.values_on(u.grid);
    double s = 0.0;
    for (std::size_t p = 0; p < u.grid.size(); ++p) {
        if (u.interior(p)) s += std::abs(sk_at(u, p, k) - fv[p]);
    }
    return s * u.grid.cell_volume();
}

struct PathEntry {
    double theta = 0.0;
    SolveReport report;
    C11Proxy c11;
    double c11_proxy = 0.0;
    double sup_u = 0.0;
    double sup_grad = 0.0;
    double l1_residual_to_f = 0.0;
    bool shifted = false;   // warm start needed the delta |x|^2 / 2 fix-up
    GridField solution;
};

struct PathReport {
    std::vector<PathEntry> entries;
    std::optional<int> failed_stage;
    std::string failure;
    std::optional<SolveReport> failed_report;
};

[[nodiscard]] inline std::vector<double> default_schedule() { return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}; }

/// Solves along a strictly decreasing theta schedule, warm-starting each
/// stage from the previous solution. Newton or start-up failures end the
/// path with a partial report; input errors still throw.
[[nodiscard]] inline PathReport path(ProblemSpec prob, const Grid& g, const std::vector<double>& schedule,
                                     const SolveOptions& opts = {})
{
    if (schedule.empty()) throw DomainError("path: empty schedule");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i] > 0.0)) throw DomainError("path: theta values must be positive");
        if (i && !(schedule[i] < schedule[i - 1])) throw DomainError("path: schedule must be strictly decreasing");
    }
    PathReport rep;
    std::optional<GridField> prev;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        prob.theta = schedule[i];
        PathEntry e;
        e.theta = schedule[i];
        try {
            const auto d = discretize(prob, g, opts.closure);
            GridField start = prev ? *prev : sample_start(start_function(prob, d.cls), d.cls.field);
            if (prev && !all_admissible(start, prob.k, true)) {
                constexpr double delta = 1e-10;
                std::vector<double> x(static_cast<std::size_t>(g.dim()));
                for (std::size_t p = 0; p < g.size(); ++p) {
                    if (start.mask[p] == PointLabel::exterior) continue;
                    g.point(p, x);
                    double r2 = 0.0;
                    for (double c : x) r2 += c * c;
                    start.values[p] += 0.5 * delta * r2;
                }
                e.shifted = true;
            }
            auto [u, r] = solve_discrete(prob, d, std::move(start), opts);
            e.report = std::move(r);
            e.c11 = c11_parts(u);
            e.c11_proxy = e.c11.value();
            e.sup_u = e.c11.sup_u;
            e.sup_grad = e.c11.gradient;
            e.l1_residual_to_f = l1_residual_to_f(u, prob.f, prob.k);
            e.solution = u;
            prev = std::move(u);
        } catch (const ConvergenceError& err) {
            rep.failed_stage = static_cast<int>(i);
            rep.failure = err.what();
            rep.failed_report = err.report;
            return rep;
        } catch (const InitializationError& err) {
            rep.failed_stage = static_cast<int>(i);
            rep.failure = err.what();
            return rep;
        }
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

}  // namespace khess
