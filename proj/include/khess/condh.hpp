#pragma once

// Condition (H) audit of a right-hand side f >= 0:
//   |Df| <= C0 f^{1-1/k}   and   f f_xixi - (1-1/k) f_xi^2 >= -C0 f^{2-1/k},
// plus a finite-difference probe of the regularity of f^{1/k}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "khess/errors.hpp"
#include "khess/expression.hpp"
#include "khess/geometry.hpp"
#include "khess/grid.hpp"
#include "khess/hessop.hpp"

namespace khess {

/// Right-hand side f: an expression with exact derivatives, or grid samples
/// differentiated with the centred stencils. `offset` is added to every value.
struct RhsSpec {
    enum class Kind { expression, sampled };

    Kind kind = Kind::expression;
    Expression expr = Expression::constant(0.0);
    GridField field;
    int k = 2;
    double offset = 0.0;

    static RhsSpec expression(Expression e, int k)
    {
        RhsSpec r;
        r.kind = Kind::expression;
        r.expr = std::move(e);
        r.k = k;
        r.check();
        return r;
    }

    static RhsSpec sampled(GridField f, int k)
    {
        RhsSpec r;
        r.kind = Kind::sampled;
        r.field = std::move(f);
        r.k = k;
        r.check();
        return r;
    }

    /// f at x (expression kind only).
    [[nodiscard]] Jet jet(std::span<const double> x) const
    {
        if (kind != Kind::expression) throw InputError("RhsSpec: pointwise evaluation needs an expression");
        Jet j = expr.jet(x);
        j.value += offset;
        return j;
    }

    /// f at every node of g, NaN where a sampled field has no value.
    [[nodiscard]] std::vector<double> values_on(const Grid& g) const
    {
        std::vector<double> v(g.size());
        if (kind == Kind::sampled) {
            if (!(field.grid == g)) throw DomainError("RhsSpec: sampled f lives on a different grid");
            for (std::size_t p = 0; p < g.size(); ++p) {
                v[p] = field.mask[p] == PointLabel::exterior ? std::nan("") : field.values[p] + offset;
            }
            return v;
        }
        std::vector<double> x(static_cast<std::size_t>(g.dim()));
        for (std::size_t p = 0; p < g.size(); ++p) {
            g.point(p, x);
            v[p] = expr(x) + offset;
        }
        return v;
    }

    [[nodiscard]] std::string describe() const
    {
        std::string s = kind == Kind::expression ? expr.text() : std::string("<sampled>");
        if (offset != 0.0) s += " + " + detail::format17(offset);
        return s;
    }

private:
    void check() const
    {
        if (k < 1) throw DomainError("RhsSpec: k must be at least 1");
        if (kind == Kind::expression && expr.max_variable() > kMaxDim) {
            throw InputError("RhsSpec: at most " + std::to_string(kMaxDim) + " variables");
        }
    }
};

/// f + eps. Both constants of Condition (H) can only decrease.
[[nodiscard]] inline RhsSpec shift(RhsSpec f, double eps)
{
    if (!(eps >= 0.0)) throw DomainError("shift: eps must be non-negative");
    f.offset += eps;
    return f;
}

struct ConditionHReport {
    double c0_gradient = 0.0;
    double c0_hessian = 0.0;
    std::vector<double> worst_point_gradient;
    std::vector<double> worst_point_hessian;
    int points_checked = 0;
    int degenerate_points_checked = 0;
    int degenerate_failures = 0;
    double spacing = 0.0;     // grid spacing the sup was taken over
    std::optional<bool> pass; // only when a C0 was supplied
};

inline constexpr double kDegenerateRel = 1e-12;

namespace detail {

struct RhsSample {
    std::vector<double> x;
    double f = 0.0;
    Eigen::VectorXd df;
    Eigen::MatrixXd d2f;
};

// f with first and second derivatives at the audit points: exact for
// expressions (nodes of g inside the domain, or all nodes), centred
// differences at interior points for sampled fields.
inline std::vector<RhsSample> rhs_samples(const RhsSpec& f, const Grid& g, const std::optional<DomainSpec>& domain)
{
    const int n = g.dim();
    std::vector<RhsSample> out;
    std::vector<double> x(static_cast<std::size_t>(n));
    if (f.kind == RhsSpec::Kind::expression) {
        if (f.expr.max_variable() > n) throw DomainError("audit: f uses more variables than the grid dimension");
        const double tol = 1e-9 * g.max_spacing();
        for (std::size_t p = 0; p < g.size(); ++p) {
            g.point(p, x);
            if (domain && domain->kind != DomainSpec::Kind::box && domain->phi(x).value > tol) continue;
            if (domain && domain->kind == DomainSpec::Kind::box && !domain->inside(x, tol)) continue;
            const Jet j = f.jet(x);
            RhsSample s{x, j.value, Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
            for (int a = 0; a < n; ++a) {
                s.df(a) = j.grad[static_cast<std::size_t>(a)];
                for (int b = 0; b < n; ++b) s.d2f(a, b) = j.h(a, b);
            }
            out.push_back(std::move(s));
        }
        return out;
    }
    if (!(f.field.grid == g)) throw DomainError("audit: sampled f lives on a different grid");
    GridField shifted = f.field;
    for (auto& v : shifted.values) v += f.offset;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!shifted.interior(p)) continue;
        g.point(p, x);
        if (domain && !domain->inside(x, 1e-9 * g.max_spacing())) continue;
        RhsSample s{x, shifted.values[p], Eigen::VectorXd(n), hessian_at(shifted, p).to_eigen()};
        for (int a = 0; a < n; ++a) {
            const auto st = g.stride(a);
            s.df(a) = (shifted.values[p + static_cast<std::size_t>(st)] - shifted.values[p - static_cast<std::size_t>(st)]) /
                      (2.0 * g.spacing(a));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline double min_eigenvalue(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace detail

/// The matrix whose smallest eigenvalue is min over unit xi of
/// f f_xixi - (1-1/k) f_xi^2.
[[nodiscard]] inline Eigen::MatrixXd condition_h_matrix(double f, const Eigen::VectorXd& df, const Eigen::MatrixXd& d2f, int k)
{
    return f * d2f - (1.0 - 1.0 / k) * df * df.transpose();
}

/// Smallest constants C0 for which both inequalities hold at the sampled
/// points. Points with f <= 1e-12 max f are checked against the limiting
/// conditions Df = 0 instead.
[[nodiscard]] inline ConditionHReport audit(const RhsSpec& f, const Grid& g, std::optional<double> c0 = std::nullopt,
                                            const std::optional<DomainSpec>& domain = std::nullopt)
{
    const int k = f.k;
    const auto samples = detail::rhs_samples(f, g, domain);
    if (samples.empty()) throw DomainError("audit: no sample points");
    double fmax = 0.0, famax = 0.0, gmax = 0.0;
    for (const auto& s : samples) {
        fmax = std::max(fmax, s.f);
        famax = std::max(famax, std::abs(s.f));
        gmax = std::max(gmax, s.df.norm());
    }
    ConditionHReport r;
    r.spacing = g.max_spacing();
    r.points_checked = static_cast<int>(samples.size());
    const double neg_tol = 1e-12 * famax;
    const double eps_f = kDegenerateRel * fmax;
    const double tol_grad = 1e-6 * (1.0 + gmax) * r.spacing;
    const double tol_hess = 1e-6 * (1.0 + gmax * gmax) * r.spacing;
    const double q = 1.0 - 1.0 / k;
    for (const auto& s : samples) {
        if (s.f < -neg_tol) throw DomainError("audit: f < 0 at " + detail::coords(s.x));
        if (s.f <= eps_f) {
            ++r.degenerate_points_checked;
            const double dn = s.df.norm();
            if (dn > tol_grad || -dn * dn < -tol_hess) ++r.degenerate_failures;
            continue;
        }
        const double cg = s.df.norm() / std::pow(s.f, q);
        if (cg > r.c0_gradient || r.worst_point_gradient.empty()) {
            r.c0_gradient = std::max(r.c0_gradient, cg);
            r.worst_point_gradient = s.x;
        }
        const double lmin = detail::min_eigenvalue(condition_h_matrix(s.f, s.df, s.d2f, k));
        const double ch = std::max(0.0, -lmin) / std::pow(s.f, 1.0 + q);
        if (ch > r.c0_hessian || r.worst_point_hessian.empty()) {
            r.c0_hessian = std::max(r.c0_hessian, ch);
            r.worst_point_hessian = s.x;
        }
    }
    if (c0) r.pass = r.c0_gradient <= *c0 && r.c0_hessian <= *c0 && r.degenerate_failures == 0;
    return r;
}

struct RootRegularityReport {
    double lipschitz_estimate = 0.0;
    double c11_proxy_max = 0.0;
    double c11_proxy_growth_exponent = 0.0;
    int fit_points = 0;       // 0 means the proxy stayed at rounding level
    double fit_window_lo = 0.0, fit_window_hi = 0.0;
};

/// Difference quotients of g = f^{1/k}: the Lipschitz estimate is the largest
/// stencil-edge quotient or centred-gradient norm, the c11 proxy the spectral
/// radius of the discrete Hessian of g. The distance to the zero set of f is
/// estimated by g/|Dg| (exact for g proportional to a power of the distance),
/// and the growth exponent is the log-log slope of the c11 proxy against it
/// over [4h, half the largest distance].
[[nodiscard]] inline RootRegularityReport root_regularity_probe(const RhsSpec& f, const Grid& g,
                                                                const std::optional<DomainSpec>& domain = std::nullopt)
{
    const int n = g.dim();
    const auto fv = f.values_on(g);
    std::vector<double> gv(g.size());
    std::vector<std::uint8_t> in(g.size());
    std::vector<double> x(static_cast<std::size_t>(n));
    double fmax = 0.0;
    for (double v : fv) {
        if (std::isfinite(v)) fmax = std::max(fmax, v);
    }
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.point(p, x);
        in[p] = std::isfinite(fv[p]) && (!domain || domain->inside(x, 1e-9 * g.max_spacing()));
        if (!in[p]) continue;
        if (fv[p] < -1e-12 * fmax) throw DomainError("root_regularity_probe: f < 0 at " + detail::coords(x));
        gv[p] = std::pow(std::max(fv[p], 0.0), 1.0 / f.k);
    }
    const auto off = stencil_offsets(g);
    std::vector<PointLabel> mask(g.size(), PointLabel::exterior);
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!in[p]) continue;
        bool closed = g.off_edge(p);
        for (std::size_t o = 0; closed && o < off.size(); ++o) {
            closed = in[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off[o])] != 0;
        }
        mask[p] = closed ? PointLabel::interior : PointLabel::boundary;
    }
    const GridField gf(g, gv, mask);

    RootRegularityReport r;
    double gabs = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (in[p]) gabs = std::max(gabs, gv[p]);
    }
    double hmin = g.spacing(0);
    for (int a = 1; a < n; ++a) hmin = std::min(hmin, g.spacing(a));
    // Second differences of data with relative rounding eps carry an
    // absolute error near eps |g| / h^2; anything below that is noise.
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + gabs) / (hmin * hmin);

    std::vector<double> dist, c11;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!gf.interior(p)) continue;
        for (int a = 0; a < n; ++a) {
            for (int s = -1; s <= 1; s += 2) {
                for (int b = a; b < n; ++b) {
                    for (int t = (b == a ? 0 : -1); t <= 1; t += 2) {
                        auto o = s * g.stride(a);
                        double len2 = g.spacing(a) * g.spacing(a);
                        if (b != a) {
                            o += t * g.stride(b);
                            len2 += g.spacing(b) * g.spacing(b);
                        }
                        const auto q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + o);
                        r.lipschitz_estimate = std::max(r.lipschitz_estimate, std::abs(gv[q] - gv[p]) / std::sqrt(len2));
                    }
                }
            }
        }
        double gn = 0.0;
        for (int a = 0; a < n; ++a) {
            const auto st = static_cast<std::size_t>(g.stride(a));
            const double d = (gv[p + st] - gv[p - st]) / (2.0 * g.spacing(a));
            gn += d * d;
        }
        gn = std::sqrt(gn);
        // Edge quotients alone miss gradients that are oblique to the lattice.
        r.lipschitz_estimate = std::max(r.lipschitz_estimate, gn);
        const auto ev = spectrum(hessian_at(gf, p));
        const double rho = std::max(std::abs(ev[0]), std::abs(ev[n - 1]));
        r.c11_proxy_max = std::max(r.c11_proxy_max, rho);
        if (gn > 0.0 && rho > floor) {
            dist.push_back(gv[p] / gn);
            c11.push_back(rho);
        }
    }
    if (dist.empty()) return r;
    const double dmax = *std::max_element(dist.begin(), dist.end());
    r.fit_window_lo = 4.0 * g.max_spacing();
    r.fit_window_hi = 0.5 * dmax;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] < r.fit_window_lo || dist[i] > r.fit_window_hi) continue;
        const double lx = std::log(dist[i]), ly = std::log(c11[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++r.fit_points;
    }
    const double m = r.fit_points;
    const double den = m * sxx - sx * sx;
    if (r.fit_points < 2 || !(den > 1e-12 * m * sxx)) {
        r.fit_points = 0;
        return r;
    }
    r.c11_proxy_growth_exponent = (m * sxy - sx * sy) / den;
    return r;
}

}  // namespace khess
