#pragma once

// Numerical experiments on the structure behind the a priori estimates:
// concavity of F = sigma_k^{1/k}, Maclaurin constants, the interior versus
// near-boundary size of second derivatives, and theta-stability of C^{1,1}
// proxies along a continuation path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "khess/errors.hpp"
#include "khess/hessop.hpp"
#include "khess/solver.hpp"
#include "khess/symfun.hpp"

namespace khess {

/// Reproducible spectra: mt19937_64 (fully specified by the standard) with
/// the top 53 bits mapped to [0,1), so sequences do not depend on the
/// library's distribution classes.
class SpectrumSampler {
public:
    SpectrumSampler(int n, int k, std::uint64_t seed) : n_(n), k_(k), rng_(seed)
    {
        detail::check_order(n, k);
    }

    [[nodiscard]] double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    /// Uniform on [-1, 2]^n conditioned on the open cone Gamma_k.
    [[nodiscard]] std::vector<double> cone_point()
    {
        std::vector<double> v(static_cast<std::size_t>(n_));
        for (;;) {
            for (auto& x : v) x = uniform(-1.0, 2.0);
            if (in_gamma(EigenSpectrum(v), {k_, true})) return v;
        }
    }

private:
    int n_, k_;
    std::mt19937_64 rng_;
};

inline double fk(const std::vector<double>& l, int k) { return fk_value(EigenSpectrum(l), k); }

struct ConcavityReport {
    int n = 0, k = 0, samples = 0;
    std::uint64_t seed = 0;
    int violations = 0;
    double worst_gap = 0.0;   // max of (F(a) + F(b))/2 - F((a + b)/2)
};

inline constexpr double kConcavityTol = 1e-10;

/// Midpoint concavity of F over random pairs in Gamma_k.
[[nodiscard]] inline ConcavityReport concavity_experiment(int n, int k, int samples, std::uint64_t seed)
{
    if (samples < 1) throw DomainError("concavity_experiment: samples must be positive");
    SpectrumSampler s(n, k, seed);
    ConcavityReport r{n, k, samples, seed, 0, -std::numeric_limits<double>::infinity()};
    std::vector<double> mid(static_cast<std::size_t>(n));
    for (int i = 0; i < samples; ++i) {
        const auto a = s.cone_point();
        const auto b = s.cone_point();
        for (std::size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (a[j] + b[j]);
        const double gap = 0.5 * (fk(a, k) + fk(b, k)) - fk(mid, k);
        r.worst_gap = std::max(r.worst_gap, gap);
        if (gap > kConcavityTol) ++r.violations;
    }
    return r;
}

struct MaclaurinReport {
    int n = 0, k = 0, samples = 0;
    std::uint64_t seed = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    double analytic_bound = 0.0;   // C(n,k-1) C(n,k)^{-(k-1)/k}
    std::vector<double> argmin;
    int violations = 0;            // ratio below the bound or a broken Maclaurin chain
};

/// The constant C_{n,k} in sigma_{k-1} >= C_{n,k} sigma_k^{(k-1)/k} on Gamma_k.
[[nodiscard]] inline double maclaurin_bound(int n, int k)
{
    return binomial(n, k - 1) * std::pow(binomial(n, k), -static_cast<double>(k - 1) / k);
}

/// sigma_{k-1}(l) / sigma_k(l)^{(k-1)/k}, evaluated after scaling to sigma_k = 1.
[[nodiscard]] inline double maclaurin_ratio(std::vector<double> l, int k)
{
    const double s = sigma(EigenSpectrum(l), k);
    const double scale = std::pow(s, -1.0 / k);
    for (auto& x : l) x *= scale;
    return k == 1 ? 1.0 : sigma(EigenSpectrum(l), k - 1);
}

[[nodiscard]] inline MaclaurinReport maclaurin_constant_experiment(int n, int k, int samples, std::uint64_t seed)
{
    if (samples < 1) throw DomainError("maclaurin_constant_experiment: samples must be positive");
    SpectrumSampler s(n, k, seed);
    MaclaurinReport r;
    r.n = n;
    r.k = k;
    r.samples = samples;
    r.seed = seed;
    r.analytic_bound = maclaurin_bound(n, k);
    for (int i = 0; i < samples; ++i) {
        const auto l = s.cone_point();
        const double q = maclaurin_ratio(l, k);
        if (q < r.min_ratio) {
            r.min_ratio = q;
            r.argmin = l;
        }
        bool bad = q < r.analytic_bound * (1.0 - 1e-12);
        const auto chain = maclaurin_chain(EigenSpectrum(l), k);
        for (std::size_t j = 1; j < chain.size(); ++j) bad = bad || chain[j] > chain[j - 1] * (1.0 + 1e-12);
        if (bad) ++r.violations;
    }
    return r;
}

/// Extremes of the pure second difference eta^T D^2 u eta over all interior
/// points and over the near-boundary layer (interior points with a boundary
/// point in their stencil). gap = sup_interior - sup_boundary.
struct DirectionGap {
    std::vector<double> eta;
    double sup_interior = 0.0;
    double sup_boundary = 0.0;
    double gap = 0.0;
};

[[nodiscard]] inline std::vector<DirectionGap> interior_boundary_gap(const GridField& u, const std::vector<std::vector<double>>& directions)
{
    const Grid& g = u.grid;
    const int n = g.dim();
    const auto off = stencil_offsets(g);
    std::vector<DirectionGap> out;
    for (auto eta : directions) {
        if (static_cast<int>(eta.size()) != n) throw DomainError("interior_boundary_gap: direction has the wrong length");
        double nrm = 0.0;
        for (double c : eta) nrm += c * c;
        if (!(nrm > 0.0)) throw DomainError("interior_boundary_gap: zero direction");
        for (auto& c : eta) c /= std::sqrt(nrm);
        DirectionGap d{eta, -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0};
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (!u.interior(p)) continue;
            const auto h = hessian_at(u, p);
            double v = 0.0;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) v += eta[static_cast<std::size_t>(i)] * h(i, j) * eta[static_cast<std::size_t>(j)];
            }
            d.sup_interior = std::max(d.sup_interior, v);
            bool near = false;
            for (auto o : off) near = near || u.mask[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + o)] == PointLabel::boundary;
            if (near) d.sup_boundary = std::max(d.sup_boundary, v);
        }
        if (!std::isfinite(d.sup_boundary)) throw DomainError("interior_boundary_gap: no near-boundary layer");
        d.gap = d.sup_interior - d.sup_boundary;
        out.push_back(std::move(d));
    }
    return out;
}

[[nodiscard]] inline std::vector<std::vector<double>> axis_directions(int n)
{
    std::vector<std::vector<double>> d;
    for (int a = 0; a < n; ++a) {
        d.emplace_back(static_cast<std::size_t>(n), 0.0);
        d.back()[static_cast<std::size_t>(a)] = 1.0;
    }
    return d;
}

struct InteriorBoundaryReport {
    std::vector<double> thetas;
    std::vector<std::vector<DirectionGap>> gaps;   // per theta, per direction
    double spacing = 0.0;
    bool stable = true;   // per direction: max gap <= 2 min gap + slack

    /// Largest gap over directions at stage i.
    [[nodiscard]] double max_gap(std::size_t i) const
    {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& d : gaps[i]) m = std::max(m, d.gap);
        return m;
    }
};

/// Solves along the schedule and measures the gap at every stage. The gaps
/// count as stable when, per direction, the largest is at most twice the
/// smallest plus a slack of 10h for the discretization error.
[[nodiscard]] inline InteriorBoundaryReport interior_boundary_experiment(const ProblemSpec& p, const Grid& g,
                                                                         const std::vector<std::vector<double>>& directions,
                                                                         const std::vector<double>& schedule,
                                                                         const SolveOptions& opts = {})
{
    const auto pr = path(p, g, schedule, opts);
    if (pr.failed_stage) throw ConvergenceError("interior_boundary_experiment: " + pr.failure, pr.failed_report.value_or(SolveReport{}), {});
    InteriorBoundaryReport r;
    r.spacing = g.max_spacing();
    for (const auto& e : pr.entries) {
        r.thetas.push_back(e.theta);
        r.gaps.push_back(interior_boundary_gap(e.solution, directions));
    }
    for (std::size_t d = 0; d < directions.size(); ++d) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& stage : r.gaps) {
            lo = std::min(lo, stage[d].gap);
            hi = std::max(hi, stage[d].gap);
        }
        r.stable = r.stable && hi <= 2.0 * lo + 10.0 * r.spacing;
    }
    return r;
}

struct ThetaIndependenceReport {
    std::vector<double> thetas;
    std::vector<double> c11_series;
    std::vector<double> l1_residuals;
    std::vector<double> final_residuals;
    double max_over_min = 1.0;
    PathReport path;
};

[[nodiscard]] inline ThetaIndependenceReport theta_independence_experiment(const ProblemSpec& p, const Grid& g,
                                                                           const std::vector<double>& schedule,
                                                                           const SolveOptions& opts = {})
{
    ThetaIndependenceReport r;
    r.path = path(p, g, schedule, opts);
    if (r.path.failed_stage) {
        throw ConvergenceError("theta_independence_experiment: " + r.path.failure, r.path.failed_report.value_or(SolveReport{}), {});
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& e : r.path.entries) {
        r.thetas.push_back(e.theta);
        r.c11_series.push_back(e.c11_proxy);
        r.l1_residuals.push_back(e.l1_residual_to_f);
        r.final_residuals.push_back(e.report.final_residual);
        lo = std::min(lo, e.c11_proxy);
        hi = std::max(hi, e.c11_proxy);
    }
    r.max_over_min = hi / lo;
    return r;
}

}  // namespace khess
