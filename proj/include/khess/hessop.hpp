#pragma once

// Finite-difference Hessians on a uniform grid, pointwise spectra, the
// discrete k-Hessian S_k[u] and its linearization S_k^{ij}[u] d_i d_j.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "khess/errors.hpp"
#include "khess/grid.hpp"
#include "khess/symfun.hpp"

namespace khess {

/// Real symmetric n x n matrix, lower triangle stored.
class SymMatrix {
public:
    explicit SymMatrix(int n = 0) : n_(n), a_(static_cast<std::size_t>(n * (n + 1) / 2), 0.0) {}

    static SymMatrix identity(int n)
    {
        SymMatrix m(n);
        for (int i = 0; i < n; ++i) m.set(i, i, 1.0);
        return m;
    }

    static SymMatrix from_eigen(const Eigen::MatrixXd& e)
    {
        SymMatrix m(static_cast<int>(e.rows()));
        for (int i = 0; i < m.n_; ++i) {
            for (int j = 0; j <= i; ++j) m.set(i, j, 0.5 * (e(i, j) + e(j, i)));
        }
        return m;
    }

    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] double operator()(int i, int j) const { return a_[slot(i, j)]; }
    void set(int i, int j, double v) { a_[slot(i, j)] = v; }

    [[nodiscard]] Eigen::MatrixXd to_eigen() const
    {
        Eigen::MatrixXd e(n_, n_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) e(i, j) = (*this)(i, j);
        }
        return e;
    }

    [[nodiscard]] double max_abs() const
    {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    [[nodiscard]] std::size_t slot(int i, int j) const
    {
        if (i < j) std::swap(i, j);
        return static_cast<std::size_t>(i * (i + 1) / 2 + j);
    }

    int n_;
    std::vector<double> a_;
};

namespace detail {

inline void require_interior(const GridField& u, std::size_t p)
{
    if (p >= u.grid.size() || !u.interior(p)) {
        throw DomainError("hessian_at: point " + std::to_string(p) + " is not interior");
    }
}

// Descending eigenvalues, symmetric QR.
inline std::vector<double> qr_eigenvalues(const SymMatrix& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.to_eigen(), Eigen::EigenvaluesOnly);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + a.dim());
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

// Relative eigenvalue gap below which the closed-form 3x3 path is abandoned:
// the arccos step loses about half the digits near a repeated root.
inline constexpr double kClusterGap = 1e-4;

}  // namespace detail

/// Centred second differences at an interior point.
[[nodiscard]] inline SymMatrix hessian_at(const GridField& u, std::size_t p)
{
    detail::require_interior(u, p);
    const Grid& g = u.grid;
    const int n = g.dim();
    const auto& v = u.values;
    const double up = v[p];
    SymMatrix h(n);
    for (int i = 0; i < n; ++i) {
        const auto si = g.stride(i);
        const double hi = g.spacing(i);
        h.set(i, i, (v[p + si] - 2.0 * up + v[p - si]) / (hi * hi));
        for (int j = 0; j < i; ++j) {
            const auto sj = g.stride(j);
            const double hj = g.spacing(j);
            h.set(i, j, (v[p + si + sj] - v[p + si - sj] - v[p - si + sj] + v[p - si - sj]) / (4.0 * hi * hj));
        }
    }
    return h;
}

/// Eigenvalues in non-increasing order. Closed form for n <= 3 unless the
/// eigenvalues cluster, symmetric QR otherwise.
[[nodiscard]] inline EigenSpectrum spectrum(const SymMatrix& a)
{
    const int n = a.dim();
    if (n == 1) return EigenSpectrum{a(0, 0)};
    if (n == 2) {
        const double mid = 0.5 * (a(0, 0) + a(1, 1));
        const double rad = std::hypot(0.5 * (a(0, 0) - a(1, 1)), a(1, 0));
        return EigenSpectrum{mid + rad, mid - rad};
    }
    if (n == 3) {
        const double norm = a.max_abs();
        if (norm == 0.0) return EigenSpectrum{0.0, 0.0, 0.0};
        const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
        const double off = a(1, 0) * a(1, 0) + a(2, 0) * a(2, 0) + a(2, 1) * a(2, 1);
        const double d0 = a(0, 0) - q, d1 = a(1, 1) - q, d2 = a(2, 2) - q;
        const double p = std::sqrt((d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off) / 6.0);
        if (p > detail::kClusterGap * norm) {
            const double b00 = d0 / p, b11 = d1 / p, b22 = d2 / p;
            const double b10 = a(1, 0) / p, b20 = a(2, 0) / p, b21 = a(2, 1) / p;
            const double det = b00 * (b11 * b22 - b21 * b21) - b10 * (b10 * b22 - b21 * b20) +
                               b20 * (b10 * b21 - b11 * b20);
            const double r = std::clamp(0.5 * det, -1.0, 1.0);
            const double phi = std::acos(r) / 3.0;
            const double e1 = q + 2.0 * p * std::cos(phi);
            const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
            const double e2 = 3.0 * q - e1 - e3;
            const double gap = std::min(e1 - e2, e2 - e3);
            if (gap > detail::kClusterGap * norm) return EigenSpectrum{e1, e2, e3};
        }
    }
    return EigenSpectrum(detail::qr_eigenvalues(a));
}

/// Orthonormal eigenvectors (columns) with matching eigenvalues, from the
/// symmetric QR path.
struct EigenFrame {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

[[nodiscard]] inline EigenFrame eigen_frame(const SymMatrix& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.to_eigen());
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Newton tensor S_k^{ij}(A) = d sigma_k(lambda(A)) / d A_ij, assembled in the
/// eigenvector frame from sigma_grad.
[[nodiscard]] inline SymMatrix newton_tensor(const SymMatrix& a, int k)
{
    const auto fr = eigen_frame(a);
    const auto grad = sigma_grad(
        EigenSpectrum(std::vector<double>(fr.values.data(), fr.values.data() + fr.values.size())), k);
    const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(grad.data(), static_cast<Eigen::Index>(grad.size()));
    return SymMatrix::from_eigen(fr.vectors * gv.asDiagonal() * fr.vectors.transpose());
}

[[nodiscard]] inline double sk_at(const GridField& u, std::size_t p, int k)
{
    return sigma(spectrum(hessian_at(u, p)), k);
}

/// S_k[u] at interior points; NaN marks boundary and exterior points.
[[nodiscard]] inline GridField sk_field(const GridField& u, int k)
{
    detail::check_order(u.grid.dim(), k);
    std::vector<double> out(u.grid.size(), std::nan(""));
    for (std::size_t p = 0; p < u.grid.size(); ++p) {
        if (u.interior(p)) out[p] = sk_at(u, p, k);
    }
    GridField r;
    r.grid = u.grid;
    r.values = std::move(out);
    r.mask = u.mask;
    return r;
}

/// Per-point Gamma_k membership of the discrete Hessian; false off the interior.
[[nodiscard]] inline std::vector<std::uint8_t> admissibility_mask(const GridField& u, int k, bool strict)
{
    detail::check_order(u.grid.dim(), k);
    std::vector<std::uint8_t> m(u.grid.size(), 0);
    for (std::size_t p = 0; p < u.grid.size(); ++p) {
        if (u.interior(p)) m[p] = in_gamma(spectrum(hessian_at(u, p)), {k, strict}) ? 1 : 0;
    }
    return m;
}

[[nodiscard]] inline bool all_admissible(const GridField& u, int k, bool strict = true)
{
    const auto m = admissibility_mask(u, k, strict);
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (u.interior(p) && !m[p]) return false;
    }
    return true;
}

/// Numbering of the unknowns: interior points first, then boundary points.
struct DofMap {
    std::vector<int> dof;                 // per grid point, -1 for exterior
    std::vector<std::size_t> interior;    // grid index of interior dof r
    std::vector<std::size_t> boundary;    // grid index of boundary dof interior.size() + r

    explicit DofMap(const std::vector<PointLabel>& mask = {}) : dof(mask.size(), -1)
    {
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (mask[p] == PointLabel::interior) interior.push_back(p);
        }
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (mask[p] == PointLabel::boundary) boundary.push_back(p);
        }
        int next = 0;
        for (auto p : interior) dof[p] = next++;
        for (auto p : boundary) dof[p] = next++;
    }

    [[nodiscard]] int interior_count() const { return static_cast<int>(interior.size()); }
    [[nodiscard]] int active_count() const { return static_cast<int>(interior.size() + boundary.size()); }
};

/// Appends row `row` of v -> scale * sum_ij c_ij (D^2 v)_ij at point p, using
/// the same stencils as hessian_at.
inline void append_stencil_row(std::vector<Eigen::Triplet<double>>& out, int row, std::size_t p,
                               const SymMatrix& c, double scale, const Grid& g, const DofMap& dofs)
{
    const int n = g.dim();
    auto add = [&](std::ptrdiff_t off, double w) {
        out.emplace_back(row, dofs.dof[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off)], scale * w);
    };
    for (int i = 0; i < n; ++i) {
        const auto si = g.stride(i);
        const double hi = g.spacing(i);
        const double wd = c(i, i) / (hi * hi);
        add(si, wd);
        add(-si, wd);
        add(0, -2.0 * wd);
        for (int j = 0; j < i; ++j) {
            const auto sj = g.stride(j);
            const double wx = 2.0 * c(i, j) / (4.0 * hi * g.spacing(j));
            add(si + sj, wx);
            add(si - sj, -wx);
            add(-si + sj, -wx);
            add(-si - sj, wx);
        }
    }
}

/// v -> S_k^{ij}[u] (D^2 v)_ij on interior rows. Columns follow `dofs`; the
/// boundary columns carry the Dirichlet coupling, so eliminating known
/// boundary values means moving those columns to the right-hand side.
struct LinearizedOperator {
    DofMap dofs;
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;

    /// Interior block (interior x interior).
    [[nodiscard]] Eigen::SparseMatrix<double> interior_block() const
    {
        return matrix.leftCols(dofs.interior_count());
    }

    /// Interior x boundary coupling block.
    [[nodiscard]] Eigen::SparseMatrix<double> boundary_block() const
    {
        return matrix.rightCols(dofs.active_count() - dofs.interior_count());
    }

    /// Applies the operator to a field with the same layout; returns one value
    /// per interior dof.
    [[nodiscard]] Eigen::VectorXd apply(const GridField& v) const
    {
        Eigen::VectorXd x(dofs.active_count());
        for (std::size_t p = 0; p < v.grid.size(); ++p) {
            if (dofs.dof[p] >= 0) x(dofs.dof[p]) = v.values[p];
        }
        return matrix * x;
    }
};

[[nodiscard]] inline std::string describe_point(const Grid& g, std::size_t p)
{
    std::string s = "(";
    const auto x = g.point(p);
    for (std::size_t a = 0; a < x.size(); ++a) {
        if (a) s += ", ";
        s += std::to_string(x[a]);
    }
    return s + ")";
}

[[nodiscard]] inline LinearizedOperator linearized(const GridField& u, int k)
{
    detail::check_order(u.grid.dim(), k);
    LinearizedOperator op{DofMap(u.mask), {}};
    std::vector<Eigen::Triplet<double>> trip;
    const int stencil = 1 + 2 * u.grid.dim() * u.grid.dim();
    trip.reserve(op.dofs.interior.size() * static_cast<std::size_t>(stencil));
    for (std::size_t r = 0; r < op.dofs.interior.size(); ++r) {
        const auto p = op.dofs.interior[r];
        const auto h = hessian_at(u, p);
        if (!in_gamma(spectrum(h), {k, true})) {
            throw DomainError("linearized: u is not strictly " + std::to_string(k) +
                              "-admissible at " + describe_point(u.grid, p));
        }
        append_stencil_row(trip, static_cast<int>(r), p, newton_tensor(h, k), 1.0, u.grid, op.dofs);
    }
    op.matrix.resize(op.dofs.interior_count(), op.dofs.active_count());
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    return op;
}

}  // namespace khess
