#pragma once

// Uniform Cartesian grids, labelled scalar fields and their text format.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "khess/errors.hpp"

namespace khess {

/// Uniform grid on the box [lo, hi] with m points per axis. The last axis
/// varies fastest in the linear point index.
class Grid {
public:
    Grid() = default;

    Grid(std::vector<double> lo, std::vector<double> hi, std::vector<int> m)
        : lo_(std::move(lo)), hi_(std::move(hi)), m_(std::move(m))
    {
        if (lo_.empty() || lo_.size() != hi_.size() || lo_.size() != m_.size()) {
            throw DomainError("Grid: lo, hi and m must have the same non-zero length");
        }
        stride_.assign(m_.size(), 1);
        for (int a = dim() - 1; a >= 0; --a) {
            const auto sa = static_cast<std::size_t>(a);
            if (m_[sa] < 5) throw DomainError("Grid: need at least 5 points per axis");
            if (!(hi_[sa] > lo_[sa])) throw DomainError("Grid: spacing must be positive on every axis");
            if (a + 1 < dim()) stride_[sa] = stride_[sa + 1] * m_[sa + 1];
        }
        size_ = static_cast<std::size_t>(stride_[0]) * static_cast<std::size_t>(m_[0]);
    }

    /// [lo, hi]^dim with m points per axis.
    static Grid cube(int dim, double lo, double hi, int m)
    {
        const auto d = static_cast<std::size_t>(dim);
        return Grid(std::vector<double>(d, lo), std::vector<double>(d, hi), std::vector<int>(d, m));
    }

    [[nodiscard]] int dim() const { return static_cast<int>(m_.size()); }
    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] int points(int axis) const { return m_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] double lo(int axis) const { return lo_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] double hi(int axis) const { return hi_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] double spacing(int axis) const
    {
        return (hi(axis) - lo(axis)) / (points(axis) - 1);
    }
    [[nodiscard]] double max_spacing() const
    {
        double h = 0.0;
        for (int a = 0; a < dim(); ++a) h = std::max(h, spacing(a));
        return h;
    }
    [[nodiscard]] double cell_volume() const
    {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= spacing(a);
        return v;
    }
    [[nodiscard]] std::ptrdiff_t stride(int axis) const { return stride_[static_cast<std::size_t>(axis)]; }

    [[nodiscard]] int axis_index(std::size_t idx, int axis) const
    {
        return static_cast<int>((idx / static_cast<std::size_t>(stride(axis))) %
                                static_cast<std::size_t>(points(axis)));
    }

    /// Coordinate of grid line i on an axis. Symmetric in i <-> m-1-i so that
    /// centred grids place a node exactly at the centre.
    [[nodiscard]] double coord(int axis, int i) const
    {
        const int last = points(axis) - 1;
        return (static_cast<double>(last - i) * lo(axis) + static_cast<double>(i) * hi(axis)) / last;
    }

    void point(std::size_t idx, std::span<double> x) const
    {
        for (int a = 0; a < dim(); ++a) x[static_cast<std::size_t>(a)] = coord(a, axis_index(idx, a));
    }

    [[nodiscard]] std::vector<double> point(std::size_t idx) const
    {
        std::vector<double> x(static_cast<std::size_t>(dim()));
        point(idx, x);
        return x;
    }

    /// True when idx is not on the outer face of the box.
    [[nodiscard]] bool off_edge(std::size_t idx) const
    {
        for (int a = 0; a < dim(); ++a) {
            const int i = axis_index(idx, a);
            if (i == 0 || i == points(a) - 1) return false;
        }
        return true;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::vector<double> lo_, hi_;
    std::vector<int> m_;
    std::vector<std::ptrdiff_t> stride_;
    std::size_t size_ = 0;
};

enum class PointLabel : std::uint8_t { exterior = 0, interior = 1, boundary = 2 };

/// Offsets of the second-difference stencil: +-e_i and +-e_i+-e_j.
[[nodiscard]] inline std::vector<std::ptrdiff_t> stencil_offsets(const Grid& g)
{
    std::vector<std::ptrdiff_t> off;
    for (int i = 0; i < g.dim(); ++i) {
        off.push_back(g.stride(i));
        off.push_back(-g.stride(i));
        for (int j = i + 1; j < g.dim(); ++j) {
            for (int si : {-1, 1}) {
                for (int sj : {-1, 1}) off.push_back(si * g.stride(i) + sj * g.stride(j));
            }
        }
    }
    return off;
}

/// Scalar values on a grid with an interior/boundary/exterior label per
/// point. Values at exterior points are never read.
struct GridField {
    Grid grid;
    std::vector<double> values;
    std::vector<PointLabel> mask;

    GridField() = default;

    GridField(Grid g, std::vector<double> v, std::vector<PointLabel> m)
        : grid(std::move(g)), values(std::move(v)), mask(std::move(m))
    {
        if (values.size() != grid.size() || mask.size() != grid.size()) {
            throw DomainError("GridField: value/mask size does not match the grid");
        }
        check_stencils();
    }

    /// Field with every off-edge point interior and edge points boundary.
    static GridField box(const Grid& g, std::vector<double> v)
    {
        std::vector<PointLabel> m(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) {
            m[p] = g.off_edge(p) ? PointLabel::interior : PointLabel::boundary;
        }
        return GridField(g, std::move(v), std::move(m));
    }

    [[nodiscard]] bool interior(std::size_t p) const { return mask[p] == PointLabel::interior; }
    [[nodiscard]] double operator[](std::size_t p) const { return values[p]; }

    [[nodiscard]] bool same_layout(const GridField& o) const { return grid == o.grid && mask == o.mask; }

    void check_stencils() const
    {
        const auto off = stencil_offsets(grid);
        for (std::size_t p = 0; p < grid.size(); ++p) {
            if (mask[p] != PointLabel::interior) continue;
            if (!grid.off_edge(p)) throw DomainError("GridField: interior point on the grid edge");
            for (auto o : off) {
                if (mask[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + o)] ==
                    PointLabel::exterior) {
                    throw DomainError("GridField: interior stencil reaches an exterior point");
                }
            }
        }
    }
};

/// Field of `g` evaluated at every grid point, all off-edge points interior.
template <class Fn>
[[nodiscard]] GridField sample_box(const Grid& g, Fn&& fn)
{
    std::vector<double> v(g.size());
    std::vector<double> x(static_cast<std::size_t>(g.dim()));
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.point(p, x);
        v[p] = fn(std::span<const double>(x));
    }
    return GridField::box(g, std::move(v));
}

// ---------------------------------------------------------------------------
// Text format. Header: "n m_1..m_n lo_1..lo_n hi_1..hi_n"; then one entry per
// line in point order. Reals are written with 17 significant digits.

namespace detail {

inline std::string format17(double v)
{
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_real(const std::string& tok)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw InputError("field file: malformed number '" + tok + "'");
    }
    return v;
}

inline void write_header(std::ostream& os, const Grid& g)
{
    os << g.dim();
    for (int a = 0; a < g.dim(); ++a) os << ' ' << g.points(a);
    for (int a = 0; a < g.dim(); ++a) os << ' ' << format17(g.lo(a));
    for (int a = 0; a < g.dim(); ++a) os << ' ' << format17(g.hi(a));
    os << '\n';
}

inline Grid read_header(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw InputError("field file: missing header");
    std::istringstream hs(line);
    int n = 0;
    if (!(hs >> n) || n < 1) throw InputError("field file: bad dimension in header");
    std::vector<int> m(static_cast<std::size_t>(n));
    std::vector<double> lo(m.size()), hi(m.size());
    for (auto& v : m) {
        if (!(hs >> v)) throw InputError("field file: bad point count in header");
    }
    std::string tok;
    for (auto* arr : {&lo, &hi}) {
        for (auto& v : *arr) {
            if (!(hs >> tok)) throw InputError("field file: truncated header");
            v = parse_real(tok);
        }
    }
    return Grid(lo, hi, m);
}

}  // namespace detail

inline void write_values(std::ostream& os, const GridField& f)
{
    detail::write_header(os, f.grid);
    for (double v : f.values) os << detail::format17(v) << '\n';
}

inline void write_mask(std::ostream& os, const GridField& f)
{
    detail::write_header(os, f.grid);
    for (auto l : f.mask) {
        os << (l == PointLabel::interior ? 'I' : l == PointLabel::boundary ? 'B' : 'E') << '\n';
    }
}

/// Reads a value file and its parallel mask file.
[[nodiscard]] inline GridField read_field(std::istream& values, std::istream& mask)
{
    const Grid g = detail::read_header(values);
    if (!(detail::read_header(mask) == g)) throw InputError("field file: value and mask headers differ");
    std::vector<double> v(g.size());
    std::vector<PointLabel> m(g.size());
    std::string tok;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!(values >> tok)) throw InputError("field file: truncated values");
        v[p] = detail::parse_real(tok);
        if (!(mask >> tok) || tok.size() != 1) throw InputError("field file: truncated mask");
        switch (tok[0]) {
        case 'I': m[p] = PointLabel::interior; break;
        case 'B': m[p] = PointLabel::boundary; break;
        case 'E': m[p] = PointLabel::exterior; break;
        default: throw InputError("field file: bad mask label '" + tok + "'");
        }
    }
    return GridField(g, std::move(v), std::move(m));
}

}  // namespace khess
