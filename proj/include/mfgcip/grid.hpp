#pragma once

// Uniform node-centred space-time grids and the discrete calculus used by
// every other module. All stencils are second order, including the one-sided
// ones at boundary nodes, and every linear operator comes with its exact
// transpose so reverse-mode gradients can be assembled by hand.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfgcip/error.hpp"

namespace mfgcip {

enum class Axis { X1, X2, T };

/// Uniform tensor grid on (a,b) x (c2,d2) x [0,T]. Nodes sit on the boundary.
struct SpaceTimeGrid {
    double a = 1.0;
    double b = 2.0;
    double c2 = 1.0;
    double d2 = 2.0;
    double T = 1.0;
    int n1 = 20;
    int n2 = 20;
    int nt = 10;

    static SpaceTimeGrid make(double a, double b, double c2, double d2, double T, int n1, int n2,
                              int nt) {
        SpaceTimeGrid g{a, b, c2, d2, T, n1, n2, nt};
        g.validate();
        return g;
    }

    /// Unit square (1,2)^2 with horizon T=1, the layout used in all experiments.
    static SpaceTimeGrid unit(int n_space, int n_time) {
        return make(1.0, 2.0, 1.0, 2.0, 1.0, n_space, n_space, n_time);
    }

    void validate() const {
        require(a < b && c2 < d2 && T > 0.0, ErrorCode::InvalidGrid,
                "grid extents must satisfy a<b, c2<d2, T>0");
        require(n1 >= 4 && n2 >= 4, ErrorCode::InvalidGrid,
                "spatial cell counts must be >= 4 (got " + std::to_string(n1) + "x" +
                    std::to_string(n2) + ")");
        require(nt >= 2, ErrorCode::InvalidGrid, "time cell count must be >= 2");
        require(nt % 2 == 0, ErrorCode::InvalidGrid,
                "time cell count must be even so that t=T/2 is a node (got " +
                    std::to_string(nt) + ")");
    }

    double h1() const { return (b - a) / n1; }
    double h2() const { return (d2 - c2) / n2; }
    double ht() const { return T / nt; }

    double x1(int i) const { return a + (b - a) * i / n1; }
    double x2(int j) const { return c2 + (d2 - c2) * j / n2; }
    double t(int n) const { return T * n / nt; }

    /// Index of the observation time T/2.
    int mid() const { return nt / 2; }

    int cells(Axis ax) const { return ax == Axis::X1 ? n1 : ax == Axis::X2 ? n2 : nt; }
    double step(Axis ax) const { return ax == Axis::X1 ? h1() : ax == Axis::X2 ? h2() : ht(); }

    std::size_t spatial_size() const {
        return static_cast<std::size_t>(n1 + 1) * static_cast<std::size_t>(n2 + 1);
    }
    std::size_t size() const { return spatial_size() * static_cast<std::size_t>(nt + 1); }

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(n1 + 1) +
               static_cast<std::size_t>(i);
    }
    std::size_t index(int i, int j, int n) const {
        return static_cast<std::size_t>(n) * spatial_size() + index(i, j);
    }

    bool is_boundary(int i, int j) const { return i == 0 || j == 0 || i == n1 || j == n2; }

    /// True when every node of `coarse` is also a node of this grid.
    bool is_refinement_of(const SpaceTimeGrid& coarse) const {
        return a == coarse.a && b == coarse.b && c2 == coarse.c2 && d2 == coarse.d2 &&
               T == coarse.T && n1 % coarse.n1 == 0 && n2 % coarse.n2 == 0 &&
               nt % coarse.nt == 0;
    }

    bool operator==(const SpaceTimeGrid&) const = default;
};

/// Elementwise arithmetic shared by the nodal containers.
template <class Derived>
class NodalArithmetic {
public:
    Derived& operator+=(const Derived& o) {
        auto& s = self();
        check_same(o);
        for (std::size_t k = 0; k < s.values_.size(); ++k) s.values_[k] += o.values_[k];
        return s;
    }
    Derived& operator-=(const Derived& o) {
        auto& s = self();
        check_same(o);
        for (std::size_t k = 0; k < s.values_.size(); ++k) s.values_[k] -= o.values_[k];
        return s;
    }
    Derived& operator*=(const Derived& o) {
        auto& s = self();
        check_same(o);
        for (std::size_t k = 0; k < s.values_.size(); ++k) s.values_[k] *= o.values_[k];
        return s;
    }
    Derived& operator*=(double c) {
        for (auto& x : self().values_) x *= c;
        return self();
    }
    /// this += c * o
    Derived& axpy(double c, const Derived& o) {
        auto& s = self();
        check_same(o);
        for (std::size_t k = 0; k < s.values_.size(); ++k) s.values_[k] += c * o.values_[k];
        return s;
    }

    friend Derived operator+(Derived l, const Derived& r) { return l += r; }
    friend Derived operator-(Derived l, const Derived& r) { return l -= r; }
    friend Derived operator*(Derived l, const Derived& r) { return l *= r; }
    friend Derived operator*(double c, Derived r) { return r *= c; }
    friend Derived operator*(Derived l, double c) { return l *= c; }
    friend Derived operator-(Derived r) { return r *= -1.0; }

    double max_abs() const {
        double m = 0.0;
        for (double x : self().values_) m = std::max(m, std::abs(x));
        return m;
    }
    double min() const {
        double m = self().values_.at(0);
        for (double x : self().values_) m = std::min(m, x);
        return m;
    }
    double max() const {
        double m = self().values_.at(0);
        for (double x : self().values_) m = std::max(m, x);
        return m;
    }
    bool all_finite() const {
        for (double x : self().values_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    Derived& self() { return static_cast<Derived&>(*this); }
    const Derived& self() const { return static_cast<const Derived&>(*this); }
    void check_same(const Derived& o) const {
        require(self().grid_ == o.grid_ && self().values_.size() == o.values_.size(),
                ErrorCode::InvalidArgument, "field grids differ");
    }
};

/// Nodal values on the spatial rectangle.
class SpatialField : public NodalArithmetic<SpatialField> {
    friend class NodalArithmetic<SpatialField>;

public:
    SpatialField() = default;
    explicit SpatialField(const SpaceTimeGrid& g, double value = 0.0)
        : grid_(g), values_(g.spatial_size(), value) {}

    template <class Fn>
    static SpatialField from_function(const SpaceTimeGrid& g, Fn&& fn) {
        SpatialField f(g);
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) f(i, j) = fn(g.x1(i), g.x2(j));
        return f;
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
    double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    SpaceTimeGrid grid_;
    std::vector<double> values_;
};

/// Nodal values on the space-time cylinder.
class ScalarField : public NodalArithmetic<ScalarField> {
    friend class NodalArithmetic<ScalarField>;

public:
    ScalarField() = default;
    explicit ScalarField(const SpaceTimeGrid& g, double value = 0.0)
        : grid_(g), values_(g.size(), value) {}

    template <class Fn>
    static ScalarField from_function(const SpaceTimeGrid& g, Fn&& fn) {
        ScalarField f(g);
        for (int n = 0; n <= g.nt; ++n)
            for (int j = 0; j <= g.n2; ++j)
                for (int i = 0; i <= g.n1; ++i) f(i, j, n) = fn(g.x1(i), g.x2(j), g.t(n));
        return f;
    }

    /// Time-constant extension of a spatial field.
    static ScalarField constant_in_time(const SpatialField& s) {
        ScalarField f(s.grid());
        for (int n = 0; n <= f.grid_.nt; ++n) f.set_slice(n, s);
        return f;
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    double& operator()(int i, int j, int n) { return values_[grid_.index(i, j, n)]; }
    double operator()(int i, int j, int n) const { return values_[grid_.index(i, j, n)]; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    SpatialField slice(int n) const {
        SpatialField s(grid_);
        const std::size_t off = static_cast<std::size_t>(n) * grid_.spatial_size();
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(off), grid_.spatial_size(),
                    s.values().begin());
        return s;
    }
    void set_slice(int n, const SpatialField& s) {
        const std::size_t off = static_cast<std::size_t>(n) * grid_.spatial_size();
        std::copy(s.values().begin(), s.values().end(),
                  values_.begin() + static_cast<std::ptrdiff_t>(off));
    }

private:
    SpaceTimeGrid grid_;
    std::vector<double> values_;
};

namespace detail {

/// One row of a 1-D finite-difference matrix: out[k] = sum_s c[s] * in[start + s].
struct StencilRow {
    int start = 0;
    int len = 0;
    std::array<double, 4> c{};
};

/// First derivative: central inside, 3-point one-sided at the ends.
inline StencilRow d1_row(int k, int cells, double h) {
    const double s = 1.0 / (2.0 * h);
    if (k == 0) return {0, 3, {-3.0 * s, 4.0 * s, -1.0 * s, 0.0}};
    if (k == cells) return {cells - 2, 3, {1.0 * s, -4.0 * s, 3.0 * s, 0.0}};
    return {k - 1, 3, {-s, 0.0, s, 0.0}};
}

/// Second derivative: 3-point inside, 4-point one-sided (second order) at the
/// ends when the line has room, otherwise the neighbouring central stencil.
inline StencilRow d2_row(int k, int cells, double h) {
    const double s = 1.0 / (h * h);
    if (k == 0) {
        if (cells >= 3) return {0, 4, {2.0 * s, -5.0 * s, 4.0 * s, -1.0 * s}};
        return {0, 3, {s, -2.0 * s, s, 0.0}};
    }
    if (k == cells) {
        if (cells >= 3) return {cells - 3, 4, {-1.0 * s, 4.0 * s, -5.0 * s, 2.0 * s}};
        return {cells - 2, 3, {s, -2.0 * s, s, 0.0}};
    }
    return {k - 1, 3, {s, -2.0 * s, s, 0.0}};
}

struct Extents {
    std::array<int, 3> n;      // node counts per axis (x1, x2, t)
    std::array<std::size_t, 3> stride;
};

inline Extents extents(const SpaceTimeGrid& g, bool with_time) {
    Extents e;
    e.n = {g.n1 + 1, g.n2 + 1, with_time ? g.nt + 1 : 1};
    e.stride = {1, static_cast<std::size_t>(g.n1 + 1),
                static_cast<std::size_t>(g.n1 + 1) * static_cast<std::size_t>(g.n2 + 1)};
    return e;
}

/// Applies a 1-D stencil (or its transpose) along `ax` on every grid line.
/// `out` must be zero-initialised when transposing.
template <class RowFn>
void apply_along(const Extents& e, int ax, std::span<const double> in, std::span<double> out,
                 RowFn&& row, bool transpose) {
    const int o1 = (ax + 1) % 3;
    const int o2 = (ax + 2) % 3;
    const int len = e.n[static_cast<std::size_t>(ax)];
    const std::size_t st = e.stride[static_cast<std::size_t>(ax)];
    std::vector<StencilRow> rows(static_cast<std::size_t>(len));
    for (int k = 0; k < len; ++k) rows[static_cast<std::size_t>(k)] = row(k);
    for (int b = 0; b < e.n[static_cast<std::size_t>(o2)]; ++b) {
        for (int a = 0; a < e.n[static_cast<std::size_t>(o1)]; ++a) {
            const std::size_t base = static_cast<std::size_t>(a) * e.stride[static_cast<std::size_t>(o1)] +
                                     static_cast<std::size_t>(b) * e.stride[static_cast<std::size_t>(o2)];
            for (int k = 0; k < len; ++k) {
                const StencilRow& r = rows[static_cast<std::size_t>(k)];
                const std::size_t ok = base + static_cast<std::size_t>(k) * st;
                if (!transpose) {
                    double acc = 0.0;
                    for (int s = 0; s < r.len; ++s)
                        acc += r.c[static_cast<std::size_t>(s)] *
                               in[base + static_cast<std::size_t>(r.start + s) * st];
                    out[ok] = acc;
                } else {
                    const double v = in[ok];
                    for (int s = 0; s < r.len; ++s)
                        out[base + static_cast<std::size_t>(r.start + s) * st] +=
                            r.c[static_cast<std::size_t>(s)] * v;
                }
            }
        }
    }
}

inline int axis_id(Axis ax) { return ax == Axis::X1 ? 0 : ax == Axis::X2 ? 1 : 2; }

template <class Field>
Field diff_impl(const Field& f, Axis ax, int order, bool transpose, bool with_time) {
    require(order == 1 || order == 2, ErrorCode::InvalidArgument,
            "derivative order must be 1 or 2 (got " + std::to_string(order) + ")");
    require(with_time || ax != Axis::T, ErrorCode::InvalidArgument,
            "spatial fields have no time axis");
    const SpaceTimeGrid& g = f.grid();
    const int cells = g.cells(ax);
    const double h = g.step(ax);
    Field out(g);
    const auto e = extents(g, with_time);
    if (order == 1)
        apply_along(e, axis_id(ax), f.values(), out.values(),
                    [&](int k) { return d1_row(k, cells, h); }, transpose);
    else
        apply_along(e, axis_id(ax), f.values(), out.values(),
                    [&](int k) { return d2_row(k, cells, h); }, transpose);
    return out;
}

} // namespace detail

/// Partial derivative of order 1 or 2 along an axis.
inline ScalarField diff(const ScalarField& f, Axis ax, int order = 1) {
    return detail::diff_impl(f, ax, order, false, true);
}
/// Transpose of `diff` with respect to the Euclidean nodal inner product.
inline ScalarField diff_transpose(const ScalarField& f, Axis ax, int order = 1) {
    return detail::diff_impl(f, ax, order, true, true);
}
inline SpatialField diff(const SpatialField& f, Axis ax, int order = 1) {
    return detail::diff_impl(f, ax, order, false, false);
}
inline SpatialField diff_transpose(const SpatialField& f, Axis ax, int order = 1) {
    return detail::diff_impl(f, ax, order, true, false);
}

inline std::pair<SpatialField, SpatialField> gradient(const SpatialField& f) {
    return {diff(f, Axis::X1), diff(f, Axis::X2)};
}
inline std::pair<SpatialField, SpatialField> gradient(const ScalarField& f, int n) {
    return gradient(f.slice(n));
}

inline SpatialField laplacian(const SpatialField& f) {
    return diff(f, Axis::X1, 2) + diff(f, Axis::X2, 2);
}
inline SpatialField laplacian(const ScalarField& f, int n) { return laplacian(f.slice(n)); }
inline ScalarField laplacian(const ScalarField& f) {
    return diff(f, Axis::X1, 2) + diff(f, Axis::X2, 2);
}
inline ScalarField laplacian_transpose(const ScalarField& f) {
    return diff_transpose(f, Axis::X1, 2) + diff_transpose(f, Axis::X2, 2);
}

inline SpatialField divergence(const SpatialField& vx1, const SpatialField& vx2) {
    return diff(vx1, Axis::X1) + diff(vx2, Axis::X2);
}
inline ScalarField divergence(const ScalarField& vx1, const ScalarField& vx2) {
    return diff(vx1, Axis::X1) + diff(vx2, Axis::X2);
}

inline ScalarField time_derivative(const ScalarField& f, int order) {
    return diff(f, Axis::T, order);
}

/// Composite trapezoidal value of the integral of f from T/2 to t at every
/// node; negative orientation below T/2 and exactly zero on the T/2 slice.
inline ScalarField volterra_integral(const ScalarField& f) {
    const SpaceTimeGrid& g = f.grid();
    ScalarField out(g);
    const int m = g.mid();
    const double half = 0.5 * g.ht();
    const std::size_t S = g.spatial_size();
    auto in = f.values();
    auto o = out.values();
    for (std::size_t s = 0; s < S; ++s) {
        for (int n = m + 1; n <= g.nt; ++n) {
            const std::size_t k = static_cast<std::size_t>(n) * S + s;
            o[k] = o[k - S] + half * (in[k - S] + in[k]);
        }
        for (int n = m - 1; n >= 0; --n) {
            const std::size_t k = static_cast<std::size_t>(n) * S + s;
            o[k] = o[k + S] - half * (in[k] + in[k + S]);
        }
    }
    return out;
}

/// Exact transpose of `volterra_integral` (reverse sweep of its recursion).
inline ScalarField volterra_integral_transpose(const ScalarField& gbar) {
    const SpaceTimeGrid& g = gbar.grid();
    ScalarField out(g);
    const int m = g.mid();
    const double half = 0.5 * g.ht();
    const std::size_t S = g.spatial_size();
    auto in = gbar.values();
    auto o = out.values();
    std::vector<double> acc(static_cast<std::size_t>(g.nt + 1));
    for (std::size_t s = 0; s < S; ++s) {
        for (int n = 0; n <= g.nt; ++n)
            acc[static_cast<std::size_t>(n)] = in[static_cast<std::size_t>(n) * S + s];
        for (int n = g.nt; n > m; --n) {
            const double a = acc[static_cast<std::size_t>(n)];
            acc[static_cast<std::size_t>(n - 1)] += a;
            o[static_cast<std::size_t>(n - 1) * S + s] += half * a;
            o[static_cast<std::size_t>(n) * S + s] += half * a;
        }
        for (int n = 0; n < m; ++n) {
            const double a = acc[static_cast<std::size_t>(n)];
            acc[static_cast<std::size_t>(n + 1)] += a;
            o[static_cast<std::size_t>(n) * S + s] -= half * a;
            o[static_cast<std::size_t>(n + 1) * S + s] -= half * a;
        }
    }
    return out;
}

/// Trapezoidal weight of one axis node.
inline double trapezoid_weight(int k, int cells, double h) {
    return (k == 0 || k == cells) ? 0.5 * h : h;
}

/// Tensor-product trapezoidal weights over the space-time cylinder.
inline ScalarField quadrature_weights(const SpaceTimeGrid& g) {
    ScalarField w(g);
    for (int n = 0; n <= g.nt; ++n) {
        const double wt = trapezoid_weight(n, g.nt, g.ht());
        for (int j = 0; j <= g.n2; ++j) {
            const double wj = trapezoid_weight(j, g.n2, g.h2());
            for (int i = 0; i <= g.n1; ++i) w(i, j, n) = wt * wj * trapezoid_weight(i, g.n1, g.h1());
        }
    }
    return w;
}

inline double space_time_quadrature(const ScalarField& f) {
    const SpaceTimeGrid& g = f.grid();
    double acc = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
        const double wt = trapezoid_weight(n, g.nt, g.ht());
        for (int j = 0; j <= g.n2; ++j) {
            const double wj = wt * trapezoid_weight(j, g.n2, g.h2());
            for (int i = 0; i <= g.n1; ++i) acc += wj * trapezoid_weight(i, g.n1, g.h1()) * f(i, j, n);
        }
    }
    return acc;
}

inline double spatial_quadrature(const SpatialField& f) {
    const SpaceTimeGrid& g = f.grid();
    double acc = 0.0;
    for (int j = 0; j <= g.n2; ++j) {
        const double wj = trapezoid_weight(j, g.n2, g.h2());
        for (int i = 0; i <= g.n1; ++i) acc += wj * trapezoid_weight(i, g.n1, g.h1()) * f(i, j);
    }
    return acc;
}

namespace detail {

/// The ten derivative terms of the discrete H^2(Q_T) norm: the function, its
/// three first derivatives and its six second derivatives. Mixed derivatives
/// are compositions of first-derivative stencils.
struct H2Term {
    // Up to two factors; order 2 on a single axis uses the second-difference stencil.
    int count;
    std::array<Axis, 2> axes;
    std::array<int, 2> orders;
};

inline const std::array<H2Term, 10>& h2_terms() {
    static const std::array<H2Term, 10> terms{{
        {0, {Axis::X1, Axis::X1}, {0, 0}},
        {1, {Axis::X1, Axis::X1}, {1, 0}},
        {1, {Axis::X2, Axis::X2}, {1, 0}},
        {1, {Axis::T, Axis::T}, {1, 0}},
        {1, {Axis::X1, Axis::X1}, {2, 0}},
        {2, {Axis::X1, Axis::X2}, {1, 1}},
        {1, {Axis::X2, Axis::X2}, {2, 0}},
        {2, {Axis::X1, Axis::T}, {1, 1}},
        {2, {Axis::X2, Axis::T}, {1, 1}},
        {1, {Axis::T, Axis::T}, {2, 0}},
    }};
    return terms;
}

inline ScalarField apply_term(const H2Term& t, const ScalarField& u) {
    if (t.count == 0) return u;
    ScalarField r = diff(u, t.axes[0], t.orders[0]);
    if (t.count == 2) r = diff(r, t.axes[1], t.orders[1]);
    return r;
}

inline ScalarField apply_term_transpose(const H2Term& t, const ScalarField& u) {
    if (t.count == 0) return u;
    ScalarField r = u;
    if (t.count == 2) r = diff_transpose(r, t.axes[1], t.orders[1]);
    return diff_transpose(r, t.axes[0], t.orders[0]);
}

} // namespace detail

/// Discrete H^2(Q_T) inner product: trapezoidal quadrature of the products of
/// all derivatives up to order two.
inline double h2_inner(const ScalarField& u, const ScalarField& v) {
    double acc = 0.0;
    for (const auto& term : detail::h2_terms())
        acc += space_time_quadrature(detail::apply_term(term, u) * detail::apply_term(term, v));
    return acc;
}

inline double h2_norm(const ScalarField& u) { return std::sqrt(h2_inner(u, u)); }

/// Gram operator G with h2_inner(u, v) = <G u, v> in the Euclidean nodal sense.
inline ScalarField h2_gram_apply(const ScalarField& u) {
    const ScalarField w = quadrature_weights(u.grid());
    ScalarField out(u.grid());
    for (const auto& term : detail::h2_terms())
        out += detail::apply_term_transpose(term, w * detail::apply_term(term, u));
    return out;
}

/// Euclidean nodal inner product.
template <class Field>
double dot(const Field& a, const Field& b) {
    auto x = a.values();
    auto y = b.values();
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * y[k];
    return acc;
}

/// Square-root of the trapezoidal integral of f^2 over Q_T.
inline double l2_norm(const ScalarField& f) { return std::sqrt(space_time_quadrature(f * f)); }
inline double l2_norm(const SpatialField& f) { return std::sqrt(spatial_quadrature(f * f)); }

} // namespace mfgcip
