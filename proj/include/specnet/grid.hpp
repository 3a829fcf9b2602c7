#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

#include "specnet/errors.hpp"

namespace specnet {

using Vector = Eigen::VectorXd;
using Point = std::array<double, 3>;  // coordinates, unused axes zero

/// Uniform grid on the interior of (0,1)^d. Boundary nodes carry the
/// homogeneous Dirichlet value 0 and are never stored.
struct Grid {
    int dim = 1;      // d in {1,2,3}
    int n = 3;        // interior points per axis
    double h = 0.25;  // 1/(n+1)

    Grid() = default;
    Grid(int dim_, int n_) : dim(dim_), n(n_), h(1.0 / (n_ + 1)) {
        if (dim < 1 || dim > 3) throw ConfigError("grid dimension must be 1, 2 or 3");
        if (n < 3) throw ConfigError("grid needs n >= 3 points per axis");
    }

    std::int64_t num_nodes() const {
        std::int64_t m = 1;
        for (int a = 0; a < dim; ++a) m *= n;
        return m;
    }

    // axis-0-fastest flattening of the per-axis index (each in [0, n))
    std::int64_t flatten(const std::array<int, 3>& idx) const {
        std::int64_t r = 0;
        for (int a = dim - 1; a >= 0; --a) r = r * n + idx[a];
        return r;
    }
    std::array<int, 3> unflatten(std::int64_t node) const {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = 0; a < dim; ++a) {
            idx[a] = static_cast<int>(node % n);
            node /= n;
        }
        return idx;
    }
    Point coords(std::int64_t node) const {
        auto idx = unflatten(node);
        Point x{0.0, 0.0, 0.0};
        for (int a = 0; a < dim; ++a) x[a] = (idx[a] + 1) * h;
        return x;
    }

    double quad_weight() const { return std::pow(h, dim); }

    friend bool operator==(const Grid& a, const Grid& b) { return a.dim == b.dim && a.n == b.n; }
    friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }
};

/// Real-valued function sampled on interior nodes; extension by zero onto
/// the boundary is implicit in every stencil.
struct GridFunction {
    Grid grid;
    Vector values;

    GridFunction() = default;
    GridFunction(const Grid& g, Vector v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.num_nodes())
            throw ConfigError("grid function length does not match interior node count");
    }
    static GridFunction zero(const Grid& g) { return GridFunction(g, Vector::Zero(g.num_nodes())); }

    double operator[](std::int64_t i) const { return values[i]; }
};

inline void require_same_grid(const GridFunction& u, const GridFunction& v) {
    if (u.grid != v.grid) throw ConfigError("grid mismatch between operands");
}

/// Multi-index of per-axis derivative orders.
struct MultiIndex {
    std::array<int, 3> orders{0, 0, 0};

    MultiIndex() = default;
    MultiIndex(int a0, int a1 = 0, int a2 = 0) : orders{a0, a1, a2} {}
    static MultiIndex axis(int a, int m = 1) {
        MultiIndex mi;
        mi.orders[a] = m;
        return mi;
    }
    int order() const { return orders[0] + orders[1] + orders[2]; }
    int operator[](int a) const { return orders[a]; }
};

// ---- discrete L^2(Omega) structure -----------------------------------------

inline double inner_product(const GridFunction& u, const GridFunction& v) {
    require_same_grid(u, v);
    return u.grid.quad_weight() * u.values.dot(v.values);
}

inline double norm_l2(const GridFunction& u) {
    return std::sqrt(u.grid.quad_weight()) * u.values.norm();
}

inline double norm_max(const GridFunction& u) {
    return u.values.size() == 0 ? 0.0 : u.values.cwiseAbs().maxCoeff();
}

// ---- finite-difference derivatives -----------------------------------------

namespace detail {

// One sweep of a central stencil along `axis`; order 1 or 2. Neighbors
// outside the interior use the zero Dirichlet extension.
inline Vector stencil_sweep(const Grid& g, const Vector& v, int axis, int order) {
    const std::int64_t total = g.num_nodes();
    Vector out(total);
    std::int64_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= g.n;
    const double inv2h = 1.0 / (2.0 * g.h);
    const double invh2 = 1.0 / (g.h * g.h);
    for (std::int64_t i = 0; i < total; ++i) {
        const int pos = static_cast<int>((i / stride) % g.n);
        const double left = pos > 0 ? v[i - stride] : 0.0;
        const double right = pos < g.n - 1 ? v[i + stride] : 0.0;
        out[i] = (order == 1) ? (right - left) * inv2h
                              : (right - 2.0 * v[i] + left) * invh2;
    }
    return out;
}

}  // namespace detail

/// Central second-order approximation of the mixed partial `alpha` of u.
/// Per-axis orders are realized as compositions of the 3-point first- and
/// second-difference stencils (two for each factor of 2, one for the rest).
inline GridFunction partial(const GridFunction& u, const MultiIndex& alpha) {
    if (alpha.order() > 4) throw ConfigError("partial(): derivative order above 4 unsupported");
    for (int a = 0; a < 3; ++a)
        if (alpha[a] < 0) throw ConfigError("partial(): negative derivative order");
    if (alpha.order() == 0) return u;
    Vector v = u.values;
    for (int a = 0; a < u.grid.dim; ++a) {
        int m = alpha[a];
        while (m >= 2) {
            v = detail::stencil_sweep(u.grid, v, a, 2);
            m -= 2;
        }
        if (m == 1) v = detail::stencil_sweep(u.grid, v, a, 1);
    }
    for (int a = u.grid.dim; a < 3; ++a)
        if (alpha[a] != 0) throw ConfigError("partial(): derivative along axis beyond grid dimension");
    return GridFunction(u.grid, std::move(v));
}

/// Evaluate a closed-form field at every interior node.
template <class F>
GridFunction sample(F&& f, const Grid& g) {
    Vector v(g.num_nodes());
    for (std::int64_t i = 0; i < g.num_nodes(); ++i) {
        const double val = f(g.coords(i));
        if (!std::isfinite(val))
            throw NumericalError("sample(): non-finite value at node " + std::to_string(i));
        v[i] = val;
    }
    return GridFunction(g, std::move(v));
}

// ---- small value algebra ----------------------------------------------------

inline GridFunction operator+(const GridFunction& u, const GridFunction& v) {
    require_same_grid(u, v);
    return GridFunction(u.grid, u.values + v.values);
}
inline GridFunction operator-(const GridFunction& u, const GridFunction& v) {
    require_same_grid(u, v);
    return GridFunction(u.grid, u.values - v.values);
}
inline GridFunction operator*(double s, const GridFunction& u) {
    return GridFunction(u.grid, s * u.values);
}

/// All multi-indices with |alpha| <= max_order over the first `dim` axes.
inline std::vector<MultiIndex> multi_indices_up_to(int dim, int max_order) {
    std::vector<MultiIndex> out;
    for (int a0 = 0; a0 <= max_order; ++a0)
        for (int a1 = 0; a1 <= (dim > 1 ? max_order - a0 : 0); ++a1)
            for (int a2 = 0; a2 <= (dim > 2 ? max_order - a0 - a1 : 0); ++a2)
                out.push_back(MultiIndex(a0, a1, a2));
    return out;
}

}  // namespace specnet
