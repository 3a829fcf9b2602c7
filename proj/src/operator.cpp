#include "specnet/operator.hpp"

#include <random>
#include <vector>

namespace specnet {

GrowthConstant growth_constant(const CoefficientField& coeff, int d) {
    double sup_a = 0.0;
    for (const auto& alpha : multi_indices_up_to(d, 3))
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                sup_a = std::max(sup_a, coeff.a(i, j).sup_deriv(alpha));
    double sup_c = 0.0;
    for (const auto& alpha : multi_indices_up_to(d, 2))
        sup_c = std::max(sup_c, coeff.c.sup_deriv(alpha));
    return GrowthConstant{(2.0 * d * d + 1.0) * std::max(sup_a, sup_c), d};
}

namespace {

void check_node_ellipticity(const CoefficientField& coeff, const Grid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int d = grid.dim;
    const int trials = 100;
    std::vector<std::array<double, 3>> xis(trials);
    for (auto& xi : xis) {
        for (int a = 0; a < d; ++a) xi[a] = gauss(rng);
    }
    const double tol = 1e-12;
    for (std::int64_t node = 0; node < grid.num_nodes(); ++node) {
        const Point x = grid.coords(node);
        double A[3][3] = {};
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) A[i][j] = A[j][i] = coeff.a(i, j).value(x);
        for (const auto& xi : xis) {
            double q = 0.0, nrm2 = 0.0;
            for (int i = 0; i < d; ++i) {
                nrm2 += xi[i] * xi[i];
                for (int j = 0; j < d; ++j) q += A[i][j] * xi[i] * xi[j];
            }
            const double lo = coeff.ellip_lower * nrm2;
            const double hi = coeff.ellip_upper * nrm2;
            if (q < lo * (1.0 - tol) - tol || q > hi * (1.0 + tol) + tol)
                throw ConfigError("ellipticity violated at node " + std::to_string(node));
        }
        if (coeff.c.value(x) < coeff.zeta - tol)
            throw ConfigError("c(x) < zeta at node " + std::to_string(node));
    }
}

}  // namespace

DiscreteOperator assemble(const CoefficientField& coeff, const Grid& grid,
                          std::uint64_t ellipticity_seed) {
    if (coeff.dim != grid.dim) throw ConfigError("coefficient dimension does not match grid");
    check_node_ellipticity(coeff, grid, ellipticity_seed);

    const int d = grid.dim;
    const int n = grid.n;
    const double h = grid.h;
    const std::int64_t total = grid.num_nodes();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(total) * (2 * d + 1));

    // diagonal part of A: flux differences with a_ii at edge midpoints
    for (int a = 0; a < d; ++a) {
        std::int64_t stride = 1;
        for (int b = 0; b < a; ++b) stride *= n;
        const double invh2 = 1.0 / (h * h);
        for (std::int64_t i = 0; i < total; ++i) {
            const auto idx = grid.unflatten(i);
            Point x = grid.coords(i);
            Point xm = x, xp = x;
            xm[a] -= 0.5 * h;
            xp[a] += 0.5 * h;
            const double wm = coeff.a(a, a).value(xm) * invh2;
            const double wp = coeff.a(a, a).value(xp) * invh2;
            trip.emplace_back(i, i, wm + wp);
            if (idx[a] > 0) trip.emplace_back(i, i - stride, -wm);
            if (idx[a] < n - 1) trip.emplace_back(i, i + stride, -wp);
        }
    }

    // off-diagonal part: cell-centered averaged differences, symmetric pair scatter
    if (d >= 2) {
        std::array<std::int64_t, 3> stride{1, 1, 1};
        for (int a = 1; a < d; ++a) stride[a] = stride[a - 1] * n;

        // enumerate cells by boundary-inclusive low corner in {0..n}^d
        std::array<int, 3> cells{1, 1, 1};
        for (int a = 0; a < d; ++a) cells[a] = n + 1;
        std::vector<std::pair<std::int64_t, double>> gi, gj;
        for (int ci = 0; ci < cells[0]; ++ci)
            for (int cj = 0; cj < cells[1]; ++cj)
                for (int ck = 0; ck < cells[2]; ++ck) {
                    const std::array<int, 3> corner{ci, cj, ck};
                    Point center{0, 0, 0};
                    for (int a = 0; a < d; ++a) center[a] = (corner[a] + 0.5) * h;

                    for (int i = 0; i < d; ++i)
                        for (int j = i + 1; j < d; ++j) {
                            if (coeff.a(i, j).is_zero()) continue;
                            const double q = coeff.a(i, j).value(center);
                            if (q == 0.0) continue;
                            // averaged forward difference along one axis over the
                            // 2^{d-1} transverse corner pairs, as a sparse vector
                            auto gradient_row = [&](int axis, std::vector<std::pair<std::int64_t, double>>& out) {
                                out.clear();
                                const double w = 1.0 / (h * (1 << (d - 1)));
                                for (int o1 = 0; o1 <= 1; ++o1)
                                    for (int o2 = 0; o2 <= (d >= 3 ? 1 : 0); ++o2) {
                                        std::array<int, 3> off{0, 0, 0};
                                        int t = 0;
                                        for (int a = 0; a < d; ++a) {
                                            if (a == axis) continue;
                                            off[a] = (t == 0 ? o1 : o2);
                                            ++t;
                                        }
                                        for (int side = 0; side <= 1; ++side) {
                                            std::array<int, 3> bc = corner;  // boundary-inclusive coords
                                            for (int a = 0; a < 3; ++a) bc[a] += off[a];
                                            bc[axis] += side;
                                            // interior node index or skip (zero boundary)
                                            bool interior = true;
                                            std::array<int, 3> ii{0, 0, 0};
                                            for (int a = 0; a < d; ++a) {
                                                ii[a] = bc[a] - 1;
                                                if (ii[a] < 0 || ii[a] >= n) interior = false;
                                            }
                                            if (!interior) continue;
                                            out.emplace_back(grid.flatten(ii), side == 1 ? w : -w);
                                        }
                                    }
                            };
                            gradient_row(i, gi);
                            gradient_row(j, gj);
                            for (const auto& [ri, vi] : gi)
                                for (const auto& [rj, vj] : gj) {
                                    trip.emplace_back(ri, rj, q * vi * vj);
                                    trip.emplace_back(rj, ri, q * vi * vj);
                                }
                        }
                }
    }

    // zeroth-order term
    for (std::int64_t i = 0; i < total; ++i) {
        const double cv = coeff.c.value(grid.coords(i));
        if (cv != 0.0) trip.emplace_back(i, i, cv);
    }

    SparseMatrix m(total, total);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    DiscreteOperator op;
    op.grid = grid;
    op.matrix = std::move(m);
    op.coeff = std::make_shared<CoefficientField>(coeff);
    return op;
}

GridFunction apply(const DiscreteOperator& op, const GridFunction& u) {
    if (u.grid != op.grid) throw ConfigError("grid mismatch in operator application");
    // extended-precision accumulation: composed applications (L^n, chain-rule
    // checks) otherwise amplify the matvec round-off by eps * ||L||^n
    const std::int64_t n = u.values.size();
    std::vector<long double> acc(static_cast<std::size_t>(n), 0.0L);
    for (Eigen::Index outer = 0; outer < op.matrix.outerSize(); ++outer)
        for (SparseMatrix::InnerIterator it(op.matrix, outer); it; ++it)
            acc[it.row()] += static_cast<long double>(it.value()) * u.values[it.col()];
    Vector out(n);
    for (std::int64_t i = 0; i < n; ++i) out[i] = static_cast<double>(acc[i]);
    return GridFunction(u.grid, std::move(out));
}

GridFunction apply_power(const DiscreteOperator& op, const GridFunction& u, int n) {
    if (n < 0) throw ConfigError("operator power requires n >= 0");
    GridFunction v = u;
    for (int i = 0; i < n; ++i) v = apply(op, v);
    return v;
}

GridFunction expanded_apply(const CoefficientField& coeff, const GridFunction& u) {
    const Grid& g = u.grid;
    const int d = g.dim;
    Vector out = Vector::Zero(g.num_nodes());

    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const ScalarField& aij = coeff.a(i, j);
            if (aij.is_zero()) continue;
            MultiIndex dij = MultiIndex::axis(i);
            dij.orders[j] += 1;
            GridFunction uij = partial(u, dij);
            GridFunction uj = partial(u, MultiIndex::axis(j));
            for (std::int64_t p = 0; p < g.num_nodes(); ++p) {
                const Point x = g.coords(p);
                out[p] -= aij.value(x) * uij[p];
                out[p] -= aij.deriv(MultiIndex::axis(i), x) * uj[p];
            }
        }
    if (!coeff.c.is_zero())
        for (std::int64_t p = 0; p < g.num_nodes(); ++p)
            out[p] += coeff.c.value(g.coords(p)) * u[p];
    return GridFunction(g, std::move(out));
}

GridFunction DerivedOperator::operator()(const GridFunction& u) const {
    const Grid& g = u.grid;
    const int d = coeff->dim;
    MultiIndex dk = MultiIndex::axis(axes[0]);
    if (axes[1] >= 0) dk.orders[axes[1]] += 1;

    Vector out = Vector::Zero(g.num_nodes());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const ScalarField& aij = coeff->a(i, j);
            if (aij.is_zero()) continue;
            MultiIndex dij = MultiIndex::axis(i);
            dij.orders[j] += 1;
            GridFunction uij = partial(u, dij);
            GridFunction uj = partial(u, MultiIndex::axis(j));
            MultiIndex dk_i = dk;
            dk_i.orders[i] += 1;
            for (std::int64_t p = 0; p < g.num_nodes(); ++p) {
                const Point x = g.coords(p);
                out[p] -= aij.deriv(dk, x) * uij[p];
                out[p] -= aij.deriv(dk_i, x) * uj[p];
            }
        }
    if (!coeff->c.is_zero())
        for (std::int64_t p = 0; p < g.num_nodes(); ++p)
            out[p] += coeff->c.deriv(dk, g.coords(p)) * u[p];
    return GridFunction(g, std::move(out));
}

DerivedOperator derived_operator(const CoefficientField& coeff, int k, const Grid& grid) {
    if (k < 0 || k >= grid.dim) throw ConfigError("derived operator axis out of range");
    DerivedOperator op;
    op.coeff = std::make_shared<CoefficientField>(coeff);
    op.axes = {k, -1};
    return op;
}

DerivedOperator derived_operator(const CoefficientField& coeff, int k, int l, const Grid& grid) {
    if (k < 0 || k >= grid.dim || l < 0 || l >= grid.dim)
        throw ConfigError("derived operator axis out of range");
    DerivedOperator op;
    op.coeff = std::make_shared<CoefficientField>(coeff);
    op.axes = {k, l};
    return op;
}

double chain_rule_residual(const DiscreteOperator& op, const GridFunction& u, int n, int k) {
    if (n < 1 || n > 3) throw ConfigError("chain rule residual requires n in {1,2,3}");
    if (k < 0 || k >= op.grid.dim) throw ConfigError("chain rule axis out of range");
    const CoefficientField& coeff = *op.coeff;

    std::vector<GridFunction> powers;  // E^0 u .. E^n u
    powers.push_back(u);
    for (int i = 1; i <= n; ++i) powers.push_back(expanded_apply(coeff, powers.back()));

    GridFunction lhs = partial(powers[n], MultiIndex::axis(k));
    const double denom = norm_l2(lhs);
    if (denom == 0.0) return 0.0;

    DerivedOperator lk = derived_operator(coeff, k, op.grid);
    GridFunction rhs = GridFunction::zero(u.grid);
    for (int i = 1; i <= n; ++i) {
        GridFunction term = lk(powers[i - 1]);
        for (int j = 0; j < n - i; ++j) term = expanded_apply(coeff, term);
        rhs = rhs + term;
    }
    GridFunction tail = partial(u, MultiIndex::axis(k));
    for (int j = 0; j < n; ++j) tail = expanded_apply(coeff, tail);
    rhs = rhs + tail;

    return norm_l2(lhs - rhs) / denom;
}

OrderBoundRecord check_order_bounds(const DiscreteOperator& op, const GridFunction& u, int n,
                                    const std::function<double(const MultiIndex&)>& deriv_norm) {
    if (n < 0 || n > 3) throw ConfigError("order bound check requires n <= 3");
    OrderBoundRecord rec;
    rec.n = n;
    rec.lhs = norm_l2(apply_power(op, u, n));

    const GrowthConstant gc = growth_constant(*op.coeff, op.grid.dim);
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    double max_norm = 0.0;
    for (const auto& alpha : multi_indices_up_to(op.grid.dim, n + 2))
        max_norm = std::max(max_norm, deriv_norm(alpha));
    rec.rhs = fact * fact * std::pow(gc.C, n) * max_norm;

    const double h2 = op.grid.h * op.grid.h;
    rec.pass = rec.lhs <= rec.rhs * (1.0 + 1e-6) + h2 * std::max(1.0, rec.rhs);
    return rec;
}

}  // namespace specnet
