#pragma once

#include <Eigen/Sparse>

#include <functional>
#include <memory>

#include "specnet/fields.hpp"
#include "specnet/grid.hpp"

namespace specnet {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Coefficients (A, c) of the divergence-form operator  Lu = -div(A grad u) + c u,
/// with ellipticity constants and analytic derivative data carried by the fields.
struct CoefficientField {
    int dim = 1;
    // symmetric A stored as upper triangle: (0,0) (1,1) (2,2) (0,1) (0,2) (1,2)
    std::array<ScalarField, 6> a_entries;
    ScalarField c;
    double ellip_lower = 1.0;  // m
    double ellip_upper = 1.0;  // M
    double zeta = 0.0;         // inf c; 0 only allowed with eps_c = 0 downstream

    static int sym_index(int i, int j) {
        if (i > j) std::swap(i, j);
        if (i == j) return i;
        if (i == 0) return j == 1 ? 3 : 4;
        return 5;  // (1,2)
    }
    const ScalarField& a(int i, int j) const { return a_entries[sym_index(i, j)]; }
    ScalarField& a(int i, int j) { return a_entries[sym_index(i, j)]; }

    static CoefficientField isotropic(int dim, double a_val, double c_val) {
        CoefficientField f;
        f.dim = dim;
        for (auto& e : f.a_entries) e = ScalarField::zero(dim);
        for (int i = 0; i < dim; ++i) f.a(i, i) = ScalarField::constant(dim, a_val);
        f.c = ScalarField::constant(dim, c_val);
        f.ellip_lower = f.ellip_upper = a_val;
        f.zeta = c_val;
        return f;
    }
};

/// Assembled symmetric matrix on the interior nodes of a grid.
struct DiscreteOperator {
    Grid grid;
    SparseMatrix matrix;
    std::shared_ptr<const CoefficientField> coeff;
};

struct GrowthConstant {
    double C = 0.0;
    int d = 1;
};

/// (2d^2+1) * max{ max_{|a|<=3,ij} ||d^a a_ij||_inf, max_{|a|<=2} ||d^a c||_inf }.
GrowthConstant growth_constant(const CoefficientField& coeff, int d);

/// Flux-stencil assembly; the matrix equals its transpose by construction.
/// Throws ConfigError naming the node if ellipticity or c >= zeta fails there.
DiscreteOperator assemble(const CoefficientField& coeff, const Grid& grid,
                          std::uint64_t ellipticity_seed = 0x5eed5eedULL);

GridFunction apply(const DiscreteOperator& op, const GridFunction& u);
GridFunction apply_power(const DiscreteOperator& op, const GridFunction& u, int n);

/// Non-divergence (expanded) action -sum a_ij d_ij u - sum_j (sum_i d_i a_ij) d_j u + c u,
/// with finite-difference u-derivatives and analytic coefficient derivatives.
/// This is the form the appendix algebra (chain rule, derived operators) is stated in.
GridFunction expanded_apply(const CoefficientField& coeff, const GridFunction& u);

/// Action of the derived operator L_k (one axis) or L_kl (two axes):
/// coefficients differentiated analytically, u differentiated by stencils.
struct DerivedOperator {
    std::shared_ptr<const CoefficientField> coeff;
    std::array<int, 2> axes{0, -1};  // second -1 for single-axis L_k

    GridFunction operator()(const GridFunction& u) const;
};
DerivedOperator derived_operator(const CoefficientField& coeff, int k, const Grid& grid);
DerivedOperator derived_operator(const CoefficientField& coeff, int k, int l, const Grid& grid);

/// Relative L^2 residual of the identity
///   grad_k(L^n u) = sum_{i=1..n} (L^{n-i} o L_k o L^{i-1}) u + L^n(grad_k u),
/// with every operator in expanded form. Zero input returns 0 by convention.
double chain_rule_residual(const DiscreteOperator& op, const GridFunction& u, int n, int k);

struct OrderBoundRecord {
    int n = 0;
    double lhs = 0.0;   // discrete ||L^n u||
    double rhs = 0.0;   // (n!)^2 C^n max_{|a|<=n+2} ||d^a u||  (analytic norms)
    bool pass = false;
};

/// Checks ||L^n u|| <= (n!)^2 C^n max_{|alpha|<=n+2} ||d^alpha u|| with the
/// caller supplying analytic derivative norms of u.
OrderBoundRecord check_order_bounds(const DiscreteOperator& op, const GridFunction& u, int n,
                                    const std::function<double(const MultiIndex&)>& deriv_norm);

}  // namespace specnet
