#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specnet/operator.hpp"

namespace specnet {

/// First `count` eigenpairs of a DiscreteOperator, orthonormal in the
/// discrete (h^d-weighted) L^2 inner product, eigenvalues ascending.
struct EigenDecomposition {
    Grid grid;
    std::vector<double> eigenvalues;
    Eigen::MatrixXd eigenvectors;    // columns phi_i, <phi_i,phi_j>_h = delta_ij
    std::vector<double> residuals;   // ||L phi - lambda phi||_h per pair

    int count() const { return static_cast<int>(eigenvalues.size()); }
    GridFunction eigenfunction(int i) const { return GridFunction(grid, eigenvectors.col(i)); }
};

/// Matrices up to this many unknowns use the dense symmetric solver; larger
/// ones go through shift-invert block Lanczos.
inline constexpr std::int64_t kDenseEigensolveLimit = 2000;

EigenDecomposition eigensolve(const DiscreteOperator& op, int count,
                              std::uint64_t seed = 0x51ac5eedULL,
                              bool force_lanczos = false);

/// Orthogonal projector onto the span of the first k eigenfunctions.
struct SpectralProjector {
    const EigenDecomposition* decomposition = nullptr;
    int k = 0;

    SpectralProjector() = default;
    SpectralProjector(const EigenDecomposition& eig, int rank) : decomposition(&eig), k(rank) {
        if (rank < 0 || rank > eig.count()) throw ConfigError("projector rank out of range");
    }
};

GridFunction project(const SpectralProjector& p, const GridFunction& g);

/// Operator norm of P - P~ in the discrete L^2 inner product, by power
/// iteration on (P - P~)^2 to 1e-10 relative eigenvalue tolerance.
double projector_distance(const SpectralProjector& p, const SpectralProjector& pt,
                          std::uint64_t seed = 0x9e3779b9ULL);

double rayleigh(const DiscreteOperator& op, const GridFunction& v);

/// CSV with columns index,eigenvalue,residual.
std::string eigenpairs_csv(const EigenDecomposition& eig);

}  // namespace specnet
