#pragma once

#include "specnet/config.hpp"
#include "specnet/descent.hpp"
#include "specnet/presets.hpp"

namespace specnet {

// Discretization slack constants, measured once on the constant-coefficient
// suite and pinned (see the graph/grid equivalence tests).
inline constexpr double kGraphGridSlack = 8.0;   // max-node gap <= this * h^2
inline constexpr double kBudgetSlack = 8.0;      // budget comparison slack = this * h^2

struct SolveOutput {
    Grid grid;
    CoefficientPreset base, pert;  // pert == base when unperturbed
    FnnPreset fnn;
    DiscreteOperator op, op_t;
    EigenDecomposition eig, eig_t;
    GridFunction f, f_spn_t, u_star;
    ConvergenceTrace trace;
    InitializationBound init;
    BoundReport budget;
    double delta = 0.0, gamma = 0.0, eps_spn = 0.0, eps_nn = 0.0, growth_c = 0.0;
    double measured_error = 0.0;  // ||u* - u_T|| with the grid iterate
    std::vector<std::string> violations;
};

SolveOutput run_solve(const PipelineConfig& cfg);

struct NetgrowOutput {
    GrowthAudit audit;
    long long shape_bound = 0;  // unrolled main-theorem shape bound for N_T
    bool shape_ok = false;
    double eta = 0.0;
};

NetgrowOutput run_netgrow(const PipelineConfig& cfg);

struct CertifyOutput {
    SolveOutput solve;
    GrowthAudit audit;
    ResidualTrace residual;
    bool caps_asserted = false;    // residual caps checked (source analytically in span)
    bool caps_ok = true;
    double measured_graph_error = 0.0;  // ||u* - u^_T(grid)||
    double max_node_gap = 0.0;          // max_t max-node |u^_t - eigenbasis iterate|
    double slack = 0.0;
    BoundReport budget;                 // budget against the graph iterate
    std::string status;                 // "tight" | "pass" | "inapplicable" | "fail"
};

CertifyOutput run_certify(const PipelineConfig& cfg);

/// Per-step max-node discrepancy between the network iterates and the
/// eigenbasis grid iterates (both driven by the same eta and sources).
std::vector<double> graph_grid_gaps(const DiscreteOperator& op_t, const EigenDecomposition& eig_t,
                                    int k, const GridFunction& f_spn_t,
                                    const CoefficientGraphs& coeff, const ExprGraph& f_nn, int T);

std::string certificate_json(const CertifyOutput& out);

}  // namespace specnet
