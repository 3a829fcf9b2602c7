#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specnet/spectral.hpp"

namespace specnet {

/// Variational objective J(v) = 1/2 <Lv,v> - <f,v>.
double objective(const DiscreteOperator& op, const GridFunction& f, const GridFunction& v);

/// Direct sparse solve of L u = f (LDLT).
GridFunction solve_direct(const DiscreteOperator& op, const GridFunction& f);

struct DescentConfig {
    int k = 1;
    int T = 0;
    std::optional<GridFunction> u0;  // default: zero
};

struct StepRecord {
    int t = 0;
    double error = 0.0;      // ||u_t - u*~||_{L^2}
    double ratio = 0.0;      // error_t / error_{t-1}; 0 for t = 0 or once converged
    double objective = 0.0;  // J(u_t) on the grid iterate
};

struct ConvergenceTrace {
    std::vector<StepRecord> steps;  // t = 0..T
    double rho = 0.0;               // (lambda_k - lambda_1)/(lambda_k + lambda_1)
    double eta = 0.0;               // 2/(lambda_1 + lambda_k)
    double max_ratio = 0.0;
    double max_span_residual = 0.0;      // max_t ||u_t - P_k u_t|| / max(||u_t||, eps)
    double u0_projection_residual = 0.0; // dropped out-of-span part of the supplied u0
    GridFunction u_final;                // grid iterate at t = T
    GridFunction u_star;                 // eigenbasis reference solution
};

/// Gradient descent u_{t+1} = u_t - eta (L~ u_t - f~_spn) restricted to the
/// span of the first k eigenfunctions. The grid iterate runs in double; the
/// error/ratio bookkeeping runs the same recursion in the eigenbasis in
/// extended precision, since late-iteration ratios sit far below the
/// double-precision noise floor of the vector iteration.
ConvergenceTrace gd_run(const DiscreteOperator& op, const GridFunction& f_spn,
                        const EigenDecomposition& eig, const DescentConfig& cfg);

std::string trace_csv(const ConvergenceTrace& trace);

struct InitializationBound {
    double bound = 0.0;          // ||f|| / lambda_1
    double solution_norm = 0.0;  // ||u*|| from the direct solve
    bool holds = false;
};
InitializationBound initialization_bound(const DiscreteOperator& op, const GridFunction& f,
                                         double lambda1);

struct BudgetInputs {
    double delta = 0.0, gamma = 0.0;
    double eps_spn = 0.0, eps_nn = 0.0;
    double R = 0.0, eta = 0.0, C = 0.0;
    double lambda1 = 0.0, lambda_k = 0.0;        // unperturbed
    double lambda1_t = 0.0, lambda_k_t = 0.0;    // perturbed, for rho
    double f_norm = 0.0, ustar_norm = 0.0;
    int T = 0;
    double measured_error = 0.0;  // ||u* - u_T|| from the pipeline
    double slack = 0.0;           // discretization slack added to the budget
};

/// Every scalar in the main error bound ||u* - u_T|| <= eps + eps~.
struct BoundReport {
    double delta = 0.0, gamma = 0.0;
    double eps_spn = 0.0, eps_nn = 0.0;
    double R = 0.0, eta = 0.0, rho = 0.0, C = 0.0;
    double eps = 0.0;  // rho^T R
    double etil_source = 0.0;      // eps_spn / lambda_1
    double etil_alignment = 0.0;   // (delta/lambda_1) ||f|| / (gamma - delta)
    double etil_relative = 0.0;    // delta ||u*||
    double etil_network = 0.0;     // (max{1, T^2 C eta})^T (eps_spn + eps_nn + 4(1+delta/(gamma-delta)) lambda_k^T ||f||)
    double eps_tilde = 0.0;
    double measured = 0.0;
    double slack = 0.0;
    int T = 0;
    bool hypotheses_ok = false;  // gamma > delta and T within the cap (vacuous at delta = 0)
    bool asserted = false;       // false when gamma - delta < 10 delta (blow-up regime): report only
    bool within_budget = false;
    std::string status;          // "pass" | "tight" | "inapplicable"
};

BoundReport error_budget(const BudgetInputs& in);

std::string bound_report_json(const BoundReport& r);

}  // namespace specnet
