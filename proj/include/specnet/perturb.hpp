#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specnet/descent.hpp"
#include "specnet/spectral.hpp"

namespace specnet {

enum class PerturbShape { Shift, Scale, Bump };

std::string shape_name(PerturbShape s);
PerturbShape shape_from_name(const std::string& name);

/// Requested sup-norm perturbation magnitudes; the realized fields are
/// rescaled so the sup over all assembly sample points equals eps exactly.
struct PerturbationSpec {
    double eps_a = 0.0;
    double eps_c = 0.0;
    PerturbShape shape = PerturbShape::Shift;
};

/// How the requested magnitudes were realized (normalization constants),
/// so the network-side coefficient graphs can be perturbed identically.
struct PerturbRealization {
    double a_amount = 0.0;         // Shift: added constant; Scale: multiplier s; Bump: amplitude
    double c_amount = 0.0;
    double continuum_excess = 0.0; // estimated continuum sup minus sampled sup (bump only)
};

struct PerturbedOperator {
    CoefficientField field;
    DiscreteOperator op;
    double realized_eps_a = 0.0;     // sup over sample points, == requested by construction
    double realized_eps_c = 0.0;
    PerturbRealization realization;
};

CoefficientField perturb_field(const CoefficientField& base, const PerturbationSpec& spec,
                               const Grid& grid, PerturbRealization* realization = nullptr);
PerturbedOperator perturb_operator(const CoefficientField& base, const PerturbationSpec& spec,
                                   const Grid& grid);

/// delta = max{eps_A/m, eps_c/zeta}; zeta = 0 is only legal with eps_c = 0.
double relative_perturbation(const CoefficientField& base, const PerturbationSpec& spec);

struct LemmaRecord {
    std::string lemma;
    std::string shape;
    double eps = 0.0;
    int n = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    std::string status;  // "pass" | "fail" | "inapplicable"
};

/// max over random u of <(L~-L)u,u>/<Lu,u> against delta.
LemmaRecord relative_form_bound(const DiscreteOperator& l, const DiscreteOperator& lt,
                                double delta, int trials, std::uint64_t seed = 7);

/// max over random u of <(L^{-1}L~ - I)u,u>/||u||^2 against delta.
LemmaRecord relative_form_inverse(const DiscreteOperator& l, const DiscreteOperator& lt,
                                  double delta, int trials, std::uint64_t seed = 11);

/// sup_i |1/lambda_i - 1/lambda~_i| <= delta.
LemmaRecord weyl_check(const EigenDecomposition& eig, const EigenDecomposition& eig_t,
                       double delta);

/// ||P_k - P~_k|| <= delta/(gamma - delta).
LemmaRecord davis_kahan_check(const SpectralProjector& p, const SpectralProjector& pt,
                              double delta, double gamma);

/// ||P_k f - P~_k f|| <= delta/(gamma - delta) ||f||.
LemmaRecord source_projection_distance(const GridFunction& f, const SpectralProjector& p,
                                       const SpectralProjector& pt, double delta, double gamma);

/// lambda~_i^n <= (1 + 2 n delta lambda_k) lambda_i^n for i <= k,
/// under the hypothesis n delta lambda_k <= 1/20.
LemmaRecord eigen_power_check(const EigenDecomposition& eig, const EigenDecomposition& eig_t,
                              double delta, int n, int k);

/// part 1: ||L~^n (f_nn - f_spn)||   <= (n!)^2 C^n eps_pair_n
/// part 2: ||L~^n (f_nn - f~_spn)||  <= (n!)^2 C^n eps_pair_n + 4(1+delta/(gamma-delta)) lambda_k^n ||f||
/// eps_pair_n is the analytic max_{|a|<=n+2} ||d^a (f_nn - f_spn)|| supplied by the caller.
LemmaRecord ltilde_application_check(const DiscreteOperator& lt, const GridFunction& f_nn,
                                     const GridFunction& f_spn, const GridFunction& f_spn_t,
                                     int n, int part, double growth_c, double eps_pair_n,
                                     double delta, double gamma, double lambda_k, double f_norm);

/// Consequence of the composition-peeling argument: ||L^{-n} L~^n|| <= 1 + 2 n delta
/// (operator norm by power iteration), under n delta <= 1/10.
LemmaRecord power_ratio_check(const DiscreteOperator& l, const DiscreteOperator& lt,
                              double delta, int n, std::uint64_t seed = 13);

struct SweepConfig {
    CoefficientField base;
    Grid grid;
    int k = 5;
    std::vector<PerturbShape> shapes{PerturbShape::Shift, PerturbShape::Scale, PerturbShape::Bump};
    std::vector<double> eps_list{0.0, 1e-5, 1e-4, 1e-3};
    int trials = 64;
    std::uint64_t seed = 1;
};

/// Runs every lemma check for every (shape, eps); inapplicable cases are
/// recorded, never dropped.
std::vector<LemmaRecord> run_sweep(const SweepConfig& cfg);

std::string sweep_json(const std::vector<LemmaRecord>& records);

}  // namespace specnet
