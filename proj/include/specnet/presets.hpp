#pragma once

#include <map>
#include <string>

#include "specnet/exprgraph.hpp"
#include "specnet/operator.hpp"
#include "specnet/perturb.hpp"

namespace specnet {

/// A coefficient preset carries the same (A, c) twice: as closed-form fields
/// for the grid/analysis side and as expression graphs for the network side.
struct CoefficientPreset {
    CoefficientField field;
    CoefficientGraphs graphs;
};

/// Presets: "laplace" (A=I, c=0), "constant" {a,c}, "affine" {slope,c},
/// "quadratic" {curv,c}, "trig" {amp,c}, "cross" {offdiag,c} (d=2 only).
CoefficientPreset make_coefficients(const std::string& name,
                                    const std::map<std::string, double>& params, int dim);

/// Apply a perturbation spec to both sides of a preset consistently.
CoefficientPreset perturb_preset(const CoefficientPreset& base, const PerturbationSpec& spec,
                                 const Grid& grid);

struct SourcePreset {
    GridFunction values;   // sampled on the grid
    ExprGraph graph;       // same function as a network
    // analytic max_{|alpha| <= order} ||d^alpha f||_{L^2} (closed forms only)
    std::function<double(int)> deriv_norm_up_to;
};

/// Presets: "eigen_mix" {modes,decay} = sum_i w_i prod_a sin(i pi x_a);
/// "generic" = (1+x_0/2) prod_a sin(pi x_a);
/// "mode" {mode,amp} = amp prod_a sin(q pi x_a).
SourcePreset make_source(const std::string& name, const std::map<std::string, double>& params,
                         const Grid& grid);

/// Networks for f_nn: "same" reuses the source graph; "mode_offset"
/// {mode,amp} adds amp * prod_a sin(q pi x_a) to it.
struct FnnPreset {
    ExprGraph graph;
    double offset_amp = 0.0;
    int offset_mode = 0;
};
FnnPreset make_fnn(const std::string& name, const std::map<std::string, double>& params,
                   const SourcePreset& source, int dim);

}  // namespace specnet
