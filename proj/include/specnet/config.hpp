#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specnet/perturb.hpp"

namespace specnet {

/// Parsed experiment configuration. Loading re-validates every module
/// precondition it can check statically and rejects unknown fields.
struct PipelineConfig {
    int dim = 1;
    int n = 99;
    int k = 3;
    int T = 10;
    std::uint64_t seed = 1;

    std::string coeff_preset = "laplace";
    std::map<std::string, double> coeff_params;

    std::optional<PerturbationSpec> perturbation;

    std::string source_preset = "eigen_mix";
    std::map<std::string, double> source_params;

    std::string fnn_preset = "same";
    std::map<std::string, double> fnn_params;

    std::vector<PerturbShape> sweep_shapes{PerturbShape::Shift, PerturbShape::Scale,
                                           PerturbShape::Bump};
    std::vector<double> sweep_eps{0.0, 1e-5, 1e-4, 1e-3};
    int sweep_trials = 64;
};

PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const std::string& json_text);

}  // namespace specnet
