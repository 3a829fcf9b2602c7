#include "specnet/config.hpp"

#include <json.hpp>

#include <fstream>

namespace specnet {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown field '" + key + "' in " + where);
    }
}

std::map<std::string, double> params_map(const json& obj, const std::string& where) {
    std::map<std::string, double> out;
    if (!obj.is_object()) throw ConfigError(where + ".params must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!value.is_number()) throw ConfigError(where + ".params." + key + " must be a number");
        out[key] = value.get<double>();
    }
    return out;
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    reject_unknown(root,
                   {"schema_version", "dimension", "n", "k", "T", "seed", "coefficients",
                    "perturbation", "source", "f_nn", "sweep"},
                   "config");
    if (root.value("schema_version", 1) != 1) throw ConfigError("unsupported schema_version");

    PipelineConfig cfg;
    cfg.dim = root.value("dimension", 1);
    cfg.n = root.value("n", 99);
    cfg.k = root.value("k", 3);
    cfg.T = root.value("T", 10);
    cfg.seed = root.value("seed", 1ull);

    if (cfg.dim < 1 || cfg.dim > 3) throw ConfigError("dimension must be 1, 2 or 3");
    if (cfg.n < 3) throw ConfigError("n must be >= 3");
    double total = 1;
    for (int a = 0; a < cfg.dim; ++a) total *= cfg.n;
    if (total > 2e5) throw ConfigError("n^dimension too large for a desk-scale run");
    if (cfg.k < 1) throw ConfigError("k must be >= 1");
    if (cfg.k + 1 > total) throw ConfigError("k+1 exceeds the interior node count");
    if (cfg.T < 0) throw ConfigError("T must be >= 0");

    if (root.contains("coefficients")) {
        const json& c = root["coefficients"];
        reject_unknown(c, {"preset", "params"}, "coefficients");
        cfg.coeff_preset = c.value("preset", "laplace");
        if (c.contains("params")) cfg.coeff_params = params_map(c["params"], "coefficients");
    }
    if (root.contains("perturbation")) {
        const json& p = root["perturbation"];
        reject_unknown(p, {"shape", "eps_a", "eps_c"}, "perturbation");
        PerturbationSpec spec;
        spec.shape = shape_from_name(p.value("shape", "shift"));
        spec.eps_a = p.value("eps_a", 0.0);
        spec.eps_c = p.value("eps_c", 0.0);
        if (spec.eps_a < 0.0 || spec.eps_c < 0.0)
            throw ConfigError("perturbation magnitudes must be >= 0");
        cfg.perturbation = spec;
    }
    if (root.contains("source")) {
        const json& s = root["source"];
        reject_unknown(s, {"preset", "params"}, "source");
        cfg.source_preset = s.value("preset", "eigen_mix");
        if (s.contains("params")) cfg.source_params = params_map(s["params"], "source");
    }
    if (root.contains("f_nn")) {
        const json& s = root["f_nn"];
        reject_unknown(s, {"preset", "params"}, "f_nn");
        cfg.fnn_preset = s.value("preset", "same");
        if (s.contains("params")) cfg.fnn_params = params_map(s["params"], "f_nn");
    }
    if (root.contains("sweep")) {
        const json& s = root["sweep"];
        reject_unknown(s, {"shapes", "eps", "trials"}, "sweep");
        if (s.contains("shapes")) {
            cfg.sweep_shapes.clear();
            for (const auto& name : s["shapes"])
                cfg.sweep_shapes.push_back(shape_from_name(name.get<std::string>()));
        }
        if (s.contains("eps")) {
            cfg.sweep_eps.clear();
            for (const auto& e : s["eps"]) {
                const double v = e.get<double>();
                if (v < 0.0) throw ConfigError("sweep eps values must be >= 0");
                cfg.sweep_eps.push_back(v);
            }
        }
        cfg.sweep_trials = s.value("trials", 64);
        if (cfg.sweep_trials < 1) throw ConfigError("sweep trials must be >= 1");
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

}  // namespace specnet
