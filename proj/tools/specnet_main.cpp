#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "specnet/pipeline.hpp"
#include "specnet/report_io.hpp"

namespace fs = std::filesystem;
using namespace specnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

PipelineConfig load(const CommonArgs& args) {
    PipelineConfig cfg = load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    return cfg;
}

int cmd_solve(const CommonArgs& args) {
    PipelineConfig cfg = load(args);
    SolveOutput out = run_solve(cfg);
    fs::path dir(args.out_dir);
    write_file(dir / "trace.csv", trace_csv(out.trace));
    write_file(dir / "eigenpairs.csv", eigenpairs_csv(out.eig_t));
    write_file(dir / "bound_report.json", bound_report_json(out.budget) + "\n");
    for (const auto& v : out.violations) std::cerr << "invariant violated: " << v << "\n";
    std::cout << "solve: T=" << cfg.T << " measured_error=" << fmt17(out.measured_error)
              << " budget=" << out.budget.status << "\n";
    return out.violations.empty() ? kExitOk : kExitInvariant;
}

int cmd_perturb_sweep(const CommonArgs& args) {
    PipelineConfig cfg = load(args);
    SweepConfig sc;
    sc.base = make_coefficients(cfg.coeff_preset, cfg.coeff_params, cfg.dim).field;
    sc.grid = Grid(cfg.dim, cfg.n);
    sc.k = cfg.k;
    sc.shapes = cfg.sweep_shapes;
    sc.eps_list = cfg.sweep_eps;
    sc.trials = cfg.sweep_trials;
    sc.seed = cfg.seed;
    const auto records = run_sweep(sc);
    write_file(fs::path(args.out_dir) / "sweep.json", sweep_json(records) + "\n");
    int fails = 0, passes = 0, inapplicable = 0;
    for (const auto& r : records) {
        if (r.status == "fail") {
            ++fails;
            std::cerr << "lemma check failed: " << r.lemma << " shape=" << r.shape
                      << " eps=" << fmt17(r.eps) << " n=" << r.n << " lhs=" << fmt17(r.lhs)
                      << " rhs=" << fmt17(r.rhs) << "\n";
        } else if (r.status == "pass") {
            ++passes;
        } else {
            ++inapplicable;
        }
    }
    std::cout << "perturb-sweep: " << passes << " pass, " << inapplicable << " inapplicable, "
              << fails << " fail\n";
    return fails == 0 ? kExitOk : kExitInvariant;
}

int cmd_netgrow(const CommonArgs& args) {
    PipelineConfig cfg = load(args);
    NetgrowOutput out = run_netgrow(cfg);
    fs::path dir(args.out_dir);
    write_file(dir / "counts.csv", counts_csv(out.audit));
    write_file(dir / "graph.json", graph_json(out.audit.final_iterate) + "\n");
    std::cout << "netgrow: d=" << cfg.dim << " T=" << cfg.T
              << " N_T=" << out.audit.rows.back().n_params << " shape_bound=" << out.shape_bound
              << "\n";
    if (!out.audit.recurrence_ok) std::cerr << "invariant violated: size recurrence bound\n";
    if (!out.shape_ok) std::cerr << "invariant violated: unrolled size bound\n";
    return (out.audit.recurrence_ok && out.shape_ok) ? kExitOk : kExitInvariant;
}

int cmd_certify(const CommonArgs& args) {
    PipelineConfig cfg = load(args);
    CertifyOutput out = run_certify(cfg);
    fs::path dir(args.out_dir);
    write_file(dir / "trace.csv", trace_csv(out.solve.trace));
    write_file(dir / "eigenpairs.csv", eigenpairs_csv(out.solve.eig_t));
    write_file(dir / "counts.csv", counts_csv(out.audit));
    write_file(dir / "certificate.json", certificate_json(out) + "\n");
    for (const auto& v : out.solve.violations) std::cerr << "invariant violated: " << v << "\n";
    std::cout << "certify: status=" << out.status
              << " measured=" << fmt17(out.measured_graph_error)
              << " budget=" << fmt17(out.budget.eps + out.budget.eps_tilde + out.slack) << "\n";
    const bool ok = out.solve.violations.empty() && out.status != "fail";
    return ok ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral descent PDE solver and network growth certifier"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "experiment config JSON")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed, "override the config seed")
            ->each([&](const std::string&) { args.seed_set = true; });
    };

    auto* solve = app.add_subcommand("solve", "run the descent pipeline");
    auto* sweep = app.add_subcommand("perturb-sweep", "run the perturbation lemma suite");
    auto* netgrow = app.add_subcommand("netgrow", "grow iterate networks and audit sizes");
    auto* certify = app.add_subcommand("certify", "full pipeline with the main error budget");
    for (auto* sub : {solve, sweep, netgrow, certify}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(args);
        if (sweep->parsed()) return cmd_perturb_sweep(args);
        if (netgrow->parsed()) return cmd_netgrow(args);
        if (certify->parsed()) return cmd_certify(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violated: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
