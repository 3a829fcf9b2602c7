#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("specnet_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(SPECNET_CLI_PATH) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "config.json";
    std::ofstream os(p);
    os << body;
    return p;
}

const char* kMinimalSolve = R"({
  "schema_version": 1,
  "dimension": 1, "n": 99, "k": 3, "T": 10,
  "coefficients": {"preset": "laplace"},
  "source": {"preset": "eigen_mix", "params": {"modes": 3}}
})";

}  // namespace

TEST_CASE("solve: minimal Laplacian config succeeds with the expected artifacts") {
    auto dir = fresh_dir("solve");
    auto cfg = write_config(dir, kMinimalSolve);
    auto r = run_cli("solve --config " + cfg.string() + " --out " + dir.string(), dir);
    CHECK(r.exit_code == 0);

    const std::string trace = slurp(dir / "trace.csv");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 12);  // header + T+1 rows

    const std::string eigen = slurp(dir / "eigenpairs.csv");
    CHECK(std::count(eigen.begin(), eigen.end(), '\n') == 5);  // header + k+1 rows

    auto report = nlohmann::json::parse(slurp(dir / "bound_report.json"));
    CHECK(report["schema_version"] == 1);
    CHECK(report["status"] == "tight");
    CHECK(report["hypotheses_ok"] == true);
}

TEST_CASE("solve: gap condition gamma <= delta exits 2 naming the gap") {
    auto dir = fresh_dir("gap");
    auto cfg = write_config(dir, R"({
      "dimension": 1, "n": 99, "k": 5, "T": 5,
      "coefficients": {"preset": "constant", "params": {"a": 1.0, "c": 1.0}},
      "perturbation": {"shape": "scale", "eps_a": 0.01, "eps_c": 0.0},
      "source": {"preset": "eigen_mix", "params": {"modes": 3}}
    })");
    auto r = run_cli("solve --config " + cfg.string() + " --out " + dir.string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("gap") != std::string::npos);
}

TEST_CASE("solve: T beyond the main-theorem cap reports an inapplicable budget, exit 0") {
    auto dir = fresh_dir("cap");
    auto cfg = write_config(dir, R"({
      "dimension": 1, "n": 99, "k": 3, "T": 40,
      "coefficients": {"preset": "constant", "params": {"a": 1.0, "c": 1.0}},
      "perturbation": {"shape": "scale", "eps_a": 0.002, "eps_c": 0.0},
      "source": {"preset": "eigen_mix", "params": {"modes": 3}}
    })");
    auto r = run_cli("solve --config " + cfg.string() + " --out " + dir.string(), dir);
    CHECK(r.exit_code == 0);
    auto report = nlohmann::json::parse(slurp(dir / "bound_report.json"));
    CHECK(report["status"] == "inapplicable");
}

TEST_CASE("config validation failures exit 2") {
    auto dir = fresh_dir("badcfg");
    SUBCASE("negative eps") {
        auto cfg = write_config(dir, R"({
          "dimension": 1, "n": 99, "k": 3, "T": 5,
          "perturbation": {"shape": "shift", "eps_a": -1e-4}
        })");
        auto r = run_cli("solve --config " + cfg.string() + " --out " + dir.string(), dir);
        CHECK(r.exit_code == 2);
    }
    SUBCASE("unknown field") {
        auto cfg = write_config(dir, R"({"dimension": 1, "n": 99, "k": 3, "T": 5, "bogus": 1})");
        auto r = run_cli("solve --config " + cfg.string() + " --out " + dir.string(), dir);
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("bogus") != std::string::npos);
    }
    SUBCASE("malformed JSON") {
        auto cfg = write_config(dir, "{not json");
        auto r = run_cli("solve --config " + cfg.string() + " --out " + dir.string(), dir);
        CHECK(r.exit_code == 2);
    }
    SUBCASE("missing file") {
        auto r = run_cli("solve --config " + (dir / "nope.json").string() + " --out " +
                             dir.string(),
                         dir);
        CHECK(r.exit_code == 2);
    }
}

TEST_CASE("perturb-sweep: trivial eps list and the default sweep") {
    auto dir = fresh_dir("sweep0");
    auto cfg = write_config(dir, R"({
      "dimension": 1, "n": 99, "k": 4,
      "coefficients": {"preset": "constant", "params": {"a": 1.0, "c": 1.0}},
      "sweep": {"eps": [0.0], "trials": 16}
    })");
    auto r = run_cli("perturb-sweep --config " + cfg.string() + " --out " + dir.string(), dir);
    CHECK(r.exit_code == 0);
    auto sweep = nlohmann::json::parse(slurp(dir / "sweep.json"));
    for (const auto& rec : sweep["records"]) CHECK(rec["status"] != "fail");

    auto dir2 = fresh_dir("sweepfull");
    auto cfg2 = write_config(dir2, R"({
      "dimension": 1, "n": 99, "k": 4,
      "coefficients": {"preset": "constant", "params": {"a": 1.0, "c": 1.0}},
      "sweep": {"trials": 24}
    })");
    auto r2 = run_cli("perturb-sweep --config " + cfg2.string() + " --out " + dir2.string(), dir2);
    CHECK(r2.exit_code == 0);
    auto sweep2 = nlohmann::json::parse(slurp(dir2 / "sweep.json"));
    CHECK(sweep2["records"].size() >= 30);
    int fails = 0;
    for (const auto& rec : sweep2["records"])
        if (rec["status"] == "fail") ++fails;
    CHECK(fails == 0);
}

TEST_CASE("netgrow: counts satisfy the bound column; dump is self-consistent") {
    auto dir = fresh_dir("netgrow");
    auto cfg = write_config(dir, R"({
      "dimension": 1, "n": 49, "k": 2, "T": 3,
      "coefficients": {"preset": "trig", "params": {"amp": 0.25, "c": 1.0}},
      "source": {"preset": "eigen_mix", "params": {"modes": 2}}
    })");
    auto r = run_cli("netgrow --config " + cfg.string() + " --out " + dir.string(), dir);
    CHECK(r.exit_code == 0);
    const std::string counts = slurp(dir / "counts.csv");
    CHECK(std::count(counts.begin(), counts.end(), '\n') == 5);  // header + T+1

    std::istringstream is(counts);
    std::string line;
    std::getline(is, line);  // header
    long long last_n = -1;
    while (std::getline(is, line)) {
        long long t, n, bound;
        char comma;
        std::istringstream row(line);
        row >> t >> comma >> n >> comma >> bound;
        if (t >= 1) CHECK(n <= bound);
        last_n = n;
    }

    auto graph = nlohmann::json::parse(slurp(dir / "graph.json"));
    CHECK(graph["total_params"].get<long long>() == last_n);
    CHECK(graph["node_count"].get<long long>() == static_cast<long long>(graph["nodes"].size()));

    // T = 0: single data row
    auto dir0 = fresh_dir("netgrow0");
    auto cfg0 = write_config(dir0, R"({
      "dimension": 1, "n": 49, "k": 2, "T": 0,
      "coefficients": {"preset": "trig", "params": {"amp": 0.25, "c": 1.0}},
      "source": {"preset": "eigen_mix", "params": {"modes": 2}}
    })");
    auto r0 = run_cli("netgrow --config " + cfg0.string() + " --out " + dir0.string(), dir0);
    CHECK(r0.exit_code == 0);
    CHECK(std::count(slurp(dir0 / "counts.csv").begin(), slurp(dir0 / "counts.csv").end(), '\n') ==
          2);

    // d = 3 audit stays parseable
    auto dir3 = fresh_dir("netgrow3");
    auto cfg3 = write_config(dir3, R"({
      "dimension": 3, "n": 5, "k": 2, "T": 2,
      "coefficients": {"preset": "affine", "params": {"slope": 0.5, "c": 1.0}},
      "source": {"preset": "mode", "params": {"mode": 1, "amp": 1.0}}
    })");
    auto r3 = run_cli("netgrow --config " + cfg3.string() + " --out " + dir3.string(), dir3);
    CHECK(r3.exit_code == 0);
    auto graph3 = nlohmann::json::parse(slurp(dir3 / "graph.json"));
    CHECK(graph3["node_count"].get<long long>() ==
          static_cast<long long>(graph3["nodes"].size()));
}

TEST_CASE("certify: tight, pass, and inapplicable statuses") {
    auto tight_dir = fresh_dir("certify_tight");
    auto tight_cfg = write_config(tight_dir, kMinimalSolve);
    auto rt = run_cli("certify --config " + tight_cfg.string() + " --out " + tight_dir.string(),
                      tight_dir);
    CHECK(rt.exit_code == 0);
    auto cert = nlohmann::json::parse(slurp(tight_dir / "certificate.json"));
    CHECK(cert["status"] == "tight");

    auto pass_dir = fresh_dir("certify_pass");
    auto pass_cfg = write_config(pass_dir, R"({
      "dimension": 1, "n": 99, "k": 5, "T": 10,
      "coefficients": {"preset": "constant", "params": {"a": 1.0, "c": 1.0}},
      "perturbation": {"shape": "scale", "eps_a": 1e-4, "eps_c": 0.0},
      "source": {"preset": "eigen_mix", "params": {"modes": 5}}
    })");
    auto rp = run_cli("certify --config " + pass_cfg.string() + " --out " + pass_dir.string(),
                      pass_dir);
    CHECK(rp.exit_code == 0);
    auto cert_p = nlohmann::json::parse(slurp(pass_dir / "certificate.json"));
    CHECK(cert_p["status"] == "pass");

    auto inap_dir = fresh_dir("certify_inap");
    auto inap_cfg = write_config(inap_dir, R"({
      "dimension": 1, "n": 99, "k": 3, "T": 40,
      "coefficients": {"preset": "constant", "params": {"a": 1.0, "c": 1.0}},
      "perturbation": {"shape": "scale", "eps_a": 0.002, "eps_c": 0.0},
      "source": {"preset": "eigen_mix", "params": {"modes": 3}}
    })");
    auto ri = run_cli("certify --config " + inap_cfg.string() + " --out " + inap_dir.string(),
                      inap_dir);
    CHECK(ri.exit_code == 0);
    auto cert_i = nlohmann::json::parse(slurp(inap_dir / "certificate.json"));
    CHECK(cert_i["status"] == "inapplicable");
}

TEST_CASE("determinism: identical config and seed produce byte-identical artifacts") {
    auto dir_a = fresh_dir("det_a");
    auto dir_b = fresh_dir("det_b");
    auto cfg_a = write_config(dir_a, kMinimalSolve);
    auto cfg_b = write_config(dir_b, kMinimalSolve);
    auto ra = run_cli("solve --config " + cfg_a.string() + " --seed 42 --out " + dir_a.string(),
                      dir_a);
    auto rb = run_cli("solve --config " + cfg_b.string() + " --seed 42 --out " + dir_b.string(),
                      dir_b);
    CHECK(ra.exit_code == 0);
    CHECK(rb.exit_code == 0);
    for (const char* name : {"trace.csv", "eigenpairs.csv", "bound_report.json"})
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
}
