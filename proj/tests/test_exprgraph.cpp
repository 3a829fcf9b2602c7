#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <random>

#include "specnet/pipeline.hpp"
#include "specnet/presets.hpp"

using namespace specnet;

namespace {

ExprGraph sin_freq(double freq, int dim = 1) {
    return activation(ActKind::Sin, scale(input(0, dim), freq));
}

std::vector<ExprGraph> derivative_suite() {
    std::vector<ExprGraph> suite;
    suite.push_back(sin_freq(3.0));
    suite.push_back(activation(ActKind::Exp, scale(input(0, 1), -0.7)));
    suite.push_back(activation(ActKind::Square, affine({2.0}, {input(0, 1)}, 1.0)));
    suite.push_back(mul(sin_freq(M_PI), activation(ActKind::Cos, input(0, 1))));
    suite.push_back(add(mul(input(0, 2), input(1, 2)),
                        activation(ActKind::Sin, add(input(0, 2), scale(input(1, 2), 2.0)))));
    auto p1 = make_coefficients("trig", {{"amp", 0.25}, {"c", 1.0}}, 1);
    ExprGraph f = make_source("eigen_mix", {{"modes", 3}}, Grid(1, 49)).graph;
    suite.push_back(build_iterate(f, p1.graphs, f, 0.05));
    return suite;
}

double fd_derivative(const ExprGraph& g, Point x, int axis, double step = 1e-5) {
    Point hi = x, lo = x;
    hi[axis] += step;
    lo[axis] -= step;
    return (evaluate(g, hi) - evaluate(g, lo)) / (2.0 * step);
}

}  // namespace

TEST_CASE("evaluate basics") {
    CHECK(evaluate(constant(5.0), {0.3, 0, 0}) == 5.0);
    ExprGraph aff = affine({2.0}, {input(0, 1)}, 1.0);
    CHECK(evaluate(aff, {0.25, 0, 0}) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(evaluate(sin_freq(M_PI), {0.5, 0, 0}) == doctest::Approx(1.0).epsilon(1e-15));

    ExprGraph blows = activation(ActKind::Exp, activation(ActKind::Square, scale(input(0, 1), 1e4)));
    CHECK_THROWS_AS((void)evaluate(blows, {0.9, 0, 0}), NumericalError);
}

TEST_CASE("evaluate_on_grid matches pointwise evaluation") {
    Grid g(2, 9);
    ExprGraph f = make_source("generic", {}, g).graph;
    GridFunction fv = evaluate_on_grid(f, g);
    for (std::int64_t i = 0; i < g.num_nodes(); i += 7)
        CHECK(fv[i] == doctest::Approx(evaluate(f, g.coords(i))).epsilon(1e-14));
}

TEST_CASE("interning shares structurally equal graphs") {
    ExprGraph a = sin_freq(3.0);
    ExprGraph b = sin_freq(3.0);
    CHECK(a.root == b.root);
    CHECK(add(a, constant(0.0)).root == a.root);  // + 0 folds away
}

TEST_CASE("parameter counting convention") {
    CHECK(param_count(constant(7.0)) == 0);
    CHECK(param_count(input(0, 1)) == 0);
    ExprGraph aff = affine({1.0, -2.0}, {input(0, 2), input(1, 2)}, 0.5);
    CHECK(param_count(aff) == 3);  // two weights + bias
    CHECK(param_count(activation(ActKind::Sin, input(0, 1))) == 1);  // one wiring edge
    ExprGraph sum = add(input(0, 2), input(1, 2));
    CHECK(param_count(sum) == 2);  // two wiring edges
}

TEST_CASE("add and mul semantics") {
    ExprGraph g = sin_freq(2.0);
    Point x{0.37, 0, 0};
    CHECK(evaluate(mul(g, constant(0.0)), x) == 0.0);
    CHECK(evaluate(add(g, constant(0.0)), x) == evaluate(g, x));

    ExprGraph xx = mul(input(0, 1), input(0, 1));
    CHECK(evaluate(xx, {0.3, 0, 0}) == doctest::Approx(0.09).epsilon(1e-15));

    // three-squares identity is algebraically exact
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    ExprGraph a = sin_freq(M_PI);
    ExprGraph b = activation(ActKind::Exp, scale(input(0, 1), 0.5));
    ExprGraph prod = mul(a, b);
    for (int trial = 0; trial < 200; ++trial) {
        Point p{unif(rng), 0, 0};
        const double expect = evaluate(a, p) * evaluate(b, p);
        CHECK(std::abs(evaluate(prod, p) - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }

    // size bound N(mul) <= N(a) + N(b) + c_op
    CHECK(param_count(prod) <= param_count(a) + param_count(b) + 12);
    CHECK(param_count(add(a, b)) <= param_count(a) + param_count(b) + 2);

    CHECK_THROWS_AS((void)add(input(0, 1), input(1, 2)), ConfigError);
}

TEST_CASE("differentiate: exact rules") {
    ExprGraph one = differentiate(input(0, 1), 0);
    CHECK(evaluate(one, {0.5, 0, 0}) == 1.0);

    ExprGraph sq = activation(ActKind::Square, input(0, 1));
    ExprGraph dsq = differentiate(sq, 0);
    for (double x : {0.1, 0.33, 0.77}) {
        CHECK(evaluate(dsq, {x, 0, 0}) == doctest::Approx(2.0 * x).epsilon(1e-12));
    }

    ExprGraph s3 = sin_freq(3.0);
    ExprGraph ds3 = differentiate(s3, 0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double x = unif(rng);
        CHECK(evaluate(ds3, {x, 0, 0}) == doctest::Approx(3.0 * std::cos(3.0 * x)).epsilon(1e-12));
        CHECK(std::abs(evaluate(ds3, {x, 0, 0}) - fd_derivative(s3, {x, 0, 0}, 0)) <=
              1e-6 * std::max(1.0, std::abs(evaluate(ds3, {x, 0, 0}))));
    }

    // derivative of a constant along an unused axis
    CHECK(evaluate(differentiate(constant(3.0), 0), {0.2, 0, 0}) == 0.0);

    // cached: same derivative request returns the same interned root
    CHECK(differentiate(s3, 0).root == differentiate(s3, 0).root);
}

TEST_CASE("differentiate: finite-difference cross-check and size bound on the suite") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    double worst_cbp = 0.0;
    for (const ExprGraph& g : derivative_suite()) {
        for (int axis = 0; axis < std::max(1, g.dim); ++axis) {
            ExprGraph dg = differentiate(g, axis);
            for (int trial = 0; trial < 100; ++trial) {
                Point x{unif(rng), unif(rng), 0};
                const double sym = evaluate(dg, x);
                const double fd = fd_derivative(g, x, axis);
                CHECK(std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(sym)));
            }
            const double budget = graph_depth(g) + param_count(g);
            worst_cbp = std::max(worst_cbp, param_count(dg) / budget);
            CHECK(param_count(dg) <= kBackpropSizeConstant * budget);

            // activations of the derivative stay inside the closed set
            for (ActKind act : activations_used(dg))
                CHECK((act == ActKind::Sin || act == ActKind::Cos || act == ActKind::Exp ||
                       act == ActKind::Square));
        }
    }
    MESSAGE("measured c_bp = ", worst_cbp, " (pinned ", kBackpropSizeConstant, ")");
}

TEST_CASE("build_iterate: zero fixpoint and eigenfunction closed form") {
    auto coeff = make_coefficients("constant", {{"a", 1.0}, {"c", 0.5}}, 1);
    ExprGraph zero = constant(0.0, 1);
    ExprGraph next = build_iterate(zero, coeff.graphs, constant(0.0, 1), 0.05);
    for (double x : {0.1, 0.5, 0.9}) CHECK(evaluate(next, {x, 0, 0}) == 0.0);

    const double eta = 0.04;
    const double c0 = 0.5;
    ExprGraph u = sin_freq(M_PI);
    ExprGraph f_nn = make_source("eigen_mix", {{"modes", 2}}, Grid(1, 49)).graph;
    ExprGraph u1 = build_iterate(u, coeff.graphs, f_nn, eta);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double x = unif(rng);
        const double expect = (1.0 - eta * (M_PI * M_PI + c0)) * std::sin(M_PI * x) +
                              eta * evaluate(f_nn, {x, 0, 0});
        CHECK(evaluate(u1, {x, 0, 0}) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("build_iterate matches the functional update for variable coefficients") {
    auto coeff = make_coefficients("quadratic", {{"curv", 0.7}, {"c", 1.0}}, 1);
    ExprGraph u = sin_freq(M_PI);
    const double eta = 0.03;
    ExprGraph u1 = build_iterate(u, coeff.graphs, sin_freq(2.0 * M_PI), eta);
    std::mt19937_64 rng(27);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double x = unif(rng);
        // L u = -(1 + 0.7 x^2) u'' - 1.4 x u' + u with exact symbolic derivatives
        const double a = 1.0 + 0.7 * x * x;
        const double lu = a * M_PI * M_PI * std::sin(M_PI * x) -
                          1.4 * x * M_PI * std::cos(M_PI * x) + std::sin(M_PI * x);
        const double expect = std::sin(M_PI * x) - eta * (lu - std::sin(2.0 * M_PI * x));
        CHECK(evaluate(u1, {x, 0, 0}) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("iterate networks use only the closed activation set and grow monotonically") {
    auto coeff = make_coefficients("trig", {{"amp", 0.25}, {"c", 1.0}}, 1);
    ExprGraph f = make_source("eigen_mix", {{"modes", 2}}, Grid(1, 49)).graph;
    auto audit = audit_growth(coeff.graphs, f, constant(0.0, 1), 0.05, 4);
    CHECK(audit.recurrence_ok);
    for (std::size_t t = 1; t < audit.rows.size(); ++t)
        CHECK(audit.rows[t].n_params >= audit.rows[t - 1].n_params);
    for (ActKind act : activations_used(audit.final_iterate))
        CHECK((act == ActKind::Sin || act == ActKind::Cos || act == ActKind::Exp ||
               act == ActKind::Square));
}

TEST_CASE("d=1 T=3 counts satisfy the unrolled shape bound") {
    auto coeff = make_coefficients("trig", {{"amp", 0.25}, {"c", 1.0}}, 1);
    ExprGraph f = make_source("eigen_mix", {{"modes", 2}}, Grid(1, 49)).graph;
    auto audit = audit_growth(coeff.graphs, f, constant(0.0, 1), 0.05, 3);
    CHECK(audit.rows.back().n_params <=
          unrolled_size_bound(1, 3, audit.n_0, audit.n_a, audit.n_f, audit.n_c));
}

TEST_CASE("graph JSON dump is parseable and self-consistent") {
    auto coeff = make_coefficients("affine", {{"slope", 0.5}, {"c", 1.0}}, 1);
    ExprGraph f = make_source("eigen_mix", {{"modes", 2}}, Grid(1, 49)).graph;
    auto audit = audit_growth(coeff.graphs, f, constant(0.0, 1), 0.05, 2);
    const std::string dump = graph_json(audit.final_iterate);
    auto parsed = nlohmann::json::parse(dump);
    CHECK(parsed["schema_version"] == 1);
    CHECK(parsed["total_params"].get<long long>() == audit.rows.back().n_params);
    CHECK(parsed["node_count"].get<long long>() ==
          static_cast<long long>(parsed["nodes"].size()));
    long long sum = 0;
    for (const auto& node : parsed["nodes"]) sum += node["params"].get<long long>();
    CHECK(sum == audit.rows.back().n_params);
}

TEST_CASE("residual trace: exact network source leaves only discretization slack") {
    PipelineConfig cfg;
    cfg.dim = 1;
    cfg.n = 199;
    cfg.k = 3;
    cfg.T = 8;
    cfg.coeff_preset = "constant";
    cfg.coeff_params = {{"a", 1.0}, {"c", 1.0}};
    cfg.source_preset = "eigen_mix";
    cfg.source_params = {{"modes", 3}};
    auto out = run_certify(cfg);
    CHECK(out.caps_asserted);
    CHECK(out.caps_ok);
    const double h2 = 1.0 / (200.0 * 200.0);
    CHECK(out.residual.max_grid_gap <= kGraphGridSlack * h2);
}

TEST_CASE("residual trace follows the eigenbasis geometric series for a mode offset") {
    Grid g(1, 199);
    auto base = make_coefficients("constant", {{"a", 1.0}, {"c", 1.0}}, 1);
    auto op = assemble(base.field, g);
    const int k = 3;
    auto eig = eigensolve(op, k + 1);
    const double eta = 2.0 / (eig.eigenvalues[0] + eig.eigenvalues[k - 1]);

    SourcePreset src = make_source("eigen_mix", {{"modes", 2}}, g);
    SpectralProjector p(eig, k);
    GridFunction f_spn = project(p, src.values);

    const double amp = 1e-6;
    FnnPreset fnn = make_fnn("mode_offset", {{"mode", 2}, {"amp", amp}}, src, 1);

    ResidualConstants rc;
    rc.growth_c = growth_constant(base.field, 1).C;
    rc.delta = 0.0;
    rc.gamma = 1.0 / eig.eigenvalues[k - 1] - 1.0 / eig.eigenvalues[k];
    rc.lambda_k = eig.eigenvalues[k - 1];
    rc.f_spn_norm = norm_l2(f_spn);
    const int T = 5;
    for (int t = 0; t <= T; ++t)
        rc.eps_pair_by_t.push_back(amp * std::pow(2.0 * M_PI, t + 2) * std::sqrt(0.5));

    auto trace = residual_trace(op, eig, k, f_spn, fnn.graph, base.graphs, constant(0.0, 1), T, rc);
    REQUIRE(trace.hypotheses_ok);

    // r_1 = -r exactly: the first unrolled term
    const double offset_norm = amp * std::sqrt(0.5);
    CHECK(std::abs(trace.steps[1].recurrence_norm - offset_norm) <= 1e-9);

    // ||r_t|| = |sum_{i<t} (1 - eta lambda_2)^i| * ||offset|| in the eigenbasis
    const double l2 = eig.eigenvalues[1];
    double acc = 0.0;
    for (int t = 0; t <= T; ++t) {
        CHECK(std::abs(trace.steps[t].recurrence_norm - std::abs(acc) * offset_norm) <= 1e-9);
        CHECK(trace.steps[t].within_cap);
        acc = (1.0 - eta * l2) * acc + 1.0;
    }
}

TEST_CASE("graph/grid equivalence on the constant-coefficient suite") {
    PipelineConfig cfg;
    cfg.dim = 1;
    cfg.n = 99;
    cfg.k = 3;
    cfg.T = 5;
    cfg.coeff_preset = "constant";
    cfg.coeff_params = {{"a", 1.0}, {"c", 1.0}};
    cfg.source_preset = "eigen_mix";
    cfg.source_params = {{"modes", 3}};
    auto s = run_solve(cfg);
    auto gaps = graph_grid_gaps(s.op_t, s.eig_t, cfg.k, s.f_spn_t, s.pert.graphs, s.fnn.graph,
                                cfg.T);
    const double h2 = s.grid.h * s.grid.h;
    for (double gap : gaps) CHECK(gap <= kGraphGridSlack * h2);
}
