#include <doctest.h>

#include <cmath>
#include <random>

#include "specnet/descent.hpp"
#include "specnet/presets.hpp"

using namespace specnet;

namespace {

struct Setup {
    Grid grid;
    DiscreteOperator op;
    EigenDecomposition eig;
};

Setup laplace_setup(int n, int count, double c = 0.0) {
    Setup s{Grid(1, n), {}, {}};
    s.op = assemble(make_coefficients(c == 0.0 ? "laplace" : "constant",
                                      {{"a", 1.0}, {"c", c}}, 1)
                        .field,
                    s.grid);
    s.eig = eigensolve(s.op, count);
    return s;
}

}  // namespace

TEST_CASE("objective values and minimality") {
    auto s = laplace_setup(199, 3);
    GridFunction f = s.eig.eigenvalues[0] * s.eig.eigenfunction(0);

    CHECK(objective(s.op, f, GridFunction::zero(s.grid)) == 0.0);

    // J(phi_1) = 1/2 l1 - l1 = -l1/2
    CHECK(objective(s.op, f, s.eig.eigenfunction(0)) ==
          doctest::Approx(-0.5 * s.eig.eigenvalues[0]).epsilon(1e-9));

    GridFunction u_star = solve_direct(s.op, f);
    const double j_star = objective(s.op, f, u_star);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 100; ++trial) {
        GridFunction w(s.grid, 0.1 * Vector::NullaryExpr(s.grid.num_nodes(),
                                                         [&](Eigen::Index) { return gauss(rng); }));
        CHECK(objective(s.op, f, u_star + w) >= j_star - 1e-12);
    }
}

TEST_CASE("gradient descent follows the scalar recurrence on an eigenfunction source") {
    auto s = laplace_setup(199, 4);
    const int k = 3;
    const double l1 = s.eig.eigenvalues[0];
    const double lk = s.eig.eigenvalues[k - 1];
    const double eta = 2.0 / (l1 + lk);
    GridFunction f = l1 * s.eig.eigenfunction(0);

    for (int T : {1, 3, 10}) {
        DescentConfig cfg;
        cfg.k = k;
        cfg.T = T;
        auto trace = gd_run(s.op, f, s.eig, cfg);
        const double factor = 1.0 - std::pow(1.0 - eta * l1, T);
        GridFunction expect = factor * s.eig.eigenfunction(0);
        CHECK(norm_max(trace.u_final - expect) <= 1e-9);
        CHECK(norm_max(trace.u_star - s.eig.eigenfunction(0)) <= 1e-9);
    }
}

TEST_CASE("the reference solution is a fixed point") {
    auto s = laplace_setup(99, 3);
    const int k = 2;
    GridFunction f = s.eig.eigenvalues[0] * s.eig.eigenfunction(0) +
                     0.5 * s.eig.eigenvalues[1] * s.eig.eigenfunction(1);
    DescentConfig probe;
    probe.k = k;
    probe.T = 0;
    GridFunction u_star = gd_run(s.op, f, s.eig, probe).u_star;

    DescentConfig cfg;
    cfg.k = k;
    cfg.T = 10;
    cfg.u0 = u_star;
    auto trace = gd_run(s.op, f, s.eig, cfg);
    for (const auto& step : trace.steps) CHECK(step.error <= 1e-10);
    CHECK(norm_l2(trace.u_final - u_star) <= 1e-9);
}

TEST_CASE("k = 1 converges in a single step") {
    auto s = laplace_setup(99, 2);
    GridFunction f = 2.0 * s.eig.eigenfunction(0);
    DescentConfig cfg;
    cfg.k = 1;
    cfg.T = 1;
    auto trace = gd_run(s.op, f, s.eig, cfg);
    CHECK(trace.rho == 0.0);
    CHECK(trace.steps[1].error <= 1e-9 * trace.steps[0].error);
}

TEST_CASE("per-step contraction, monotone objective, span preservation") {
    auto s = laplace_setup(199, 6, 1.0);
    const int k = 5;
    GridFunction f = GridFunction::zero(s.grid);
    for (int i = 0; i < k; ++i)
        f = f + (1.0 / (i + 1)) * s.eig.eigenvalues[i] * s.eig.eigenfunction(i);

    DescentConfig cfg;
    cfg.k = k;
    cfg.T = 40;
    auto trace = gd_run(s.op, f, s.eig, cfg);

    CHECK(trace.max_ratio <= trace.rho + 1e-9);
    CHECK(trace.max_span_residual <= 1e-8);
    for (std::size_t t = 1; t < trace.steps.size(); ++t) {
        CHECK(trace.steps[t].objective <= trace.steps[t - 1].objective + 1e-12);
        if (trace.steps[t - 1].error > 0.0)
            CHECK(trace.steps[t].error <= trace.rho * trace.steps[t - 1].error * (1.0 + 1e-9));
    }
}

TEST_CASE("gd_run validates its preconditions") {
    auto s = laplace_setup(99, 4);
    GridFunction f_raw = sample([](const Point& x) { return x[0] * (1.0 - x[0]); }, s.grid);
    DescentConfig cfg;
    cfg.k = 3;
    cfg.T = 5;
    CHECK_THROWS_AS((void)gd_run(s.op, f_raw, s.eig, cfg), ConfigError);  // f not in the span

    // degenerate spectral gap: 2D Laplacian modes (1,2)/(2,1) at k = 2
    Grid g2(2, 15);
    auto op2 = assemble(make_coefficients("laplace", {}, 2).field, g2);
    auto eig2 = eigensolve(op2, 4);
    GridFunction f2 = eig2.eigenvalues[0] * eig2.eigenfunction(0);
    DescentConfig cfg2;
    cfg2.k = 2;
    cfg2.T = 2;
    CHECK_THROWS_AS((void)gd_run(op2, f2, eig2, cfg2), ConfigError);
}

TEST_CASE("u0 outside the span is projected and recorded") {
    auto s = laplace_setup(99, 4);
    const int k = 3;
    GridFunction f = s.eig.eigenvalues[0] * s.eig.eigenfunction(0);
    DescentConfig cfg;
    cfg.k = k;
    cfg.T = 3;
    cfg.u0 = s.eig.eigenfunction(0) + s.eig.eigenfunction(3);  // second part out of span
    auto trace = gd_run(s.op, f, s.eig, cfg);
    CHECK(trace.u0_projection_residual == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(trace.max_span_residual <= 1e-8);
}

TEST_CASE("initialization bound R <= ||f||/lambda_1") {
    auto s = laplace_setup(199, 6);
    const double l1 = s.eig.eigenvalues[0];

    GridFunction f1 = l1 * s.eig.eigenfunction(0);
    auto tight = initialization_bound(s.op, f1, l1);
    CHECK(tight.holds);
    CHECK(std::abs(tight.bound - tight.solution_norm) <= 1e-9);  // tight case

    auto zero = initialization_bound(s.op, GridFunction::zero(s.grid), l1);
    CHECK(zero.bound == 0.0);
    CHECK(zero.solution_norm == 0.0);
    CHECK(zero.holds);

    const double lk = s.eig.eigenvalues[4];
    GridFunction fk = lk * s.eig.eigenfunction(4);
    auto slack = initialization_bound(s.op, fk, l1);
    CHECK(slack.holds);
    CHECK(slack.solution_norm == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(slack.bound == doctest::Approx(lk / l1).epsilon(1e-9));
}

TEST_CASE("error budget cases") {
    BudgetInputs in;
    in.delta = 0.0;
    in.gamma = 1e-2;
    in.eps_spn = 0.0;
    in.eps_nn = 0.0;
    in.R = 1.0;
    in.eta = 0.05;
    in.C = 3.0;
    in.lambda1 = in.lambda1_t = 10.0;
    in.lambda_k = in.lambda_k_t = 100.0;
    in.f_norm = 1.0;
    in.ustar_norm = 0.1;
    in.T = 10;
    in.slack = 1e-6;

    SUBCASE("unperturbed exact case is tight") {
        in.measured_error = std::pow((100.0 - 10.0) / 110.0, 10) * in.R * 0.9;
        auto rep = error_budget(in);
        CHECK(rep.hypotheses_ok);
        CHECK(rep.eps_tilde == 0.0);
        CHECK(rep.within_budget);
        CHECK(rep.status == "tight");
    }
    SUBCASE("T = 0 reduces eps to R") {
        in.T = 0;
        in.measured_error = 0.5;
        auto rep = error_budget(in);
        CHECK(rep.eps == doctest::Approx(in.R));
        CHECK(rep.within_budget);
    }
    SUBCASE("main-theorem T cap gates the report") {
        in.delta = 1e-2;  // cap = 1/(20*1*0.01) = 5 < T = 10
        in.measured_error = 0.1;
        auto rep = error_budget(in);
        CHECK_FALSE(rep.hypotheses_ok);
        CHECK(rep.status == "inapplicable");
    }
    SUBCASE("blow-up regime reports but does not assert") {
        in.delta = 2e-3;  // gamma - delta = 8e-3 < 10 delta
        in.measured_error = 1e9;
        auto rep = error_budget(in);
        CHECK(rep.hypotheses_ok);
        CHECK_FALSE(rep.asserted);
        CHECK(rep.status != "fail");
    }
}

TEST_CASE("trace CSV has T+1 rows and stable formatting") {
    auto s = laplace_setup(49, 3);
    GridFunction f = s.eig.eigenvalues[0] * s.eig.eigenfunction(0);
    DescentConfig cfg;
    cfg.k = 2;
    cfg.T = 7;
    auto trace = gd_run(s.op, f, s.eig, cfg);
    const std::string csv = trace_csv(trace);
    CHECK(csv.rfind("t,error,ratio,objective\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
    CHECK(trace_csv(trace) == csv);  // deterministic
}
