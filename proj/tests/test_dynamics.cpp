#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "support.hpp"
#include "tnm/dynamics.hpp"

using namespace tnm;

TEST_CASE("lorenz_rhs examples") {
    const State3 origin = lorenz_rhs({0, 0, 0}, 10.0, 28.0, 8.0 / 3.0);
    REQUIRE(origin == State3{0.0, 0.0, 0.0});

    const State3 ones = lorenz_rhs({1, 1, 1}, 10.0, 28.0, 8.0 / 3.0);
    REQUIRE(ones.x == 0.0);
    REQUIRE(ones.y == 26.0);
    REQUIRE_THAT(ones.z, Catch::Matchers::WithinAbs(-5.0 / 3.0, 1e-15));

    // Nontrivial fixed point (sqrt(beta(rho-1)), sqrt(beta(rho-1)), rho-1).
    const double beta = 8.0 / 3.0, rho = 28.0;
    const double c = std::sqrt(beta * (rho - 1.0));
    const State3 fp = lorenz_rhs({c, c, rho - 1.0}, 10.0, rho, beta);
    REQUIRE_THAT(fp.x, Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(fp.y, Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(fp.z, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("lorenz_rhs commutes with the (x,y,z) -> (-x,-y,z) symmetry") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        const auto v = testsupport::random_values(rng, 3, -20.0, 20.0);
        const State3 s{v[0], v[1], v[2]};
        const State3 r = lorenz_rhs(s, 10.0, 28.0, 8.0 / 3.0);
        const State3 rm = lorenz_rhs({-s.x, -s.y, s.z}, 10.0, 28.0, 8.0 / 3.0);
        REQUIRE_THAT(rm.x, Catch::Matchers::WithinAbs(-r.x, 1e-12));
        REQUIRE_THAT(rm.y, Catch::Matchers::WithinAbs(-r.y, 1e-12));
        REQUIRE_THAT(rm.z, Catch::Matchers::WithinAbs(r.z, 1e-12));
    }
}

TEST_CASE("lorenz Jacobian trace equals -(sigma + 1 + beta) by finite differences") {
    const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 10; ++rep) {
        const auto v = testsupport::random_values(rng, 3, -15.0, 15.0);
        const double h = 1e-6;
        auto at = [&](double x, double y, double z) {
            return lorenz_rhs({x, y, z}, sigma, rho, beta);
        };
        const double txx =
            (at(v[0] + h, v[1], v[2]).x - at(v[0] - h, v[1], v[2]).x) / (2 * h);
        const double tyy =
            (at(v[0], v[1] + h, v[2]).y - at(v[0], v[1] - h, v[2]).y) / (2 * h);
        const double tzz =
            (at(v[0], v[1], v[2] + h).z - at(v[0], v[1], v[2] - h).z) / (2 * h);
        REQUIRE_THAT(txx + tyy + tzz,
                     Catch::Matchers::WithinAbs(-(sigma + 1.0 + beta), 1e-6));
    }
}

TEST_CASE("rossler_rhs examples") {
    const State3 origin = rossler_rhs({0, 0, 0}, 0.2, 0.2, 5.7);
    REQUIRE(origin.x == 0.0);
    REQUIRE(origin.y == 0.0);
    REQUIRE(origin.z == 0.2);

    const State3 ux = rossler_rhs({1, 0, 0}, 0.2, 0.2, 5.7);
    REQUIRE(ux.x == 0.0);
    REQUIRE(ux.y == 1.0);
    REQUIRE(ux.z == 0.2);

    // ydot is linear in y.
    const State3 s1 = rossler_rhs({1.5, 2.0, 0.3}, 0.2, 0.2, 5.7);
    const State3 s2 = rossler_rhs({1.5, 4.0, 0.3}, 0.2, 0.2, 5.7);
    REQUIRE_THAT(s2.y - s1.y, Catch::Matchers::WithinAbs(0.2 * 2.0, 1e-15));
}

TEST_CASE("rk4_update leaves the state unchanged for a zero rhs") {
    const State3 s{1.0, -2.0, 3.0};
    const State3 out = rk4_update(s, 0.1, [](const State3&) { return State3{0, 0, 0}; });
    REQUIRE(out == s);
}

TEST_CASE("rk4_update reproduces the quartic Taylor polynomial on xdot = x") {
    const double out = rk4_update(1.0, 0.1, [](double x) { return x; });
    REQUIRE_THAT(out, Catch::Matchers::WithinAbs(1.1051708333333332, 1e-15));
    REQUIRE_THAT(std::exp(0.1) - out, Catch::Matchers::WithinAbs(8.5e-8, 2e-9));
}

TEST_CASE("rk4 one-step error drops by about 2^5 when h halves") {
    auto rhs = [](double x) { return x; };
    const double e1 = std::fabs(std::exp(0.1) - rk4_update(1.0, 0.1, rhs));
    const double e2 = std::fabs(std::exp(0.05) - rk4_update(1.0, 0.05, rhs));
    const double ratio = e1 / e2;
    REQUIRE(ratio > 28.0);
    REQUIRE(ratio < 36.0);
}

TEST_CASE("rk4 global error order is four on xdot = x over [0,1]") {
    auto integrate = [](double h, int steps) {
        double x = 1.0;
        for (int i = 0; i < steps; ++i) x = rk4_update(x, h, [](double v) { return v; });
        return x;
    };
    const double e1 = std::fabs(integrate(0.1, 10) - std::exp(1.0));
    const double e2 = std::fabs(integrate(0.05, 20) - std::exp(1.0));
    const double ratio = e1 / e2;
    REQUIRE(ratio >= 14.0);
    REQUIRE(ratio <= 18.0);
}

TEST_CASE("generate_trajectory with n_samples=1 returns the post-transient state") {
    FlowSpec flow;
    flow.n_samples = 1;
    flow.transient_steps = 50;

    State3 s = flow.x0;
    for (int i = 0; i < 50; ++i) s = rk4_step(flow, s);

    const Trajectory traj = generate_trajectory(flow);
    REQUIRE(traj.states.size() == 1);
    REQUIRE(traj.states[0] == s);
}

TEST_CASE("generate_trajectory is deterministic with the default sampling") {
    FlowSpec flow;  // Lorenz defaults: h=0.01, every 10th, N=3000
    const Trajectory a = generate_trajectory(flow);
    const Trajectory b = generate_trajectory(flow);
    REQUIRE(a.states.size() == 3000);
    REQUIRE_THAT(a.dt_sample, Catch::Matchers::WithinAbs(0.1, 1e-15));
    REQUIRE(a.states == b.states);
}

TEST_CASE("lorenz trajectory stays inside the attractor box after the transient") {
    FlowSpec flow;
    const Trajectory traj = generate_trajectory(flow);
    for (const State3& s : traj.states) {
        REQUIRE(std::fabs(s.x) <= 25.0);
        REQUIRE(std::fabs(s.y) <= 30.0);
        REQUIRE(s.z >= 0.0);
        REQUIRE(s.z <= 55.0);
    }
}

TEST_CASE("blow-up aborts with the offending step index") {
    FlowSpec flow;
    flow.x0 = {1e5, 1e5, 1e5};
    flow.transient_steps = 0;
    flow.n_samples = 2;
    try {
        generate_trajectory(flow);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        REQUIRE(e.step_index >= 1);
        REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("step"));
    }
}

TEST_CASE("trajectory CSV round trip is exact") {
    FlowSpec flow;
    flow.n_samples = 64;
    flow.transient_steps = 100;
    const Trajectory traj = generate_trajectory(flow);

    const auto path = std::filesystem::temp_directory_path() / "tnm_traj_roundtrip.csv";
    write_trajectory_csv(traj, path.string());
    const Trajectory back = read_trajectory_csv(path.string());
    std::filesystem::remove(path);

    REQUIRE(back.states == traj.states);
    REQUIRE(back.dt_sample == traj.dt_sample);
}
