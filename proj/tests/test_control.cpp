#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "entroflow/control.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace entroflow;
using entroflow::testing::Rng;

namespace {

// Independent scalar evaluation of the K2 objective: the state reduces to
// rho_a (mass fixes rho_b = 2 - rho_a) and every operator has a closed form.
double k2_objective_scalar(const Scenario& sc, const std::vector<double>& drift_values) {
    const double beta = sc.space->beta();
    const double dt = sc.dt();
    double rho_a = sc.initial[0];
    double value = 0;
    for (int k = 0; k < sc.steps; ++k) {
        const double v = drift_values[k];
        double next = rho_a;
        for (int it = 0; it < 200; ++it) {
            const double mid_a = 0.5 * (rho_a + next);
            const double mid_b = 2.0 - mid_a;
            const double lam = log_mean(mid_a, mid_b);
            const double cand = rho_a + dt * (0.5 * beta * 2.0 * (mid_b - mid_a) - 2.0 * lam * v);
            if (std::abs(cand - next) < 1e-15) {
                next = cand;
                break;
            }
            next = cand;
        }
        const double mid_a = 0.5 * (rho_a + next), mid_b = 2.0 - mid_a;
        const double lam = log_mean(mid_a, mid_b);
        value += 0.5 * dt * lam * v * v;  // (1/2) dt * w * Lambda * V^2
        NodeField fmid = sc.running_mid(k);
        value += dt * 0.5 * (fmid[0] * mid_a + fmid[1] * mid_b);
        rho_a = next;
    }
    NodeField rho_end(2);
    rho_end << rho_a, 2.0 - rho_a;
    value += sc.terminal.value(*sc.space, Density(*sc.space, rho_end));
    return value;
}

Scenario k2_scenario(const Space& k2, double t, int steps, double famp) {
    NodeField nu(2);
    nu << 1.2, 0.8;
    Scenario sc(k2, t, steps, Density(k2, nu));
    NodeField f(2);
    f << famp, -famp;
    sc.terminal = TerminalFunctional::linear(f);
    return sc;
}

}  // namespace

TEST_CASE("terminal functionals") {
    Space k2 = Space::k2();
    NodeField f(2), g(2);
    f << 1.0, 3.0;
    g << 2.0, 0.0;
    NodeField r(2);
    r << 1.5, 0.5;
    Density rho(k2, r);

    auto lin = TerminalFunctional::linear(f);
    CHECK(lin.value(k2, rho) == doctest::Approx(0.5 * (1.5 * 1.0 + 0.5 * 3.0)).epsilon(1e-14));
    CHECK((lin.derivative(k2, rho) - f).cwiseAbs().maxCoeff() == 0.0);

    auto quad = TerminalFunctional::quadratic(g, 2.0, f);
    const double pg = 0.5 * (1.5 * 2.0);
    CHECK(quad.value(k2, rho) == doctest::Approx(2.0 * pg * pg + lin.value(k2, rho)).epsilon(1e-14));
    CHECK((quad.derivative(k2, rho) - (f + 2.0 * 2.0 * pg * g)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("objective: baselines and the K2 scalar expansion") {
    Space k2 = Space::k2();
    Scenario sc(k2, -0.6, 3, Density::uniform(k2));
    CHECK(objective(sc, DriftField::zero(k2, 3)) == doctest::Approx(0.0).epsilon(1e-14));

    // unit running cost, zero drift: total mass one for duration |t|
    Scenario run(k2, -0.6, 3, Density::uniform(k2));
    run.running_cost.assign(4, NodeField::Ones(2));
    CHECK(objective(run, DriftField::zero(k2, 3)) == doctest::Approx(0.6).epsilon(1e-13));

    // hand-expanded two-step instance with drift and linear terminal cost
    Scenario toy = k2_scenario(k2, -0.3, 2, 0.4);
    toy.running_cost.assign(3, NodeField::Ones(2) * 0.25);
    DriftField d;
    d.slices = {EdgeField::Constant(1, 0.3), EdgeField::Constant(1, -0.2)};
    CHECK(objective(toy, d) == doctest::Approx(k2_objective_scalar(toy, {0.3, -0.2})).epsilon(1e-12));
}

TEST_CASE("adjoint gradient matches finite differences") {
    Rng rng(3);
    Space k2 = Space::k2();
    Scenario sc = k2_scenario(k2, -0.4, 3, 0.5);
    sc.running_cost.assign(4, NodeField::Ones(2) * 0.2);

    std::vector<NodeField> psi;
    for (int k = 0; k < 3; ++k) psi.push_back(0.2 * testing::random_field(rng, 2));
    auto grad = adjoint_gradient(sc, psi);

    auto eval = [&](const std::vector<NodeField>& p) {
        return objective(sc, DriftField::from_potentials(k2, p));
    };
    const double h = 1e-5;
    for (int k = 0; k < 3; ++k)
        for (int x = 0; x < 2; ++x) {
            auto plus = psi, minus = psi;
            plus[k][x] += h;
            minus[k][x] -= h;
            const double fd = (eval(plus) - eval(minus)) / (2 * h);
            CHECK(grad[k][x] == doctest::Approx(fd).epsilon(1e-5));
        }

    // small ring instance with running and terminal costs
    Space ring = Space::ring(6);
    NodeField nu(6);
    for (int x = 0; x < 6; ++x) nu[x] = 1.0 + 0.2 * std::cos(2.0 * std::numbers::pi * x / 6);
    nu /= nu.dot(ring.measure());
    Scenario rs(ring, -0.2, 4, Density(ring, nu));
    NodeField f(6);
    for (int x = 0; x < 6; ++x) f[x] = 0.4 * std::sin(2.0 * std::numbers::pi * x / 6);
    rs.terminal = TerminalFunctional::linear(f);
    rs.running_cost.assign(5, 0.3 * f);

    std::vector<NodeField> rpsi;
    for (int k = 0; k < 4; ++k) rpsi.push_back(0.1 * testing::random_field(rng, 6));
    auto rgrad = adjoint_gradient(rs, rpsi);
    for (int k = 0; k < 4; ++k)
        for (int x = 0; x < 6; ++x) {
            auto plus = rpsi, minus = rpsi;
            plus[k][x] += h;
            minus[k][x] -= h;
            const double fd =
                (objective(rs, DriftField::from_potentials(ring, plus)) -
                 objective(rs, DriftField::from_potentials(ring, minus))) /
                (2 * h);
            CHECK(rgrad[k][x] == doctest::Approx(fd).epsilon(2e-5));
        }

    // at the drift-free critical point of the costless problem the gradient
    // vanishes identically
    Scenario flat(k2, -0.4, 3, Density::uniform(k2));
    auto zg = adjoint_gradient(flat, std::vector<NodeField>(3, NodeField::Zero(2)));
    for (const auto& g : zg) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("euler identity for the energy term") {
    Rng rng(5);
    Space ring = Space::ring(8);
    Scenario sc(ring, -0.3, 5, Density::uniform(ring));
    std::vector<NodeField> psi;
    for (int k = 0; k < 5; ++k) psi.push_back(0.3 * testing::random_field(rng, 8));
    DriftField drift = DriftField::from_potentials(ring, psi);
    MeasureCurve curve = forward_integrate(ring, sc.initial, sc.t_start, drift);
    auto eg = energy_gradient_fixed_curve(sc, curve, psi);
    double pairing = 0;
    for (int k = 0; k < 5; ++k) pairing += eg[k].dot(psi[k]);
    CHECK(pairing == doctest::Approx(v_norm_sq(ring, curve, drift)).epsilon(1e-12));
}

TEST_CASE("solve_value: trivial instance and K2 oracle triangle") {
    Space k2 = Space::k2();

    // costless problem: the zero drift is optimal
    Scenario flat(k2, -0.4, 4, Density::uniform(k2));
    Solution s0 = solve_value(flat);
    CHECK(s0.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s0.converged);

    // two intervals, linear terminal cost: all three routes agree
    Scenario sc = k2_scenario(k2, -0.2, 2, 0.5);
    Solution opt = solve_value(sc);
    Solution bf = brute_force_oracle(sc);
    Solution hc = hopf_cole_oracle(sc);

    CHECK(opt.converged);
    CHECK(opt.kkt_residual <= 1e-6);
    CHECK(std::abs(opt.value - bf.value) <= 1e-4);
    CHECK(std::abs(opt.value - hc.value) <= 1e-4);
    CHECK(std::abs(bf.value - hc.value) <= 1e-4);
    CHECK(opt.value <= opt.zero_drift_value + 1e-9);
    CHECK(hc.value <= hc.zero_drift_value + 1e-9);
    CHECK(opt.balance.theorem1_slack >= -1e-8);

    // value lower bound from the boundedness of the data
    double fmax = sc.terminal.f.cwiseAbs().maxCoeff();
    CHECK(opt.value >= -fmax - 1e-12);
}

TEST_CASE("hopf-cole: constants and brute-force validation") {
    Space k2 = Space::k2();
    // constant terminal data: no drift, value = the constant
    Scenario sc(k2, -0.3, 3, Density::uniform(k2));
    sc.terminal = TerminalFunctional::linear(NodeField::Constant(2, 1.7));
    Solution hc = hopf_cole_oracle(sc);
    for (const auto& s : hc.drift.slices) CHECK(s.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(hc.value == doctest::Approx(1.7).epsilon(1e-12));

    // small horizon: oracle against exhaustive search
    Scenario tiny = k2_scenario(k2, -0.1, 2, 0.6);
    Solution bf = brute_force_oracle(tiny);
    Solution hc2 = hopf_cole_oracle(tiny);
    CHECK(std::abs(hc2.value - bf.value) <= 1e-6);

    // running cost enters the backward equation
    Scenario withf = k2_scenario(k2, -0.2, 2, 0.4);
    withf.running_cost.assign(3, (NodeField(2) << 0.3, -0.3).finished());
    Solution bf3 = brute_force_oracle(withf);
    Solution hc3 = hopf_cole_oracle(withf);
    CHECK(std::abs(hc3.value - bf3.value) <= 1e-5);

    CHECK_THROWS_AS(hopf_cole_oracle(Scenario(k2, -0.2, 2, Density::uniform(k2))), Error);
    // (default terminal is linear zero, so build a quadratic one)
    Scenario quad(k2, -0.2, 2, Density::uniform(k2));
    quad.terminal = TerminalFunctional::quadratic(NodeField::Ones(2), 1.0, NodeField::Zero(2));
    CHECK_THROWS_AS(hopf_cole_oracle(quad), Error);
}

TEST_CASE("solve_value tracks hopf-cole on a ring") {
    Space ring = Space::ring(32);
    NodeField nu(32);
    for (int x = 0; x < 32; ++x) nu[x] = 1.0 + 0.3 * std::cos(2.0 * std::numbers::pi * x / 32);
    nu /= nu.dot(ring.measure());
    Scenario sc(ring, -0.25, 16, Density(ring, nu));
    NodeField f(32);
    for (int x = 0; x < 32; ++x) f[x] = 0.5 * std::sin(2.0 * std::numbers::pi * x / 32);
    sc.terminal = TerminalFunctional::linear(f);
    sc.optimizer.max_iters = 600;

    Solution hc = hopf_cole_oracle(sc);
    Solution opt = solve_value(sc);
    CHECK(opt.kkt_residual <= 1e-6);
    CHECK(std::abs(opt.value - hc.value) <= 1e-3 * std::abs(hc.value));
    CHECK(opt.value <= opt.zero_drift_value + 1e-9);
    // the optimizer may not beat the analytic drift by much, but it must not
    // lose to it beyond the mesh tolerance
    CHECK(opt.value <= hc.value + 1e-6);
}

TEST_CASE("brute force: guards and momentum convexity probe") {
    Space k2 = Space::k2();
    Scenario flat(k2, -0.4, 2, Density::uniform(k2));
    Solution z = brute_force_oracle(flat);
    CHECK(std::abs(z.value) <= 1e-10);
    for (const auto& s : z.drift.slices) CHECK(s.cwiseAbs().maxCoeff() <= 1e-6);

    Space ring = Space::ring(8);
    Scenario big(ring, -0.2, 4, Density::uniform(ring));
    CHECK_THROWS_AS(brute_force_oracle(big), Error);  // 32 drift dimensions

    // momentum coordinates q = rho_hat V make the problem convex: sampled
    // second differences of J(q) are nonnegative
    Scenario sc = k2_scenario(k2, -0.2, 2, 0.5);
    auto momentum_objective = [&](double q0, double q1) {
        const double beta = k2.beta();
        const double dt = sc.dt();
        double rho_a = sc.initial[0];
        double value = 0;
        for (int k = 0; k < 2; ++k) {
            const double q = (k == 0) ? q0 : q1;
            // linear dynamics in q; implicit midpoint diffusion
            double next = rho_a;
            for (int it = 0; it < 200; ++it) {
                const double mid_a = 0.5 * (rho_a + next);
                const double cand = rho_a + dt * (beta * (2.0 - 2.0 * mid_a) - 2.0 * q);
                if (std::abs(cand - next) < 1e-15) {
                    next = cand;
                    break;
                }
                next = cand;
            }
            const double mid_a = 0.5 * (rho_a + next);
            const double lam = log_mean(mid_a, 2.0 - mid_a);
            value += 0.5 * dt * q * q / lam;
            rho_a = next;
        }
        NodeField rho_end(2);
        rho_end << rho_a, 2.0 - rho_a;
        value += sc.terminal.value(k2, Density(k2, rho_end));
        return value;
    };
    Rng rng(7);
    std::uniform_real_distribution<double> box(-0.4, 0.4);
    for (int trial = 0; trial < 40; ++trial) {
        const double q0 = box(rng), q1 = box(rng);
        const double d0 = box(rng), d1 = box(rng);
        const double h = 1e-3;
        const double second = (momentum_objective(q0 + h * d0, q1 + h * d1) -
                               2 * momentum_objective(q0, q1) +
                               momentum_objective(q0 - h * d0, q1 - h * d1)) /
                              (h * h);
        CHECK(second >= -1e-6);
    }
}
