#pragma once

#include "entroflow/balance.hpp"
#include "entroflow/drift.hpp"

#include <functional>

namespace entroflow {

/// Terminal cost U on densities. Linear: U = integral f d mu. Quadratic:
/// U = c (integral g d mu)^2 + integral f d mu.
struct TerminalFunctional {
    enum class Kind { Linear, Quadratic };
    Kind kind = Kind::Linear;
    NodeField f;              // linear part
    NodeField g;              // quadratic direction (Quadratic only)
    double quad_coef = 0;

    static TerminalFunctional linear(NodeField f);
    static TerminalFunctional quadratic(NodeField g, double c, NodeField f_linear);

    double value(const Space& space, const Density& rho) const;
    /// Variational derivative dU/d mu as a node field (pair against rho m).
    NodeField derivative(const Space& space, const Density& rho) const;
};

struct OptimizerSettings {
    int max_iters = 400;
    double grad_tol = 1e-8;       // preconditioned-gradient norm target
    double initial_step = 1.0;
    double backtrack_factor = 0.5;
    int max_backtracks = 40;
    double armijo = 1e-4;
};

/// Value-function problem instance: minimize
///   1/2 ||V||^2_{V(mu)} + sum_k dt <F_mid_k, rho_mid_k>_m + U(mu_0)
/// over drifts, with mu generated from nu by the forward integrator.
struct Scenario {
    const Space* space = nullptr;
    double t_start = -1.0;          // horizon, < 0
    int steps = 2;                  // N >= 2
    Density initial;                // nu, finite entropy (always finite here)
    std::vector<NodeField> running_cost;  // F per grid time, size steps + 1
    TerminalFunctional terminal;
    OptimizerSettings optimizer;
    double running_sign = +1.0;     // +F as written in the value function

    Scenario(const Space& sp, double t, int n, Density nu);
    void validate() const;
    double dt() const { return -t_start / steps; }
    NodeField running_mid(int k) const {
        return 0.5 * running_sign * (running_cost.at(k) + running_cost.at(k + 1));
    }
};

struct Solution {
    MeasureCurve curve;
    DriftField drift;
    double value = 0;
    double kkt_residual = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;       // objective per iteration
    double zero_drift_value = 0;     // baseline: heat flow from nu
    double entropy_initial = 0;      // Ent(nu), reported
    BalanceReport balance;           // Theorem 1 applied to the minimizer
};

/// Objective of (curve generated by forward_integrate(nu, drift)).
double objective(const Scenario& sc, const DriftField& drift);

/// Gradient of the objective with respect to the per-interval edge
/// potentials (drift = D psi), by the backward adjoint recursion through the
/// integrator. Returns one node field per interval.
std::vector<NodeField> adjoint_gradient(const Scenario& sc, const std::vector<NodeField>& psi);

/// Energy-term gradient at a fixed curve (quadratic form differential);
/// test hook for the Euler identity <grad, psi> = 2 * (1/2)||V||^2.
std::vector<NodeField> energy_gradient_fixed_curve(const Scenario& sc, const MeasureCurve& curve,
                                                   const std::vector<NodeField>& psi);

/// Minimizes the objective by preconditioned gradient descent with
/// backtracking line search; the optimization variable is the per-interval
/// potential, so returned drifts are gradient-typed by construction.
Solution solve_value(const Scenario& sc);

/// Fleming's construction for linear terminal cost: backward linear
/// evolution d v / d tau = (beta/2) Lap v - (F/beta) v from v = exp(-f/beta),
/// drift = beta D log v. Value is the induced objective.
Solution hopf_cole_oracle(const Scenario& sc);

/// Independent verification oracle: exhaustive grid search with recursive
/// refinement over per-interval edge drift values. Requires
/// edges * intervals <= 4.
Solution brute_force_oracle(const Scenario& sc, double box_halfwidth = 4.0, int points_per_axis = 9,
                            int refinements = 14);

/// Hopf-Cole dual variable v on the grid (index k = slice at s_k).
std::vector<NodeField> hopf_cole_dual(const Scenario& sc);

}  // namespace entroflow
