#pragma once

#include "entroflow/drift.hpp"

namespace entroflow {

/// The four terms of the entropy-generation identity
///   ||L_mu||^2 = ||Y||^2 + beta (Ent(mu_0) - Ent(mu_t)) + (beta^2/4) ||O||^2
/// together with the Theorem-1 slack and the discretization defects.
struct BalanceReport {
    double term_current = 0;    // ||Y||^2_{V(mu)}
    double term_entropy = 0;    // beta (Ent at s=0 minus Ent at s=t), true entropies
    double term_osmotic = 0;    // (beta^2/4) ||O||^2_{V(mu)}
    double lhs = 0;             // ||L_mu||^2 = ||V||^2_{V(mu)}

    /// beta * sum_k dt <Y_k, O_k>_Z: the entropy term through the same
    /// midpoint quadrature as the norms. The Hilbert-space algebra closes
    /// exactly against this form; term_entropy differs from it by the time
    /// quadrature defect.
    double entropy_cross = 0;

    double identity_defect = 0;     // |lhs - (current + entropy + osmotic)|
    double algebra_residual = 0;    // |lhs - (current + cross + osmotic)|, solver rounding only
    double theorem1_slack = 0;      // lhs - (speed action + term_entropy)
    double decomposition_defect = 0;  // worst per-slice ||V - Y - (beta/2) O||

    int num_nodes = 0;
    int num_intervals = 0;
    double dt = 0;
    double density_min = 0, density_max = 0;  // reported bound C of hypothesis (5)
    double lipschitz_bound = 0;               // max slice speed, regularity monitor

    std::vector<double> fisher;  // per-interval integral Gamma(log rho, log rho) d mu
};

/// O(rho) = D(log rho): the gradient-typed representer of
/// phi -> sum_e w_e (D rho)_e (D phi)_e in Z(rho m); exact under the
/// log-mean weighting. The stored potential is log rho with mean zero.
EdgeField osmotic_velocity(const Space& space, const Density& rho);
NodeField osmotic_potential(const Space& space, const Density& rho);

/// Computes Y, V, O on the curve, verifies V = Y + (beta/2) O slice-wise and
/// fills the report.
BalanceReport entropy_balance(const Space& space, const MeasureCurve& curve);

/// Same report plus the Theorem-1 assertion
///   lhs >= speed action + beta * delta Ent - tol, tol = 1e-8 max(1, lhs).
/// Throws if the inequality fails.
BalanceReport theorem1_check(const Space& space, const MeasureCurve& curve);

}  // namespace entroflow
