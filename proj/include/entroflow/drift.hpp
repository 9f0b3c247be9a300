#pragma once

#include "entroflow/density.hpp"

namespace entroflow {

/// Time-indexed drift: one antisymmetric edge field per interval (midpoint
/// convention). Gradient-typed drifts carry the generating potentials, with
/// slice_e = gradient(potential) exactly.
struct DriftField {
    std::vector<EdgeField> slices;
    std::vector<NodeField> potentials;  // empty unless gradient-typed
    bool gradient_type = false;

    int num_intervals() const { return static_cast<int>(slices.size()); }

    static DriftField zero(const Space& space, int intervals);
    static DriftField from_potentials(const Space& space, std::vector<NodeField> psi);
};

/// || V ||^2_{V(mu)} = sum_k dt * <V_k, V_k>_{Z(midpoint_k)}.
double v_norm_sq(const Space& space, const MeasureCurve& curve, const DriftField& drift,
                 EdgeWeighting weighting = EdgeWeighting::LogMean);

/// Solves the weighted Poisson problem -div(weights .* D psi) = g for the
/// mean-zero potential psi (integral psi dm = 0). Requires the compatibility
/// integral g dm = 0, enforced by projection; weights are per-edge, > 0.
NodeField solve_weighted_poisson(const Space& space, const EdgeField& weights, const NodeField& g);

/// Same problem solved by Jacobi-preconditioned conjugate gradients; used as
/// an algorithmically independent route for Riesz-equality checks.
NodeField solve_weighted_poisson_cg(const Space& space, const EdgeField& weights, const NodeField& g,
                                    double tol = 1e-13, int max_iter = 20000);

/// Minimal-norm drift of the continuity equation: per interval solves
/// -div(rho_hat D psi) = d rho / ds, returns Y = D psi (gradient-typed).
DriftField recover_continuity_drift(const Space& space, const MeasureCurve& curve,
                                    EdgeWeighting weighting = EdgeWeighting::LogMean);

/// Minimal-norm Fokker-Planck drift: -div(rho_hat D psi) = d rho / ds - (beta/2) Lap rho_mid.
DriftField recover_fp_drift(const Space& space, const MeasureCurve& curve,
                            EdgeWeighting weighting = EdgeWeighting::LogMean);

/// Weak Fokker-Planck functional on per-interval test potentials:
/// L(phi) = sum_k dt [ <phi_k, drho_k>_m - (beta/2) <Lap phi_k, rho_mid_k>_m ].
double fp_functional(const Space& space, const MeasureCurve& curve,
                     const std::vector<NodeField>& test);

/// Dual norm || L_mu ||_{V'(mu)} via the Riesz representer (= sqrt of
/// v_norm_sq of the recovered FP drift).
double dual_norm(const Space& space, const MeasureCurve& curve);

/// Dual norm via the sup definition, maximizing L(phi)/||phi||_{V(mu)} over
/// the finite-dimensional test space with a CG route independent of the
/// representer solve.
double dual_norm_sup(const Space& space, const MeasureCurve& curve);

struct IntegratorOptions {
    double floor = kDensityFloor;
    int max_fixed_point_iters = 64;
    double fixed_point_tol = 1e-14;
    EdgeWeighting weighting = EdgeWeighting::LogMean;
};

/// Integrates d rho / ds = (beta/2) Lap rho - div(rho_hat V) from rho0 at
/// s = t_start to s = 0 with the Crank-Nicolson midpoint scheme; mass is
/// conserved by the divergence form of the update. Raises PositivityError
/// (naming the offending step) when a slice leaves the admissible set.
MeasureCurve forward_integrate(const Space& space, const Density& rho0, double t_start,
                               const DriftField& drift, const IntegratorOptions& opt = {});

/// Strong-form residual of the recovered drift's interval equation,
/// relative to the right-hand side (diagnostic for the Poisson solves).
double recovery_residual(const Space& space, const MeasureCurve& curve, const DriftField& drift,
                         bool fokker_planck, EdgeWeighting weighting = EdgeWeighting::LogMean);

}  // namespace entroflow
