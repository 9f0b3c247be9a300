#pragma once

#include "entroflow/drift.hpp"

namespace entroflow {

/// Fixed polynomial bump on [delta, 1/delta], normalized to unit integral:
/// k(u) = c (u - delta)^3 (1/delta - u)^3. Smooth enough for the quadrature
/// checks and reproducible bit-for-bit.
struct BumpProfile {
    double delta = 0.5;
    double norm = 1.0;  // chosen so the integral over the support is 1

    double lower() const { return delta; }
    double upper() const { return 1.0 / delta; }
    double operator()(double u) const;
    double derivative(double u) const;

    static BumpProfile standard(double delta = 0.5);
};

/// Configuration of the two-stage regularization: spatial profile k with
/// Gauss-Legendre quadrature on its support, even time profile eta on (-1,1).
struct MollifierConfig {
    BumpProfile profile = BumpProfile::standard();
    int quadrature_nodes = 16;

    /// Quadrature abscissae u_i in [delta, 1/delta] and weights q_i = gl_i k(u_i),
    /// so that M^eps f = sum_i q_i P_{-eps u_i} f. The weights sum to 1
    /// exactly at the quadrature's order.
    void quadrature(std::vector<double>& nodes, std::vector<double>& weights) const;

    /// Time profile eta(tau) = c (1 - tau^2)^3 on (-1,1), even, unit mass.
    double time_profile(double tau) const;
};

/// Spatial smoothing M^eps f = (1/eps) integral P_{-r} f k(r/eps) dr.
NodeField m_eps(const Space& space, const MollifierConfig& cfg, const NodeField& f, double eps);

/// Quadrature realization of (beta/2) Lap M^eps f via the derivative profile,
/// (-1/eps) sum_i gl_i k'(u_i) P_{-eps u_i} f; agrees with the direct
/// evaluation at the quadrature's order.
NodeField m_eps_laplacian_form(const Space& space, const MollifierConfig& cfg, const NodeField& f,
                               double eps);

/// Spatial smoothing per slice followed by time convolution with the
/// renormalized discrete eta^eps kernel (constant extension outside [t,0]).
MeasureCurve smooth_curve(const Space& space, const MollifierConfig& cfg, const MeasureCurve& curve,
                          double eps);

/// Drift smoothing by duality: the representer of
///   phi -> sum_l c_l <V_{k-l}, M^eps phi>_{Z(mu_{k-l})}
/// on the smoothed curve (drift extended by zero outside the window).
DriftField smooth_drift(const Space& space, const MollifierConfig& cfg, const MeasureCurve& curve,
                        const DriftField& drift, double eps);

/// Discrete convolution weights for the time stage (renormalized to unit sum).
std::vector<double> time_kernel_weights(const MollifierConfig& cfg, double eps, double dt);

/// Number of boundary intervals affected by the clamped time extension.
int time_kernel_halfwidth(const MollifierConfig& cfg, double eps, double dt);

/// Per-slice Fokker-Planck balance defect of a (curve, drift) pair:
/// || drho/ds - (beta/2) Lap rho_mid + div(rho_hat V) || per interval.
std::vector<double> fp_balance_defect(const Space& space, const MeasureCurve& curve,
                                      const DriftField& drift);

}  // namespace entroflow
