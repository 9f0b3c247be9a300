#pragma once

#include "entroflow/space.hpp"

#include <vector>

namespace entroflow {

/// Default lower bound for admissible densities (hypothesis of bounded
/// densities; inputs below the floor are rejected, never clipped).
constexpr double kDensityFloor = 1e-10;

/// Probability density with respect to the reference measure m:
/// rho >= floor > 0 and integral of rho dm = 1.
class Density {
public:
    Density(const Space& space, NodeField rho, double floor = kDensityFloor);

    const NodeField& values() const { return rho_; }
    double operator[](int x) const { return rho_[x]; }
    int size() const { return static_cast<int>(rho_.size()); }
    double floor() const { return floor_; }

    /// Node mass vector rho(x) m(x).
    NodeField masses(const Space& space) const { return rho_.cwiseProduct(space.measure()); }

    static Density uniform(const Space& space);

private:
    NodeField rho_;
    double floor_;
};

/// Ent_m(rho m) = integral of rho log rho dm. Nonnegative since m is a
/// probability measure.
double entropy(const Space& space, const Density& rho);

/// Dual heat flow on measures: H_s(rho m) = (P_{-s} rho) m.
Density heat_measure(const Space& space, const Density& rho, double s);

/// Logarithmic mean. Lambda(a,b) = (a-b)/(log a - log b), Lambda(a,a) = a.
double log_mean(double a, double b);

/// Per-edge logarithmic-mean weights rho_hat_e = Lambda(rho_u, rho_v).
/// Makes the chain rule for log exact: rho_hat_e (D log rho)_e = (D rho)_e.
EdgeField log_mean_weights(const Space& space, const Density& rho);

/// Node-averaged alternative weighting (comparison studies only).
EdgeField arithmetic_mean_weights(const Space& space, const Density& rho);

enum class EdgeWeighting { LogMean, ArithmeticMean };

/// Z(mu) inner product of edge fields: sum_e w_e rho_hat_e U_e W_e.
double z_inner(const Space& space, const Density& rho, const EdgeField& U, const EdgeField& W,
               EdgeWeighting weighting = EdgeWeighting::LogMean);

/// Curve of densities on the uniform time grid t = s_0 < ... < s_N = 0.
class MeasureCurve {
public:
    MeasureCurve(const Space& space, double t_start, std::vector<Density> slices);

    double t_start() const { return t_start_; }
    double dt() const { return dt_; }
    int num_intervals() const { return static_cast<int>(slices_.size()) - 1; }
    int num_slices() const { return static_cast<int>(slices_.size()); }
    double time(int k) const { return t_start_ + k * dt_; }

    const Density& slice(int k) const { return slices_.at(k); }
    const Density& first() const { return slices_.front(); }
    const Density& last() const { return slices_.back(); }

    /// Interval midpoint density (rho_k + rho_{k+1}) / 2.
    Density midpoint(const Space& space, int k) const;
    /// Forward difference (rho_{k+1} - rho_k) / dt on interval k.
    NodeField time_derivative(int k) const;

    /// Curve sampled from the exact heat semigroup: rho_s = P_{-(s - t)} rho_t.
    static MeasureCurve heat_flow(const Space& space, const Density& rho_start, double t_start,
                                  int intervals);

private:
    double t_start_;
    double dt_;
    std::vector<Density> slices_;
};

}  // namespace entroflow
