#pragma once

#include "entroflow/drift.hpp"

namespace entroflow {

/// Transport plan between two node-mass vectors; row sums are the source
/// masses, column sums the target masses.
struct Coupling {
    Eigen::MatrixXd plan;
    double cost = 0;               // integral of d^2 d gamma
    double dual_residual = 0;      // max complementary-slackness violation
    double marginal_error = 0;     // worst marginal defect
};

/// Exact quadratic Wasserstein distance (squared) via min-cost flow on the
/// complete bipartite transport graph (successive shortest paths with
/// potentials). Returns W2^2 and the optimal coupling.
Coupling w2_exact(const Space& space, const Density& mu, const Density& nu);

inline double w2(const Space& space, const Density& mu, const Density& nu) {
    return std::sqrt(std::max(0.0, w2_exact(space, mu, nu).cost));
}

struct SinkhornOptions {
    double tol = 1e-9;        // worst marginal error at convergence
    int max_iter = 50000;
    int scaling_stages = 6;   // epsilon-scaling warm starts
    double scaling_factor = 4.0;
};

struct SinkhornResult {
    double cost = 0;            // <plan, d^2>
    double marginal_error = 0;
    int iterations = 0;
    bool converged = false;
};

/// Entropic W2^2 with log-domain stabilization and epsilon scaling.
/// Throws on non-convergence, reporting the iteration trace in the message.
SinkhornResult w2_sinkhorn(const Space& space, const Density& mu, const Density& nu, double reg,
                           const SinkhornOptions& opt = {});

struct MetricSpeedReport {
    std::vector<double> drift_speed;   // z-norm of the continuity drift per interval
    std::vector<double> w2_speed;      // W2(mu_{k+1}, mu_k) / dt, diagnostic
    double action = 0;                 // sum dt * drift_speed^2 = ||Y||^2_{V(mu)}
};

/// Metric derivative of a curve. The drift-norm variant is canonical (its
/// squared integral is the continuity drift's V(mu) norm, exactly); the
/// W2-quotient variant is a diagnostic, off at mesh scale because the ground
/// distance is not the discrete transport metric.
MetricSpeedReport metric_speed(const Space& space, const MeasureCurve& curve);

struct ContractionReport {
    double s = 0;
    double w2_before = 0;
    double w2_after = 0;
    double ratio = 0;
    double implied_K = 0;   // from ratio = exp(-K beta s / 2)
    bool degenerate = false;
};

/// Heat-flow contraction diagnostic: W2(H_s mu, H_s nu) vs W2(mu, nu).
ContractionReport contraction_report(const Space& space, const Density& mu, const Density& nu, double s);

}  // namespace entroflow
