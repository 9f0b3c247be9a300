#include "entroflow/drift.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace entroflow {

namespace {

Eigen::MatrixXd weighted_laplacian_matrix(const Space& space, const EdgeField& weights) {
    const int n = space.num_nodes();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < space.num_edges(); ++i) {
        const auto& e = space.edges()[i];
        const double c = e.w * weights[i];
        B(e.u, e.u) += c;
        B(e.v, e.v) += c;
        B(e.u, e.v) -= c;
        B(e.v, e.u) -= c;
    }
    return B;
}

NodeField project_mean_zero(const Space& space, NodeField g) {
    g.array() -= g.dot(space.measure());
    return g;
}

EdgeField interval_weights(const Space& space, const MeasureCurve& curve, int k, EdgeWeighting w) {
    Density mid = curve.midpoint(space, k);
    return (w == EdgeWeighting::LogMean) ? log_mean_weights(space, mid)
                                         : arithmetic_mean_weights(space, mid);
}

}  // namespace

DriftField DriftField::zero(const Space& space, int intervals) {
    DriftField d;
    d.gradient_type = true;
    d.slices.assign(intervals, EdgeField::Zero(space.num_edges()));
    d.potentials.assign(intervals, NodeField::Zero(space.num_nodes()));
    return d;
}

DriftField DriftField::from_potentials(const Space& space, std::vector<NodeField> psi) {
    DriftField d;
    d.gradient_type = true;
    d.slices.reserve(psi.size());
    for (const auto& p : psi) d.slices.push_back(space.gradient(p));
    d.potentials = std::move(psi);
    return d;
}

double v_norm_sq(const Space& space, const MeasureCurve& curve, const DriftField& drift,
                 EdgeWeighting weighting) {
    require(drift.num_intervals() == curve.num_intervals(), "v_norm: grid mismatch");
    double acc = 0;
    for (int k = 0; k < curve.num_intervals(); ++k)
        acc += curve.dt() * z_inner(space, curve.midpoint(space, k), drift.slices[k], drift.slices[k], weighting);
    return acc;
}

NodeField solve_weighted_poisson(const Space& space, const EdgeField& weights, const NodeField& g) {
    space.check_edge_field(weights);
    require(weights.minCoeff() > 0, "poisson: weights must be positive");
    const int n = space.num_nodes();
    const NodeField& m = space.measure();
    NodeField g0 = project_mean_zero(space, g);

    Eigen::MatrixXd B = weighted_laplacian_matrix(space, weights);
    // Rank-one shift along the null direction: on the compatible right-hand
    // side the solution automatically satisfies integral psi dm = 0.
    const double c = B.trace() / n;
    B += c * m * m.transpose();
    Eigen::VectorXd rhs = m.cwiseProduct(g0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
    require(ldlt.info() == Eigen::Success, "poisson: factorization failed");
    NodeField psi = ldlt.solve(rhs);
    psi += ldlt.solve(rhs - B * psi);  // one step of iterative refinement
    psi.array() -= psi.dot(m);
    return psi;
}

NodeField solve_weighted_poisson_cg(const Space& space, const EdgeField& weights, const NodeField& g,
                                    double tol, int max_iter) {
    const int n = space.num_nodes();
    const NodeField& m = space.measure();
    NodeField g0 = project_mean_zero(space, g);
    Eigen::VectorXd b = m.cwiseProduct(g0);

    NodeField diag = NodeField::Zero(n);
    for (int i = 0; i < space.num_edges(); ++i) {
        const auto& e = space.edges()[i];
        diag[e.u] += e.w * weights[i];
        diag[e.v] += e.w * weights[i];
    }
    auto apply = [&](const NodeField& x) -> NodeField {
        NodeField y = NodeField::Zero(n);
        for (int i = 0; i < space.num_edges(); ++i) {
            const auto& e = space.edges()[i];
            const double c = e.w * weights[i] * (x[e.u] - x[e.v]);
            y[e.u] += c;
            y[e.v] -= c;
        }
        return y;
    };

    NodeField x = NodeField::Zero(n);
    NodeField r = b;
    NodeField z = r.cwiseQuotient(diag);
    NodeField p = z;
    double rz = r.dot(z);
    const double b_norm = b.norm();
    if (b_norm == 0) return x;
    for (int it = 0; it < max_iter; ++it) {
        NodeField Ap = apply(p);
        const double alpha = rz / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        if (r.norm() <= tol * b_norm) break;
        NodeField z2 = r.cwiseQuotient(diag);
        const double rz2 = r.dot(z2);
        p = z2 + (rz2 / rz) * p;
        rz = rz2;
    }
    x.array() -= x.dot(m);
    return x;
}

namespace {

DriftField recover_drift_impl(const Space& space, const MeasureCurve& curve, bool fokker_planck,
                              EdgeWeighting weighting) {
    const int N = curve.num_intervals();
    std::vector<NodeField> psi(N);
    for (int k = 0; k < N; ++k) {
        NodeField rhs = curve.time_derivative(k);
        if (fokker_planck)
            rhs -= 0.5 * space.beta() * space.laplacian(curve.midpoint(space, k).values());
        psi[k] = solve_weighted_poisson(space, interval_weights(space, curve, k, weighting), rhs);
    }
    return DriftField::from_potentials(space, std::move(psi));
}

}  // namespace

DriftField recover_continuity_drift(const Space& space, const MeasureCurve& curve, EdgeWeighting w) {
    return recover_drift_impl(space, curve, false, w);
}

DriftField recover_fp_drift(const Space& space, const MeasureCurve& curve, EdgeWeighting w) {
    return recover_drift_impl(space, curve, true, w);
}

double recovery_residual(const Space& space, const MeasureCurve& curve, const DriftField& drift,
                         bool fokker_planck, EdgeWeighting weighting) {
    double worst = 0;
    for (int k = 0; k < curve.num_intervals(); ++k) {
        NodeField rhs = curve.time_derivative(k);
        if (fokker_planck)
            rhs -= 0.5 * space.beta() * space.laplacian(curve.midpoint(space, k).values());
        EdgeField rh = interval_weights(space, curve, k, weighting);
        NodeField lhs = -space.divergence(rh.cwiseProduct(drift.slices[k]));
        const double scale = std::max(1e-30, rhs.norm());
        worst = std::max(worst, (lhs - rhs).norm() / scale);
    }
    return worst;
}

double fp_functional(const Space& space, const MeasureCurve& curve, const std::vector<NodeField>& test) {
    require(static_cast<int>(test.size()) == curve.num_intervals(), "fp_functional: grid mismatch");
    double acc = 0;
    for (int k = 0; k < curve.num_intervals(); ++k) {
        const NodeField drho = curve.time_derivative(k);
        const NodeField mid = curve.midpoint(space, k).values();
        acc += curve.dt() * (space.inner_m(test[k], drho) -
                             0.5 * space.beta() * space.inner_m(space.laplacian(test[k]), mid));
    }
    return acc;
}

double dual_norm(const Space& space, const MeasureCurve& curve) {
    DriftField v = recover_fp_drift(space, curve);
    return std::sqrt(std::max(0.0, v_norm_sq(space, curve, v)));
}

double dual_norm_sup(const Space& space, const MeasureCurve& curve) {
    // The maximizer of L(phi)/||phi|| solves the same weighted Poisson
    // problems; CG gives an independent route to it. The sup value is then
    // evaluated from the functional itself, not from the representer norm.
    const int N = curve.num_intervals();
    std::vector<NodeField> phi(N);
    for (int k = 0; k < N; ++k) {
        NodeField rhs = curve.time_derivative(k) -
                        0.5 * space.beta() * space.laplacian(curve.midpoint(space, k).values());
        phi[k] = solve_weighted_poisson_cg(space, interval_weights(space, curve, k, EdgeWeighting::LogMean), rhs);
    }
    double norm_sq = 0;
    for (int k = 0; k < N; ++k) {
        EdgeField dphi = space.gradient(phi[k]);
        norm_sq += curve.dt() * z_inner(space, curve.midpoint(space, k), dphi, dphi);
    }
    if (norm_sq <= 0) return 0;
    return fp_functional(space, curve, phi) / std::sqrt(norm_sq);
}

namespace {

double mean_weight(EdgeWeighting w, double a, double b) {
    return (w == EdgeWeighting::LogMean) ? log_mean(a, b) : 0.5 * (a + b);
}

double mean_weight_partial_first(EdgeWeighting w, double a, double b) {
    if (w == EdgeWeighting::ArithmeticMean) return 0.5;
    const double d = std::log(a) - std::log(b);
    if (std::abs(d) > 1e-6) {
        const double lam = (a - b) / d;
        return 1.0 / d - lam / (a * d);
    }
    return 0.5 - (a - b) / (3.0 * (a + b));
}

}  // namespace

MeasureCurve forward_integrate(const Space& space, const Density& rho0, double t_start,
                               const DriftField& drift, const IntegratorOptions& opt) {
    require(t_start < 0, "forward_integrate: t_start must be negative");
    const int N = drift.num_intervals();
    require(N >= 1, "forward_integrate: drift must cover at least one interval");
    const double dt = -t_start / N;
    const int n = space.num_nodes();
    for (const auto& s : drift.slices) space.check_edge_field(s);

    // Crank-Nicolson step, solved by Newton on the implicit relation
    //   H(next) = next - rho - dt [ (beta/2) Lap mid - div(rho_hat(mid) V_k) ],
    // mid = (rho + next)/2. The update is in divergence form, so mass is
    // conserved independently of the drift.
    Eigen::MatrixXd lap_mat = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : space.edges()) {
        lap_mat(e.u, e.u) -= e.w / space.measure()[e.u];
        lap_mat(e.u, e.v) += e.w / space.measure()[e.u];
        lap_mat(e.v, e.v) -= e.w / space.measure()[e.v];
        lap_mat(e.v, e.u) += e.w / space.measure()[e.v];
    }

    auto step_residual = [&](const NodeField& rho, const NodeField& next, int k) -> NodeField {
        NodeField mid = 0.5 * (rho + next);
        if (mid.minCoeff() <= 0)
            throw PositivityError("forward_integrate: midpoint density lost positivity at step " +
                                      std::to_string(k) + "; reduce the time step",
                                  k);
        EdgeField rh(space.num_edges());
        for (int i = 0; i < space.num_edges(); ++i) {
            const auto& e = space.edges()[i];
            rh[i] = mean_weight(opt.weighting, mid[e.u], mid[e.v]);
        }
        NodeField transport = space.divergence(rh.cwiseProduct(drift.slices[k]));
        return next - rho - dt * (0.5 * space.beta() * space.laplacian(mid) - transport);
    };
    auto step_jacobian = [&](const NodeField& rho, const NodeField& next, int k) -> Eigen::MatrixXd {
        NodeField mid = 0.5 * (rho + next);
        Eigen::MatrixXd J = 0.5 * space.beta() * lap_mat;
        const EdgeField& v = drift.slices[k];
        for (int i = 0; i < space.num_edges(); ++i) {
            const auto& e = space.edges()[i];
            const double da = mean_weight_partial_first(opt.weighting, mid[e.u], mid[e.v]);
            const double db = mean_weight_partial_first(opt.weighting, mid[e.v], mid[e.u]);
            const double flux = e.w * v[i];
            J(e.u, e.u) -= flux * da / space.measure()[e.u];
            J(e.u, e.v) -= flux * db / space.measure()[e.u];
            J(e.v, e.u) += flux * da / space.measure()[e.v];
            J(e.v, e.v) += flux * db / space.measure()[e.v];
        }
        return Eigen::MatrixXd::Identity(n, n) - 0.5 * dt * J;
    };

    std::vector<Density> slices;
    slices.reserve(N + 1);
    slices.push_back(rho0);
    NodeField rho = rho0.values();
    for (int k = 0; k < N; ++k) {
        NodeField next = rho;
        bool converged = false;
        for (int it = 0; it < opt.max_fixed_point_iters; ++it) {
            NodeField r = step_residual(rho, next, k);
            const bool small =
                r.lpNorm<Eigen::Infinity>() <=
                opt.fixed_point_tol * std::max(1.0, next.lpNorm<Eigen::Infinity>());
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(step_jacobian(rho, next, k));
            next -= lu.solve(r);  // with r already small this polishes to the quadratic floor
            if (small) {
                converged = true;
                break;
            }
        }
        require(converged, "forward_integrate: implicit step did not converge at step " +
                               std::to_string(k) + "; reduce the time step");
        if (next.minCoeff() < opt.floor)
            throw PositivityError("forward_integrate: density fell below the floor at step " +
                                      std::to_string(k) + " (min " + std::to_string(next.minCoeff()) +
                                      "); reduce the time step",
                                  k);
        slices.emplace_back(space, next, opt.floor);
        rho = next;
    }
    return MeasureCurve(space, t_start, std::move(slices));
}

}  // namespace entroflow
