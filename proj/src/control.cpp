#include "entroflow/control.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace entroflow {

namespace {

double log_mean_partial_first(double a, double b) {
    const double d = std::log(a) - std::log(b);
    if (std::abs(d) > 1e-6) {
        const double lam = (a - b) / d;
        return 1.0 / d - lam / (a * d);
    }
    return 0.5 - (a - b) / (3.0 * (a + b));
}

struct IntervalLinearization {
    EdgeField lam;           // log-mean weights at the interval midpoint
    Eigen::MatrixXd J;       // d/d rho_mid [ (beta/2) Lap rho - div(lam D psi) ]
    NodeField ell_rho;       // d ell / d rho_mid (covector)
    NodeField ell_psi;       // d ell / d psi      (covector)
};

Eigen::MatrixXd laplacian_matrix(const Space& space) {
    const int n = space.num_nodes();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : space.edges()) {
        L(e.u, e.u) -= e.w;
        L(e.v, e.v) -= e.w;
        L(e.u, e.v) += e.w;
        L(e.v, e.u) += e.w;
    }
    return space.measure().cwiseInverse().asDiagonal() * L;
}

NodeField weighted_laplacian_apply(const Space& space, const EdgeField& lam, const NodeField& psi) {
    NodeField out = NodeField::Zero(space.num_nodes());
    for (int i = 0; i < space.num_edges(); ++i) {
        const auto& e = space.edges()[i];
        const double c = e.w * lam[i] * (psi[e.u] - psi[e.v]);
        out[e.u] += c;
        out[e.v] -= c;
    }
    return out;
}

IntervalLinearization linearize_interval(const Scenario& sc, const Eigen::MatrixXd& lap_mat,
                                         const Density& mid, const NodeField& psi, int k) {
    const Space& space = *sc.space;
    const double dt = sc.dt();
    IntervalLinearization lin;
    lin.lam = log_mean_weights(space, mid);
    lin.J = 0.5 * space.beta() * lap_mat;
    lin.ell_rho = dt * sc.running_mid(k).cwiseProduct(space.measure());
    lin.ell_psi = dt * weighted_laplacian_apply(space, lin.lam, psi);

    EdgeField dpsi = space.gradient(psi);
    for (int i = 0; i < space.num_edges(); ++i) {
        const auto& e = space.edges()[i];
        const double da = log_mean_partial_first(mid[e.u], mid[e.v]);
        const double db = log_mean_partial_first(mid[e.v], mid[e.u]);
        // Energy term: (1/2) dt w (D psi)^2 * dLambda/d rho.
        const double coef = 0.5 * dt * e.w * dpsi[i] * dpsi[i];
        lin.ell_rho[e.u] += coef * da;
        lin.ell_rho[e.v] += coef * db;
        // Transport Jacobian: d div(lam D psi) / d rho_mid, folded into J
        // with the opposite sign.
        const double flux = e.w * dpsi[i];
        lin.J(e.u, e.u) -= flux * da / space.measure()[e.u];
        lin.J(e.u, e.v) -= flux * db / space.measure()[e.u];
        lin.J(e.v, e.u) += flux * da / space.measure()[e.v];
        lin.J(e.v, e.v) += flux * db / space.measure()[e.v];
    }
    return lin;
}

}  // namespace

TerminalFunctional TerminalFunctional::linear(NodeField f) {
    TerminalFunctional t;
    t.kind = Kind::Linear;
    t.f = std::move(f);
    return t;
}

TerminalFunctional TerminalFunctional::quadratic(NodeField g, double c, NodeField f_linear) {
    TerminalFunctional t;
    t.kind = Kind::Quadratic;
    t.g = std::move(g);
    t.quad_coef = c;
    t.f = std::move(f_linear);
    return t;
}

double TerminalFunctional::value(const Space& space, const Density& rho) const {
    double v = space.inner_m(f, rho.values());
    if (kind == Kind::Quadratic) {
        const double pg = space.inner_m(g, rho.values());
        v += quad_coef * pg * pg;
    }
    return v;
}

NodeField TerminalFunctional::derivative(const Space& space, const Density& rho) const {
    NodeField d = f;
    if (kind == Kind::Quadratic) d += 2.0 * quad_coef * space.inner_m(g, rho.values()) * g;
    return d;
}

Scenario::Scenario(const Space& sp, double t, int n, Density nu)
    : space(&sp), t_start(t), steps(n), initial(std::move(nu)) {
    running_cost.assign(steps + 1, NodeField::Zero(sp.num_nodes()));
    terminal = TerminalFunctional::linear(NodeField::Zero(sp.num_nodes()));
}

void Scenario::validate() const {
    require(space != nullptr, "scenario: space missing");
    require(t_start < 0, "scenario: horizon must be negative");
    require(steps >= 2, "scenario: need at least two time steps");
    require(static_cast<int>(running_cost.size()) == steps + 1,
            "scenario: running cost must be given per grid time");
    for (const auto& fcost : running_cost) space->check_field(fcost);
    space->check_field(terminal.f);
    if (terminal.kind == TerminalFunctional::Kind::Quadratic) space->check_field(terminal.g);
}

double objective(const Scenario& sc, const DriftField& drift) {
    sc.validate();
    const Space& space = *sc.space;
    MeasureCurve curve = forward_integrate(space, sc.initial, sc.t_start, drift);
    double value = 0.5 * v_norm_sq(space, curve, drift);
    for (int k = 0; k < sc.steps; ++k)
        value += sc.dt() * space.inner_m(sc.running_mid(k), curve.midpoint(space, k).values());
    value += sc.terminal.value(space, curve.last());
    return value;
}

std::vector<NodeField> adjoint_gradient(const Scenario& sc, const std::vector<NodeField>& psi) {
    sc.validate();
    const Space& space = *sc.space;
    const int n = space.num_nodes();
    const int N = sc.steps;
    const double dt = sc.dt();
    require(static_cast<int>(psi.size()) == N, "adjoint_gradient: need one potential per interval");

    DriftField drift = DriftField::from_potentials(space, psi);
    MeasureCurve curve = forward_integrate(space, sc.initial, sc.t_start, drift);
    const Eigen::MatrixXd lap_mat = laplacian_matrix(space);

    std::vector<IntervalLinearization> lin(N);
    for (int k = 0; k < N; ++k)
        lin[k] = linearize_interval(sc, lap_mat, curve.midpoint(space, k), psi[k], k);

    // Backward adjoint sweep. lambda_{k+1} multiplies the step constraint
    //   H_k = rho_{k+1} - rho_k - dt [ (beta/2) Lap rho_mid - div(lam D psi_k) ].
    std::vector<NodeField> lambda(N + 1);
    NodeField terminal_grad =
        sc.terminal.derivative(space, curve.last()).cwiseProduct(space.measure());
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - 0.5 * dt * lin[N - 1].J;
        lambda[N] = A.transpose().partialPivLu().solve(
            (-(0.5 * lin[N - 1].ell_rho + terminal_grad)).eval());
    }
    for (int j = N - 1; j >= 1; --j) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - 0.5 * dt * lin[j - 1].J;
        NodeField rhs = -(0.5 * lin[j - 1].ell_rho + 0.5 * lin[j].ell_rho);
        rhs -= (-Eigen::MatrixXd::Identity(n, n) - 0.5 * dt * lin[j].J).transpose() * lambda[j + 1];
        lambda[j] = A.transpose().partialPivLu().solve(rhs);
    }

    std::vector<NodeField> grad(N);
    for (int k = 0; k < N; ++k) {
        // dH/dpsi_k = -dt M^{-1} L_lam, so its adjoint action on lambda is
        // -dt L_lam M^{-1} lambda.
        NodeField lam_scaled = lambda[k + 1].cwiseQuotient(space.measure());
        grad[k] = lin[k].ell_psi - dt * weighted_laplacian_apply(space, lin[k].lam, lam_scaled);
    }
    return grad;
}

std::vector<NodeField> energy_gradient_fixed_curve(const Scenario& sc, const MeasureCurve& curve,
                                                   const std::vector<NodeField>& psi) {
    const Space& space = *sc.space;
    std::vector<NodeField> grad(psi.size());
    for (size_t k = 0; k < psi.size(); ++k) {
        EdgeField lam = log_mean_weights(space, curve.midpoint(space, static_cast<int>(k)));
        grad[k] = sc.dt() * weighted_laplacian_apply(space, lam, psi[k]);
    }
    return grad;
}

namespace {

double precond_norm(const Scenario& sc, const MeasureCurve& curve,
                    const std::vector<NodeField>& grad, std::vector<NodeField>& direction) {
    const Space& space = *sc.space;
    direction.resize(grad.size());
    double acc = 0;
    for (size_t k = 0; k < grad.size(); ++k) {
        Density mid = curve.midpoint(space, static_cast<int>(k));
        EdgeField lam = log_mean_weights(space, mid);
        direction[k] =
            solve_weighted_poisson(space, lam, grad[k].cwiseQuotient(space.measure()) / sc.dt());
        EdgeField d = space.gradient(direction[k]);
        acc += sc.dt() * z_inner(space, mid, d, d);
    }
    return std::sqrt(std::max(0.0, acc));
}

}  // namespace

Solution solve_value(const Scenario& sc) {
    sc.validate();
    const Space& space = *sc.space;
    const int N = sc.steps;
    const auto& opt = sc.optimizer;

    std::vector<NodeField> psi(N, NodeField::Zero(space.num_nodes()));
    DriftField drift = DriftField::from_potentials(space, psi);
    double value = objective(sc, drift);
    const double baseline = value;

    std::vector<NodeField> grad = adjoint_gradient(sc, psi);
    std::vector<NodeField> prev_psi, prev_grad;
    double kkt = 0;
    int iter = 0;
    std::vector<double> trace{value};
    double step = opt.initial_step;

    for (; iter < opt.max_iters; ++iter) {
        MeasureCurve curve = forward_integrate(space, sc.initial, sc.t_start,
                                               DriftField::from_potentials(space, psi));
        std::vector<NodeField> dir;
        kkt = precond_norm(sc, curve, grad, dir);
        if (kkt <= opt.grad_tol) break;

        // Barzilai-Borwein trial step in the raw coordinates.
        if (!prev_psi.empty()) {
            double ss = 0, sy = 0;
            for (int k = 0; k < N; ++k) {
                NodeField s = psi[k] - prev_psi[k];
                NodeField y = grad[k] - prev_grad[k];
                ss += s.dot(s);
                sy += s.dot(y);
            }
            if (sy > 1e-300) step = std::clamp(ss / sy, 1e-6, 1e4);
        }

        double directional = 0;
        for (int k = 0; k < N; ++k) directional += grad[k].dot(dir[k]);

        prev_psi = psi;
        prev_grad = grad;
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            std::vector<NodeField> cand(N);
            for (int k = 0; k < N; ++k) {
                cand[k] = psi[k] - step * dir[k];
                cand[k].array() -= cand[k].dot(space.measure());
            }
            double cand_value;
            try {
                cand_value = objective(sc, DriftField::from_potentials(space, cand));
            } catch (const PositivityError&) {
                step *= opt.backtrack_factor;  // automatic backoff
                continue;
            }
            if (cand_value <= value - opt.armijo * step * directional) {
                psi = std::move(cand);
                value = cand_value;
                accepted = true;
                break;
            }
            step *= opt.backtrack_factor;
        }
        trace.push_back(value);
        if (!accepted) break;  // line search stalled at the current iterate
        grad = adjoint_gradient(sc, psi);
    }

    Solution sol{
        .curve = forward_integrate(space, sc.initial, sc.t_start, DriftField::from_potentials(space, psi)),
        .drift = DriftField::from_potentials(space, psi),
        .value = value,
        .kkt_residual = kkt,
        .converged = kkt <= opt.grad_tol,
        .iterations = iter,
        .trace = std::move(trace),
        .zero_drift_value = baseline,
        .entropy_initial = entropy(space, sc.initial),
        .balance = BalanceReport{},
    };
    {
        std::vector<NodeField> dir;
        sol.kkt_residual = precond_norm(sc, sol.curve, adjoint_gradient(sc, psi), dir);
        sol.converged = sol.kkt_residual <= opt.grad_tol;
    }
    require(sol.value <= sol.zero_drift_value + 1e-9, "solve_value: lost to the zero-drift baseline");
    sol.balance = theorem1_check(space, sol.curve);
    return sol;
}

std::vector<NodeField> hopf_cole_dual(const Scenario& sc) {
    sc.validate();
    const Space& space = *sc.space;
    const int n = space.num_nodes();
    const int N = sc.steps;
    const double beta = space.beta();
    const Eigen::MatrixXd lap_mat = laplacian_matrix(space);

    std::vector<NodeField> v(N + 1);
    v[N] = (-sc.terminal.f.array() / beta).exp();

    double fmax = 0;
    for (const auto& fc : sc.running_cost) fmax = std::max(fmax, fc.cwiseAbs().maxCoeff());
    const int substeps = std::max(
        1, static_cast<int>(std::ceil(sc.dt() * (0.5 * beta * space.laplacian_norm_bound() + fmax / beta))));

    for (int k = N - 1; k >= 0; --k) {
        Eigen::MatrixXd A = 0.5 * beta * lap_mat;
        A -= (sc.running_mid(k) / beta).asDiagonal();
        const double h = sc.dt() / substeps;
        Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - 0.5 * h * A;
        Eigen::MatrixXd right = Eigen::MatrixXd::Identity(n, n) + 0.5 * h * A;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(left);
        NodeField w = v[k + 1];
        for (int j = 0; j < substeps; ++j) w = lu.solve(right * w);
        require(w.minCoeff() > 0, "hopf_cole_oracle: dual variable lost positivity");
        v[k] = w;
    }
    return v;
}

Solution hopf_cole_oracle(const Scenario& sc) {
    require(sc.terminal.kind == TerminalFunctional::Kind::Linear,
            "hopf_cole_oracle: requires a linear terminal functional");
    const Space& space = *sc.space;
    const int N = sc.steps;
    const double beta = space.beta();

    std::vector<NodeField> v = hopf_cole_dual(sc);
    std::vector<NodeField> psi(N);
    for (int k = 0; k < N; ++k) {
        psi[k] = 0.5 * beta * (v[k].array().log() + v[k + 1].array().log());
        psi[k].array() -= psi[k].dot(space.measure());
    }
    DriftField drift = DriftField::from_potentials(space, psi);

    Solution sol{
        .curve = forward_integrate(space, sc.initial, sc.t_start, drift),
        .drift = drift,
        .value = objective(sc, drift),
        .kkt_residual = 0,
        .converged = true,
        .iterations = 0,
        .trace = {},
        .zero_drift_value = objective(sc, DriftField::zero(space, N)),
        .entropy_initial = entropy(space, sc.initial),
        .balance = BalanceReport{},
    };
    sol.balance = theorem1_check(space, sol.curve);
    return sol;
}

Solution brute_force_oracle(const Scenario& sc, double box_halfwidth, int points_per_axis,
                            int refinements) {
    sc.validate();
    const Space& space = *sc.space;
    const int N = sc.steps;
    const int E = space.num_edges();
    const int dim = E * N;
    require(dim <= 4, "brute_force_oracle: drift dimension (edges x intervals) must be <= 4");
    require(points_per_axis >= 3 && points_per_axis % 2 == 1,
            "brute_force_oracle: need an odd number of grid points");

    auto evaluate = [&](const Eigen::VectorXd& x) -> double {
        DriftField d;
        d.slices.resize(N);
        for (int k = 0; k < N; ++k) d.slices[k] = x.segment(k * E, E);
        try {
            return objective(sc, d);
        } catch (const PositivityError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd center = Eigen::VectorXd::Zero(dim);
    double half = box_halfwidth;
    Eigen::VectorXd best = center;
    double best_value = evaluate(center);

    for (int level = 0; level < refinements; ++level) {
        const int P = points_per_axis;
        std::vector<int> idx(dim, 0);
        while (true) {
            Eigen::VectorXd x(dim);
            for (int d = 0; d < dim; ++d)
                x[d] = center[d] - half + 2.0 * half * idx[d] / (P - 1);
            const double val = evaluate(x);
            if (val < best_value) {
                best_value = val;
                best = x;
            }
            int d = 0;
            while (d < dim && ++idx[d] == P) idx[d++] = 0;
            if (d == dim) break;
        }
        center = best;
        half = 4.0 * half / (P - 1);  // keep a 2-cell margin around the best point
    }

    DriftField drift;
    drift.slices.resize(N);
    for (int k = 0; k < N; ++k) drift.slices[k] = best.segment(k * E, E);
    Solution sol{
        .curve = forward_integrate(space, sc.initial, sc.t_start, drift),
        .drift = drift,
        .value = best_value,
        .kkt_residual = 0,
        .converged = true,
        .iterations = refinements,
        .trace = {},
        .zero_drift_value = objective(sc, DriftField::zero(space, N)),
        .entropy_initial = entropy(space, sc.initial),
        .balance = BalanceReport{},
    };
    sol.balance = theorem1_check(space, sol.curve);
    return sol;
}

}  // namespace entroflow
