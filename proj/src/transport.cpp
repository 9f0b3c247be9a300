#include "entroflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace entroflow {

namespace {

constexpr double kSupplyTol = 1e-15;

// Min-cost flow on the complete bipartite graph, successive shortest paths
// with node potentials (Dijkstra on reduced costs). Supplies are real; each
// augmentation exhausts a source or a sink, so at most 2n rounds.
struct Transport {
    int n;
    const Eigen::MatrixXd& cost;
    Eigen::VectorXd supply, demand;   // remaining masses
    Eigen::VectorXd pot_src, pot_dst; // dual potentials
    Eigen::MatrixXd flow;

    Transport(const Eigen::MatrixXd& c, Eigen::VectorXd a, Eigen::VectorXd b)
        : n(static_cast<int>(a.size())),
          cost(c),
          supply(std::move(a)),
          demand(std::move(b)),
          pot_src(Eigen::VectorXd::Zero(n)),
          pot_dst(Eigen::VectorXd::Zero(n)),
          flow(Eigen::MatrixXd::Zero(n, n)) {}

    void run() {
        // Costs are nonnegative, so zero potentials give nonnegative reduced
        // costs at the start.
        const long max_rounds = 100L * n + 100;
        long rounds = 0;
        while (true) {
            double remaining_supply = 0, remaining_demand = 0;
            for (int i = 0; i < n; ++i) remaining_supply += std::max(0.0, supply[i]);
            for (int j = 0; j < n; ++j) remaining_demand += std::max(0.0, demand[j]);
            // Rounding dust on one side only cannot be routed; it is far
            // below the marginal tolerance.
            if (remaining_supply <= 1e-12 || remaining_demand <= 1e-12) break;
            require(++rounds <= max_rounds, "w2_exact: augmentation cap exceeded");
            augment();
        }
    }

    // Dijkstra from every active source simultaneously over the residual
    // graph: forward arcs (i -> j) where flow can increase, backward arcs
    // (j -> i) where flow(i,j) > 0.
    void augment() {
        const double inf = std::numeric_limits<double>::infinity();
        Eigen::VectorXd dist_src = Eigen::VectorXd::Constant(n, inf);
        Eigen::VectorXd dist_dst = Eigen::VectorXd::Constant(n, inf);
        std::vector<int> parent_dst(n, -1);  // source feeding each dst in the path tree
        std::vector<int> parent_src(n, -1);  // dst preceding each src (backward arc)
        using Item = std::pair<double, int>;  // (distance, node); node < n: src, else dst
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        for (int i = 0; i < n; ++i)
            if (supply[i] > kSupplyTol) {
                dist_src[i] = 0;
                pq.push({0.0, i});
            }
        std::vector<char> done_src(n, 0), done_dst(n, 0);
        while (!pq.empty()) {
            auto [d, node] = pq.top();
            pq.pop();
            if (node < n) {
                int i = node;
                if (done_src[i] || d > dist_src[i]) continue;
                done_src[i] = 1;
                for (int j = 0; j < n; ++j) {
                    if (done_dst[j]) continue;
                    double rc = cost(i, j) - pot_src[i] - pot_dst[j];
                    if (rc < 0) rc = 0;  // rounding guard
                    if (dist_src[i] + rc < dist_dst[j]) {
                        dist_dst[j] = dist_src[i] + rc;
                        parent_dst[j] = i;
                        pq.push({dist_dst[j], n + j});
                    }
                }
            } else {
                int j = node - n;
                if (done_dst[j] || d > dist_dst[j]) continue;
                done_dst[j] = 1;
                for (int i = 0; i < n; ++i) {
                    if (done_src[i] || flow(i, j) <= 0) continue;
                    double rc = -(cost(i, j) - pot_src[i] - pot_dst[j]);
                    if (rc < 0) rc = 0;
                    if (dist_dst[j] + rc < dist_src[i]) {
                        dist_src[i] = dist_dst[j] + rc;
                        parent_src[i] = j;
                        pq.push({dist_src[i], i});
                    }
                }
            }
        }
        // Closest reachable sink with remaining demand.
        int sink = -1;
        double best = inf;
        for (int j = 0; j < n; ++j)
            if (demand[j] > kSupplyTol && dist_dst[j] < best) {
                best = dist_dst[j];
                sink = j;
            }
        require(sink >= 0, "w2_exact: no augmenting path (marginals inconsistent)");

        // Bottleneck along the alternating path back to a source.
        double push = demand[sink];
        {
            int j = sink;
            while (true) {
                int i = parent_dst[j];
                if (parent_src[i] < 0) {
                    push = std::min(push, supply[i]);
                    break;
                }
                int jprev = parent_src[i];
                push = std::min(push, flow(i, jprev));
                j = jprev;
            }
        }
        // Apply the augmentation.
        {
            int j = sink;
            while (true) {
                int i = parent_dst[j];
                flow(i, j) += push;
                if (parent_src[i] < 0) {
                    supply[i] -= push;
                    break;
                }
                int jprev = parent_src[i];
                flow(i, jprev) -= push;
                j = jprev;
            }
            demand[sink] -= push;
        }
        // Potential update keeps residual reduced costs nonnegative and flow
        // arcs tight: u_i -= min(dist_i, d*), v_j += min(dist_j, d*).
        for (int i = 0; i < n; ++i) pot_src[i] -= std::min(dist_src[i], best);
        for (int j = 0; j < n; ++j) pot_dst[j] += std::min(dist_dst[j], best);
    }
};

}  // namespace

Coupling w2_exact(const Space& space, const Density& mu, const Density& nu) {
    const int n = space.num_nodes();
    Eigen::MatrixXd cost = space.distance().array().square();
    Eigen::VectorXd a = mu.masses(space);
    Eigen::VectorXd b = nu.masses(space);

    Transport t(cost, a, b);
    t.run();

    Coupling c;
    c.plan = t.flow;
    c.cost = (t.flow.array() * cost.array()).sum();
    c.marginal_error = std::max((t.flow.rowwise().sum() - mu.masses(space)).cwiseAbs().maxCoeff(),
                                (t.flow.colwise().sum().transpose() - nu.masses(space)).cwiseAbs().maxCoeff());
    // Dual feasibility: u_i + v_j <= c_ij, tight on support.
    double viol = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double rc = cost(i, j) - t.pot_src[i] - t.pot_dst[j];
            viol = std::max(viol, -rc);
            if (t.flow(i, j) > 1e-12) viol = std::max(viol, std::abs(rc));
        }
    c.dual_residual = viol;
    return c;
}

SinkhornResult w2_sinkhorn(const Space& space, const Density& mu, const Density& nu, double reg,
                           const SinkhornOptions& opt) {
    require(reg > 0, "w2_sinkhorn: regularization must be positive");
    const int n = space.num_nodes();
    Eigen::MatrixXd cost = space.distance().array().square();
    Eigen::VectorXd log_a = mu.masses(space).array().log();
    Eigen::VectorXd log_b = nu.masses(space).array().log();

    Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(n);
    SinkhornResult res;
    std::ostringstream trace;

    auto soft_min_rows = [&](double eps, const Eigen::VectorXd& gg) {
        // (row i) -eps log sum_j exp((-C_ij + g_j)/eps + log_b_j)
        Eigen::VectorXd out(n);
        for (int i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) mx = std::max(mx, (-cost(i, j) + gg[j]) / eps + log_b[j]);
            double acc = 0;
            for (int j = 0; j < n; ++j) acc += std::exp((-cost(i, j) + gg[j]) / eps + log_b[j] - mx);
            out[i] = -eps * (mx + std::log(acc));
        }
        return out;
    };
    auto soft_min_cols = [&](double eps, const Eigen::VectorXd& ff) {
        Eigen::VectorXd out(n);
        for (int j = 0; j < n; ++j) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) mx = std::max(mx, (-cost(i, j) + ff[i]) / eps + log_a[i]);
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += std::exp((-cost(i, j) + ff[i]) / eps + log_a[i] - mx);
            out[j] = -eps * (mx + std::log(acc));
        }
        return out;
    };
    auto marginal_error = [&](double eps) {
        // Row marginals of the plan with current potentials.
        double err = 0;
        for (int i = 0; i < n; ++i) {
            double acc = 0;
            for (int j = 0; j < n; ++j)
                acc += std::exp((f[i] + g[j] - cost(i, j)) / eps + log_a[i] + log_b[j]);
            err = std::max(err, std::abs(acc - std::exp(log_a[i])));
        }
        return err;
    };

    for (int stage = opt.scaling_stages - 1; stage >= 0; --stage) {
        const double eps = reg * std::pow(opt.scaling_factor, stage);
        int iters_at_stage = 0;
        const int budget = std::max(50, opt.max_iter / std::max(1, opt.scaling_stages));
        while (iters_at_stage < budget) {
            f = soft_min_rows(eps, g);
            g = soft_min_cols(eps, f);
            ++iters_at_stage;
            ++res.iterations;
            if (iters_at_stage % 10 == 0 || stage == 0) {
                const double err = marginal_error(eps);
                if (stage == 0) trace << "eps=" << eps << " iter=" << res.iterations << " err=" << err << "\n";
                if (err <= opt.tol && stage == 0) {
                    res.converged = true;
                    res.marginal_error = err;
                    break;
                }
                if (err <= opt.tol) break;  // stage converged, anneal down
            }
        }
        if (res.converged) break;
    }
    if (!res.converged) {
        res.marginal_error = marginal_error(reg);
        if (res.marginal_error > opt.tol)
            throw Error("w2_sinkhorn: no convergence after " + std::to_string(res.iterations) +
                        " iterations; trace:\n" + trace.str());
        res.converged = true;
    }
    double cost_acc = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost_acc += cost(i, j) * std::exp((f[i] + g[j] - cost(i, j)) / reg + log_a[i] + log_b[j]);
    res.cost = cost_acc;
    return res;
}

MetricSpeedReport metric_speed(const Space& space, const MeasureCurve& curve) {
    MetricSpeedReport rep;
    DriftField y = recover_continuity_drift(space, curve);
    rep.drift_speed.resize(curve.num_intervals());
    rep.w2_speed.resize(curve.num_intervals());
    for (int k = 0; k < curve.num_intervals(); ++k) {
        const double zz = z_inner(space, curve.midpoint(space, k), y.slices[k], y.slices[k]);
        rep.drift_speed[k] = std::sqrt(std::max(0.0, zz));
        rep.action += curve.dt() * zz;
        rep.w2_speed[k] = w2(space, curve.slice(k), curve.slice(k + 1)) / curve.dt();
    }
    return rep;
}

ContractionReport contraction_report(const Space& space, const Density& mu, const Density& nu, double s) {
    require(s > 0, "contraction_report: s must be positive");
    ContractionReport rep;
    rep.s = s;
    rep.w2_before = w2(space, mu, nu);
    if (rep.w2_before <= 1e-12) {
        rep.degenerate = true;
        return rep;
    }
    Density hmu(space, space.heat_apply(mu.values(), s), mu.floor());
    Density hnu(space, space.heat_apply(nu.values(), s), nu.floor());
    rep.w2_after = w2(space, hmu, hnu);
    rep.ratio = rep.w2_after / rep.w2_before;
    rep.implied_K = -2.0 * std::log(std::max(rep.ratio, 1e-300)) / (space.beta() * s);
    return rep;
}

}  // namespace entroflow
