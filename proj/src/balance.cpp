#include "entroflow/balance.hpp"

#include <cmath>

namespace entroflow {

NodeField osmotic_potential(const Space& space, const Density& rho) {
    NodeField logp = rho.values().array().log();
    logp.array() -= logp.dot(space.measure());  // constants are Gamma-null
    return logp;
}

EdgeField osmotic_velocity(const Space& space, const Density& rho) {
    return space.gradient(osmotic_potential(space, rho));
}

BalanceReport entropy_balance(const Space& space, const MeasureCurve& curve) {
    BalanceReport rep;
    const int N = curve.num_intervals();
    const double beta = space.beta();
    rep.num_nodes = space.num_nodes();
    rep.num_intervals = N;
    rep.dt = curve.dt();

    DriftField Y = recover_continuity_drift(space, curve);
    DriftField V = recover_fp_drift(space, curve);

    rep.density_min = std::numeric_limits<double>::infinity();
    rep.density_max = 0;
    rep.fisher.resize(N);

    double cross = 0;
    for (int k = 0; k < N; ++k) {
        Density mid = curve.midpoint(space, k);
        EdgeField O = osmotic_velocity(space, mid);

        rep.term_current += curve.dt() * z_inner(space, mid, Y.slices[k], Y.slices[k]);
        rep.lhs += curve.dt() * z_inner(space, mid, V.slices[k], V.slices[k]);
        rep.fisher[k] = z_inner(space, mid, O, O);
        rep.term_osmotic += curve.dt() * 0.25 * beta * beta * rep.fisher[k];
        cross += curve.dt() * z_inner(space, mid, Y.slices[k], O);

        EdgeField resid = V.slices[k] - Y.slices[k] - 0.5 * beta * O;
        rep.decomposition_defect =
            std::max(rep.decomposition_defect, resid.lpNorm<Eigen::Infinity>());

        const double speed = std::sqrt(std::max(0.0, z_inner(space, mid, Y.slices[k], Y.slices[k])));
        rep.lipschitz_bound = std::max(rep.lipschitz_bound, speed);
    }
    for (int k = 0; k <= N; ++k) {
        rep.density_min = std::min(rep.density_min, curve.slice(k).values().minCoeff());
        rep.density_max = std::max(rep.density_max, curve.slice(k).values().maxCoeff());
    }

    rep.entropy_cross = beta * cross;
    rep.term_entropy = beta * (entropy(space, curve.last()) - entropy(space, curve.first()));
    rep.identity_defect = std::abs(rep.lhs - (rep.term_current + rep.term_entropy + rep.term_osmotic));
    rep.algebra_residual = std::abs(rep.lhs - (rep.term_current + rep.entropy_cross + rep.term_osmotic));
    rep.theorem1_slack = rep.lhs - (rep.term_current + rep.term_entropy);
    return rep;
}

BalanceReport theorem1_check(const Space& space, const MeasureCurve& curve) {
    BalanceReport rep = entropy_balance(space, curve);
    const double tol = 1e-8 * std::max(1.0, std::abs(rep.lhs));
    require(rep.theorem1_slack >= -tol,
            "theorem1_check: entropy-generation inequality violated (slack " +
                std::to_string(rep.theorem1_slack) + ")");
    return rep;
}

}  // namespace entroflow
