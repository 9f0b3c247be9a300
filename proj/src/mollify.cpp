#include "entroflow/mollify.hpp"

#include <cmath>
#include <numbers>

namespace entroflow {

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

}  // namespace

double BumpProfile::operator()(double u) const {
    const double lo = lower(), hi = upper();
    if (u <= lo || u >= hi) return 0.0;
    const double a = u - lo, b = hi - u;
    return norm * a * a * a * b * b * b;
}

double BumpProfile::derivative(double u) const {
    const double lo = lower(), hi = upper();
    if (u <= lo || u >= hi) return 0.0;
    const double a = u - lo, b = hi - u;
    return norm * (3.0 * a * a * b * b * b - 3.0 * a * a * a * b * b);
}

BumpProfile BumpProfile::standard(double delta) {
    require(delta > 0 && delta < 1, "mollifier: delta must lie in (0,1)");
    BumpProfile p;
    p.delta = delta;
    const double L = 1.0 / delta - delta;
    // integral of x^3 (L-x)^3 over [0, L] is L^7 / 140
    p.norm = 140.0 / std::pow(L, 7);
    return p;
}

void MollifierConfig::quadrature(std::vector<double>& nodes, std::vector<double>& weights) const {
    require(quadrature_nodes >= 2, "mollifier: need at least two quadrature nodes");
    std::vector<double> x, w;
    gauss_legendre(quadrature_nodes, x, w);
    const double lo = profile.lower(), hi = profile.upper();
    nodes.resize(x.size());
    weights.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        nodes[i] = 0.5 * (hi - lo) * x[i] + 0.5 * (hi + lo);
        weights[i] = 0.5 * (hi - lo) * w[i] * profile(nodes[i]);
    }
}

double MollifierConfig::time_profile(double tau) const {
    if (std::abs(tau) >= 1.0) return 0.0;
    const double c = 35.0 / 32.0;  // unit integral of (1 - tau^2)^3 on (-1,1)
    const double q = 1.0 - tau * tau;
    return c * q * q * q;
}

NodeField m_eps(const Space& space, const MollifierConfig& cfg, const NodeField& f, double eps) {
    require(eps > 0, "m_eps: eps must be positive");
    std::vector<double> u, q;
    cfg.quadrature(u, q);
    NodeField out = NodeField::Zero(space.num_nodes());
    for (size_t i = 0; i < u.size(); ++i) out += q[i] * space.heat_apply(f, eps * u[i]);
    return out;
}

NodeField m_eps_laplacian_form(const Space& space, const MollifierConfig& cfg, const NodeField& f,
                               double eps) {
    require(eps > 0, "m_eps: eps must be positive");
    std::vector<double> x, w;
    gauss_legendre(cfg.quadrature_nodes, x, w);
    const double lo = cfg.profile.lower(), hi = cfg.profile.upper();
    NodeField out = NodeField::Zero(space.num_nodes());
    for (size_t i = 0; i < x.size(); ++i) {
        const double u = 0.5 * (hi - lo) * x[i] + 0.5 * (hi + lo);
        const double gl = 0.5 * (hi - lo) * w[i];
        out += gl * cfg.profile.derivative(u) * space.heat_apply(f, eps * u);
    }
    return -out / eps;
}

std::vector<double> time_kernel_weights(const MollifierConfig& cfg, double eps, double dt) {
    const int W = time_kernel_halfwidth(cfg, eps, dt);
    std::vector<double> c(2 * W + 1);
    double total = 0;
    for (int l = -W; l <= W; ++l) {
        c[l + W] = cfg.time_profile(l * dt / eps) / eps * dt;
        total += c[l + W];
    }
    // Renormalize so the discrete kernel has exactly unit mass.
    for (double& v : c) v /= total;
    return c;
}

int time_kernel_halfwidth(const MollifierConfig& cfg, double eps, double dt) {
    (void)cfg;
    int W = static_cast<int>(std::floor(eps / dt));
    if (W * dt >= eps) --W;  // support is the open interval (-eps, eps)
    return std::max(0, W);
}

MeasureCurve smooth_curve(const Space& space, const MollifierConfig& cfg, const MeasureCurve& curve,
                          double eps) {
    require(eps > 0, "smooth_curve: eps must be positive");
    require(eps <= 0.5 * (-curve.t_start()), "smooth_curve: eps too large for the curve duration");
    const int N = curve.num_intervals();

    // Step 1: spatial smoothing per slice.
    std::vector<NodeField> spatial(N + 1);
    for (int k = 0; k <= N; ++k) spatial[k] = m_eps(space, cfg, curve.slice(k).values(), eps);

    // Step 4: time convolution with constant extension outside the window.
    const auto c = time_kernel_weights(cfg, eps, curve.dt());
    const int W = (static_cast<int>(c.size()) - 1) / 2;
    std::vector<Density> out;
    out.reserve(N + 1);
    for (int j = 0; j <= N; ++j) {
        NodeField acc = NodeField::Zero(space.num_nodes());
        for (int l = -W; l <= W; ++l) {
            int idx = std::clamp(j - l, 0, N);
            acc += c[l + W] * spatial[idx];
        }
        out.emplace_back(space, acc, curve.slice(0).floor());
    }
    return MeasureCurve(space, curve.t_start(), std::move(out));
}

DriftField smooth_drift(const Space& space, const MollifierConfig& cfg, const MeasureCurve& curve,
                        const DriftField& drift, double eps) {
    require(drift.num_intervals() == curve.num_intervals(), "smooth_drift: grid mismatch");
    MeasureCurve smoothed = smooth_curve(space, cfg, curve, eps);
    const int N = curve.num_intervals();

    // Spatial stage of the duality: G_tau = M^eps div(rho_hat_tau V_tau).
    std::vector<NodeField> g(N);
    for (int k = 0; k < N; ++k) {
        EdgeField rh = log_mean_weights(space, curve.midpoint(space, k));
        g[k] = m_eps(space, cfg, space.divergence(rh.cwiseProduct(drift.slices[k])), eps);
    }

    // Time stage: convolve the functionals (drift extended by zero), then
    // represent against the smoothed interval weights.
    const auto c = time_kernel_weights(cfg, eps, curve.dt());
    const int W = (static_cast<int>(c.size()) - 1) / 2;
    std::vector<NodeField> psi(N);
    for (int k = 0; k < N; ++k) {
        NodeField rhs = NodeField::Zero(space.num_nodes());
        for (int l = -W; l <= W; ++l) {
            int idx = k - l;
            if (idx < 0 || idx >= N) continue;
            rhs -= c[l + W] * g[idx];
        }
        psi[k] = solve_weighted_poisson(space, log_mean_weights(space, smoothed.midpoint(space, k)), rhs);
    }
    return DriftField::from_potentials(space, std::move(psi));
}

std::vector<double> fp_balance_defect(const Space& space, const MeasureCurve& curve,
                                      const DriftField& drift) {
    require(drift.num_intervals() == curve.num_intervals(), "fp_balance_defect: grid mismatch");
    std::vector<double> defect(curve.num_intervals());
    for (int k = 0; k < curve.num_intervals(); ++k) {
        Density mid = curve.midpoint(space, k);
        EdgeField rh = log_mean_weights(space, mid);
        NodeField r = curve.time_derivative(k) - 0.5 * space.beta() * space.laplacian(mid.values()) +
                      space.divergence(rh.cwiseProduct(drift.slices[k]));
        defect[k] = std::sqrt(space.inner_m(r, r));
    }
    return defect;
}

}  // namespace entroflow
