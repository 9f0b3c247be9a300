#pragma once

#include "entroflow/density.hpp"
#include "entroflow/space.hpp"

#include <random>

namespace entroflow::testing {

using Rng = std::mt19937_64;

/// Random connected weighted graph: spanning tree plus extra edges, random
/// conductances in [0.5, 2], random positive measure normalized to mass one,
/// shortest-path ground distance.
inline Space random_space(Rng& rng, int n, double beta = 1.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Edge> edges;
    auto add_edge = [&](int u, int v) {
        if (u > v) std::swap(u, v);
        for (const auto& e : edges)
            if (e.u == u && e.v == v) return;
        edges.push_back({u, v, 0.5 + 1.5 * unif(rng)});
    };
    for (int v = 1; v < n; ++v) add_edge(static_cast<int>(unif(rng) * v), v);
    const int extra = n / 2;
    for (int i = 0; i < extra; ++i) {
        int u = static_cast<int>(unif(rng) * n), v = static_cast<int>(unif(rng) * n);
        if (u != v) add_edge(u, v);
    }
    NodeField m(n);
    for (int x = 0; x < n; ++x) m[x] = 0.2 + unif(rng);
    m /= m.sum();
    std::vector<double> len(edges.size());
    for (size_t i = 0; i < edges.size(); ++i)
        len[i] = std::sqrt(0.5 * (m[edges[i].u] + m[edges[i].v]) / edges[i].w);
    Eigen::MatrixXd d = shortest_path_distance(n, edges, len);
    return Space(n, std::move(edges), std::move(m), std::move(d), beta);
}

inline NodeField random_field(Rng& rng, int n, double amp = 1.0) {
    std::normal_distribution<double> gauss(0.0, amp);
    NodeField f(n);
    for (int x = 0; x < n; ++x) f[x] = gauss(rng);
    return f;
}

inline Density random_density(Rng& rng, const Space& space, double amp = 0.8) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    NodeField rho(space.num_nodes());
    for (int x = 0; x < space.num_nodes(); ++x) rho[x] = std::exp(amp * unif(rng));
    rho /= rho.dot(space.measure());
    return Density(space, rho);
}

/// Localized density: Gaussian bump in the ground distance around a center
/// node, on a small positive background.
inline Density bump_density(Rng& rng, const Space& space, int center, double width) {
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    NodeField rho(space.num_nodes());
    for (int x = 0; x < space.num_nodes(); ++x) {
        const double d = space.distance()(x, center);
        rho[x] = std::exp(-0.5 * d * d / (width * width)) * jitter(rng) + 0.05;
    }
    rho /= rho.dot(space.measure());
    return Density(space, rho);
}

/// Smooth analytic curve family: rho_s proportional to
/// exp(sum_j a_j(s) g_j(x)) with a_j trigonometric in s; strictly positive
/// and C-infinity in s, so it can be sampled exactly on any time grid.
struct AnalyticCurve {
    const Space* space;
    std::vector<NodeField> modes;
    std::vector<double> amp, freq, phase;

    static AnalyticCurve random(Rng& rng, const Space& space, int num_modes = 3, double amp = 0.4) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        AnalyticCurve c;
        c.space = &space;
        for (int j = 0; j < num_modes; ++j) {
            c.modes.push_back(random_field(rng, space.num_nodes(), 1.0));
            c.amp.push_back(amp * (0.3 + 0.7 * unif(rng)));
            c.freq.push_back(0.5 + 2.0 * unif(rng));
            c.phase.push_back(2.0 * std::numbers::pi * unif(rng));
        }
        return c;
    }

    Density at(double s) const {
        NodeField expo = NodeField::Zero(space->num_nodes());
        for (size_t j = 0; j < modes.size(); ++j)
            expo += amp[j] * std::sin(freq[j] * s + phase[j]) * modes[j];
        NodeField rho = expo.array().exp();
        rho /= rho.dot(space->measure());
        return Density(*space, rho);
    }

    MeasureCurve sample(double t_start, int intervals) const {
        std::vector<Density> slices;
        const double dt = -t_start / intervals;
        for (int k = 0; k <= intervals; ++k) slices.push_back(at(t_start + k * dt));
        return MeasureCurve(*space, t_start, std::move(slices));
    }
};

}  // namespace entroflow::testing
