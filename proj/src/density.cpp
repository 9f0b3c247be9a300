#include "entroflow/density.hpp"

#include <cmath>

namespace entroflow {

Density::Density(const Space& space, NodeField rho, double floor) : rho_(std::move(rho)), floor_(floor) {
    space.check_field(rho_);
    require(floor_ > 0, "density: floor must be positive");
    require(rho_.minCoeff() >= floor_, "density: value below the admissible floor");
    require(std::abs(rho_.dot(space.measure()) - 1.0) <= 1e-12, "density: must integrate to 1 against m");
}

Density Density::uniform(const Space& space) {
    return Density(space, NodeField::Ones(space.num_nodes()));
}

double entropy(const Space& space, const Density& rho) {
    const NodeField& r = rho.values();
    double acc = 0;
    for (int x = 0; x < r.size(); ++x) acc += r[x] * std::log(r[x]) * space.measure()[x];
    return acc;
}

Density heat_measure(const Space& space, const Density& rho, double s) {
    return Density(space, space.heat_apply(rho.values(), s), rho.floor());
}

double log_mean(double a, double b) {
    // Evaluate through the same log difference used by gradient(log rho), so
    // the chain-rule identity Lambda * (log a - log b) = a - b is exact to
    // rounding. Series for nearly equal arguments.
    const double dlog = std::log(a) - std::log(b);
    if (std::abs(dlog) > 1e-8) return (a - b) / dlog;
    const double mid = 0.5 * (a + b);
    const double r = (a - b) / mid;  // |r| tiny
    return mid * (1.0 - r * r / 12.0);
}

EdgeField log_mean_weights(const Space& space, const Density& rho) {
    const auto& edges = space.edges();
    EdgeField out(space.num_edges());
    for (int i = 0; i < space.num_edges(); ++i) out[i] = log_mean(rho[edges[i].u], rho[edges[i].v]);
    return out;
}

EdgeField arithmetic_mean_weights(const Space& space, const Density& rho) {
    const auto& edges = space.edges();
    EdgeField out(space.num_edges());
    for (int i = 0; i < space.num_edges(); ++i) out[i] = 0.5 * (rho[edges[i].u] + rho[edges[i].v]);
    return out;
}

double z_inner(const Space& space, const Density& rho, const EdgeField& U, const EdgeField& W,
               EdgeWeighting weighting) {
    space.check_edge_field(U);
    space.check_edge_field(W);
    EdgeField rh = (weighting == EdgeWeighting::LogMean) ? log_mean_weights(space, rho)
                                                         : arithmetic_mean_weights(space, rho);
    double acc = 0;
    for (int i = 0; i < space.num_edges(); ++i) acc += space.edges()[i].w * rh[i] * U[i] * W[i];
    return acc;
}

MeasureCurve::MeasureCurve(const Space& space, double t_start, std::vector<Density> slices)
    : t_start_(t_start), slices_(std::move(slices)) {
    require(t_start_ < 0, "curve: start time must be negative (grid ends at 0)");
    require(slices_.size() >= 2, "curve: need at least one interval");
    for (const auto& s : slices_) require(s.size() == space.num_nodes(), "curve: slice size mismatch");
    dt_ = -t_start_ / static_cast<double>(slices_.size() - 1);
}

Density MeasureCurve::midpoint(const Space& space, int k) const {
    return Density(space, 0.5 * (slices_.at(k).values() + slices_.at(k + 1).values()),
                   std::min(slices_[k].floor(), slices_[k + 1].floor()));
}

NodeField MeasureCurve::time_derivative(int k) const {
    return (slices_.at(k + 1).values() - slices_.at(k).values()) / dt_;
}

MeasureCurve MeasureCurve::heat_flow(const Space& space, const Density& rho_start, double t_start,
                                     int intervals) {
    require(intervals >= 1, "heat_flow: need at least one interval");
    const double dt = -t_start / intervals;
    std::vector<Density> slices;
    slices.reserve(intervals + 1);
    for (int k = 0; k <= intervals; ++k)
        slices.emplace_back(space, space.heat_apply(rho_start.values(), k * dt), rho_start.floor());
    return MeasureCurve(space, t_start, std::move(slices));
}

}  // namespace entroflow
