#include "entroflow/space.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

namespace entroflow {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kTriangleTol = 1e-9;

bool connected(int n, const std::vector<Edge>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        int x = q.front();
        q.pop();
        for (int y : adj[x])
            if (!seen[y]) {
                seen[y] = 1;
                ++count;
                q.push(y);
            }
    }
    return count == n;
}

}  // namespace

Space::Space(int n, std::vector<Edge> edges, NodeField measure, Eigen::MatrixXd distance,
             double beta, double curvature_K, bool nonneg_curvature, std::string name)
    : n_(n),
      edges_(std::move(edges)),
      m_(std::move(measure)),
      d_(std::move(distance)),
      beta_(beta),
      K_(curvature_K),
      nonneg_curvature_(nonneg_curvature),
      name_(std::move(name)),
      spectrum_cache_(std::make_shared<SpectrumCache>()) {
    validate();
    incident_.resize(n_);
    for (int i = 0; i < num_edges(); ++i) {
        incident_[edges_[i].u].push_back({i, +1});
        incident_[edges_[i].v].push_back({i, -1});
    }
}

void Space::validate() const {
    require(n_ >= 1, "space: need at least one node");
    require(m_.size() == n_, "space: measure size mismatch");
    require((m_.array() > 0).all(), "space: measure must be strictly positive");
    require(std::abs(m_.sum() - 1.0) <= kMassTol, "space: measure must have unit total mass");
    require(beta_ > 0, "space: beta must be positive");
    for (const auto& e : edges_) {
        require(e.u >= 0 && e.u < n_ && e.v >= 0 && e.v < n_ && e.u != e.v,
                "space: edge endpoints out of range");
        require(e.u < e.v, "space: edges must be stored with u < v");
        require(e.w > 0, "space: conductances must be positive");
    }
    require(n_ == 1 || connected(n_, edges_), "space: edge graph must be connected");
    require(d_.rows() == n_ && d_.cols() == n_, "space: distance matrix size mismatch");
    for (int i = 0; i < n_; ++i) {
        require(std::abs(d_(i, i)) <= kTriangleTol, "space: distance diagonal must be zero");
        for (int j = i + 1; j < n_; ++j) {
            require(std::abs(d_(i, j) - d_(j, i)) <= kTriangleTol, "space: distance must be symmetric");
            require(d_(i, j) > 0, "space: distinct nodes must have positive distance");
        }
    }
    // Triangle inequality; O(n^3), spot-checked above desk scale.
    if (n_ <= 256) {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k)
                    require(d_(i, j) <= d_(i, k) + d_(k, j) + kTriangleTol,
                            "space: distance violates the triangle inequality");
    }
}

void Space::check_field(const NodeField& f) const {
    require(f.size() == n_, "node field has wrong length");
    require(f.allFinite(), "node field has non-finite entries");
}

void Space::check_edge_field(const EdgeField& q) const {
    require(q.size() == num_edges(), "edge field has wrong length");
    require(q.allFinite(), "edge field has non-finite entries");
}

EdgeField Space::gradient(const NodeField& f) const {
    check_field(f);
    EdgeField g(num_edges());
    for (int i = 0; i < num_edges(); ++i) g[i] = f[edges_[i].v] - f[edges_[i].u];
    return g;
}

NodeField Space::divergence(const EdgeField& q) const {
    check_edge_field(q);
    NodeField out = NodeField::Zero(n_);
    for (int i = 0; i < num_edges(); ++i) {
        const double flux = edges_[i].w * q[i];
        out[edges_[i].u] += flux;
        out[edges_[i].v] -= flux;
    }
    return out.cwiseQuotient(m_);
}

NodeField Space::laplacian(const NodeField& f) const {
    check_field(f);
    NodeField out = NodeField::Zero(n_);
    for (int i = 0; i < num_edges(); ++i) {
        const double df = edges_[i].w * (f[edges_[i].v] - f[edges_[i].u]);
        out[edges_[i].u] += df;
        out[edges_[i].v] -= df;
    }
    return out.cwiseQuotient(m_);
}

NodeField Space::gamma(const NodeField& f, const NodeField& g) const {
    check_field(f);
    check_field(g);
    NodeField out = NodeField::Zero(n_);
    for (int i = 0; i < num_edges(); ++i) {
        const auto& e = edges_[i];
        const double c = 0.5 * e.w * (f[e.v] - f[e.u]) * (g[e.v] - g[e.u]);
        out[e.u] += c;
        out[e.v] += c;
    }
    return out.cwiseQuotient(m_);
}

double Space::dirichlet(const NodeField& f, const NodeField& g) const {
    double acc = 0;
    for (int i = 0; i < num_edges(); ++i) {
        const auto& e = edges_[i];
        acc += e.w * (f[e.v] - f[e.u]) * (g[e.v] - g[e.u]);
    }
    return acc;
}

const Space::Spectrum& Space::spectrum() const {
    std::call_once(spectrum_cache_->once, [this] {
        // Symmetrize the generator with M^{1/2}: S = M^{-1/2} L_w M^{-1/2} is
        // PSD; Lap = -M^{-1} L_w has the same spectrum with sign flipped.
        Eigen::VectorXd sqm = m_.array().sqrt();
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n_, n_);
        for (const auto& e : edges_) {
            S(e.u, e.u) += e.w;
            S(e.v, e.v) += e.w;
            S(e.u, e.v) -= e.w;
            S(e.v, e.u) -= e.w;
        }
        S = sqm.cwiseInverse().asDiagonal() * S * sqm.cwiseInverse().asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        require(es.info() == Eigen::Success, "space: eigendecomposition failed");
        auto spec = std::make_unique<Spectrum>();
        spec->lambda = -es.eigenvalues();  // Lap eigenvalues, <= 0
        spec->phi = sqm.cwiseInverse().asDiagonal() * es.eigenvectors();
        spec->phi_weighted = es.eigenvectors().transpose() * sqm.asDiagonal();
        spectrum_cache_->value = std::move(spec);
    });
    return *spectrum_cache_->value;
}

const Eigen::VectorXd& Space::generator_eigenvalues() const { return spectrum().lambda; }
const Eigen::MatrixXd& Space::generator_eigenvectors() const { return spectrum().phi; }

NodeField Space::heat_apply(const NodeField& f, double s) const {
    check_field(f);
    require(s >= 0, "heat_apply: s must be nonnegative");
    if (s == 0) return f;
    const auto& sp = spectrum();
    Eigen::VectorXd coeff = sp.phi_weighted * f;
    coeff.array() *= (0.5 * beta_ * s * sp.lambda.array()).exp();
    return sp.phi * coeff;
}

Eigen::MatrixXd Space::heat_kernel(double s) const {
    require(s > 0, "heat_kernel: s must be positive");
    const auto& sp = spectrum();
    Eigen::VectorXd decay = (0.5 * beta_ * s * sp.lambda.array()).exp();
    // p(x,y) = sum_k exp(s beta lambda_k / 2) phi_k(x) phi_k(y)
    return sp.phi * decay.asDiagonal() * sp.phi.transpose();
}

double Space::kernel_bound(double s) const {
    Eigen::MatrixXd p = heat_kernel(s);
    const double pmax = p.maxCoeff();
    const double pmin = p.minCoeff();
    if (pmin <= 0) return std::numeric_limits<double>::infinity();
    return std::max(pmax, 1.0 / pmin);
}

double Space::laplacian_norm_bound() const {
    double b = 0;
    NodeField deg = NodeField::Zero(n_);
    for (const auto& e : edges_) {
        deg[e.u] += e.w;
        deg[e.v] += e.w;
    }
    for (int x = 0; x < n_; ++x) b = std::max(b, 2.0 * deg[x] / m_[x]);
    return b;
}

NodeField Space::heat_apply_implicit_euler(const NodeField& f, double s, int min_substeps) const {
    check_field(f);
    require(s >= 0, "heat_apply: s must be nonnegative");
    if (s == 0) return f;
    const double half_beta = 0.5 * beta_;
    int steps = std::max<int>(min_substeps, static_cast<int>(std::ceil(s * half_beta * laplacian_norm_bound())));
    const double h = s / steps;
    // (I - h (beta/2) Lap) is an M-matrix; dense LLT on the m-symmetrized form.
    Eigen::VectorXd sqm = m_.array().sqrt();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& e : edges_) {
        A(e.u, e.u) += e.w;
        A(e.v, e.v) += e.w;
        A(e.u, e.v) -= e.w;
        A(e.v, e.u) -= e.w;
    }
    A = h * half_beta * (sqm.cwiseInverse().asDiagonal() * A * sqm.cwiseInverse().asDiagonal());
    A += Eigen::MatrixXd::Identity(n_, n_);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    require(llt.info() == Eigen::Success, "heat_apply: implicit factorization failed");
    Eigen::VectorXd g = sqm.cwiseProduct(f);
    for (int j = 0; j < steps; ++j) g = llt.solve(g);
    return g.cwiseQuotient(sqm);
}

BakryEmeryReport Space::bakry_emery_report(const NodeField& f, double s) const {
    require(s > 0, "bakry_emery_report: s must be positive");
    BakryEmeryReport rep;
    rep.s = s;
    NodeField pf = heat_apply(f, s);
    rep.gamma_after_flow = gamma(pf, pf).cwiseAbs().maxCoeff();
    rep.flow_of_gamma = heat_apply(gamma(f, f), s).cwiseAbs().maxCoeff();
    if (rep.flow_of_gamma < 1e-300) {
        rep.degenerate = true;
        return rep;
    }
    rep.ratio = rep.gamma_after_flow / rep.flow_of_gamma;
    rep.implied_K = -std::log(std::max(rep.ratio, 1e-300)) / (2.0 * beta_ * s);
    return rep;
}

Space Space::k2(double beta) {
    NodeField m(2);
    m << 0.5, 0.5;
    Eigen::MatrixXd d(2, 2);
    d << 0, 1, 1, 0;
    return Space(2, {{0, 1, 1.0}}, m, d, beta, 0.0, true, "k2");
}

Space Space::ring(int n, double beta) {
    require(n >= 3, "ring: need n >= 3");
    NodeField m = NodeField::Constant(n, 1.0 / n);
    // Conductance n = n^2 * m scales the generator to the periodic 1-D
    // Laplacian with mesh h = 1/n.
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, static_cast<double>(n)});
    edges.push_back({0, n - 1, static_cast<double>(n)});
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int k = std::abs(i - j);
            d(i, j) = static_cast<double>(std::min(k, n - k)) / n;
        }
    return Space(n, std::move(edges), m, d, beta, 0.0, true, "ring:" + std::to_string(n));
}

Space Space::grid(int n, double beta) {
    require(n >= 3, "grid: need n >= 3");
    const int nn = n * n;
    NodeField m = NodeField::Constant(nn, 1.0 / nn);
    auto id = [n](int i, int j) { return ((i % n + n) % n) * n + ((j % n + n) % n); };
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int a = id(i, j), b = id(i + 1, j), c = id(i, j + 1);
            edges.push_back({std::min(a, b), std::max(a, b), 1.0});
            edges.push_back({std::min(a, c), std::max(a, c), 1.0});
        }
    auto per = [n](int a, int b) {
        int k = std::abs(a - b);
        return std::min(k, n - k);
    };
    Eigen::MatrixXd d(nn, nn);
    for (int a = 0; a < nn; ++a)
        for (int b = 0; b < nn; ++b) {
            double di = per(a / n, b / n), dj = per(a % n, b % n);
            d(a, b) = std::sqrt(di * di + dj * dj) / n;
        }
    return Space(nn, std::move(edges), m, d, beta, 0.0, true, "grid:" + std::to_string(n));
}

Space Space::make(const std::string& spec, double beta) {
    if (spec == "k2") return k2(beta);
    auto colon = spec.find(':');
    if (colon != std::string::npos) {
        const std::string kind = spec.substr(0, colon);
        const int n = std::stoi(spec.substr(colon + 1));
        if (kind == "ring") return ring(n, beta);
        if (kind == "grid") return grid(n, beta);
    }
    throw Error("unknown space spec '" + spec + "' (expected k2, ring:N or grid:N)");
}

Eigen::MatrixXd shortest_path_distance(int n, const std::vector<Edge>& edges,
                                       const std::vector<double>& length) {
    require(length.size() == edges.size(), "shortest_path_distance: length per edge required");
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, inf);
    for (int i = 0; i < n; ++i) d(i, i) = 0;
    for (size_t i = 0; i < edges.size(); ++i) {
        d(edges[i].u, edges[i].v) = std::min(d(edges[i].u, edges[i].v), length[i]);
        d(edges[i].v, edges[i].u) = d(edges[i].u, edges[i].v);
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (d(i, k) + d(k, j) < d(i, j)) d(i, j) = d(i, k) + d(k, j);
    return d;
}

}  // namespace entroflow
