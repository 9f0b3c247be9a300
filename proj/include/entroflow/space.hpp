#pragma once

#include "entroflow/common.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace entroflow {

struct Edge {
    int u = 0;       // tail of the canonical orientation
    int v = 0;       // head, u < v
    double w = 1.0;  // symmetric conductance, > 0
};

/// Diagnostic record for the Bakry-Emery gradient estimate. The discrete
/// model does not certify the continuum bound, so this is report-only.
struct BakryEmeryReport {
    double s = 0;
    double gamma_after_flow = 0;   // ||Gamma(P_{-s}f, P_{-s}f)||_inf
    double flow_of_gamma = 0;      // ||P_{-s} Gamma(f,f)||_inf
    double ratio = 0;
    double implied_K = 0;          // from ratio = exp(-2 K beta s)
    bool degenerate = false;       // constant input, 0/0 ratio
};

/// Finite metric measure space carrying a Dirichlet form: weighted graph
/// with reference probability measure m, symmetric conductances w, ground
/// distance d and diffusion constant beta. Immutable after construction;
/// all operations are pure and safe for concurrent use.
class Space {
public:
    Space(int n, std::vector<Edge> edges, NodeField measure, Eigen::MatrixXd distance,
          double beta, double curvature_K = 0.0, bool nonneg_curvature = false,
          std::string name = "custom");

    // Built-in generators.
    static Space k2(double beta = 1.0);
    static Space ring(int n, double beta = 1.0);
    static Space grid(int n, double beta = 1.0);  // n x n periodic grid
    /// Parse "k2", "ring:N" or "grid:N".
    static Space make(const std::string& spec, double beta = 1.0);

    int num_nodes() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const NodeField& measure() const { return m_; }
    const Eigen::MatrixXd& distance() const { return d_; }
    double beta() const { return beta_; }
    double curvature_K() const { return K_; }
    /// True for the canonical nonnegative-curvature instances (k2/ring/grid),
    /// where contraction-type diagnostics are asserted rather than reported.
    bool nonneg_curvature() const { return nonneg_curvature_; }
    const std::string& name() const { return name_; }

    // -- Dirichlet-form calculus ------------------------------------------

    /// (Df)_{u->v} = f(v) - f(u) on the canonical orientation.
    EdgeField gradient(const NodeField& f) const;

    /// div(q)(x) = (1/m(x)) sum_{y~x} w_xy q_{x->y}. Adjoint of the gradient:
    /// integral of div(q)*phi dm = -sum_e w_e q_e (Dphi)_e, exactly.
    NodeField divergence(const EdgeField& q) const;

    /// (Lap f)(x) = (1/m(x)) sum_y w_xy (f(y) - f(x)) = div(Df).
    NodeField laplacian(const NodeField& f) const;

    /// Carre du champ: Gamma(f,g)(x) = (1/(2 m(x))) sum_y w_xy (f(y)-f(x))(g(y)-g(x)).
    NodeField gamma(const NodeField& f, const NodeField& g) const;

    /// Dirichlet form E(f,g) = sum_e w_e (Df)_e (Dg)_e.
    double dirichlet(const NodeField& f, const NodeField& g) const;

    /// L2(m) pairing.
    double inner_m(const NodeField& f, const NodeField& g) const { return f.dot(m_.cwiseProduct(g)); }
    double integral(const NodeField& f) const { return f.dot(m_); }

    // -- Heat semigroup ----------------------------------------------------

    /// P_{-s} f = exp(s (beta/2) Lap) f, s >= 0.
    NodeField heat_apply(const NodeField& f, double s) const;

    /// Symmetric kernel of P_{-s}: (P_{-s} f)(x) = sum_y p(x,y) f(y) m(y), s > 0.
    Eigen::MatrixXd heat_kernel(double s) const;

    /// max(max p, 1/min p) for the kernel at time s (finite iff kernel positive).
    double kernel_bound(double s) const;

    BakryEmeryReport bakry_emery_report(const NodeField& f, double s) const;

    /// Implicit-Euler fallback semigroup (for spaces too large for the dense
    /// eigendecomposition); substeps chosen so that h * ||(beta/2) Lap|| <= 1.
    NodeField heat_apply_implicit_euler(const NodeField& f, double s, int min_substeps = 1) const;

    /// Eigenvalues of the generator Lap (nonpositive, 0 is simple on a
    /// connected graph) and the m-orthonormal eigenvectors.
    const Eigen::VectorXd& generator_eigenvalues() const;
    const Eigen::MatrixXd& generator_eigenvectors() const;

    /// Spectral norm bound for Lap via Gershgorin.
    double laplacian_norm_bound() const;

    void check_field(const NodeField& f) const;
    void check_edge_field(const EdgeField& q) const;

private:
    struct Spectrum {
        Eigen::VectorXd lambda;      // eigenvalues of Lap, ascending
        Eigen::MatrixXd phi;         // columns: eigenvectors, m-orthonormal
        Eigen::MatrixXd phi_weighted;  // phi^T diag(m), cached adjoint
    };
    // Computed once on first use behind a stable box, so the immutable Space
    // stays movable and concurrent readers share one decomposition.
    struct SpectrumCache {
        std::once_flag once;
        std::unique_ptr<Spectrum> value;
    };
    const Spectrum& spectrum() const;
    void validate() const;

    int n_;
    std::vector<Edge> edges_;
    NodeField m_;
    Eigen::MatrixXd d_;
    double beta_;
    double K_;
    bool nonneg_curvature_;
    std::string name_;
    std::vector<std::vector<std::pair<int, int>>> incident_;  // node -> (edge idx, +1 tail / -1 head)

    std::shared_ptr<SpectrumCache> spectrum_cache_;
};

/// Shortest-path distance matrix from per-edge lengths (Floyd-Warshall).
Eigen::MatrixXd shortest_path_distance(int n, const std::vector<Edge>& edges,
                                       const std::vector<double>& length);

}  // namespace entroflow
