#pragma once

// Shared numeric substrate: configurations, complete-graph edge indexing,
// stress assembly, spectra and the stabilizability check.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stresslab/error.hpp"

namespace stresslab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// D x N node coordinates plus optional labels.
///
/// Construction enforces N >= D+1, 1 <= D <= 3 and finite coordinates. Full
/// affine rank is *not* enforced here: analysis code works on degenerate
/// configurations and reports the rank; design code calls
/// `require_design_valid()`.
class Configuration {
 public:
  explicit Configuration(MatrixXd coords, std::vector<std::string> labels = {});

  int dim() const noexcept { return static_cast<int>(coords_.rows()); }
  Index size() const noexcept { return coords_.cols(); }
  const MatrixXd& coords() const noexcept { return coords_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  Eigen::VectorXd point(Index i) const { return coords_.col(i); }

  /// (D+1) x N matrix: coordinates stacked over a row of ones.
  MatrixXd augmented() const;
  /// Numeric rank of the augmented matrix.
  int affine_rank() const;
  bool is_design_valid() const { return affine_rank() == dim() + 1; }
  /// Throws DegenerateConfiguration unless the augmented matrix has rank D+1.
  void require_design_valid() const;

  /// Columns `nodes` (in that order) as a new configuration.
  Configuration subset(std::span<const Index> nodes) const;

 private:
  MatrixXd coords_;
  std::vector<std::string> labels_;
};

/// Augmented matrix of an arbitrary column subset (may have fewer than D+1
/// columns; used for bridge and leader rank checks).
MatrixXd augment(const Configuration& config);
MatrixXd augment_columns(const MatrixXd& coords, std::span<const Index> nodes);
/// Numeric rank with a scale-relative singular value threshold.
int numeric_rank(const MatrixXd& m, double rel_tol = 1e-10);

// ---------------------------------------------------------------------------
// Complete-graph edge indexing. Edge (i, j), i < j, 0-based, lexicographic:
// (0,1), (0,2), ..., (0,N-1), (1,2), ...

constexpr Index complete_edge_count(Index n) { return n * (n - 1) / 2; }
constexpr Index edge_index(Index i, Index j, Index n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}
std::pair<Index, Index> edge_endpoints(Index e, Index n);

class Topology {
 public:
  Topology(Index nodes, std::vector<std::pair<Index, Index>> edges);

  Index nodes() const noexcept { return nodes_; }
  Index edge_count() const noexcept { return static_cast<Index>(edges_.size()); }
  const std::vector<std::pair<Index, Index>>& edges() const noexcept { return edges_; }
  std::vector<std::vector<Index>> adjacency() const;
  double average_degree() const {
    return nodes_ == 0 ? 0.0 : 2.0 * static_cast<double>(edge_count()) / static_cast<double>(nodes_);
  }

 private:
  Index nodes_;
  std::vector<std::pair<Index, Index>> edges_;  // sorted, i < j
};

/// Edge weights over the complete graph in canonical order.
struct StressVector {
  Index nodes = 0;
  VectorXd weights;

  StressVector() = default;
  StressVector(Index nodes, VectorXd weights);
  static StressVector zeros(Index nodes);

  double weight(Index i, Index j) const { return weights(edge_index(i, j, nodes)); }
};

/// Symmetric N x N stress matrix. Input is symmetrized on construction;
/// inputs that are visibly asymmetric are rejected.
class StressMatrix {
 public:
  StressMatrix() = default;
  explicit StressMatrix(MatrixXd m, double asym_tol = 1e-8);

  Index size() const noexcept { return m_.rows(); }
  const MatrixXd& matrix() const noexcept { return m_; }
  /// Off-diagonal weights, w_ij = -Omega_ij.
  StressVector to_stress_vector() const;

 private:
  MatrixXd m_;
};

// ---------------------------------------------------------------------------

/// N x M̄ signed incidence of the complete graph (+1 at i, -1 at j).
SparseMatrix complete_incidence(Index n);
/// Omega = B diag(w) Bᵀ.
StressMatrix assemble_stress(const SparseMatrix& incidence, const VectorXd& weights);
StressMatrix assemble_stress(const StressVector& omega);
/// Unweighted Laplacian of a topology.
StressMatrix laplacian(const Topology& topology);

/// Orthonormal N x (N-D-1) basis of the kernel of the augmented matrix.
MatrixXd kernel_basis(const MatrixXd& aug);

struct Tolerances {
  double psd_rel = 1e-7;   // lambda_1 >= -psd_rel * lambda_N
  double rank_rel = 1e-6;  // eigenvalues above rank_rel * lambda_N count
  double eq = 1e-8;        // ||Omega P̄ᵀ|| <= eq * ||Omega|| ||P̄||
};

struct SpectralReport {
  VectorXd eigenvalues;  // ascending
  int dim = 0;
  double lambda_d2 = 0.0;   // (D+2)-th smallest
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  Index rank = 0;
  Index nullity = 0;
  bool psd = false;
  double condition_number = 0.0;  // over eigenvalues above the rank threshold
  double tol_rank = 0.0;
  double tol_psd = 0.0;
};

SpectralReport spectral_report(const StressMatrix& omega, int dim, const Tolerances& tol = {});

struct VerificationReport {
  bool psd = false;
  bool rank_ok = false;
  bool equilibrium_ok = false;
  bool overall = false;
  Index rank = 0;
  Index expected_rank = 0;
  double lambda_min = 0.0;
  double equilibrium_residual = 0.0;  // ||Omega P̄ᵀ||_F / (||Omega||_F ||P̄||_F)
  bool degenerate_configuration = false;
};

VerificationReport verify_stabilizable(const StressMatrix& omega, const Configuration& config,
                                       const Tolerances& tol = {});

struct TopologyExtraction {
  Topology topology{0, {}};
  StressVector pruned;
  double average_degree = 0.0;
  bool empty = false;
};

TopologyExtraction extract_topology(const StressVector& omega, double eps_rel);

/// eta = lambda_{D+2} N^2 / (lambda_N M).
double spectral_efficiency(const SpectralReport& report, Index edge_count, Index nodes);

// ---------------------------------------------------------------------------
// Node permutations. `perm[i]` is the new index of node i, so the permuted
// stress satisfies P[perm[i], perm[j]] = Omega[i, j].

bool is_permutation(std::span<const Index> perm);
MatrixXd permute_symmetric(const MatrixXd& m, std::span<const Index> perm);
Configuration permute_configuration(const Configuration& config, std::span<const Index> perm);

}  // namespace stresslab
