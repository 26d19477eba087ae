#pragma once

// Overlapping clusters, their ensemble stress and the conditions under which
// the clusters move as one affine formation.

#include <optional>
#include <span>
#include <vector>

#include "stresslab/stress_design.hpp"

namespace stresslab {

/// Cluster node sets in global indices. Bridging sets are derived from the
/// pairwise intersections.
class ClusterPartition {
 public:
  ClusterPartition() = default;
  /// Indices are sorted and deduplicated; out-of-range indices throw.
  ClusterPartition(Index nodes, std::vector<std::vector<Index>> clusters);

  Index nodes() const noexcept { return nodes_; }
  Index size() const noexcept { return static_cast<Index>(clusters_.size()); }
  const std::vector<Index>& cluster(Index c) const { return clusters_.at(static_cast<std::size_t>(c)); }
  const std::vector<std::vector<Index>>& clusters() const noexcept { return clusters_; }

  /// C_i, the number of clusters containing node i.
  int membership(Index i) const { return static_cast<int>(member_of_.at(static_cast<std::size_t>(i)).size()); }
  const std::vector<Index>& clusters_of(Index i) const { return member_of_.at(static_cast<std::size_t>(i)); }
  /// V_c ∩ V_c'.
  std::vector<Index> bridge(Index c, Index c2) const;
  /// Union of the bridging sets attached to cluster c.
  std::vector<Index> bridges_of(Index c) const;
  /// Local index of global node i within cluster c, or -1.
  Index local_index(Index c, Index i) const;
  /// Sum of cluster sizes minus N.
  Index overlap() const;

 private:
  Index nodes_ = 0;
  std::vector<std::vector<Index>> clusters_;
  std::vector<std::vector<Index>> member_of_;
};

struct PartitionReport {
  Index overlap = 0;
  bool overlap_connected = false;  // cluster overlap graph
  std::vector<std::pair<Index, Index>> linked_pairs;  // clusters with a nonempty bridge
};

/// Throws InvalidInput for uncovered nodes or clusters with fewer than D+1
/// nodes. A disconnected overlap graph is legal and only reported.
PartitionReport validate_partition(const Configuration& config, const ClusterPartition& partition);

/// Nodes ordered along `axis`; the middle `bridges` nodes belong to both
/// halves.
ClusterPartition split_by_axis(const Configuration& config, Index bridges, int axis = 0);

/// Zero-padded N x N copy of a cluster stress.
MatrixXd embed_stress(const MatrixXd& omega_c, std::span<const Index> nodes, Index n);

struct PairVerdict {
  Index a = 0, b = 0;
  Index bridge_size = 0;
  int rank = 0;  // rank of the augmented bridge coordinates
  bool ok = false;
};

struct CollectiveReport {
  std::vector<PairVerdict> pairs;  // every pair with a nonempty bridge
  bool overall = false;            // full-rank pairs connect all clusters
};

CollectiveReport collective_motion_check(const Configuration& config, const ClusterPartition& partition);

struct LeaderVerdict {
  Index cluster = 0;
  Index leaders = 0;  // leaders inside the cluster
  int rank = 0;       // rank over leaders and attached bridges
  bool ok = false;
};

struct LeaderReport {
  std::vector<LeaderVerdict> clusters;
  bool overall = false;
};

LeaderReport leader_condition_check(const Configuration& config, const ClusterPartition& partition,
                                    std::span<const Index> leaders);

/// Greedy well-spread leader choice among `candidates`: each pick is the
/// candidate farthest from the affine hull of the previous picks (the first
/// is the farthest from the candidates' centroid). Stops at `count` or when
/// no candidate adds affine rank.
std::vector<Index> select_leaders(const Configuration& config, std::span<const Index> candidates, Index count);
/// `per_cluster` spread leaders in every cluster, taken from the nodes that
/// belong to that cluster only (all of its nodes if there are too few).
std::vector<Index> select_cluster_leaders(const Configuration& config, const ClusterPartition& partition,
                                          Index per_cluster);

/// Smallest eigenvalue of the stress with the leader rows and columns
/// removed: the decay rate of the follower error under pinned leaders.
double grounded_rate(const StressMatrix& omega, std::span<const Index> leaders);

struct ClusterBound {
  double lambda_d2 = 0.0;  // of the cluster stress
  double rho = 0.0;
  Index multiplicity = 1;  // of lambda_d2 in the cluster spectrum
  VectorXd eigenvector;    // cluster-local, minimizing the bridge weight
};

struct BoundReport {
  std::vector<ClusterBound> clusters;
  double bound = 0.0;     // min_c lambda_d2(c) + rho_c
  double measured = 0.0;  // lambda_d2 of the ensemble
  bool holds = false;     // measured <= bound + 1e-6
  bool degenerate = false;         // some cluster eigenvalue was repeated
  bool within_hypotheses = false;  // collective conditions held
  double orthogonality_residual = 0.0;  // padded eigenvectors vs null(Omega)
};

struct EnsembleDesign {
  std::vector<DesignResult> clusters;
  std::vector<MatrixXd> padded;
  StressMatrix Omega;
  SpectralReport spectrum;
  double equilibrium_residual = 0.0;
  bool collective = false;  // numeric rank N-D-1
  std::optional<BoundReport> bound;
};

/// Designs every cluster independently (optionally with symmetry reduction).
std::vector<DesignResult> design_clusters(const Configuration& config, const ClusterPartition& partition,
                                          const DesignParams& params, bool usi = false, unsigned threads = 1);

/// Sum of padded cluster stresses. Unverified cluster designs are rejected.
EnsembleDesign ensemble_stress(std::vector<DesignResult> designs, const ClusterPartition& partition,
                               const Configuration& config, const Tolerances& tol = {});

/// Upper bound on the ensemble convergence eigenvalue. For a repeated cluster
/// eigenvalue the eigenvector with the smallest bridge weight is used.
BoundReport ensemble_lambda_bound(const EnsembleDesign& ensemble, const ClusterPartition& partition,
                                  const Configuration& config, double beta);

}  // namespace stresslab
