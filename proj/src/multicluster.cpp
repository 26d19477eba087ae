#include "stresslab/multicluster.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "stresslab/parallel.hpp"
#include "stresslab/usi.hpp"

namespace stresslab {

ClusterPartition::ClusterPartition(Index nodes, std::vector<std::vector<Index>> clusters)
    : nodes_(nodes), clusters_(std::move(clusters)), member_of_(static_cast<std::size_t>(nodes)) {
  if (nodes < 0) throw Error(ErrorCode::InvalidInput, "negative node count");
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    auto& v = clusters_[c];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (Index i : v) {
      if (i < 0 || i >= nodes) {
        std::ostringstream os;
        os << "cluster " << c << " references node " << i << " outside [0, " << nodes << ")";
        throw Error(ErrorCode::InvalidInput, os.str());
      }
      member_of_[static_cast<std::size_t>(i)].push_back(static_cast<Index>(c));
    }
  }
}

std::vector<Index> ClusterPartition::bridge(Index c, Index c2) const {
  const auto& a = cluster(c);
  const auto& b = cluster(c2);
  std::vector<Index> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<Index> ClusterPartition::bridges_of(Index c) const {
  std::vector<Index> out;
  for (Index i : cluster(c))
    if (membership(i) > 1) out.push_back(i);
  return out;
}

Index ClusterPartition::local_index(Index c, Index i) const {
  const auto& v = cluster(c);
  const auto it = std::lower_bound(v.begin(), v.end(), i);
  return it != v.end() && *it == i ? static_cast<Index>(it - v.begin()) : -1;
}

Index ClusterPartition::overlap() const {
  Index total = 0;
  for (const auto& v : clusters_) total += static_cast<Index>(v.size());
  return total - nodes_;
}

namespace {

// Union-find connectivity over clusters joined by the given pairs.
bool connects_all(Index count, const std::vector<std::pair<Index, Index>>& links) {
  if (count <= 1) return true;
  std::vector<Index> parent(static_cast<std::size_t>(count));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  Index groups = count;
  for (auto [a, b] : links) {
    const Index ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[static_cast<std::size_t>(ra)] = rb;
      --groups;
    }
  }
  return groups == 1;
}

}  // namespace

PartitionReport validate_partition(const Configuration& config, const ClusterPartition& partition) {
  if (partition.nodes() != config.size()) throw Error(ErrorCode::DimensionMismatch, "partition node count differs from configuration");
  for (Index i = 0; i < partition.nodes(); ++i)
    if (partition.membership(i) == 0) throw Error(ErrorCode::InvalidInput, "node " + std::to_string(i) + " belongs to no cluster");
  for (Index c = 0; c < partition.size(); ++c)
    if (static_cast<Index>(partition.cluster(c).size()) < config.dim() + 1)
      throw Error(ErrorCode::InvalidInput, "cluster " + std::to_string(c) + " has fewer than D+1 nodes");
  PartitionReport r;
  r.overlap = partition.overlap();
  for (Index a = 0; a < partition.size(); ++a)
    for (Index b = a + 1; b < partition.size(); ++b)
      if (!partition.bridge(a, b).empty()) r.linked_pairs.emplace_back(a, b);
  r.overlap_connected = connects_all(partition.size(), r.linked_pairs);
  return r;
}

ClusterPartition split_by_axis(const Configuration& config, Index bridges, int axis) {
  const Index n = config.size();
  if (axis < 0 || axis >= config.dim()) throw Error(ErrorCode::InvalidInput, "axis outside the configuration dimension");
  if (bridges < 0 || bridges > n) throw Error(ErrorCode::InvalidInput, "bridge count outside [0, N]");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return config.coords()(axis, a) < config.coords()(axis, b); });
  const Index left_only = (n - bridges + 1) / 2;
  std::vector<Index> left(order.begin(), order.begin() + left_only + bridges);
  std::vector<Index> right(order.begin() + left_only, order.end());
  return ClusterPartition(n, {std::move(left), std::move(right)});
}

MatrixXd embed_stress(const MatrixXd& omega_c, std::span<const Index> nodes, Index n) {
  const auto k = static_cast<Index>(nodes.size());
  if (omega_c.rows() != k || omega_c.cols() != k) throw Error(ErrorCode::DimensionMismatch, "cluster stress size differs from node list");
  for (Index i : nodes)
    if (i < 0 || i >= n) throw Error(ErrorCode::InvalidInput, "cluster node index out of range");
  MatrixXd out = MatrixXd::Zero(n, n);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) out(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]) = omega_c(a, b);
  return out;
}

CollectiveReport collective_motion_check(const Configuration& config, const ClusterPartition& partition) {
  CollectiveReport r;
  std::vector<std::pair<Index, Index>> good;
  for (Index a = 0; a < partition.size(); ++a)
    for (Index b = a + 1; b < partition.size(); ++b) {
      const std::vector<Index> br = partition.bridge(a, b);
      if (br.empty()) continue;
      PairVerdict v;
      v.a = a;
      v.b = b;
      v.bridge_size = static_cast<Index>(br.size());
      v.rank = numeric_rank(augment_columns(config.coords(), br));
      v.ok = v.rank == config.dim() + 1;
      if (v.ok) good.emplace_back(a, b);
      r.pairs.push_back(v);
    }
  r.overall = connects_all(partition.size(), good);
  return r;
}

LeaderReport leader_condition_check(const Configuration& config, const ClusterPartition& partition,
                                    std::span<const Index> leaders) {
  for (Index l : leaders)
    if (l < 0 || l >= config.size()) throw Error(ErrorCode::InvalidInput, "leader index out of range");
  LeaderReport r;
  r.overall = true;
  for (Index c = 0; c < partition.size(); ++c) {
    std::vector<Index> set = partition.bridges_of(c);
    LeaderVerdict v;
    v.cluster = c;
    for (Index l : leaders)
      if (partition.local_index(c, l) >= 0) {
        set.push_back(l);
        ++v.leaders;
      }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    v.rank = set.empty() ? 0 : numeric_rank(augment_columns(config.coords(), set));
    v.ok = v.rank == config.dim() + 1;
    r.overall = r.overall && v.ok;
    r.clusters.push_back(v);
  }
  return r;
}

std::vector<Index> select_leaders(const Configuration& config, std::span<const Index> candidates, Index count) {
  std::vector<Index> chosen;
  if (candidates.empty() || count <= 0) return chosen;
  const MatrixXd& p = config.coords();
  double scale = 0.0;
  VectorXd centroid = VectorXd::Zero(config.dim());
  for (Index i : candidates) centroid += p.col(i);
  centroid /= static_cast<double>(candidates.size());
  for (Index i : candidates) scale = std::max(scale, (p.col(i) - centroid).norm());
  while (static_cast<Index>(chosen.size()) < count) {
    // Orthonormal basis of the directions spanned so far.
    MatrixXd basis(config.dim(), 0);
    if (chosen.size() > 1) {
      MatrixXd dirs(config.dim(), static_cast<Index>(chosen.size()) - 1);
      for (std::size_t k = 1; k < chosen.size(); ++k) dirs.col(static_cast<Index>(k) - 1) = p.col(chosen[k]) - p.col(chosen[0]);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(dirs);
      basis = MatrixXd(qr.householderQ()).leftCols(qr.rank());
    }
    const VectorXd origin = chosen.empty() ? centroid : VectorXd(p.col(chosen[0]));
    Index best = -1;
    double best_d = 1e-9 * std::max(scale, 1e-300);
    for (Index i : candidates) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      VectorXd v = p.col(i) - origin;
      if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
      if (v.norm() > best_d) {
        best_d = v.norm();
        best = i;
      }
    }
    if (best < 0) break;
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<Index> select_cluster_leaders(const Configuration& config, const ClusterPartition& partition,
                                          Index per_cluster) {
  std::vector<Index> out;
  for (Index c = 0; c < partition.size(); ++c) {
    std::vector<Index> own;
    for (Index i : partition.cluster(c))
      if (partition.membership(i) == 1) own.push_back(i);
    if (static_cast<Index>(own.size()) < per_cluster) own = partition.cluster(c);
    const auto picked = select_leaders(config, own, per_cluster);
    out.insert(out.end(), picked.begin(), picked.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double grounded_rate(const StressMatrix& omega, std::span<const Index> leaders) {
  const Index n = omega.size();
  std::vector<char> pinned(static_cast<std::size_t>(n), 0);
  for (Index l : leaders) {
    if (l < 0 || l >= n) throw Error(ErrorCode::InvalidInput, "leader index out of range");
    pinned[static_cast<std::size_t>(l)] = 1;
  }
  std::vector<Index> free;
  for (Index i = 0; i < n; ++i)
    if (!pinned[static_cast<std::size_t>(i)]) free.push_back(i);
  if (free.empty()) return 0.0;
  MatrixXd sub(static_cast<Index>(free.size()), static_cast<Index>(free.size()));
  for (std::size_t a = 0; a < free.size(); ++a)
    for (std::size_t b = 0; b < free.size(); ++b) sub(static_cast<Index>(a), static_cast<Index>(b)) = omega.matrix()(free[a], free[b]);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sub, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

std::vector<DesignResult> design_clusters(const Configuration& config, const ClusterPartition& partition,
                                          const DesignParams& params, bool usi, unsigned threads) {
  std::vector<DesignResult> out(static_cast<std::size_t>(partition.size()));
  parallel_for(out.size(), threads, [&](std::size_t c) {
    const Configuration sub = config.subset(partition.cluster(static_cast<Index>(c)));
    try {
      out[c] = usi ? design_stress_usi(sub, params) : design_stress(sub, params);
    } catch (const Error& e) {
      throw Error(e.code(), "cluster " + std::to_string(c) + ": " + e.detail(), e.stage());
    }
  });
  return out;
}

EnsembleDesign ensemble_stress(std::vector<DesignResult> designs, const ClusterPartition& partition,
                               const Configuration& config, const Tolerances& tol) {
  if (static_cast<Index>(designs.size()) != partition.size())
    throw Error(ErrorCode::DimensionMismatch, "one design per cluster is required");
  const Index n = config.size();
  EnsembleDesign ens;
  MatrixXd sum = MatrixXd::Zero(n, n);
  for (Index c = 0; c < partition.size(); ++c) {
    const DesignResult& d = designs[static_cast<std::size_t>(c)];
    if (!d.verification.overall) throw Error(ErrorCode::VerificationFailed, "cluster " + std::to_string(c) + " stress is not verified");
    ens.padded.push_back(embed_stress(d.Omega.matrix(), partition.cluster(c), n));
    sum += ens.padded.back();
  }
  ens.clusters = std::move(designs);
  ens.Omega = StressMatrix(std::move(sum));
  ens.spectrum = spectral_report(ens.Omega, config.dim(), tol);
  const MatrixXd aug = config.augmented();
  const double denom = ens.Omega.matrix().norm() * aug.norm();
  ens.equilibrium_residual = denom > 0.0 ? (ens.Omega.matrix() * aug.transpose()).norm() / denom : 0.0;
  ens.collective = ens.spectrum.psd && ens.spectrum.rank == n - config.dim() - 1;
  return ens;
}

BoundReport ensemble_lambda_bound(const EnsembleDesign& ensemble, const ClusterPartition& partition,
                                  const Configuration& config, double beta) {
  const Index n = config.size();
  const int d = config.dim();
  BoundReport r;
  r.measured = ensemble.spectrum.lambda_d2;
  r.within_hypotheses = collective_motion_check(config, partition).overall;
  r.bound = std::numeric_limits<double>::infinity();

  // Null space of the ensemble from its own eigenvectors.
  Eigen::SelfAdjointEigenSolver<MatrixXd> ens_eig(ensemble.Omega.matrix());
  const MatrixXd null_basis = ens_eig.eigenvectors().leftCols(d + 1);

  for (Index c = 0; c < partition.size(); ++c) {
    const auto& nodes = partition.cluster(c);
    const auto k = static_cast<Index>(nodes.size());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(ensemble.clusters[static_cast<std::size_t>(c)].Omega.matrix());
    const VectorXd& ev = es.eigenvalues();
    ClusterBound cb;
    cb.lambda_d2 = k > d + 1 ? ev(d + 1) : 0.0;
    const double tol = 1e-8 * std::max(1.0, ev(k - 1));
    Index first = d + 1, last = d + 1;
    while (last + 1 < k && ev(last + 1) - cb.lambda_d2 <= tol) ++last;
    cb.multiplicity = last - first + 1;
    const MatrixXd V = es.eigenvectors().middleCols(first, cb.multiplicity);

    // Bridge weight: each node counts once per other cluster containing it.
    VectorXd w(k);
    for (Index a = 0; a < k; ++a) w(a) = partition.membership(nodes[static_cast<std::size_t>(a)]) - 1.0;
    const MatrixXd G = V.transpose() * w.asDiagonal() * V;
    Eigen::SelfAdjointEigenSolver<MatrixXd> gs(G);
    cb.eigenvector = V * gs.eigenvectors().col(0);
    cb.rho = beta * std::max(0.0, gs.eigenvalues()(0));
    if (cb.multiplicity > 1) r.degenerate = true;
    r.bound = std::min(r.bound, cb.lambda_d2 + cb.rho);

    if (ensemble.collective) {
      VectorXd padded = VectorXd::Zero(n);
      for (Index a = 0; a < k; ++a) padded(nodes[static_cast<std::size_t>(a)]) = cb.eigenvector(a);
      r.orthogonality_residual = std::max(r.orthogonality_residual, (null_basis.transpose() * padded).cwiseAbs().maxCoeff());
    }
    r.clusters.push_back(std::move(cb));
  }
  r.holds = r.measured <= r.bound + 1e-6;
  return r;
}

}  // namespace stresslab
