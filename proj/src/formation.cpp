#include "stresslab/formation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stresslab {

Configuration::Configuration(MatrixXd coords, std::vector<std::string> labels)
    : coords_(std::move(coords)), labels_(std::move(labels)) {
  const Index d = coords_.rows();
  const Index n = coords_.cols();
  if (d < 1 || d > 3) {
    throw Error(ErrorCode::InvalidInput, "configuration dimension must be 1, 2 or 3, got " + std::to_string(d));
  }
  if (n < d + 1) {
    throw Error(ErrorCode::InvalidInput,
                "configuration needs at least D+1 = " + std::to_string(d + 1) + " nodes, got " + std::to_string(n));
  }
  if (!coords_.allFinite()) throw Error(ErrorCode::InvalidInput, "configuration has non-finite coordinates");
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "label count does not match node count");
  }
}

MatrixXd Configuration::augmented() const {
  MatrixXd aug(dim() + 1, size());
  aug.topRows(dim()) = coords_;
  aug.row(dim()).setOnes();
  return aug;
}

int Configuration::affine_rank() const { return numeric_rank(augmented()); }

void Configuration::require_design_valid() const {
  const int r = affine_rank();
  if (r != dim() + 1) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "augmented configuration has rank " + std::to_string(r) + ", need " + std::to_string(dim() + 1));
  }
}

Configuration Configuration::subset(std::span<const Index> nodes) const {
  MatrixXd sub(dim(), static_cast<Index>(nodes.size()));
  std::vector<std::string> sub_labels;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] < 0 || nodes[k] >= size()) throw Error(ErrorCode::InvalidInput, "subset index out of range");
    sub.col(static_cast<Index>(k)) = coords_.col(nodes[k]);
    if (!labels_.empty()) sub_labels.push_back(labels_[static_cast<std::size_t>(nodes[k])]);
  }
  return Configuration(std::move(sub), std::move(sub_labels));
}

MatrixXd augment(const Configuration& config) { return config.augmented(); }

MatrixXd augment_columns(const MatrixXd& coords, std::span<const Index> nodes) {
  MatrixXd aug(coords.rows() + 1, static_cast<Index>(nodes.size()));
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] < 0 || nodes[k] >= coords.cols()) throw Error(ErrorCode::InvalidInput, "node index out of range");
    aug.col(static_cast<Index>(k)).head(coords.rows()) = coords.col(nodes[k]);
    aug(coords.rows(), static_cast<Index>(k)) = 1.0;
  }
  return aug;
}

int numeric_rank(const MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double thresh = rel_tol * sv(0) * static_cast<double>(std::max(m.rows(), m.cols()));
  int r = 0;
  for (Index k = 0; k < sv.size(); ++k) r += sv(k) > thresh ? 1 : 0;
  return r;
}

std::pair<Index, Index> edge_endpoints(Index e, Index n) {
  if (e < 0 || e >= complete_edge_count(n)) throw Error(ErrorCode::InvalidInput, "edge index out of range");
  Index i = 0;
  Index row_len = n - 1;
  while (e >= row_len) {
    e -= row_len;
    ++i;
    --row_len;
  }
  return {i, i + 1 + e};
}

// ---------------------------------------------------------------------------

Topology::Topology(Index nodes, std::vector<std::pair<Index, Index>> edges) : nodes_(nodes), edges_(std::move(edges)) {
  if (nodes_ < 0) throw Error(ErrorCode::InvalidInput, "negative node count");
  for (auto& [i, j] : edges_) {
    if (i == j) throw Error(ErrorCode::InvalidInput, "self-loop on node " + std::to_string(i));
    if (i < 0 || j < 0 || i >= nodes_ || j >= nodes_) throw Error(ErrorCode::InvalidInput, "edge endpoint out of range");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw Error(ErrorCode::InvalidInput, "duplicate edge in topology");
  }
}

std::vector<std::vector<Index>> Topology::adjacency() const {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(nodes_));
  for (const auto& [i, j] : edges_) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  return adj;
}

StressVector::StressVector(Index n, VectorXd w) : nodes(n), weights(std::move(w)) {
  if (weights.size() != complete_edge_count(nodes)) {
    throw Error(ErrorCode::DimensionMismatch, "stress vector length " + std::to_string(weights.size()) +
                                                  " does not match complete graph on " + std::to_string(nodes) +
                                                  " nodes");
  }
  if (!weights.allFinite()) throw Error(ErrorCode::InvalidInput, "stress vector has non-finite entries");
}

StressVector StressVector::zeros(Index n) { return StressVector(n, VectorXd::Zero(complete_edge_count(n))); }

StressMatrix::StressMatrix(MatrixXd m, double asym_tol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::DimensionMismatch, "stress matrix must be square");
  if (!m.allFinite()) throw Error(ErrorCode::InvalidInput, "stress matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > asym_tol * scale) {
    throw Error(ErrorCode::InvalidInput, "stress matrix is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
}

StressVector StressMatrix::to_stress_vector() const {
  const Index n = size();
  VectorXd w(complete_edge_count(n));
  Index e = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) w(e++) = -m_(i, j);
  return StressVector(n, std::move(w));
}

// ---------------------------------------------------------------------------

SparseMatrix complete_incidence(Index n) {
  if (n < 2) throw Error(ErrorCode::InvalidInput, "complete incidence needs N >= 2");
  const Index m = complete_edge_count(n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(2 * m));
  Index e = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j, ++e) {
      trip.emplace_back(i, e, 1.0);
      trip.emplace_back(j, e, -1.0);
    }
  }
  SparseMatrix b(n, m);
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

StressMatrix assemble_stress(const SparseMatrix& incidence, const VectorXd& weights) {
  if (weights.size() != incidence.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "weight vector length does not match incidence columns");
  }
  const SparseMatrix scaled = incidence * weights.asDiagonal();
  const SparseMatrix omega = scaled * incidence.transpose();
  return StressMatrix(MatrixXd(omega));
}

StressMatrix assemble_stress(const StressVector& omega) {
  const Index n = omega.nodes;
  MatrixXd m = MatrixXd::Zero(n, n);
  Index e = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j, ++e) {
      const double w = omega.weights(e);
      m(i, j) = -w;
      m(j, i) = -w;
      m(i, i) += w;
      m(j, j) += w;
    }
  }
  return StressMatrix(std::move(m));
}

StressMatrix laplacian(const Topology& topology) {
  const Index n = topology.nodes();
  MatrixXd m = MatrixXd::Zero(n, n);
  for (const auto& [i, j] : topology.edges()) {
    m(i, j) -= 1.0;
    m(j, i) -= 1.0;
    m(i, i) += 1.0;
    m(j, j) += 1.0;
  }
  return StressMatrix(std::move(m));
}

MatrixXd kernel_basis(const MatrixXd& aug) {
  const Index rows = aug.rows();
  const Index n = aug.cols();
  const int r = numeric_rank(aug);
  if (r < rows) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "augmented configuration has rank " + std::to_string(r) + " < " + std::to_string(rows));
  }
  Eigen::HouseholderQR<MatrixXd> qr(aug.transpose());
  const MatrixXd full = qr.householderQ() * MatrixXd::Identity(n, n);
  return full.rightCols(n - rows);
}

SpectralReport spectral_report(const StressMatrix& omega, int dim, const Tolerances& tol) {
  const MatrixXd& m = omega.matrix();
  const MatrixXd sym = 0.5 * (m + m.transpose());
  SpectralReport rep;
  rep.dim = dim;
  const Index n = sym.rows();
  if (n == 0) return rep;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  rep.eigenvalues = es.eigenvalues();
  rep.lambda_min = rep.eigenvalues(0);
  rep.lambda_max = rep.eigenvalues(n - 1);
  const double scale = std::max(std::abs(rep.lambda_min), std::abs(rep.lambda_max));
  rep.tol_rank = tol.rank_rel * scale;
  rep.tol_psd = tol.psd_rel * scale;
  double smallest_nonzero = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double l = rep.eigenvalues(k);
    if (std::abs(l) > rep.tol_rank) {
      ++rep.rank;
      if (l > 0.0 && (smallest_nonzero == 0.0 || l < smallest_nonzero)) smallest_nonzero = l;
    }
  }
  rep.nullity = n - rep.rank;
  rep.psd = rep.lambda_min >= -rep.tol_psd;
  rep.lambda_d2 = (n >= dim + 2) ? rep.eigenvalues(dim + 1) : 0.0;
  rep.condition_number = smallest_nonzero > 0.0 ? rep.lambda_max / smallest_nonzero : 0.0;
  return rep;
}

VerificationReport verify_stabilizable(const StressMatrix& omega, const Configuration& config, const Tolerances& tol) {
  if (omega.size() != config.size()) {
    throw Error(ErrorCode::DimensionMismatch, "stress matrix is " + std::to_string(omega.size()) +
                                                  "x" + std::to_string(omega.size()) + " but configuration has " +
                                                  std::to_string(config.size()) + " nodes");
  }
  const SpectralReport spec = spectral_report(omega, config.dim(), tol);
  VerificationReport rep;
  rep.rank = spec.rank;
  rep.expected_rank = config.size() - config.dim() - 1;
  rep.lambda_min = spec.lambda_min;
  rep.psd = spec.psd;
  rep.rank_ok = spec.rank == rep.expected_rank;
  const MatrixXd aug = config.augmented();
  const double denom = omega.matrix().norm() * aug.norm();
  rep.equilibrium_residual = denom > 0.0 ? (omega.matrix() * aug.transpose()).norm() / denom : 0.0;
  rep.equilibrium_ok = rep.equilibrium_residual <= tol.eq;
  rep.overall = rep.psd && rep.rank_ok && rep.equilibrium_ok;
  rep.degenerate_configuration = !config.is_design_valid();
  return rep;
}

TopologyExtraction extract_topology(const StressVector& omega, double eps_rel) {
  if (eps_rel < 0.0) throw Error(ErrorCode::InvalidInput, "eps_rel must be nonnegative");
  const Index n = omega.nodes;
  TopologyExtraction out;
  out.pruned = StressVector::zeros(n);
  const double peak = omega.weights.size() ? omega.weights.cwiseAbs().maxCoeff() : 0.0;
  std::vector<std::pair<Index, Index>> edges;
  if (peak > 0.0) {
    const double thresh = eps_rel * peak;
    Index e = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j, ++e) {
        if (std::abs(omega.weights(e)) > thresh) {
          edges.emplace_back(i, j);
          out.pruned.weights(e) = omega.weights(e);
        }
      }
    }
  }
  out.topology = Topology(n, std::move(edges));
  out.average_degree = out.topology.average_degree();
  out.empty = out.topology.edge_count() == 0;
  return out;
}

double spectral_efficiency(const SpectralReport& report, Index edge_count, Index nodes) {
  if (edge_count < 1) throw Error(ErrorCode::UndefinedMetric, "spectral efficiency needs at least one edge");
  if (report.lambda_max <= 1e-12) throw Error(ErrorCode::UndefinedMetric, "spectral efficiency needs lambda_N > 0");
  const double n = static_cast<double>(nodes);
  return report.lambda_d2 * n * n / (report.lambda_max * static_cast<double>(edge_count));
}

bool is_permutation(std::span<const Index> perm) {
  std::vector<char> seen(perm.size(), 0);
  for (Index p : perm) {
    if (p < 0 || p >= static_cast<Index>(perm.size()) || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = 1;
  }
  return true;
}

MatrixXd permute_symmetric(const MatrixXd& m, std::span<const Index> perm) {
  if (static_cast<Index>(perm.size()) != m.rows() || !is_permutation(perm)) {
    throw Error(ErrorCode::InvalidInput, "invalid node permutation");
  }
  MatrixXd out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = m(i, j);
  return out;
}

Configuration permute_configuration(const Configuration& config, std::span<const Index> perm) {
  if (static_cast<Index>(perm.size()) != config.size() || !is_permutation(perm)) {
    throw Error(ErrorCode::InvalidInput, "invalid node permutation");
  }
  MatrixXd coords(config.dim(), config.size());
  std::vector<std::string> labels(config.labels().size());
  for (Index i = 0; i < config.size(); ++i) {
    coords.col(perm[static_cast<std::size_t>(i)]) = config.coords().col(i);
    if (!labels.empty()) labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = config.labels()[static_cast<std::size_t>(i)];
  }
  return Configuration(std::move(coords), std::move(labels));
}

}  // namespace stresslab
