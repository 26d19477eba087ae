#include "stresslab/usi.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace stresslab {

MatrixXd edm(const Configuration& config) {
  const MatrixXd& p = config.coords();
  const Index n = p.cols();
  MatrixXd d = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (p.col(i) - p.col(j)).squaredNorm();
  return d;
}

namespace {

StressClassification from_labels(Index n, std::vector<Index> class_of, Index classes, const VectorXd& lengths) {
  StressClassification c;
  c.nodes = n;
  c.classes = classes;
  c.class_of = std::move(class_of);
  c.representative.assign(static_cast<std::size_t>(classes), -1);
  c.squared_length = VectorXd::Zero(classes);
  c.multiplicity = VectorXd::Zero(classes);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index e = 0; e < c.edges(); ++e) {
    const Index k = c.class_of[static_cast<std::size_t>(e)];
    if (c.representative[static_cast<std::size_t>(k)] < 0) c.representative[static_cast<std::size_t>(k)] = e;
    c.multiplicity(k) += 1.0;
    c.squared_length(k) += lengths(e);
    trip.emplace_back(e, k, 1.0);
  }
  c.squared_length = c.squared_length.cwiseQuotient(c.multiplicity);
  c.selection = SparseMatrix(c.edges(), classes);
  c.selection.setFromTriplets(trip.begin(), trip.end());
  return c;
}

VectorXd edge_lengths(const MatrixXd& d) {
  const Index n = d.rows();
  VectorXd len(complete_edge_count(n));
  for (Index i = 0, e = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j, ++e) len(e) = d(i, j);
  return len;
}

}  // namespace

VectorXd StressClassification::expand(const VectorXd& reduced) const {
  if (reduced.size() != classes) throw Error(ErrorCode::DimensionMismatch, "reduced vector length differs from class count");
  VectorXd full(edges());
  for (Index e = 0; e < edges(); ++e) full(e) = reduced(class_of[static_cast<std::size_t>(e)]);
  return full;
}

VectorXd StressClassification::restrict_mean(const VectorXd& full) const {
  if (full.size() != edges()) throw Error(ErrorCode::DimensionMismatch, "edge vector length differs from classification");
  VectorXd r = VectorXd::Zero(classes);
  for (Index e = 0; e < edges(); ++e) r(class_of[static_cast<std::size_t>(e)]) += full(e);
  return r.cwiseQuotient(multiplicity);
}

void StressClassification::validate() const {
  if (edges() != complete_edge_count(nodes)) throw Error(ErrorCode::InvalidInput, "classification does not cover the complete graph");
  if (selection.rows() != edges() || selection.cols() != classes) throw Error(ErrorCode::InvalidInput, "selection matrix has wrong shape");
  for (Index e = 0; e < edges(); ++e) {
    const Index k = class_of[static_cast<std::size_t>(e)];
    if (k < 0 || k >= classes) throw Error(ErrorCode::InvalidInput, "edge assigned to an unknown class");
  }
  for (Index k = 0; k < classes; ++k)
    if (!(multiplicity(k) >= 1.0)) throw Error(ErrorCode::InvalidInput, "empty stress class");
  const VectorXd rows = selection * VectorXd::Ones(classes);
  if ((rows.array() != 1.0).any()) throw Error(ErrorCode::InvalidInput, "selection rows must sum to one");
}

StressClassification classify_edges(const MatrixXd& d, double tol_edm) {
  if (!(tol_edm > 0.0)) throw Error(ErrorCode::InvalidInput, "tol_edm must be positive");
  if (d.rows() != d.cols()) throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square");
  const Index n = d.rows();
  const VectorXd len = edge_lengths(d);
  std::vector<Index> order(static_cast<std::size_t>(len.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return len(a) < len(b); });
  std::vector<Index> class_of(order.size(), 0);
  Index k = 0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    if (t > 0) {
      const double prev = len(order[t - 1]), cur = len(order[t]);
      const double scale = std::max(std::abs(cur), std::numeric_limits<double>::min());
      if ((cur - prev) / scale >= tol_edm) ++k;
    }
    class_of[static_cast<std::size_t>(order[t])] = k;
  }
  return from_labels(n, std::move(class_of), order.empty() ? 0 : k + 1, len);
}

StressClassification cyclic_orbit_classes(Index n) {
  if (n < 3) throw Error(ErrorCode::InvalidInput, "polygon needs at least 3 nodes");
  std::vector<Index> class_of(static_cast<std::size_t>(complete_edge_count(n)));
  VectorXd len(complete_edge_count(n));
  for (Index i = 0, e = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j, ++e) {
      const Index step = std::min(j - i, n - (j - i));
      class_of[static_cast<std::size_t>(e)] = step - 1;
      len(e) = static_cast<double>(step);
    }
  return from_labels(n, std::move(class_of), n / 2, len);
}

bool refines(const StressClassification& fine, const StressClassification& coarse) {
  if (fine.edges() != coarse.edges()) return false;
  std::vector<Index> image(static_cast<std::size_t>(fine.classes), -1);
  for (Index e = 0; e < fine.edges(); ++e) {
    auto& img = image[static_cast<std::size_t>(fine.class_of[static_cast<std::size_t>(e)])];
    const Index c = coarse.class_of[static_cast<std::size_t>(e)];
    if (img < 0) img = c;
    else if (img != c) return false;
  }
  return true;
}

P3Problem reduce_p3(const StressClassification& cls, const DesignIngredients& ing, const DesignParams& params) {
  const Index m = ing.Bdense.cols();
  if (cls.edges() != m || cls.nodes != ing.Bdense.rows())
    throw Error(ErrorCode::DimensionMismatch, "classification does not match the configuration");
  const Index s = cls.classes;
  const Index n = ing.Bdense.rows();
  const Index k = ing.Q.cols();

  P3Problem p;
  p.classes = s;
  p.conic = ConicProblem(2 * s);
  const VectorXd psi_r = cls.selection.transpose() * ing.psi;
  p.conic.c.head(s) = -params.alpha * psi_r;
  p.conic.c.tail(s) = cls.multiplicity;

  std::vector<Eigen::Triplet<double>> trip;
  for (Index r = 0; r < s; ++r) {
    trip.emplace_back(2 * r, s + r, 1.0);
    trip.emplace_back(2 * r, r, -1.0);
    trip.emplace_back(2 * r + 1, s + r, 1.0);
    trip.emplace_back(2 * r + 1, r, 1.0);
  }
  p.conic.lp.M = SparseMatrix(2 * s, 2 * s);
  p.conic.lp.M.setFromTriplets(trip.begin(), trip.end());
  p.conic.lp.offset = VectorXd::Zero(2 * s);

  p.conic.A_eq = MatrixXd::Zero(ing.E.rows(), 2 * s);
  p.conic.A_eq.leftCols(s) = ing.E * cls.selection;
  p.conic.b_eq = VectorXd::Zero(ing.E.rows());

  // Per-class basis matrices, accumulated edge by edge.
  std::vector<MatrixXd> psi_s(static_cast<std::size_t>(s), MatrixXd::Zero(k, k));
  std::vector<MatrixXd> m_s(static_cast<std::size_t>(s), MatrixXd::Zero(n, n));
  for (Index e = 0; e < m; ++e) {
    const auto r = static_cast<std::size_t>(cls.class_of[static_cast<std::size_t>(e)]);
    psi_s[r].noalias() += ing.Psi.col(e) * ing.Psi.col(e).transpose();
    const auto [i, j] = edge_endpoints(e, n);
    m_s[r](i, i) += 1.0;
    m_s[r](j, j) += 1.0;
    m_s[r](i, j) -= 1.0;
    m_s[r](j, i) -= 1.0;
  }
  LmiBlock a(k), b(n);
  a.F0 = -params.gamma * MatrixXd::Identity(k, k);
  b.F0 = params.beta * MatrixXd::Identity(n, n);
  for (Index r = 0; r < s; ++r) {
    a.add_dense(r, std::move(psi_s[static_cast<std::size_t>(r)]));
    b.add_dense(r, -m_s[static_cast<std::size_t>(r)]);
  }
  p.conic.lmis.push_back(std::move(a));
  p.conic.lmis.push_back(std::move(b));
  if (params.two_sided) {
    LmiBlock psd(n);
    for (Index r = 0; r < s; ++r) psd.add_dense(r, m_s[static_cast<std::size_t>(r)]);
    p.conic.lmis.push_back(std::move(psd));
  }
  return p;
}

DesignResult design_stress_usi(const Configuration& config, const DesignParams& params, double tol_edm,
                               const ConicSolver& solver) {
  using Clock = std::chrono::steady_clock;
  auto since = [](Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); };
  params.validate();
  StageTimings tm;
  auto t = Clock::now();
  const DesignIngredients ing = prepare_ingredients(config);
  StressClassification cls;
  try {
    cls = classify_edges(edm(config), tol_edm);
  } catch (const Error& e) {
    throw e.with_stage("classify_edges");
  }
  tm.prepare = since(t);

  UsiSummary summary;
  summary.classes = cls.classes;
  summary.class_of = cls.class_of;
  summary.reduction_ratio = static_cast<double>(cls.classes) / static_cast<double>(cls.edges());

  if (cls.classes == cls.edges()) {
    DesignResult r = design_stress(config, params, solver);
    r.warnings.push_back("no reduction: all edge lengths are distinct");
    summary.reduced = false;
    r.usi = summary;
    return r;
  }
  summary.reduced = true;

  t = Clock::now();
  P3Problem p3;
  try {
    p3 = reduce_p3(cls, ing, params);
  } catch (const Error& e) {
    throw e.with_stage("reduce_p3");
  }
  tm.assemble = since(t);

  t = Clock::now();
  RawDesign raw;
  try {
    raw.solution = solver.solve(p3.conic, params.solver);
  } catch (const Error& e) {
    throw e.with_stage("solve_design");
  }
  raw.weights = raw.solution.x.size() == p3.conic.num_vars ? cls.expand(raw.solution.x.head(cls.classes))
                                                           : VectorXd::Zero(cls.edges());
  tm.solve = since(t);

  DesignResult r = finalize_design(config, ing, params, raw, tm);
  r.usi = summary;
  return r;
}

double check_permutation_invariance(const StressMatrix& omega, std::span<const Index> perm) {
  if (static_cast<Index>(perm.size()) != omega.size() || !is_permutation(perm))
    throw Error(ErrorCode::InvalidInput, "not a permutation of the nodes");
  const double nrm = omega.matrix().norm();
  if (nrm == 0.0) return 0.0;
  return (omega.matrix() - permute_symmetric(omega.matrix(), perm)).norm() / nrm;
}

}  // namespace stresslab
