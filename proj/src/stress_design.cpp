#include "stresslab/stress_design.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <sstream>

namespace stresslab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

}  // namespace

void DesignParams::validate() const {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidInput, "alpha must be positive");
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidInput, "gamma must be positive");
  if (!(beta > gamma)) throw Error(ErrorCode::InvalidInput, "beta must exceed gamma");
  if (!(eps_rel >= 0.0)) throw Error(ErrorCode::InvalidInput, "eps_rel must be nonnegative");
  if (!(solver.tol > 0.0) || !(solver.gap_tol > 0.0)) throw Error(ErrorCode::InvalidInput, "solver tolerances must be positive");
}

MatrixXd build_nullspace_operator(const MatrixXd& aug, const SparseMatrix& incidence) {
  const Index n = aug.cols();
  const Index rows = aug.rows();
  if (incidence.rows() != n) throw Error(ErrorCode::DimensionMismatch, "incidence rows do not match node count");
  MatrixXd E = MatrixXd::Zero(n * rows, incidence.cols());
  for (Index e = 0; e < incidence.cols(); ++e) {
    // Each column holds +1 at one endpoint and -1 at the other.
    Index a = -1, b = -1;
    for (SparseMatrix::InnerIterator it(incidence, e); it; ++it) {
      if (it.value() > 0) a = it.row();
      else b = it.row();
    }
    if (a < 0 || b < 0) throw Error(ErrorCode::InvalidInput, "incidence column is not a signed edge");
    const VectorXd diff = aug.col(a) - aug.col(b);
    E.block(a * rows, e, rows, 1) = diff;
    E.block(b * rows, e, rows, 1) = -diff;
  }
  return E;
}

VectorXd trace_weights(const MatrixXd& Q, const SparseMatrix& incidence) {
  if (Q.rows() != incidence.rows()) throw Error(ErrorCode::DimensionMismatch, "kernel basis rows do not match incidence");
  const MatrixXd Psi = Q.transpose() * incidence;
  return Psi.colwise().squaredNorm().transpose();
}

double critical_alpha(const VectorXd& psi) {
  const double m = psi.size() ? psi.maxCoeff() : 0.0;
  if (!(m > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "trace weights are all zero");
  return 1.0 / m;
}

DesignIngredients prepare_ingredients(const Configuration& config) {
  config.require_design_valid();
  DesignIngredients ing;
  ing.aug = config.augmented();
  ing.Q = staged("kernel_basis", [&] { return kernel_basis(ing.aug); });
  ing.incidence = complete_incidence(config.size());
  ing.Bdense = MatrixXd(ing.incidence);
  ing.E = staged("build_nullspace_operator", [&] { return build_nullspace_operator(ing.aug, ing.incidence); });
  ing.Psi = ing.Q.transpose() * ing.Bdense;
  ing.psi = staged("trace_weights", [&] { return VectorXd(ing.Psi.colwise().squaredNorm().transpose()); });
  return ing;
}

double design_objective(const VectorXd& w, const VectorXd& psi, double alpha) {
  return w.lpNorm<1>() - alpha * psi.dot(w);
}

P2Problem assemble_p2(const DesignIngredients& ing, const DesignParams& params) {
  if (!(params.alpha > 0.0) || !(params.beta > 0.0) || !(params.gamma > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "alpha, beta and gamma must be positive");
  }
  const Index m = ing.Bdense.cols();
  const Index n = ing.Bdense.rows();
  const Index k = ing.Q.cols();
  P2Problem p;
  p.edges = m;
  p.conic = ConicProblem(2 * m);
  p.conic.c.head(m) = -params.alpha * ing.psi;
  p.conic.c.tail(m).setOnes();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * m));
  for (Index e = 0; e < m; ++e) {
    trip.emplace_back(2 * e, m + e, 1.0);
    trip.emplace_back(2 * e, e, -1.0);
    trip.emplace_back(2 * e + 1, m + e, 1.0);
    trip.emplace_back(2 * e + 1, e, 1.0);
  }
  p.conic.lp.M = SparseMatrix(2 * m, 2 * m);
  p.conic.lp.M.setFromTriplets(trip.begin(), trip.end());
  p.conic.lp.offset = VectorXd::Zero(2 * m);

  p.conic.A_eq = MatrixXd::Zero(ing.E.rows(), 2 * m);
  p.conic.A_eq.leftCols(m) = ing.E;
  p.conic.b_eq = VectorXd::Zero(ing.E.rows());

  std::vector<Index> owner(static_cast<std::size_t>(m));
  for (Index e = 0; e < m; ++e) owner[static_cast<std::size_t>(e)] = e;

  LmiBlock a(k);
  a.F0 = -params.gamma * MatrixXd::Identity(k, k);
  a.U = ing.Psi;
  a.weight = VectorXd::Ones(m);
  a.owner = owner;

  LmiBlock b(n);
  b.F0 = params.beta * MatrixXd::Identity(n, n);
  b.U = ing.Bdense;
  b.weight = -VectorXd::Ones(m);
  b.owner = owner;

  p.conic.lmis.push_back(std::move(a));
  p.conic.lmis.push_back(std::move(b));
  p.lmi_a = 0;
  p.lmi_b = 1;
  if (params.two_sided) {
    LmiBlock psd(n);
    psd.U = ing.Bdense;
    psd.weight = VectorXd::Ones(m);
    psd.owner = owner;
    p.conic.lmis.push_back(std::move(psd));
  }
  return p;
}

P2Problem assemble_p2(const Configuration& config, const DesignParams& params) {
  const DesignIngredients ing = prepare_ingredients(config);
  return staged("assemble_p2", [&] { return assemble_p2(ing, params); });
}

RawDesign solve_design(const P2Problem& problem, const SolverOptions& options, const ConicSolver& solver) {
  RawDesign raw;
  raw.solution = solver.solve(problem.conic, options);
  raw.weights = raw.solution.x.size() == problem.conic.num_vars ? VectorXd(raw.solution.x.head(problem.edges))
                                                                 : VectorXd::Zero(problem.edges);
  return raw;
}

DesignResult finalize_design(const Configuration& config, const DesignIngredients& ing, const DesignParams& params,
                             const RawDesign& raw, StageTimings timings) {
  const auto t0 = Clock::now();
  const ConicSolution& sol = raw.solution;
  DesignResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.objective = sol.primal_objective;
  res.alpha_critical = critical_alpha(ing.psi);
  if (params.alpha < res.alpha_critical) {
    res.warnings.push_back("alpha is below the critical value; the solution is not necessarily sparser");
  }
  switch (sol.status) {
    case SolveStatus::Optimal: break;
    case SolveStatus::OptimalInaccurate:
      res.warnings.push_back("solver stopped near optimality: " + sol.message);
      break;
    case SolveStatus::PrimalInfeasible:
    case SolveStatus::DualInfeasible:
      throw Error(ErrorCode::Infeasible, std::string("solver reported ") + std::string(to_string(sol.status)),
                  "solve_design");
    default: {
      std::ostringstream os;
      os << "solver status " << to_string(sol.status) << " (" << sol.message << "), residuals pres=" << sol.primal_residual
         << " dres=" << sol.dual_residual << " gap=" << sol.gap;
      throw Error(ErrorCode::SolverFailure, os.str(), "solve_design");
    }
  }

  const Index n = config.size();
  const StressVector solved(n, raw.weights);
  TopologyExtraction ex = staged("extract_topology", [&] { return extract_topology(solved, params.eps_rel); });
  VectorXd w = ex.pruned.weights;

  if (params.polish && !ex.empty) {
    // Least-norm correction restricted to the support restoring E w = 0.
    std::vector<Index> support;
    for (Index e = 0; e < w.size(); ++e)
      if (w(e) != 0.0) support.push_back(e);
    MatrixXd Es(ing.E.rows(), static_cast<Index>(support.size()));
    VectorXd ws(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
      Es.col(static_cast<Index>(k)) = ing.E.col(support[k]);
      ws(static_cast<Index>(k)) = w(support[k]);
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Es);
    const VectorXd delta = cod.solve(Es * ws);
    res.polish_correction = delta.norm();
    for (std::size_t k = 0; k < support.size(); ++k) w(support[k]) -= delta(static_cast<Index>(k));
  }

  res.omega = StressVector(n, w);
  res.Omega = assemble_stress(res.omega);
  res.topology = ex.topology;
  res.spectrum = spectral_report(res.Omega, config.dim(), params.tolerances);
  res.verification = staged("verify_stabilizable", [&] { return verify_stabilizable(res.Omega, config, params.tolerances); });
  res.final_objective = design_objective(w, ing.psi, params.alpha);
  timings.post += seconds_since(t0);
  timings.total = timings.prepare + timings.assemble + timings.solve + timings.post;
  res.timings = timings;

  if (params.strict && !res.verification.overall) {
    std::ostringstream os;
    os << "design is not stabilizable: psd=" << res.verification.psd << " rank=" << res.verification.rank << "/"
       << res.verification.expected_rank << " equilibrium residual=" << res.verification.equilibrium_residual
       << " lambda_min=" << res.verification.lambda_min;
    throw Error(ErrorCode::VerificationFailed, os.str(), "verify_stabilizable");
  }
  return res;
}

DesignResult design_stress(const Configuration& config, const DesignParams& params, const ConicSolver& solver) {
  params.validate();
  StageTimings tm;
  auto t = Clock::now();
  const DesignIngredients ing = prepare_ingredients(config);
  tm.prepare = seconds_since(t);

  t = Clock::now();
  const P2Problem p2 = staged("assemble_p2", [&] { return assemble_p2(ing, params); });
  tm.assemble = seconds_since(t);

  t = Clock::now();
  const RawDesign raw = staged("solve_design", [&] { return solve_design(p2, params.solver, solver); });
  tm.solve = seconds_since(t);
  return finalize_design(config, ing, params, raw, tm);
}

}  // namespace stresslab
