#pragma once

// Sparse, fast-converging stress design as a conic program over the
// complete-graph edge weights.
//
// Variable layout of the assembled problem: x = [w (M̄) ; s (M̄)] where w are
// the edge weights in canonical order and s their L1 epigraph, s >= |w|.
//
//   minimize    1ᵀs - alpha psiᵀw
//   subject to  s - w >= 0,  s + w >= 0
//               E w = 0                               (equilibrium)
//               Psi diag(w) Psiᵀ - gamma I  is PSD
//               beta I - B diag(w) Bᵀ       is PSD

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stresslab/conic.hpp"
#include "stresslab/formation.hpp"

namespace stresslab {

struct DesignParams {
  double alpha = 0.5;
  double beta = 1.0;
  double gamma = 0.1;
  double eps_rel = 1e-6;       // topology extraction threshold
  bool two_sided = false;      // also impose B diag(w) Bᵀ PSD explicitly
  bool polish = true;          // project pruned weights back onto E w = 0
  bool strict = true;          // throw when verification fails
  SolverOptions solver;
  Tolerances tolerances;

  /// alpha > 0 and beta > gamma > 0.
  void validate() const;
};

/// Quantities shared by the generic and the symmetry-reduced programs.
struct DesignIngredients {
  MatrixXd aug;            // (D+1) x N
  MatrixXd Q;              // N x (N-D-1), orthonormal kernel basis of aug
  SparseMatrix incidence;  // N x M̄
  MatrixXd Bdense;         // incidence as a dense matrix
  MatrixXd Psi;            // Qᵀ B, (N-D-1) x M̄
  VectorXd psi;            // squared column norms of Psi
  MatrixXd E;              // N(D+1) x M̄ equilibrium operator
};

DesignIngredients prepare_ingredients(const Configuration& config);

/// Row i*(D+1)+d of E w equals (Omega P̄ᵀ)(i, d) for Omega = B diag(w) Bᵀ.
MatrixXd build_nullspace_operator(const MatrixXd& aug, const SparseMatrix& incidence);
/// psi_e = ||(Qᵀ B) e||^2.
VectorXd trace_weights(const MatrixXd& Q, const SparseMatrix& incidence);
/// 1 / max(psi).
double critical_alpha(const VectorXd& psi);

struct P2Problem {
  ConicProblem conic;
  Index edges = 0;  // M̄; w occupies x[0, M̄), s occupies x[M̄, 2M̄)
  int lmi_a = 0;    // index of Psi diag(w) Psiᵀ - gamma I in conic.lmis
  int lmi_b = 1;    // index of beta I - B diag(w) Bᵀ
};

/// Requires alpha, beta, gamma > 0 only, so contradictory windows (beta <
/// gamma) can be posed and reported infeasible by the solver.
P2Problem assemble_p2(const Configuration& config, const DesignParams& params);
P2Problem assemble_p2(const DesignIngredients& ing, const DesignParams& params);

struct RawDesign {
  ConicSolution solution;
  VectorXd weights;  // edge weights (expanded for reduced problems)
};

RawDesign solve_design(const P2Problem& problem, const SolverOptions& options,
                       const ConicSolver& solver = *default_solver());

struct UsiSummary {
  Index classes = 0;
  double reduction_ratio = 1.0;  // S / M̄
  bool reduced = false;          // false when no symmetry was found
  std::vector<Index> class_of;   // per canonical edge
};

struct StageTimings {
  double prepare = 0.0;
  double assemble = 0.0;
  double solve = 0.0;
  double post = 0.0;
  double total = 0.0;
};

struct DesignResult {
  StressVector omega;
  StressMatrix Omega;
  Topology topology{0, {}};
  SpectralReport spectrum;
  VerificationReport verification;
  SolveStatus status = SolveStatus::NumericalError;
  double objective = 0.0;        // solver objective, ||w||_1 - alpha psiᵀw
  double final_objective = 0.0;  // same expression at the returned weights
  double alpha_critical = 0.0;
  double polish_correction = 0.0;  // ||delta w|| of the equilibrium projection
  int iterations = 0;
  StageTimings timings;
  std::vector<std::string> warnings;
  std::optional<UsiSummary> usi;

  bool success() const { return verification.overall; }
  Index edge_count() const { return topology.edge_count(); }
};

/// kernel basis -> equilibrium operator -> trace weights -> P2 -> solve ->
/// extract topology -> polish -> verify. Errors carry the failing stage.
DesignResult design_stress(const Configuration& config, const DesignParams& params,
                           const ConicSolver& solver = *default_solver());

/// Shared post-processing of a solved weight vector.
DesignResult finalize_design(const Configuration& config, const DesignIngredients& ing, const DesignParams& params,
                             const RawDesign& raw, StageTimings timings);

/// ||w||_1 - alpha psiᵀw.
double design_objective(const VectorXd& w, const VectorXd& psi, double alpha);

}  // namespace stresslab
