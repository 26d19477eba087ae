#pragma once

// Conic programs over the nonnegative orthant and PSD cones:
//
//   minimize    cᵀx
//   subject to  offset + M x >= 0                     (linear block)
//               A x = b                                (equalities)
//               F0_j + sum_k x_k F_jk  is PSD          (one per LMI block)
//
// LMI coefficients may be given as rank-one columns (F_jk += w u uᵀ for each
// column owned by variable k) or as dense symmetric matrices.

#include <memory>
#include <string>
#include <vector>

#include "stresslab/formation.hpp"

namespace stresslab {

struct LinearBlock {
  SparseMatrix M;  // rows x num_vars
  VectorXd offset;
  Index rows() const { return offset.size(); }
};

struct LmiBlock {
  Index size = 0;
  MatrixXd F0;
  // Low-rank part: sum_a x[owner[a]] * weight[a] * U.col(a) U.col(a)ᵀ.
  MatrixXd U;
  VectorXd weight;
  std::vector<Index> owner;
  // Dense part: sum x[var] * matrix.
  std::vector<std::pair<Index, MatrixXd>> dense;

  explicit LmiBlock(Index n = 0) : size(n), F0(MatrixXd::Zero(n, n)), U(n, 0) {}
  void add_rank_one(Index var, const VectorXd& u, double w);
  void add_dense(Index var, MatrixXd f);
  /// F0 + sum_k x_k F_k.
  MatrixXd evaluate(const VectorXd& x) const;
  /// sum_k x_k F_k.
  MatrixXd apply(const VectorXd& x) const;
  /// g_k = tr(F_k Z) accumulated into g.
  void adjoint_add(const MatrixXd& Z, VectorXd& g) const;
};

struct ConicProblem {
  Index num_vars = 0;
  VectorXd c;
  LinearBlock lp;
  MatrixXd A_eq;  // may have zero rows; redundant rows allowed
  VectorXd b_eq;
  std::vector<LmiBlock> lmis;

  explicit ConicProblem(Index n = 0);
  void validate() const;
  double objective(const VectorXd& x) const { return c.dot(x); }
  /// Largest violation over all constraints at x (0 when feasible).
  double max_violation(const VectorXd& x) const;
};

enum class SolveStatus { Optimal, OptimalInaccurate, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalError };
std::string_view to_string(SolveStatus status);

struct SolverOptions {
  double tol = 1e-8;      // primal and dual residuals
  double gap_tol = 1e-7;  // absolute or relative duality gap
  int max_iterations = 100;
  int refinement_steps = 1;
  bool verbose = false;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalError;
  VectorXd x;
  VectorXd y;                   // equality multipliers (original rows)
  VectorXd z_lp;                // linear block multipliers
  std::vector<MatrixXd> z_lmi;  // LMI dual matrices
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string message;

  bool optimal() const { return status == SolveStatus::Optimal || status == SolveStatus::OptimalInaccurate; }
};

class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual ConicSolution solve(const ConicProblem& problem, const SolverOptions& options) const = 0;
  virtual std::string name() const = 0;
};

/// Primal-dual interior point on the homogeneous self-dual embedding with
/// Nesterov-Todd scaling and Mehrotra correction.
class InteriorPointSolver final : public ConicSolver {
 public:
  ConicSolution solve(const ConicProblem& problem, const SolverOptions& options) const override;
  std::string name() const override { return "ipm-hsd"; }
};

std::shared_ptr<const ConicSolver> default_solver();

}  // namespace stresslab
