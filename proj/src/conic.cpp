#include "stresslab/conic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace stresslab {

void LmiBlock::add_rank_one(Index var, const VectorXd& u, double w) {
  if (u.size() != size) throw Error(ErrorCode::DimensionMismatch, "rank-one LMI term has wrong length");
  const Index k = U.cols();
  U.conservativeResize(size, k + 1);
  U.col(k) = u;
  weight.conservativeResize(k + 1);
  weight(k) = w;
  owner.push_back(var);
}

void LmiBlock::add_dense(Index var, MatrixXd f) {
  if (f.rows() != size || f.cols() != size) throw Error(ErrorCode::DimensionMismatch, "dense LMI term has wrong size");
  dense.emplace_back(var, 0.5 * (f + f.transpose()));
}

MatrixXd LmiBlock::apply(const VectorXd& x) const {
  MatrixXd out = MatrixXd::Zero(size, size);
  if (U.cols() > 0) {
    VectorXd d(U.cols());
    for (Index a = 0; a < U.cols(); ++a) d(a) = weight(a) * x(owner[static_cast<std::size_t>(a)]);
    out.noalias() = U * d.asDiagonal() * U.transpose();
  }
  for (const auto& [var, f] : dense) out += x(var) * f;
  return out;
}

MatrixXd LmiBlock::evaluate(const VectorXd& x) const { return F0 + apply(x); }

void LmiBlock::adjoint_add(const MatrixXd& Z, VectorXd& g) const {
  if (U.cols() > 0) {
    const MatrixXd ZU = Z * U;
    for (Index a = 0; a < U.cols(); ++a) {
      g(owner[static_cast<std::size_t>(a)]) += weight(a) * U.col(a).dot(ZU.col(a));
    }
  }
  for (const auto& [var, f] : dense) g(var) += f.cwiseProduct(Z).sum();
}

ConicProblem::ConicProblem(Index n) : num_vars(n), c(VectorXd::Zero(n)), A_eq(0, n), b_eq(0) {
  lp.M = SparseMatrix(0, n);
  lp.offset = VectorXd(0);
}

void ConicProblem::validate() const {
  if (num_vars < 1) throw Error(ErrorCode::InvalidInput, "conic problem has no variables");
  if (c.size() != num_vars) throw Error(ErrorCode::DimensionMismatch, "objective length does not match variable count");
  if (!c.allFinite()) throw Error(ErrorCode::InvalidInput, "objective has non-finite entries");
  if (lp.M.cols() != num_vars || lp.M.rows() != lp.offset.size()) {
    throw Error(ErrorCode::DimensionMismatch, "linear block dimensions are inconsistent");
  }
  if (A_eq.cols() != num_vars || A_eq.rows() != b_eq.size()) {
    throw Error(ErrorCode::DimensionMismatch, "equality block dimensions are inconsistent");
  }
  for (const auto& blk : lmis) {
    if (blk.size < 1 || blk.F0.rows() != blk.size || blk.F0.cols() != blk.size) {
      throw Error(ErrorCode::DimensionMismatch, "LMI constant term has wrong size");
    }
    if (blk.U.rows() != blk.size || blk.U.cols() != blk.weight.size() ||
        static_cast<std::size_t>(blk.U.cols()) != blk.owner.size()) {
      throw Error(ErrorCode::DimensionMismatch, "LMI low-rank factors are inconsistent");
    }
    for (Index v : blk.owner) {
      if (v < 0 || v >= num_vars) throw Error(ErrorCode::InvalidInput, "LMI term owner out of range");
    }
    for (const auto& [v, f] : blk.dense) {
      if (v < 0 || v >= num_vars || f.rows() != blk.size || f.cols() != blk.size) {
        throw Error(ErrorCode::InvalidInput, "dense LMI term is inconsistent");
      }
    }
  }
}

double ConicProblem::max_violation(const VectorXd& x) const {
  double viol = 0.0;
  if (lp.rows() > 0) {
    const VectorXd slack = lp.offset + lp.M * x;
    viol = std::max(viol, -slack.minCoeff());
  }
  if (A_eq.rows() > 0) viol = std::max(viol, (A_eq * x - b_eq).cwiseAbs().maxCoeff());
  for (const auto& blk : lmis) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(blk.evaluate(x), Eigen::EigenvaluesOnly);
    viol = std::max(viol, -es.eigenvalues()(0));
  }
  return viol;
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::OptimalInaccurate: return "optimal-inaccurate";
    case SolveStatus::PrimalInfeasible: return "primal-infeasible";
    case SolveStatus::DualInfeasible: return "dual-infeasible";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NumericalError: return "numerical-error";
  }
  return "unknown";
}

std::shared_ptr<const ConicSolver> default_solver() {
  static const auto solver = std::make_shared<const InteriorPointSolver>();
  return solver;
}

}  // namespace stresslab
