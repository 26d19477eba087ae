#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "stresslab/conic.hpp"

using namespace stresslab;

namespace {

SparseMatrix sparse(const MatrixXd& m) { return m.sparseView(); }

// max x1 + x2 s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0.
ConicProblem small_lp() {
  ConicProblem p(2);
  p.c << -1.0, -1.0;
  MatrixXd M(4, 2);
  M << -1, -2, -3, -1, 1, 0, 0, 1;
  p.lp.M = sparse(M);
  p.lp.offset = (VectorXd(4) << 4, 6, 0, 0).finished();
  return p;
}

MatrixXd random_symmetric(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  MatrixXd a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = nd(rng);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_SUITE("conic") {
  TEST_CASE("linear program known answer") {
    const ConicSolution s = InteriorPointSolver().solve(small_lp(), {});
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(1.6).epsilon(1e-7));
    CHECK(s.x(1) == doctest::Approx(1.2).epsilon(1e-7));
    CHECK(s.primal_objective == doctest::Approx(-2.8).epsilon(1e-7));
    CHECK(s.dual_objective == doctest::Approx(-2.8).epsilon(1e-7));
  }

  TEST_CASE("largest eigenvalue as an SDP, dense and low-rank forms agree") {
    const MatrixXd A = random_symmetric(6, 42);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    const double lmax = es.eigenvalues()(5);

    ConicProblem dense(1);
    dense.c << 1.0;
    dense.lp.M = SparseMatrix(0, 1);
    LmiBlock blk(6);
    blk.F0 = -A;
    blk.add_dense(0, MatrixXd::Identity(6, 6));
    dense.lmis.push_back(blk);
    const ConicSolution sd = InteriorPointSolver().solve(dense, {});
    REQUIRE(sd.status == SolveStatus::Optimal);
    CHECK(sd.x(0) == doctest::Approx(lmax).epsilon(1e-7));
    // Dual matrix is the top eigenprojector.
    REQUIRE(sd.z_lmi.size() == 1);
    CHECK(sd.z_lmi[0].trace() == doctest::Approx(1.0).epsilon(1e-6));

    ConicProblem lowrank(1);
    lowrank.c << 1.0;
    LmiBlock lr(6);
    lr.F0 = -A;
    for (Index i = 0; i < 6; ++i) lr.add_rank_one(0, VectorXd::Unit(6, i), 1.0);
    lowrank.lmis.push_back(lr);
    const ConicSolution sl = InteriorPointSolver().solve(lowrank, {});
    REQUIRE(sl.status == SolveStatus::Optimal);
    CHECK(sl.x(0) == doctest::Approx(sd.x(0)).epsilon(1e-8));
  }

  TEST_CASE("mixed low-rank and dense terms on several variables") {
    // min t1 + 2 t2  s.t.  t1 I + t2 diag(0,..,1) - A >= 0, t1 >= 0, t2 >= 0,
    // solved once with dense terms and once with mixed terms.
    const Index n = 5;
    const MatrixXd A = random_symmetric(n, 7);
    auto build = [&](bool mixed) {
      ConicProblem p(2);
      p.c << 1.0, 2.0;
      p.lp.M = sparse(MatrixXd::Identity(2, 2));
      p.lp.offset = VectorXd::Zero(2);
      LmiBlock blk(n);
      blk.F0 = -A;
      if (mixed) {
        for (Index i = 0; i < n; ++i) blk.add_rank_one(0, VectorXd::Unit(n, i), 1.0);
        blk.add_rank_one(1, VectorXd::Unit(n, n - 1), 0.5);
        MatrixXd half = MatrixXd::Zero(n, n);
        half(n - 1, n - 1) = 0.5;
        blk.add_dense(1, half);
      } else {
        blk.add_dense(0, MatrixXd::Identity(n, n));
        MatrixXd e = MatrixXd::Zero(n, n);
        e(n - 1, n - 1) = 1.0;
        blk.add_dense(1, e);
      }
      p.lmis.push_back(blk);
      return p;
    };
    const ConicSolution a = InteriorPointSolver().solve(build(false), {});
    const ConicSolution b = InteriorPointSolver().solve(build(true), {});
    REQUIRE(a.status == SolveStatus::Optimal);
    REQUIRE(b.status == SolveStatus::Optimal);
    CHECK(a.primal_objective == doctest::Approx(b.primal_objective).epsilon(1e-7));
    CHECK(build(false).max_violation(a.x) < 1e-7);
  }

  TEST_CASE("redundant equality rows are presolved") {
    ConicProblem p(2);
    p.c << 1.0, 1.0;
    p.lp.M = sparse(MatrixXd::Identity(2, 2));
    p.lp.offset = VectorXd::Zero(2);
    p.A_eq = (MatrixXd(3, 2) << 1, -1, 1, -1, 2, -2).finished();
    p.b_eq = (VectorXd(3) << 1, 1, 2).finished();
    const ConicSolution s = InteriorPointSolver().solve(p, {});
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::abs(s.x(1)) < 1e-7);
    CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-7));

    p.b_eq(2) = 3.0;
    CHECK(InteriorPointSolver().solve(p, {}).status == SolveStatus::PrimalInfeasible);
  }

  TEST_CASE("l1 epigraph with eliminated variables") {
    // min ||x - a||_1 s.t. sum x = 0; optimum |sum a|.
    const VectorXd a = (VectorXd(3) << 1, 2, 3).finished();
    ConicProblem p(6);
    p.c << 0, 0, 0, 1, 1, 1;
    MatrixXd M = MatrixXd::Zero(6, 6);
    VectorXd off(6);
    for (Index i = 0; i < 3; ++i) {
      M(2 * i, 3 + i) = 1;  // s - x + a >= 0
      M(2 * i, i) = -1;
      off(2 * i) = a(i);
      M(2 * i + 1, 3 + i) = 1;  // s + x - a >= 0
      M(2 * i + 1, i) = 1;
      off(2 * i + 1) = -a(i);
    }
    p.lp.M = sparse(M);
    p.lp.offset = off;
    p.A_eq = (MatrixXd(1, 6) << 1, 1, 1, 0, 0, 0).finished();
    p.b_eq = VectorXd::Zero(1);
    const ConicSolution s = InteriorPointSolver().solve(p, {});
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.primal_objective == doctest::Approx(6.0).epsilon(1e-7));
    CHECK(std::abs(s.x.head(3).sum()) < 1e-7);
  }

  TEST_CASE("infeasible and unbounded problems are certified") {
    ConicProblem lp(1);
    lp.c << 1.0;
    lp.lp.M = sparse((MatrixXd(2, 1) << 1, -1).finished());
    lp.lp.offset = (VectorXd(2) << -1, 0).finished();  // x >= 1, x <= 0
    CHECK(InteriorPointSolver().solve(lp, {}).status == SolveStatus::PrimalInfeasible);

    ConicProblem sdp(1);
    sdp.c << 1.0;
    LmiBlock lo(3), hi(3);
    lo.F0 = -MatrixXd::Identity(3, 3);  // x I - I >= 0
    lo.add_dense(0, MatrixXd::Identity(3, 3));
    hi.F0 = 0.5 * MatrixXd::Identity(3, 3);  // 0.5 I - x I >= 0
    hi.add_dense(0, -MatrixXd::Identity(3, 3));
    sdp.lmis = {lo, hi};
    CHECK(InteriorPointSolver().solve(sdp, {}).status == SolveStatus::PrimalInfeasible);

    ConicProblem unb(1);
    unb.c << -1.0;
    unb.lp.M = sparse(MatrixXd::Identity(1, 1));
    unb.lp.offset = VectorXd::Zero(1);
    CHECK(InteriorPointSolver().solve(unb, {}).status == SolveStatus::DualInfeasible);
  }

  TEST_CASE("problem validation") {
    ConicProblem p(2);
    p.c = VectorXd::Zero(3);
    CHECK_THROWS_AS(p.validate(), Error);
    ConicProblem q(1);
    q.c << 1.0;
    CHECK_THROWS_AS(InteriorPointSolver().solve(q, {}), Error);  // variable in no cone
    CHECK(default_solver()->name() == "ipm-hsd");
  }
}
