#include <doctest.h>

#include <random>

#include "stresslab/config_gen.hpp"
#include "stresslab/stress_design.hpp"

using namespace stresslab;

namespace {

VectorXd random_vector(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

}  // namespace

TEST_SUITE("stress_design") {
  TEST_CASE("equilibrium operator matches the assembled stress") {
    const Configuration c = random_configuration(7, 2, 3);
    const DesignIngredients ing = prepare_ingredients(c);
    const VectorXd w = random_vector(complete_edge_count(7), 11);
    const MatrixXd omega_pt = assemble_stress(ing.incidence, w).matrix() * ing.aug.transpose();
    const VectorXd ew = ing.E * w;
    REQUIRE(ew.size() == 7 * 3);
    for (Index i = 0; i < 7; ++i)
      for (Index d = 0; d < 3; ++d) CHECK(ew(i * 3 + d) == doctest::Approx(omega_pt(i, d)).epsilon(1e-12));
    CHECK(ing.E.rows() == 21);
    CHECK(ing.E.cols() == 21);
  }

  TEST_CASE("trace weights reproduce the projected trace") {
    const Configuration c = random_configuration(9, 3, 5);
    const DesignIngredients ing = prepare_ingredients(c);
    const VectorXd w = random_vector(complete_edge_count(9), 2);
    const double tr = (ing.Q.transpose() * assemble_stress(ing.incidence, w).matrix() * ing.Q).trace();
    CHECK(ing.psi.dot(w) == doctest::Approx(tr).epsilon(1e-12));
    CHECK((trace_weights(ing.Q, ing.incidence) - ing.psi).norm() < 1e-12);
    CHECK(ing.psi.minCoeff() >= 0.0);
  }

  TEST_CASE("critical alpha") {
    CHECK(critical_alpha((VectorXd(3) << 1, 2, 4).finished()) == doctest::Approx(0.25));
    CHECK_THROWS_AS(critical_alpha(VectorXd::Zero(3)), Error);
    const Configuration big = apply_affine(random_configuration(8, 2, 1), 100.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2));
    const double a = critical_alpha(prepare_ingredients(big).psi);
    CHECK(a > 0.0);
    CHECK(std::isfinite(a));
  }

  TEST_CASE("problem dimensions") {
    const P2Problem p5 = assemble_p2(random_configuration(5, 2, 1), DesignParams{});
    CHECK(p5.conic.num_vars == 20);
    CHECK(p5.edges == 10);
    CHECK(p5.conic.lp.M.rows() == 20);
    const P2Problem p50 = assemble_p2(random_configuration(50, 2, 1), DesignParams{});
    CHECK(p50.conic.lmis[static_cast<std::size_t>(p50.lmi_a)].size == 47);
    CHECK(p50.conic.lmis[static_cast<std::size_t>(p50.lmi_b)].size == 50);
    DesignParams two;
    two.two_sided = true;
    CHECK(assemble_p2(random_configuration(5, 2, 1), two).conic.lmis.size() == 3);
  }

  TEST_CASE("parameter validation and contradictory windows") {
    DesignParams bad;
    bad.beta = 0.05;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.beta = 1.0;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);

    DesignParams window;
    window.beta = 0.05;
    window.gamma = 0.1;
    const P2Problem p = assemble_p2(random_configuration(6, 2, 4), window);
    const RawDesign raw = solve_design(p, window.solver);
    CHECK(raw.solution.status == SolveStatus::PrimalInfeasible);
  }

  TEST_CASE("degenerate configurations are rejected with a stage") {
    MatrixXd line(2, 5);
    line << 0, 1, 2, 3, 4, 0, 0, 0, 0, 0;
    try {
      design_stress(Configuration{line}, DesignParams{});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateConfiguration);
    }
    DesignParams starved;
    starved.solver.max_iterations = 1;
    try {
      design_stress(random_configuration(8, 2, 1), starved);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SolverFailure);
      CHECK(e.stage() == "solve_design");
    }
  }

  TEST_CASE("random designs are stabilizable inside the eigenvalue window") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Configuration c = random_configuration(8, 2, seed);
      const DesignResult r = design_stress(c, DesignParams{});
      CAPTURE(seed);
      CHECK(r.status == SolveStatus::Optimal);
      CHECK(r.success());
      CHECK(r.spectrum.lambda_d2 >= 0.1 - 1e-6);
      CHECK(r.spectrum.lambda_max <= 1.0 + 1e-6);
      CHECK(r.spectrum.rank == 5);
      CHECK(r.final_objective == doctest::Approx(r.objective).epsilon(1e-5));
      CHECK(r.edge_count() < complete_edge_count(8));
    }
    const DesignResult r5 = design_stress(random_configuration(5, 2, 9), DesignParams{});
    CHECK(r5.success());
  }

  TEST_CASE("larger alpha trades sparsity for speed") {
    const Configuration c = random_configuration(8, 2, 21);
    DesignParams lo, hi;
    lo.alpha = 1.05 * critical_alpha(prepare_ingredients(c).psi);
    hi.alpha = 5.0;
    const DesignResult a = design_stress(c, lo);
    const DesignResult b = design_stress(c, hi);
    CHECK(a.edge_count() < complete_edge_count(8));
    CHECK(a.edge_count() <= b.edge_count());
    CHECK(a.spectrum.lambda_d2 <= b.spectrum.lambda_d2 + 1e-6);
    CHECK(a.warnings.empty());
  }

  TEST_CASE("regular octagon design is circulant") {
    const DesignResult r = design_stress(polygon(8), DesignParams{});
    REQUIRE(r.success());
    for (Index i = 0; i < 8; ++i)
      for (Index j = i + 1; j < 8; ++j) {
        const Index k = std::min(j - i, 8 - (j - i));
        CHECK(std::abs(r.omega.weight(i, j) - r.omega.weight(0, k)) < 1e-6);
      }
  }
}
