#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "stresslab/config_gen.hpp"
#include "stresslab/formation.hpp"

using namespace stresslab;

namespace {

// Equilateral triangle on the unit circle plus its centroid (node 3).
Configuration triangle_centroid() {
  MatrixXd p(2, 4);
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 3.0;
    p(0, k) = std::cos(a);
    p(1, k) = std::sin(a);
  }
  p.col(3).setZero();
  return Configuration(p);
}

StressVector triangle_centroid_stress() {
  StressVector w = StressVector::zeros(4);
  for (Index k = 0; k < 3; ++k) w.weights(edge_index(k, 3, 4)) = 1.0;
  w.weights(edge_index(0, 1, 4)) = -1.0 / 3.0;
  w.weights(edge_index(0, 2, 4)) = -1.0 / 3.0;
  w.weights(edge_index(1, 2, 4)) = -1.0 / 3.0;
  return w;
}

}  // namespace

TEST_SUITE("formation") {
  TEST_CASE("augment stacks a ones row") {
    MatrixXd p(2, 4);
    p << 0, 1, 1, 0, 0, 0, 1, 1;
    const Configuration cfg(p);
    const MatrixXd aug = augment(cfg);
    CHECK(aug.rows() == 3);
    CHECK(aug.topRows(2) == p);
    CHECK(aug.row(2) == Eigen::RowVectorXd::Ones(4));
    CHECK(cfg.affine_rank() == 3);

    MatrixXd line(2, 3);
    line << 0, 1, 2, 0, 1, 2;
    const Configuration collinear(line);
    CHECK(collinear.affine_rank() == 2);
    CHECK_FALSE(collinear.is_design_valid());
    CHECK_THROWS_AS(collinear.require_design_valid(), Error);
  }

  TEST_CASE("configuration rejects bad input") {
    CHECK_THROWS_AS(Configuration(MatrixXd::Zero(2, 2)), Error);
    CHECK_THROWS_AS(Configuration(MatrixXd::Zero(4, 8)), Error);
    MatrixXd p = MatrixXd::Zero(2, 3);
    p(0, 0) = std::nan("");
    CHECK_THROWS_AS(Configuration{p}, Error);
  }

  TEST_CASE("edge indexing round trip") {
    const Index n = 9;
    Index e = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j, ++e) {
        CHECK(edge_index(i, j, n) == e);
        CHECK(edge_index(j, i, n) == e);
        const auto [a, b] = edge_endpoints(e, n);
        CHECK(a == i);
        CHECK(b == j);
      }
    }
    CHECK(e == complete_edge_count(n));
  }

  TEST_CASE("complete incidence layout") {
    const MatrixXd b3 = MatrixXd(complete_incidence(3));
    MatrixXd expected(3, 3);
    expected << 1, 1, 0, -1, 0, 1, 0, -1, -1;
    CHECK(b3 == expected);
    const SparseMatrix b60 = complete_incidence(60);
    CHECK(b60.rows() == 60);
    CHECK(b60.cols() == 1770);
    CHECK(MatrixXd(b60).colwise().sum().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(complete_incidence(1), Error);
  }

  TEST_CASE("assembled stress rows sum to zero") {
    const SparseMatrix b = complete_incidence(3);
    const StressMatrix lap = assemble_stress(b, VectorXd::Ones(3));
    MatrixXd expected(3, 3);
    expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    CHECK((lap.matrix() - expected).norm() == doctest::Approx(0.0));
    CHECK(assemble_stress(b, VectorXd::Zero(3)).matrix().norm() == 0.0);
    CHECK_THROWS_AS(assemble_stress(b, VectorXd::Zero(4)), Error);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    VectorXd w(complete_edge_count(12));
    for (Index k = 0; k < w.size(); ++k) w(k) = nd(rng);
    const StressMatrix om = assemble_stress(complete_incidence(12), w);
    CHECK((om.matrix() * VectorXd::Ones(12)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((om.matrix() - assemble_stress(StressVector(12, w)).matrix()).norm() < 1e-12);
    const StressVector back = om.to_stress_vector();
    CHECK((back.weights - w).norm() < 1e-12);
  }

  TEST_CASE("triangle plus centroid is stabilizable") {
    const Configuration cfg = triangle_centroid();
    const StressMatrix om = assemble_stress(triangle_centroid_stress());
    CHECK((om.matrix() * cfg.augmented().transpose()).norm() < 1e-10);
    const VerificationReport rep = verify_stabilizable(om, cfg);
    CHECK(rep.psd);
    CHECK(rep.rank == 1);
    CHECK(rep.rank_ok);
    CHECK(rep.equilibrium_ok);
    CHECK(rep.overall);
    CHECK_FALSE(rep.degenerate_configuration);
  }

  TEST_CASE("Laplacian of K4 is not an equilibrium stress") {
    const Configuration cfg = random_configuration(4, 2, 11);
    std::vector<std::pair<Index, Index>> edges;
    for (Index i = 0; i < 4; ++i)
      for (Index j = i + 1; j < 4; ++j) edges.emplace_back(i, j);
    const VerificationReport rep = verify_stabilizable(laplacian(Topology(4, edges)), cfg);
    CHECK_FALSE(rep.equilibrium_ok);
    CHECK_FALSE(rep.overall);
    CHECK_THROWS_AS(verify_stabilizable(laplacian(Topology(3, {{0, 1}})), cfg), Error);
  }

  TEST_CASE("kernel basis") {
    const Configuration c4 = random_configuration(4, 2, 5);
    const MatrixXd q4 = kernel_basis(c4.augmented());
    CHECK(q4.rows() == 4);
    CHECK(q4.cols() == 1);
    CHECK(q4.norm() == doctest::Approx(1.0));

    const Configuration c50 = random_configuration(50, 2, 17);
    const MatrixXd q = kernel_basis(c50.augmented());
    CHECK(q.cols() == 47);
    CHECK((c50.augmented() * q).norm() < 1e-10);
    CHECK((q.transpose() * q - MatrixXd::Identity(47, 47)).norm() < 1e-12);

    MatrixXd line(2, 4);
    line << 0, 1, 2, 3, 0, 1, 2, 3;
    CHECK_THROWS_AS(kernel_basis(Configuration(line).augmented()), Error);
  }

  TEST_CASE("spectral report") {
    const SpectralReport zero = spectral_report(StressMatrix(MatrixXd::Zero(5, 5)), 2);
    CHECK(zero.lambda_d2 == 0.0);
    CHECK(zero.rank == 0);
    CHECK(zero.nullity == 5);

    const StressMatrix k3 = laplacian(Topology(3, {{0, 1}, {0, 2}, {1, 2}}));
    const SpectralReport rep = spectral_report(k3, 1);
    CHECK(rep.eigenvalues(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rep.eigenvalues(1) == doctest::Approx(3.0));
    CHECK(rep.eigenvalues(2) == doctest::Approx(3.0));
    CHECK(rep.lambda_d2 == doctest::Approx(3.0));
    CHECK(rep.rank == 2);
    CHECK(rep.rank + rep.nullity == 3);
    CHECK(rep.condition_number == doctest::Approx(1.0));

    MatrixXd asym = MatrixXd::Zero(2, 2);
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(StressMatrix{asym}, Error);
  }

  TEST_CASE("spectra match characteristic polynomial roots for small N") {
    // Path graph on 3 nodes with weights a, b: eigenvalues 0 and
    // (a+b) +- sqrt(a^2 - ab + b^2).
    const double a = 0.7, b = 1.9;
    MatrixXd m(3, 3);
    m << a, -a, 0, -a, a + b, -b, 0, -b, b;
    const SpectralReport rep = spectral_report(StressMatrix(m), 1);
    const double root = std::sqrt(a * a - a * b + b * b);
    CHECK(rep.eigenvalues(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rep.eigenvalues(1) == doctest::Approx(a + b - root));
    CHECK(rep.eigenvalues(2) == doctest::Approx(a + b + root));
    CHECK(rep.eigenvalues.sum() == doctest::Approx(m.trace()));
  }

  TEST_CASE("extract topology") {
    const StressVector w(3, (VectorXd(3) << 1.0, 1e-12, -0.5).finished());
    const TopologyExtraction ex = extract_topology(w, 1e-6);
    CHECK(ex.topology.edge_count() == 2);
    CHECK(ex.pruned.weights(1) == 0.0);
    CHECK(ex.average_degree == doctest::Approx(4.0 / 3.0));
    CHECK_FALSE(ex.empty);
    const TopologyExtraction none = extract_topology(StressVector::zeros(4), 1e-6);
    CHECK(none.empty);
    CHECK(none.topology.edge_count() == 0);
    CHECK_THROWS_AS(extract_topology(w, -1.0), Error);

    const TopologyExtraction tri = extract_topology(triangle_centroid_stress(), 1e-6);
    CHECK(tri.topology.edge_count() == 6);
    CHECK(verify_stabilizable(assemble_stress(tri.pruned), triangle_centroid()).overall);
  }

  TEST_CASE("spectral efficiency") {
    const Index n = 5;
    std::vector<std::pair<Index, Index>> edges;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    const Topology kn(n, edges);
    const SpectralReport rep = spectral_report(laplacian(kn), 1);
    CHECK(spectral_efficiency(rep, kn.edge_count(), n) == doctest::Approx(2.0 * n / (n - 1.0)));

    SpectralReport flat = rep;
    flat.lambda_d2 = 0.0;
    CHECK(spectral_efficiency(flat, 3, n) == 0.0);
    CHECK_THROWS_AS(spectral_efficiency(rep, 0, n), Error);
    const SpectralReport zero = spectral_report(StressMatrix(MatrixXd::Zero(4, 4)), 2);
    CHECK_THROWS_AS(spectral_efficiency(zero, 3, 4), Error);
  }

  TEST_CASE("verification and trace are permutation invariant") {
    const Configuration cfg = triangle_centroid();
    const StressMatrix om = assemble_stress(triangle_centroid_stress());
    std::vector<Index> perm = {2, 0, 3, 1};
    const MatrixXd pom = permute_symmetric(om.matrix(), perm);
    const Configuration pcfg = permute_configuration(cfg, perm);
    const VerificationReport a = verify_stabilizable(om, cfg);
    const VerificationReport b = verify_stabilizable(StressMatrix(pom), pcfg);
    CHECK(a.overall == b.overall);
    CHECK(a.rank == b.rank);
    CHECK(std::abs(pom.trace() - om.matrix().trace()) <= 1e-10);
    const VectorXd ea = spectral_report(om, 2).eigenvalues;
    const VectorXd eb = spectral_report(StressMatrix(pom), 2).eigenvalues;
    CHECK((ea - eb).norm() < 1e-12);
    CHECK(std::abs(ea.sum() - om.matrix().trace()) <= 1e-8 * std::abs(om.matrix().trace()));

    std::vector<Index> bad = {0, 0, 1, 2};
    CHECK_FALSE(is_permutation(bad));
    CHECK_THROWS_AS(permute_symmetric(om.matrix(), bad), Error);
  }

  TEST_CASE("topology validation") {
    CHECK_THROWS_AS(Topology(3, {{0, 0}}), Error);
    CHECK_THROWS_AS(Topology(3, {{0, 1}, {1, 0}}), Error);
    CHECK_THROWS_AS(Topology(3, {{0, 3}}), Error);
    const Topology t(4, {{2, 1}, {0, 3}});
    CHECK(t.edges().front() == std::pair<Index, Index>{0, 3});
    CHECK(t.edges().back() == std::pair<Index, Index>{1, 2});
    CHECK(t.average_degree() == doctest::Approx(1.0));
  }
}
