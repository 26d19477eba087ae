#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "stresslab/config_gen.hpp"
#include "stresslab/multicluster.hpp"

using namespace stresslab;

namespace {

// Two clusters of an N-node random configuration sharing `bridges` nodes.
struct Split {
  Configuration config;
  ClusterPartition partition;
};

Split random_split(Index n, Index bridges, std::uint64_t seed) {
  Configuration c = random_configuration(n, 2, seed);
  ClusterPartition p = split_by_axis(c, bridges);
  return {std::move(c), std::move(p)};
}

double smallest_nonzero_gap(const VectorXd& ev, Index k) {
  return k + 1 < ev.size() ? ev(k + 1) - ev(k) : 1.0;
}

}  // namespace

TEST_SUITE("multicluster") {
  TEST_CASE("partition bookkeeping") {
    const Configuration c = random_configuration(100, 2, 1);
    const ClusterPartition p = split_by_axis(c, 20);
    CHECK(p.cluster(0).size() == 60);
    CHECK(p.cluster(1).size() == 60);
    const PartitionReport r = validate_partition(c, p);
    CHECK(r.overlap == 20);
    CHECK(r.overlap_connected);
    CHECK(p.bridge(0, 1).size() == 20);
    for (Index i : p.bridge(0, 1)) CHECK(p.membership(i) == 2);
    for (Index i = 0; i < 100; ++i) CHECK(p.membership(i) >= 1);
    const Index b = p.bridge(0, 1).front();
    CHECK(p.cluster(0)[static_cast<std::size_t>(p.local_index(0, b))] == b);
    CHECK(p.local_index(1, p.cluster(0).front()) == -1);

    // Bridges sit between the two halves along x.
    double max_left = -1e9, min_right = 1e9;
    for (Index i : p.cluster(0))
      if (p.membership(i) == 1) max_left = std::max(max_left, c.coords()(0, i));
    for (Index i : p.cluster(1))
      if (p.membership(i) == 1) min_right = std::min(min_right, c.coords()(0, i));
    for (Index i : p.bridge(0, 1)) {
      CHECK(c.coords()(0, i) >= max_left);
      CHECK(c.coords()(0, i) <= min_right);
    }
  }

  TEST_CASE("partition validation") {
    const Configuration c = random_configuration(8, 2, 3);
    CHECK_THROWS_AS(ClusterPartition(8, {{0, 1, 9}}), Error);
    // node 7 uncovered
    CHECK_THROWS_AS(validate_partition(c, ClusterPartition(8, {{0, 1, 2, 3}, {3, 4, 5, 6}})), Error);
    // a cluster with only D nodes
    CHECK_THROWS_AS(validate_partition(c, ClusterPartition(8, {{0, 1, 2, 3, 4, 5}, {6, 7}})), Error);
    CHECK_THROWS_AS(validate_partition(c, ClusterPartition(9, {{0, 1, 2, 3, 4, 5, 6, 7, 8}})), Error);
    const PartitionReport disjoint = validate_partition(c, ClusterPartition(8, {{0, 1, 2, 3}, {4, 5, 6, 7}}));
    CHECK_FALSE(disjoint.overlap_connected);
    CHECK(disjoint.overlap == 0);
    CHECK(disjoint.linked_pairs.empty());
    // duplicates collapse
    const ClusterPartition dup(8, {{3, 1, 1, 2, 0}, {7, 6, 5, 4, 3, 3}});
    CHECK(dup.cluster(0) == std::vector<Index>{0, 1, 2, 3});
    CHECK(dup.overlap() == 1);
  }

  TEST_CASE("zero padding") {
    MatrixXd w(3, 3);
    w << 2, -1, -1, -1, 1, 0, -1, 0, 1;
    const std::vector<Index> nodes = {4, 1, 2};
    const MatrixXd pad = embed_stress(w, nodes, 6);
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b) CHECK(pad(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]) == w(a, b));
    CHECK(pad.sum() == doctest::Approx(w.sum()));
    CHECK(pad.row(0).norm() == 0.0);
    CHECK(pad.row(3).norm() == 0.0);
    CHECK(numeric_rank(pad) == numeric_rank(w));
    CHECK_THROWS_AS(embed_stress(w, std::vector<Index>{0, 1}, 6), Error);
    CHECK_THROWS_AS(embed_stress(w, std::vector<Index>{0, 1, 7}, 6), Error);
  }

  TEST_CASE("bridge rank verdicts") {
    // 2D: three collinear bridges cannot pin an affine motion, a triangle can.
    MatrixXd p(2, 8);
    p << 0, 1, 2, 3, 1.5, 1.5, 1.5, 2.5,  //
        0, 1, 0, 1, -1, 0, 1, 2;
    const Configuration c(p);
    const ClusterPartition line(8, {{0, 1, 4, 5, 6}, {4, 5, 6, 2, 3, 7}});
    const CollectiveReport bad = collective_motion_check(c, line);
    REQUIRE(bad.pairs.size() == 1);
    CHECK(bad.pairs[0].bridge_size == 3);
    CHECK(bad.pairs[0].rank == 2);
    CHECK_FALSE(bad.pairs[0].ok);
    CHECK_FALSE(bad.overall);

    const ClusterPartition tri(8, {{0, 1, 4, 5, 7}, {4, 5, 7, 2, 3, 6}});
    const CollectiveReport good = collective_motion_check(c, tri);
    CHECK(good.pairs[0].rank == 3);
    CHECK(good.overall);

    // 3D: four coplanar bridges span only a plane.
    MatrixXd q(3, 9);
    q << 0, 1, 0, 1, 0.5, -1, 2, 0.5, 0.5,  //
        0, 0, 1, 1, 0.5, 0.5, 0.5, -1, 2,   //
        0, 0, 0, 0, 1, -1, 1, -1, 1;
    const Configuration c3(q);
    const CollectiveReport flat = collective_motion_check(c3, ClusterPartition(9, {{0, 1, 2, 3, 5, 7}, {0, 1, 2, 3, 6, 8}}));
    CHECK(flat.pairs[0].rank == 3);
    CHECK_FALSE(flat.overall);
    const CollectiveReport solid = collective_motion_check(c3, ClusterPartition(9, {{0, 1, 2, 4, 5, 7, 3}, {0, 1, 2, 4, 6, 8}}));
    CHECK(solid.pairs[0].rank == 4);
    CHECK(solid.overall);

    // A chain is enough: 0-1 and 1-2 linked, 0-2 disjoint.
    const ClusterPartition chain(8, {{0, 1, 4, 5}, {4, 5, 6, 1, 3, 7}, {3, 6, 1, 2, 7}});
    const CollectiveReport ch = collective_motion_check(c, chain);
    CHECK(ch.pairs.size() == 3);
    CHECK(ch.overall);
  }

  TEST_CASE("leader rank verdicts") {
    MatrixXd p(2, 8);
    p << 0, 1, 2, 3, 1.5, 1.5, 1.5, 2.5,  //
        0, 1, 0, 1, -1, 0, 1, 2;
    const Configuration c(p);
    // Collinear bridges 4, 5, 6.
    const ClusterPartition line(8, {{0, 1, 4, 5, 6}, {4, 5, 6, 2, 3, 7}});
    const std::vector<Index> none;
    const LeaderReport r0 = leader_condition_check(c, line, none);
    CHECK(r0.clusters[0].rank == 2);
    CHECK_FALSE(r0.overall);
    // One off-line leader per cluster completes the rank.
    const std::vector<Index> two = {0, 3};
    const LeaderReport r1 = leader_condition_check(c, line, two);
    CHECK(r1.overall);
    CHECK(r1.clusters[0].leaders == 1);
    // Only one cluster has a leader.
    const std::vector<Index> one = {0};
    const LeaderReport r2 = leader_condition_check(c, line, one);
    CHECK(r2.clusters[0].ok);
    CHECK_FALSE(r2.clusters[1].ok);
    CHECK_FALSE(r2.overall);

    // Single bridge node 4: two non-collinear leaders per cluster needed.
    const ClusterPartition single(8, {{0, 1, 4, 5}, {4, 2, 3, 6, 7}});
    CHECK_FALSE(leader_condition_check(c, single, std::vector<Index>{0, 3}).overall);
    CHECK(leader_condition_check(c, single, std::vector<Index>{0, 1, 2, 3}).overall);
    CHECK_THROWS_AS(leader_condition_check(c, single, std::vector<Index>{8}), Error);
  }

  TEST_CASE("leader selection") {
    const Configuration c = random_configuration(30, 3, 5);
    std::vector<Index> all(30);
    for (Index i = 0; i < 30; ++i) all[static_cast<std::size_t>(i)] = i;
    const auto l = select_leaders(c, all, 6);
    CHECK(l.size() == 4);  // no candidate adds rank after D+1 picks
    CHECK(numeric_rank(augment_columns(c.coords(), l)) == 4);
    // The first pick is the candidate farthest from the centroid.
    const VectorXd centroid = c.coords().rowwise().mean();
    Index far = 0;
    for (Index i = 1; i < 30; ++i)
      if ((c.point(i) - centroid).norm() > (c.point(far) - centroid).norm()) far = i;
    CHECK(l.front() == far);

    const ClusterPartition p = split_by_axis(c, 6);
    const auto per = select_cluster_leaders(c, p, 4);
    CHECK(per.size() == 8);
    for (Index i : per) CHECK(p.membership(i) == 1);
    CHECK(leader_condition_check(c, p, per).overall);
  }

  TEST_CASE("ensemble of a single cluster is the cluster stress") {
    const Configuration c = random_configuration(8, 2, 11);
    std::vector<Index> all(8);
    for (Index i = 0; i < 8; ++i) all[static_cast<std::size_t>(i)] = i;
    const ClusterPartition p(8, {all});
    auto designs = design_clusters(c, p, DesignParams{});
    const MatrixXd direct = designs[0].Omega.matrix();
    const EnsembleDesign ens = ensemble_stress(designs, p, c);
    CHECK((ens.Omega.matrix() - direct).norm() == 0.0);
    CHECK(ens.collective);
    const BoundReport b = ensemble_lambda_bound(ens, p, c, 1.0);
    CHECK(b.clusters[0].rho == 0.0);
    CHECK(b.bound == doctest::Approx(b.measured).epsilon(1e-9));
    CHECK(b.holds);
    CHECK(b.within_hypotheses);
  }

  TEST_CASE("two bridges leave a hinge, spanning bridges do not") {
    const Split two = random_split(16, 2, 4);
    const DesignParams params;
    const EnsembleDesign e2 = ensemble_stress(design_clusters(two.config, two.partition, params), two.partition, two.config);
    CHECK_FALSE(collective_motion_check(two.config, two.partition).overall);
    CHECK(e2.spectrum.lambda_d2 <= 1e-8);
    CHECK_FALSE(e2.collective);
    CHECK(e2.equilibrium_residual < 1e-8);

    const Split four = random_split(16, 4, 4);
    const EnsembleDesign e4 =
        ensemble_stress(design_clusters(four.config, four.partition, params, false, 2), four.partition, four.config);
    CHECK(collective_motion_check(four.config, four.partition).overall);
    CHECK(e4.spectrum.lambda_d2 > 1e-6);
    CHECK(e4.collective);

    const BoundReport b = ensemble_lambda_bound(e4, four.partition, four.config, params.beta);
    CHECK(b.holds);
    CHECK(b.measured <= b.bound + 1e-6);
    CHECK(b.orthogonality_residual <= 1e-8);

    // rho_c from the cluster's own eigenvector when lambda_{D+2} is simple.
    for (Index k = 0; k < 2; ++k) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(e4.clusters[static_cast<std::size_t>(k)].Omega.matrix());
      if (smallest_nonzero_gap(es.eigenvalues(), 3) < 1e-6) continue;
      const VectorXd v = es.eigenvectors().col(3);
      double w = 0.0;
      const auto& nodes = four.partition.cluster(k);
      for (std::size_t a = 0; a < nodes.size(); ++a)
        w += (four.partition.membership(nodes[a]) - 1) * v(static_cast<Index>(a)) * v(static_cast<Index>(a));
      CHECK(b.clusters[static_cast<std::size_t>(k)].rho == doctest::Approx(params.beta * w).epsilon(1e-8));
      CHECK(b.clusters[static_cast<std::size_t>(k)].lambda_d2 == doctest::Approx(es.eigenvalues()(3)).epsilon(1e-10));
    }
  }

  TEST_CASE("ensemble rejects unverified clusters") {
    const Split s = random_split(12, 4, 2);
    auto designs = design_clusters(s.config, s.partition, DesignParams{});
    designs[1].verification.overall = false;
    CHECK_THROWS_AS(ensemble_stress(designs, s.partition, s.config), Error);
    designs.pop_back();
    CHECK_THROWS_AS(ensemble_stress(designs, s.partition, s.config), Error);
  }

  TEST_CASE("grounded rate") {
    const Configuration c = random_configuration(10, 2, 8);
    const DesignResult d = design_stress(c, DesignParams{});
    std::vector<Index> all(10);
    for (Index i = 0; i < 10; ++i) all[static_cast<std::size_t>(i)] = i;
    const auto spread = select_leaders(c, all, 3);
    const double pinned = grounded_rate(d.Omega, spread);
    CHECK(pinned > 1e-6);
    // Interlacing: removing rows and columns cannot push the smallest
    // eigenvalue of the remainder above lambda_max.
    CHECK(pinned <= d.spectrum.lambda_max + 1e-12);
    // Two leaders leave an affine direction free.
    CHECK(std::abs(grounded_rate(d.Omega, std::vector<Index>{spread[0], spread[1]})) < 1e-8);
  }
}
