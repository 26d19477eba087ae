#include <doctest.h>

#include <filesystem>
#include <regex>

#include "stresslab/bench.hpp"
#include "stresslab/io.hpp"
#include "stresslab/usi.hpp"

using namespace stresslab;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stresslab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto p = text.find(what); p != std::string::npos; p = text.find(what, p + 1)) ++n;
  return n;
}

void check_same(const DesignResult& a, const DesignResult& b) {
  CHECK(a.omega.nodes == b.omega.nodes);
  CHECK(a.omega.weights == b.omega.weights);
  CHECK(a.Omega.matrix() == b.Omega.matrix());
  CHECK(a.topology.edges() == b.topology.edges());
  CHECK(a.spectrum.eigenvalues == b.spectrum.eigenvalues);
  CHECK(a.spectrum.lambda_d2 == b.spectrum.lambda_d2);
  CHECK(a.spectrum.rank == b.spectrum.rank);
  CHECK(a.spectrum.condition_number == b.spectrum.condition_number);
  CHECK(a.verification.overall == b.verification.overall);
  CHECK(a.verification.equilibrium_residual == b.verification.equilibrium_residual);
  CHECK(a.status == b.status);
  CHECK(a.objective == b.objective);
  CHECK(a.final_objective == b.final_objective);
  CHECK(a.iterations == b.iterations);
  CHECK(a.timings.total == b.timings.total);
  CHECK(a.warnings == b.warnings);
  REQUIRE(a.usi.has_value() == b.usi.has_value());
  if (a.usi) {
    CHECK(a.usi->classes == b.usi->classes);
    CHECK(a.usi->class_of == b.usi->class_of);
    CHECK(a.usi->reduction_ratio == b.usi->reduction_ratio);
  }
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("configuration JSON") {
    const Configuration c = random_configuration(7, 3, 9);
    const Json j = to_json(c);
    CHECK(j["dim"] == 3);
    CHECK(j["coords"].size() == 7);
    CHECK(j["coords"][0].size() == 3);
    const Configuration back = configuration_from_json(Json::parse(j.dump()));
    CHECK(back.coords() == c.coords());

    const Configuration labelled(MatrixXd::Identity(2, 3), {"a", "b", "c"});
    CHECK(configuration_from_json(to_json(labelled)).labels() == labelled.labels());
    CHECK_THROWS_AS(configuration_from_json(Json{{"dim", 2}, {"coords", {{0, 0}, {1, 0, 2}}}}), Error);
    CHECK_THROWS_AS(configuration_from_json(Json{{"coords", {{0, 0}}}}), Error);
    CHECK_THROWS_AS(configuration_from_json(Json{{"dim", 4}, {"coords", Json::array()}}), Error);
  }

  TEST_CASE("generator spec and parameters") {
    GeneratorSpec s;
    s.kind = GeneratorKind::Random;
    s.n = 12;
    s.dim = 3;
    s.seed = 77;
    const GeneratorSpec back = generator_spec_from_json(Json::parse(to_json(s).dump()));
    CHECK(generate(back).coords() == generate(s).coords());

    const GeneratorSpec w = letter_w_spec();
    const GeneratorSpec wb = generator_spec_from_json(Json::parse(to_json(w).dump()));
    CHECK(wb.transforms.size() == 4);
    CHECK(generate(wb).coords() == generate(w).coords());
    const GeneratorSpec preset = generator_spec_from_json(Json{{"kind", "letter-w"}});
    CHECK(preset.kind == GeneratorKind::RepeatedSegment);
    CHECK(generate(preset).coords() == generate(w).coords());

    DesignParams p;
    p.alpha = 1.5;
    p.gamma = 0.2;
    p.two_sided = true;
    p.solver.max_iterations = 55;
    const DesignParams q = design_params_from_json(Json::parse(to_json(p).dump()));
    CHECK(q.alpha == p.alpha);
    CHECK(q.gamma == p.gamma);
    CHECK(q.two_sided);
    CHECK(q.solver.max_iterations == 55);
    CHECK(design_params_from_json(Json::object()).beta == DesignParams{}.beta);
  }

  TEST_CASE("design result JSON") {
    const Configuration oct = polygon(8);
    const DesignResult r = design_stress_usi(oct, DesignParams{});
    const Json j = to_json(r);
    CHECK(j["S"] == 4);
    CHECK(j["classes"].size() == 28);
    CHECK(j["edges"].size() == static_cast<std::size_t>(r.edge_count()));
    CHECK(j["verification"]["overall"] == true);
    CHECK(j.contains("timings"));
    check_same(r, design_result_from_json(Json::parse(j.dump())));

    const DesignResult plain = design_stress(random_configuration(6, 2, 2), DesignParams{});
    const Json jp = to_json(plain);
    CHECK_FALSE(jp.contains("S"));
    check_same(plain, design_result_from_json(Json::parse(jp.dump())));
    CHECK(parse_solve_status("optimal-inaccurate") == SolveStatus::OptimalInaccurate);
    CHECK_THROWS_AS(parse_solve_status("fine"), Error);
  }

  TEST_CASE("stress and matrix CSV") {
    StressVector s = StressVector::zeros(5);
    s.weights(edge_index(0, 3, 5)) = -0.125;
    s.weights(edge_index(1, 4, 5)) = 1.0 / 3.0;
    const std::string csv = stress_to_csv(s);
    CHECK(csv.rfind("edge_i,edge_j,weight\n", 0) == 0);
    CHECK(count(csv, "\n") == 3);
    const StressVector back = stress_from_csv(csv, 5);
    CHECK(back.weights == s.weights);
    CHECK(stress_from_csv(csv).nodes == 5);
    CHECK_THROWS_AS(stress_from_csv(csv, 3), Error);
    CHECK_THROWS_AS(stress_from_csv("edge_i,edge_j,weight\n1,1,2\n"), Error);

    const MatrixXd m = MatrixXd::Random(4, 3) * 1e-3;
    CHECK(matrix_from_csv(matrix_to_csv(m)) == m);
    CHECK_THROWS_AS(matrix_from_csv("1,2\n3\n"), Error);
  }

  TEST_CASE("partition and analysis report") {
    const ClusterPartition p(7, {{0, 1, 2, 3, 4}, {3, 4, 5, 6}});
    const std::vector<Index> leaders = {0, 6};
    const PartitionFile f = partition_from_json(Json::parse(to_json(p, leaders).dump()), 7);
    CHECK(f.partition.clusters() == p.clusters());
    CHECK(f.leaders == leaders);
    CHECK(partition_from_json(Json{{"clusters", {{0, 1, 2}, {2, 3}}}}).partition.nodes() == 4);
    CHECK_THROWS_AS(partition_from_json(to_json(p), 9), Error);
    CHECK_THROWS_AS(partition_from_json(Json{{"clusters", {{0, 1}}}, {"leaders", {5}}}, 3), Error);

    const Configuration c = random_configuration(16, 2, 4);
    const ClusterPartition sp = split_by_axis(c, 4);
    AnalysisReport rep;
    rep.partition = validate_partition(c, sp);
    rep.collective = collective_motion_check(c, sp);
    const std::vector<Index> ls = select_cluster_leaders(c, sp, 3);
    rep.leaders = leader_condition_check(c, sp, ls);
    const EnsembleDesign ens = ensemble_stress(design_clusters(c, sp, DesignParams{}), sp, c);
    rep.ensemble_lambda_d2 = ens.spectrum.lambda_d2;
    rep.bound = ensemble_lambda_bound(ens, sp, c, 1.0);
    const Json j = to_json(rep);
    CHECK(j["pairs"][0]["rank"] == 3);
    CHECK(j["bound"]["clusters"].size() == 2);
    const AnalysisReport back = analysis_report_from_json(Json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(back.bound->clusters[1].rho == rep.bound->clusters[1].rho);
  }

  TEST_CASE("keyframes and trajectory CSV") {
    const std::vector<Keyframe> k = {{0.0, 0.0, MatrixXd::Random(3, 4)}, {5.0, 1.5, MatrixXd::Random(3, 4)}};
    const auto kb = keyframes_from_json(Json::parse(to_json(k).dump()));
    REQUIRE(kb.size() == 2);
    CHECK(kb[1].positions == k[1].positions);
    CHECK(kb[1].ramp == 1.5);

    Trajectory t;
    for (int s = 0; s < 4; ++s) {
      t.times.push_back(0.1 * s);
      t.positions.push_back(MatrixXd::Random(3, 2));
      t.error.push_back(1.0 / (s + 1.0));
    }
    const std::string csv = trajectory_to_csv(t);
    CHECK(csv.rfind("t,z1_x,z1_y,z1_z,z2_x,z2_y,z2_z,error\n", 0) == 0);
    const Trajectory back = trajectory_from_csv(csv, 3);
    CHECK(back.times == t.times);
    CHECK(back.error == t.error);
    REQUIRE(back.positions.size() == 4);
    for (int s = 0; s < 4; ++s) CHECK(back.positions[static_cast<std::size_t>(s)] == t.positions[static_cast<std::size_t>(s)]);
    CHECK_THROWS_AS(trajectory_from_csv(csv, 2), Error);

    Trajectory bare = t;
    bare.positions.clear();
    const Trajectory bb = trajectory_from_csv(trajectory_to_csv(bare), 3);
    CHECK(bb.positions.empty());
    CHECK(bb.error == t.error);
  }

  TEST_CASE("svg snapshots") {
    Trajectory t;
    t.times = {0.0, 1.0, 2.0};
    for (int s = 0; s < 3; ++s) t.positions.push_back(MatrixXd::Random(3, 5));
    const auto panels = trajectory_panels(t, {0.0, 1.9});
    REQUIRE(panels.size() == 2);
    CHECK(panels[1].positions == t.positions[2]);
    const std::string svg = render_svg(panels, {{0, 1}, {1, 2}, {3, 4}}, {0});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "<polyline") == 6);
    CHECK(count(svg, "<circle") == 10);
    CHECK(count(svg, "</svg>") == 1);
  }

  TEST_CASE("error JSON") {
    const Error e(ErrorCode::SolverFailure, "stalled", "solve_design");
    const Json j = error_to_json(e);
    CHECK(j["error"] == "solver-failure");
    CHECK(j["stage"] == "solve_design");
    CHECK(j["message"] == "stalled");
  }

  TEST_CASE("files") {
    const fs::path dir = scratch_dir("files");
    const Configuration c = random_configuration(5, 2, 1);
    write_json(dir / "sub" / "c.json", to_json(c));
    CHECK(configuration_from_json(read_json(dir / "sub" / "c.json")).coords() == c.coords());
    CHECK_THROWS_AS(read_text(dir / "missing.json"), Error);
    write_text(dir / "bad.json", "{ nope");
    CHECK_THROWS_AS(read_json(dir / "bad.json"), Error);
    fs::remove_all(dir);
  }
}

TEST_SUITE("bench") {
  TEST_CASE("suite parsing") {
    const Json j = Json::parse(R"({
      "name": "mini",
      "defaults": {"beta": 1.0, "gamma": 0.1},
      "cases": [
        {"name": "Random-8", "generator": {"kind": "random", "n": 8, "dim": 2}, "alphas": [0.5, 1.5, 5], "seeds": [3, 4]},
        {"name": "Square", "generator": {"kind": "polygon", "n": 4}, "usi": true, "repeat": 2}
      ]})");
    const BenchmarkSuite s = suite_from_json(j);
    REQUIRE(s.cases.size() == 2);
    CHECK(s.cases[0].params.size() == 3);
    CHECK(s.cases[0].params[2].alpha == 5.0);
    CHECK(s.cases[0].run_seeds() == std::vector<std::uint64_t>{3, 4});
    CHECK(s.cases[1].run_seeds().size() == 2);
    CHECK(s.cases[1].usi);
    const BenchmarkSuite again = suite_from_json(Json::parse(to_json(s).dump()));
    CHECK(to_json(again) == to_json(s));

    Json dup = j;
    dup["cases"][1]["name"] = "Random-8";
    CHECK_THROWS_AS(suite_from_json(dup), Error);
    Json zero = j;
    zero["cases"][1]["repeat"] = 0;
    CHECK_THROWS_AS(suite_from_json(zero), Error);
    Json seg = j;
    seg["cases"][1]["partition"] = {{"segments", true}};
    CHECK_THROWS_AS(suite_from_json(seg), Error);
    seg["cases"][1]["generator"] = {{"kind", "letter-w"}};
    const BenchmarkSuite ws = suite_from_json(seg);
    CHECK(ws.cases[1].partition->segments);
    CHECK(to_json(suite_from_json(Json::parse(to_json(ws).dump()))) == to_json(ws));
  }

  TEST_CASE("runs, rows and files") {
    const BenchmarkSuite s = suite_from_json(Json::parse(R"({
      "name": "mini", "threads": 2,
      "cases": [
        {"name": "Random-8", "generator": {"kind": "random", "n": 8, "dim": 2}, "alphas": [0.5, 5], "seeds": [1, 2, 3]},
        {"name": "Split-16", "generator": {"kind": "random", "n": 16, "dim": 2}, "partition": {"axis_bridges": 4}, "seeds": [4]},
        {"name": "Broken", "generator": {"kind": "random", "n": 2, "dim": 2}, "seeds": [1]}
      ]})"));
    const BenchmarkReport rep = run_benchmark(s);
    CHECK(rep.runs.size() == 8);
    REQUIRE(rep.rows.size() == 4);
    CHECK(rep.rows[0].seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(rep.rows[0].pass_rate == 1.0);
    CHECK(rep.rows[0].degree_mean <= rep.rows[1].degree_mean);
    CHECK(rep.rows[2].pass_rate == 1.0);
    CHECK(rep.rows[3].failures == 1);
    CHECK(rep.rows[3].pass_rate == 0.0);

    // Each run reproduces in isolation from its recorded seed.
    const RunRecord& r = rep.runs[1];
    const RunRecord again = run_case(s.cases[0], r.param_index, r.seed);
    CHECK(again.edges == r.edges);
    CHECK(again.lambda_d2 == r.lambda_d2);

    const auto rows = metrics_from_csv(metrics_to_csv(rep.rows));
    REQUIRE(rows.size() == rep.rows.size());
    CHECK(metrics_to_csv(rows) == metrics_to_csv(rep.rows));
    CHECK(runs_to_csv(runs_from_csv(runs_to_csv(rep.runs))) == runs_to_csv(rep.runs));
    CHECK(to_json(benchmark_report_from_json(Json::parse(to_json(rep).dump()))) == to_json(rep));

    const fs::path dir = scratch_dir("bench");
    write_benchmark(rep, dir);
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "cases" / "Split-16.csv"));
    CHECK(count(read_text(dir / "summary.csv"), "\n") == 5);
    fs::remove_all(dir);
  }
}
