// stresslab command-line front end.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>

#include <cstring>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "stresslab/bench.hpp"
#include "stresslab/io.hpp"
#include "stresslab/parallel.hpp"
#include "stresslab/simulation.hpp"
#include "stresslab/usi.hpp"

using namespace stresslab;

namespace {

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_text(path, text);
}

void emit_json(const std::string& path, const Json& j) { emit(path, j.dump(2) + "\n"); }

struct DesignOpts {
  DesignParams params;
  bool usi = false;
  double tol_edm = 1e-9;
  bool no_polish = false, no_strict = false;

  void add(CLI::App* app) {
    app->add_option("--alpha", params.alpha, "Sparsity/speed trade-off")->capture_default_str();
    app->add_option("--beta", params.beta, "Upper eigenvalue bound")->capture_default_str();
    app->add_option("--gamma", params.gamma, "Lower bound on the convergence eigenvalue")->capture_default_str();
    app->add_option("--eps-rel", params.eps_rel, "Relative edge pruning threshold")->capture_default_str();
    app->add_option("--tol", params.solver.tol, "Solver residual tolerance")->capture_default_str();
    app->add_option("--gap-tol", params.solver.gap_tol, "Solver duality gap tolerance")->capture_default_str();
    app->add_option("--max-iter", params.solver.max_iterations, "Solver iteration limit")->capture_default_str();
    app->add_flag("--two-sided", params.two_sided, "Also impose the stress PSD constraint explicitly");
    app->add_flag("--no-polish", no_polish, "Skip the equilibrium projection after pruning");
    app->add_flag("--no-strict", no_strict, "Report failed verification instead of exiting with an error");
    app->add_flag("--usi", usi, "Symmetry-reduced program (edges of equal length share a weight)");
    app->add_option("--tol-edm", tol_edm, "Relative gap separating edge length classes")->capture_default_str();
  }

  DesignParams resolved() const {
    DesignParams p = params;
    p.polish = !no_polish;
    p.strict = !no_strict;
    return p;
  }

  DesignResult design(const Configuration& config) const {
    const DesignParams p = resolved();
    return usi ? design_stress_usi(config, p, tol_edm) : design_stress(config, p);
  }
};

ClusterPartition whole(Index n) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return ClusterPartition(n, {all});
}

std::vector<std::pair<Index, Index>> global_edges(const std::vector<DesignResult>& designs, const ClusterPartition& part) {
  std::set<std::pair<Index, Index>> edges;
  for (Index c = 0; c < part.size(); ++c) {
    const auto& nodes = part.cluster(c);
    for (auto [a, b] : designs[static_cast<std::size_t>(c)].topology.edges()) {
      Index i = nodes[static_cast<std::size_t>(a)], j = nodes[static_cast<std::size_t>(b)];
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  return {edges.begin(), edges.end()};
}

// ---------------------------------------------------------------------------

struct GenOpts {
  std::string kind = "random";
  Index n = 0;
  int dim = 2;
  std::uint64_t seed = 1;
  double radius = 1.0;
  std::string spec_path, out, partition_out, keyframes_out;
  double phase = 1000.0;
  Index leaders_per_cluster = 4;
};

int cmd_gen(const GenOpts& o) {
  if (o.kind == "letter-w") {
    const SegmentedConfiguration seg = letter_w();
    emit_json(o.out, to_json(seg.config));
    const ClusterPartition part(seg.config.size(), seg.segments);
    const auto leaders = select_cluster_leaders(seg.config, part, o.leaders_per_cluster);
    if (!o.partition_out.empty()) write_json(o.partition_out, to_json(part, leaders));
    if (!o.keyframes_out.empty()) {
      auto shape = [&](LetterShape s) { return keyframe_positions(seg.config, part, letter_shape_maps(s)); };
      const double T = o.phase;
      const std::vector<Keyframe> kf = {{0.0, 0.0, shape(LetterShape::Bar)},
                                        {T, 0.0, shape(LetterShape::Bar)},
                                        {2 * T, T / 4, shape(LetterShape::V)},
                                        {3 * T, T / 4, shape(LetterShape::W)}};
      write_json(o.keyframes_out, to_json(kf));
    }
    return 0;
  }
  GeneratorSpec spec;
  if (!o.spec_path.empty()) {
    spec = generator_spec_from_json(read_json(o.spec_path));
  } else {
    spec.kind = parse_generator_kind(o.kind);
    spec.n = o.n;
    spec.dim = spec.kind == GeneratorKind::Random ? o.dim : 0;
    if (spec.kind == GeneratorKind::Polygon) spec.dim = 2;
    spec.seed = o.seed;
    spec.radius = o.radius;
  }
  emit_json(o.out, to_json(generate(spec)));
  return 0;
}

struct DesignCmd {
  std::string config, out, stress_csv, matrix_csv, svg;
  DesignOpts d;
};

int cmd_design(const DesignCmd& o) {
  const Configuration config = configuration_from_json(read_json(o.config));
  const DesignResult r = o.d.design(config);
  emit_json(o.out, to_json(r));
  if (!o.stress_csv.empty()) write_text(o.stress_csv, stress_to_csv(r.omega));
  if (!o.matrix_csv.empty()) write_text(o.matrix_csv, matrix_to_csv(r.Omega.matrix()));
  if (!o.svg.empty()) write_text(o.svg, render_svg({{"design", config.coords()}}, r.topology.edges()));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

struct UsiCmd {
  std::string config, out;
  double tol_edm = 1e-9;
};

int cmd_usi(const UsiCmd& o) {
  const Configuration config = configuration_from_json(read_json(o.config));
  const StressClassification c = classify_edges(edm(config), o.tol_edm);
  Json reps = Json::array();
  for (Index e : c.representative) {
    auto [i, j] = edge_endpoints(e, c.nodes);
    reps.push_back(Json::array({i, j}));
  }
  std::vector<double> mult(c.multiplicity.data(), c.multiplicity.data() + c.multiplicity.size());
  std::vector<double> len(c.squared_length.data(), c.squared_length.data() + c.squared_length.size());
  emit_json(o.out, Json{{"nodes", c.nodes},
                        {"S", c.classes},
                        {"reduction_ratio", static_cast<double>(c.classes) / static_cast<double>(c.edges())},
                        {"classes", c.class_of},
                        {"multiplicity", mult},
                        {"squared_length", len},
                        {"representatives", reps}});
  return 0;
}

struct PartitionCmd {
  std::string config, partition, out, partition_out;
  Index axis_bridges = 0;
  int axis = 0;
  Index leaders_per_cluster = 0;
  bool design = false;
  DesignOpts d;
};

int cmd_partition(const PartitionCmd& o) {
  const Configuration config = configuration_from_json(read_json(o.config));
  PartitionFile pf;
  if (!o.partition.empty()) {
    pf = partition_from_json(read_json(o.partition), config.size());
  } else if (o.axis_bridges > 0) {
    pf.partition = split_by_axis(config, o.axis_bridges, o.axis);
  } else {
    throw Error(ErrorCode::InvalidInput, "give --partition or --axis-bridges");
  }
  if (o.leaders_per_cluster > 0) pf.leaders = select_cluster_leaders(config, pf.partition, o.leaders_per_cluster);

  AnalysisReport rep;
  rep.partition = validate_partition(config, pf.partition);
  rep.collective = collective_motion_check(config, pf.partition);
  if (!pf.leaders.empty()) rep.leaders = leader_condition_check(config, pf.partition, pf.leaders);
  if (o.design) {
    const DesignParams p = o.d.resolved();
    auto designs = design_clusters(config, pf.partition, p, o.d.usi, worker_count());
    for (const auto& d : designs) rep.cluster_edges.push_back(d.edge_count());
    const EnsembleDesign ens = ensemble_stress(std::move(designs), pf.partition, config, p.tolerances);
    rep.ensemble_lambda_d2 = ens.spectrum.lambda_d2;
    rep.bound = ensemble_lambda_bound(ens, pf.partition, config, p.beta);
  }
  if (!o.partition_out.empty()) write_json(o.partition_out, to_json(pf.partition, pf.leaders));
  emit_json(o.out, to_json(rep));
  return 0;
}

struct SimulateCmd {
  std::string config, partition, stress, keyframes, out, summary, svg, integrator = "euler";
  std::vector<double> svg_times;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> z0_seed;
  double z0_scale = 1.0;
  double horizon = 50.0;
  double h = 0.0;
  int switching_period = 1;
  int stride = 1;
  double stop_ratio = 0.0;
  bool no_positions = false;
  DesignOpts d;
};

int cmd_simulate(const SimulateCmd& o) {
  const Configuration config = configuration_from_json(read_json(o.config));
  const DesignParams p = o.d.resolved();
  PartitionFile pf{whole(config.size()), {}};
  std::vector<DesignResult> designs;
  if (!o.partition.empty()) {
    pf = partition_from_json(read_json(o.partition), config.size());
    validate_partition(config, pf.partition);
    designs = design_clusters(config, pf.partition, p, o.d.usi, worker_count());
  } else if (!o.stress.empty()) {
    designs.push_back(design_result_from_json(read_json(o.stress)));
    if (designs[0].omega.nodes != config.size())
      throw Error(ErrorCode::DimensionMismatch, "stress and configuration differ in node count");
  } else {
    designs.push_back(o.d.design(config));
  }
  std::vector<StressMatrix> stresses;
  for (const auto& r : designs) stresses.push_back(r.Omega);

  SimConfig sc;
  sc.h = o.h > 0.0 ? o.h : 0.1 / p.beta;
  sc.horizon = o.horizon;
  sc.integrator = parse_integrator(o.integrator);
  sc.seed = o.seed;
  sc.switching_period = o.switching_period;
  sc.record_stride = o.stride;
  sc.stop_ratio = o.stop_ratio;
  sc.store_positions = !o.no_positions;

  const MatrixXd z0 = random_positions(config.dim(), config.size(), o.z0_seed.value_or(o.seed), o.z0_scale);
  Trajectory traj;
  if (!pf.leaders.empty() || !o.keyframes.empty()) {
    LeaderPlan plan;
    plan.leaders = pf.leaders;
    plan.keyframes = o.keyframes.empty() ? std::vector<Keyframe>{{0.0, 0.0, config.coords()}}
                                         : keyframes_from_json(read_json(o.keyframes));
    traj = simulate_leader_maneuver(stresses, pf.partition, config, plan, z0, sc);
  } else if (pf.partition.size() > 1) {
    traj = simulate_multicluster(stresses, pf.partition, config, z0, sc);
  } else {
    traj = simulate_single(stresses[0], config, z0, sc);
  }
  for (const auto& w : traj.warnings) std::cerr << "warning: " << w << "\n";

  emit(o.out, trajectory_to_csv(traj));
  if (!o.summary.empty()) {
    Json phases = Json::array();
    for (const auto& ph : traj.phases) {
      phases.push_back({{"start", ph.start}, {"end", ph.end}, {"initial_error", ph.initial_error},
                        {"terminal_error", ph.terminal_error}, {"ratio", ph.ratio()}});
    }
    Json s{{"samples", traj.times.size()},
           {"final_time", traj.times.empty() ? 0.0 : traj.times.back()},
           {"initial_error", traj.error.empty() ? 0.0 : traj.error.front()},
           {"final_error", traj.error.empty() ? 0.0 : traj.error.back()},
           {"energy_increases", traj.energy_increases},
           {"stopped_early", traj.stopped_early},
           {"phases", phases},
           {"warnings", traj.warnings}};
    if (pf.partition.size() == 1) s["lambda_d2"] = designs[0].spectrum.lambda_d2;
    if (traj.phases.empty()) {
      try {
        s["decay_rate"] = fit_decay_rate(traj);
      } catch (const Error&) {
      }
    }
    write_json(o.summary, s);
  }
  if (!o.svg.empty()) {
    std::vector<double> times = o.svg_times;
    if (times.empty()) times = {0.0, traj.times.back() / 2, traj.times.back()};
    write_text(o.svg, render_svg(trajectory_panels(traj, times), global_edges(designs, pf.partition), pf.leaders));
  }
  return 0;
}

struct BenchCmd {
  std::string suite, out;
  unsigned threads = 0;
  bool quiet = false;
};

int cmd_bench(const BenchCmd& o) {
  const fs::path suite_path = o.suite;
  BenchmarkSuite suite = suite_from_json(read_json(suite_path));
  if (!o.out.empty()) suite.output = o.out;
  if (o.threads) suite.threads = o.threads;
  std::size_t done = 0;
  const BenchmarkReport rep = run_benchmark(suite, [&](const RunRecord& r) {
    ++done;
    if (o.quiet) return;
    std::cerr << "[" << done << "] " << r.case_name << " alpha=" << r.alpha << " seed=" << r.seed
              << (r.ok ? (r.verified ? " ok" : " unverified") : " failed: " + r.error) << " " << r.runtime << "s\n";
  });
  write_benchmark(rep, suite.output);
  std::cout << metrics_to_csv(rep.rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // --error-json is accepted anywhere on the line, so it is taken out before parsing.
  bool error_json = false;
  std::vector<char*> args{argv[0]};
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--error-json") == 0)
      error_json = true;
    else
      args.push_back(argv[i]);
  }

  CLI::App app{"Sparse stress design, multicluster analysis and formation simulation"};
  app.require_subcommand(1);
  app.add_flag("--error-json", error_json, "Print errors as JSON on stderr (any position)");

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "Generate a configuration");
  g->add_option("--kind", gen.kind,
                "random | polygon | circular | octahedron | cuboctahedron | truncated-icosahedron | letter-w")
      ->capture_default_str();
  g->add_option("--n", gen.n, "Node count (random, polygon)");
  g->add_option("--dim", gen.dim, "Dimension (random)")->capture_default_str();
  g->add_option("--seed", gen.seed, "Seed (random)")->capture_default_str();
  g->add_option("--radius", gen.radius, "Circumradius (polygon, solids)")->capture_default_str();
  g->add_option("--spec", gen.spec_path, "Generator spec JSON instead of flags");
  g->add_option("-o,--out", gen.out, "Configuration JSON (default stdout)");
  g->add_option("--partition-out", gen.partition_out, "letter-w: segment partition with leaders");
  g->add_option("--keyframes-out", gen.keyframes_out, "letter-w: Bar, V, W keyframes");
  g->add_option("--phase", gen.phase, "letter-w: keyframe spacing")->capture_default_str();
  g->add_option("--leaders-per-cluster", gen.leaders_per_cluster, "letter-w: leaders per segment")->capture_default_str();

  DesignCmd design;
  auto* d = app.add_subcommand("design", "Design a stress for a configuration");
  d->add_option("-c,--config", design.config, "Configuration JSON")->required();
  d->add_option("-o,--out", design.out, "Result JSON (default stdout)");
  d->add_option("--stress-csv", design.stress_csv, "Edge weights as CSV");
  d->add_option("--matrix-csv", design.matrix_csv, "Dense stress matrix as CSV");
  d->add_option("--svg", design.svg, "Topology plot");
  design.d.add(d);

  UsiCmd usi;
  auto* u = app.add_subcommand("usi", "Classify complete-graph edges by length");
  u->add_option("-c,--config", usi.config, "Configuration JSON")->required();
  u->add_option("-o,--out", usi.out, "Classification JSON (default stdout)");
  u->add_option("--tol-edm", usi.tol_edm, "Relative gap separating classes")->capture_default_str();

  PartitionCmd part;
  auto* pc = app.add_subcommand("partition", "Analyse a cluster partition");
  pc->add_option("-c,--config", part.config, "Configuration JSON")->required();
  pc->add_option("--partition", part.partition, "Partition JSON");
  pc->add_option("--axis-bridges", part.axis_bridges, "Split in two along an axis sharing this many nodes");
  pc->add_option("--axis", part.axis, "Split axis")->capture_default_str();
  pc->add_option("--leaders-per-cluster", part.leaders_per_cluster, "Select spread leaders in every cluster");
  pc->add_flag("--design", part.design, "Design the clusters and report the ensemble bound");
  pc->add_option("--partition-out", part.partition_out, "Write the partition (with leaders) used");
  pc->add_option("-o,--out", part.out, "Report JSON (default stdout)");
  part.d.add(pc);

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "Simulate the formation dynamics");
  s->add_option("-c,--config", sim.config, "Target configuration JSON")->required();
  s->add_option("--partition", sim.partition, "Partition JSON; clusters switch randomly, leaders follow keyframes");
  s->add_option("--stress", sim.stress, "Design result JSON to use instead of designing (single cluster)");
  s->add_option("--keyframes", sim.keyframes, "Leader keyframes JSON");
  s->add_option("--seed", sim.seed, "Switching seed")->capture_default_str();
  s->add_option("--z0-seed", sim.z0_seed, "Initial position seed (default: --seed)");
  s->add_option("--z0-scale", sim.z0_scale, "Initial position scale")->capture_default_str();
  s->add_option("--horizon", sim.horizon, "Simulated time")->capture_default_str();
  s->add_option("--step", sim.h, "Step size (default 0.1/beta)");
  s->add_option("--integrator", sim.integrator, "euler | rk4")->capture_default_str();
  s->add_option("--switching-period", sim.switching_period, "Steps between cluster re-draws")->capture_default_str();
  s->add_option("--stride", sim.stride, "Keep every k-th sample")->capture_default_str();
  s->add_option("--stop-ratio", sim.stop_ratio, "Stop once error <= ratio * initial error")->capture_default_str();
  s->add_flag("--no-positions", sim.no_positions, "Only write times and error");
  s->add_option("-o,--out", sim.out, "Trajectory CSV (default stdout)");
  s->add_option("--summary", sim.summary, "Summary JSON");
  s->add_option("--svg", sim.svg, "Snapshot plot");
  s->add_option("--svg-times", sim.svg_times, "Snapshot times")->delimiter(',');
  sim.d.add(s);

  BenchCmd bench;
  auto* b = app.add_subcommand("bench", "Run a benchmark suite");
  b->add_option("--suite", bench.suite, "Suite JSON")->required();
  b->add_option("-o,--out", bench.out, "Output directory (overrides the suite)");
  b->add_option("--threads", bench.threads, "Worker cap (default STRESSLAB_THREADS or all cores)");
  b->add_flag("--quiet", bench.quiet, "No per-run progress");

  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    if (error_json) std::cerr << Json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (d->parsed()) return cmd_design(design);
    if (u->parsed()) return cmd_usi(usi);
    if (pc->parsed()) return cmd_partition(part);
    if (s->parsed()) return cmd_simulate(sim);
    if (b->parsed()) return cmd_bench(bench);
  } catch (const Error& e) {
    if (error_json) std::cerr << error_to_json(e).dump() << "\n";
    else std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    if (error_json) std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    else std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
