#include "stresslab/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "stresslab/parallel.hpp"
#include "stresslab/usi.hpp"

namespace stresslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_num(const std::string& s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error(ErrorCode::InvalidInput, "bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error(ErrorCode::InvalidInput, "bad integer '" + s + "'");
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// RFC 4180 records; quoted fields may hold commas, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = any = true;
    } else if (ch == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (ch == '\n') {
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else if (ch != '\r') {
      cell += ch;
      any = true;
    }
  }
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ";" : "") + std::to_string(seeds[i]);
  return out;
}

std::vector<std::uint64_t> split_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start < s.size()) {
    auto p = s.find(';', start);
    if (p == std::string::npos) p = s.size();
    out.push_back(parse_u64(s.substr(start, p - start)));
    start = p + 1;
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Index count_edges(const MatrixXd& omega) {
  Index m = 0;
  for (Index j = 1; j < omega.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      if (omega(i, j) != 0.0) ++m;
  return m;
}

const std::vector<std::string> kMetricsHeader = {"case",         "alpha",          "beta",         "gamma",
                                                 "runs",         "failures",       "pass_rate",    "runtime_mean",
                                                 "runtime_median", "degree_mean",  "lambda_d2_mean", "efficiency_mean",
                                                 "seeds"};

const std::vector<std::string> kRunsHeader = {"case",       "param_index",   "alpha",     "seed",      "ok",
                                              "runtime",    "nodes",         "edges",     "average_degree",
                                              "lambda_d2",  "lambda_max",    "efficiency", "verified", "status",
                                              "classes",    "error"};

void check_header(const std::vector<std::string>& got, const std::vector<std::string>& want, const char* what) {
  if (got != want) throw Error(ErrorCode::InvalidInput, std::string("unexpected ") + what + " CSV header");
}

}  // namespace

std::vector<std::uint64_t> BenchmarkCase::run_seeds() const {
  if (!seeds.empty()) return seeds;
  const std::uint64_t base = generator.seed.value_or(1);
  std::vector<std::uint64_t> out;
  for (int r = 0; r < repeat; ++r) out.push_back(base + static_cast<std::uint64_t>(r));
  return out;
}

void BenchmarkSuite::validate() const {
  std::set<std::string> names;
  for (const auto& c : cases) {
    if (c.name.empty()) throw Error(ErrorCode::InvalidInput, "benchmark case without a name");
    if (c.name.find_first_of(",\"\n/") != std::string::npos) {
      throw Error(ErrorCode::InvalidInput, "case name '" + c.name + "' contains a reserved character");
    }
    if (!names.insert(c.name).second) throw Error(ErrorCode::InvalidInput, "duplicate case name '" + c.name + "'");
    if (c.repeat < 1) throw Error(ErrorCode::InvalidInput, "case '" + c.name + "': repeat must be at least 1");
    if (!c.seeds.empty() && static_cast<std::size_t>(c.repeat) != c.seeds.size() && c.repeat != 1) {
      throw Error(ErrorCode::InvalidInput, "case '" + c.name + "': repeat disagrees with the seed list");
    }
    if (c.params.empty()) throw Error(ErrorCode::InvalidInput, "case '" + c.name + "' has no parameter set");
    for (const auto& p : c.params) p.validate();
  }
}

BenchmarkSuite suite_from_json(const Json& j) {
  BenchmarkSuite s;
  s.name = j.value("name", std::string("suite"));
  s.output = j.value("output", std::string("bench_out"));
  s.threads = j.value("threads", 0u);
  const Json defaults = j.value("defaults", Json::object());
  if (!j.contains("cases")) throw Error(ErrorCode::InvalidInput, "suite has no cases");
  for (const auto& jc : j.at("cases")) {
    BenchmarkCase c;
    c.name = jc.value("name", std::string());
    if (!jc.contains("generator")) throw Error(ErrorCode::InvalidInput, "case '" + c.name + "' has no generator");
    c.generator = generator_spec_from_json(jc.at("generator"));
    Json base = defaults;
    if (jc.contains("params")) base.update(jc.at("params"));
    if (jc.contains("param_sets")) {
      for (const auto& ps : jc.at("param_sets")) {
        Json merged = base;
        merged.update(ps);
        c.params.push_back(design_params_from_json(merged));
      }
    } else if (jc.contains("alphas")) {
      for (const auto& a : jc.at("alphas")) {
        Json merged = base;
        merged["alpha"] = a;
        c.params.push_back(design_params_from_json(merged));
      }
    } else {
      c.params.push_back(design_params_from_json(base));
    }
    c.repeat = jc.value("repeat", 1);
    if (jc.contains("seeds")) c.seeds = jc.at("seeds").get<std::vector<std::uint64_t>>();
    if (!c.seeds.empty() && !jc.contains("repeat")) c.repeat = static_cast<int>(c.seeds.size());
    c.usi = jc.value("usi", false);
    c.tol_edm = jc.value("tol_edm", 1e-9);
    if (jc.contains("partition")) {
      const Json& jp = jc.at("partition");
      PartitionSpec p;
      p.axis_bridges = jp.value("axis_bridges", Index{0});
      p.axis = jp.value("axis", 0);
      if (jp.contains("clusters")) p.clusters = jp.at("clusters").get<std::vector<std::vector<Index>>>();
      p.segments = jp.value("segments", false);
      if (p.clusters.empty() && p.axis_bridges <= 0 && !p.segments) {
        throw Error(ErrorCode::InvalidInput, "case '" + c.name + "': partition needs clusters, axis_bridges or segments");
      }
      if (p.segments && c.generator.kind != GeneratorKind::RepeatedSegment) {
        throw Error(ErrorCode::InvalidInput, "case '" + c.name + "': segments partition needs a repeated-segment generator");
      }
      c.partition = std::move(p);
    }
    s.cases.push_back(std::move(c));
  }
  s.validate();
  return s;
}

Json to_json(const BenchmarkSuite& suite) {
  Json cases = Json::array();
  for (const auto& c : suite.cases) {
    Json sets = Json::array();
    for (const auto& p : c.params) sets.push_back(to_json(p));
    Json jc{{"name", c.name}, {"generator", to_json(c.generator)}, {"param_sets", sets},
            {"repeat", c.repeat}, {"usi", c.usi}, {"tol_edm", c.tol_edm}};
    if (!c.seeds.empty()) jc["seeds"] = c.seeds;
    if (c.partition) {
      Json jp{{"axis_bridges", c.partition->axis_bridges}, {"axis", c.partition->axis}};
      if (!c.partition->clusters.empty()) jp["clusters"] = c.partition->clusters;
      if (c.partition->segments) jp["segments"] = true;
      jc["partition"] = jp;
    }
    cases.push_back(jc);
  }
  return Json{{"name", suite.name}, {"output", suite.output.string()}, {"threads", suite.threads}, {"cases", cases}};
}

RunRecord run_case(const BenchmarkCase& c, std::size_t param_index, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  RunRecord r;
  r.case_name = c.name;
  r.param_index = param_index;
  const DesignParams& params = c.params.at(param_index);
  r.alpha = params.alpha;
  r.seed = seed;
  try {
    GeneratorSpec spec = c.generator;
    if (spec.kind == GeneratorKind::Random) spec.seed = seed;
    const SegmentedConfiguration seg = c.partition && c.partition->segments
                                           ? generate_segmented(spec)
                                           : SegmentedConfiguration{generate(spec), {}};
    const Configuration& config = seg.config;
    r.nodes = config.size();
    if (!c.partition) {
      const auto t0 = Clock::now();
      const DesignResult d = c.usi ? design_stress_usi(config, params, c.tol_edm) : design_stress(config, params);
      r.runtime = std::chrono::duration<double>(Clock::now() - t0).count();
      r.edges = d.edge_count();
      r.lambda_d2 = d.spectrum.lambda_d2;
      r.lambda_max = d.spectrum.lambda_max;
      r.verified = d.verification.overall;
      r.status = std::string(to_string(d.status));
      if (d.usi) r.classes = d.usi->classes;
    } else {
      const ClusterPartition partition =
          c.partition->segments          ? ClusterPartition(config.size(), seg.segments)
          : c.partition->clusters.empty() ? split_by_axis(config, c.partition->axis_bridges, c.partition->axis)
                                          : ClusterPartition(config.size(), c.partition->clusters);
      validate_partition(config, partition);
      // Cluster designs run sequentially; the suite pool provides the parallelism.
      const auto t0 = Clock::now();
      auto designs = design_clusters(config, partition, params, c.usi, 1);
      r.runtime = std::chrono::duration<double>(Clock::now() - t0).count();
      const EnsembleDesign ens = ensemble_stress(std::move(designs), partition, config, params.tolerances);
      r.edges = count_edges(ens.Omega.matrix());
      r.lambda_d2 = ens.spectrum.lambda_d2;
      r.lambda_max = ens.spectrum.lambda_max;
      r.verified = verify_stabilizable(ens.Omega, config, params.tolerances).overall;
      r.status = "ensemble";
    }
    r.average_degree = r.nodes ? 2.0 * static_cast<double>(r.edges) / static_cast<double>(r.nodes) : 0.0;
    r.efficiency = r.edges > 0 && r.lambda_max > 0.0
                       ? r.lambda_d2 * static_cast<double>(r.nodes * r.nodes) / (r.lambda_max * static_cast<double>(r.edges))
                       : kNaN;
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.verified = false;
    r.error = e.what();
    r.lambda_d2 = r.lambda_max = r.efficiency = r.average_degree = kNaN;
  }
  return r;
}

BenchmarkReport run_benchmark(const BenchmarkSuite& suite, const std::function<void(const RunRecord&)>& progress) {
  suite.validate();
  struct Job {
    const BenchmarkCase* c;
    std::size_t p;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : suite.cases)
    for (std::size_t p = 0; p < c.params.size(); ++p)
      for (auto s : c.run_seeds()) jobs.push_back({&c, p, s});

  BenchmarkReport report;
  report.runs.resize(jobs.size());
  std::mutex mu;
  const unsigned threads = suite.threads ? std::min(suite.threads, worker_count()) : worker_count();
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    report.runs[k] = run_case(*jobs[k].c, jobs[k].p, jobs[k].seed);
    if (progress) {
      std::lock_guard<std::mutex> lock(mu);
      progress(report.runs[k]);
    }
  });
  report.rows = aggregate(suite, report.runs);
  return report;
}

std::vector<MetricsRow> aggregate(const BenchmarkSuite& suite, const std::vector<RunRecord>& runs) {
  std::vector<MetricsRow> rows;
  for (const auto& c : suite.cases) {
    for (std::size_t p = 0; p < c.params.size(); ++p) {
      MetricsRow row;
      row.case_name = c.name;
      row.alpha = c.params[p].alpha;
      row.beta = c.params[p].beta;
      row.gamma = c.params[p].gamma;
      std::vector<double> rt, deg, lam, eta;
      Index passed = 0;
      for (const auto& r : runs) {
        if (r.case_name != c.name || r.param_index != p) continue;
        ++row.runs;
        row.seeds.push_back(r.seed);
        if (!r.ok) {
          ++row.failures;
          continue;
        }
        if (r.verified) ++passed;
        rt.push_back(r.runtime);
        deg.push_back(r.average_degree);
        lam.push_back(r.lambda_d2);
        if (std::isfinite(r.efficiency)) eta.push_back(r.efficiency);
      }
      row.pass_rate = row.runs ? static_cast<double>(passed) / static_cast<double>(row.runs) : 0.0;
      row.runtime_mean = mean_of(rt);
      row.runtime_median = median_of(rt);
      row.degree_mean = mean_of(deg);
      row.lambda_d2_mean = mean_of(lam);
      row.efficiency_mean = mean_of(eta);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kMetricsHeader.size(); ++i) os << (i ? "," : "") << kMetricsHeader[i];
  os << "\n";
  for (const auto& r : rows) {
    os << r.case_name << "," << fmt(r.alpha) << "," << fmt(r.beta) << "," << fmt(r.gamma) << "," << r.runs << ","
       << r.failures << "," << fmt(r.pass_rate) << "," << fmt(r.runtime_mean) << "," << fmt(r.runtime_median) << ","
       << fmt(r.degree_mean) << "," << fmt(r.lambda_d2_mean) << "," << fmt(r.efficiency_mean) << ","
       << join_seeds(r.seeds) << "\n";
  }
  return os.str();
}

std::vector<MetricsRow> metrics_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCode::InvalidInput, "empty metrics CSV");
  check_header(rows[0], kMetricsHeader, "metrics");
  std::vector<MetricsRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != kMetricsHeader.size()) throw Error(ErrorCode::InvalidInput, "ragged metrics CSV row");
    MetricsRow r;
    r.case_name = f[0];
    r.alpha = parse_num(f[1]);
    r.beta = parse_num(f[2]);
    r.gamma = parse_num(f[3]);
    r.runs = static_cast<Index>(parse_u64(f[4]));
    r.failures = static_cast<Index>(parse_u64(f[5]));
    r.pass_rate = parse_num(f[6]);
    r.runtime_mean = parse_num(f[7]);
    r.runtime_median = parse_num(f[8]);
    r.degree_mean = parse_num(f[9]);
    r.lambda_d2_mean = parse_num(f[10]);
    r.efficiency_mean = parse_num(f[11]);
    r.seeds = split_seeds(f[12]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string runs_to_csv(const std::vector<RunRecord>& runs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kRunsHeader.size(); ++i) os << (i ? "," : "") << kRunsHeader[i];
  os << "\n";
  for (const auto& r : runs) {
    os << r.case_name << "," << r.param_index << "," << fmt(r.alpha) << "," << r.seed << "," << (r.ok ? 1 : 0) << ","
       << fmt(r.runtime) << "," << r.nodes << "," << r.edges << "," << fmt(r.average_degree) << "," << fmt(r.lambda_d2)
       << "," << fmt(r.lambda_max) << "," << fmt(r.efficiency) << "," << (r.verified ? 1 : 0) << "," << quote(r.status)
       << "," << r.classes << "," << quote(r.error) << "\n";
  }
  return os.str();
}

std::vector<RunRecord> runs_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCode::InvalidInput, "empty runs CSV");
  check_header(rows[0], kRunsHeader, "runs");
  std::vector<RunRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != kRunsHeader.size()) throw Error(ErrorCode::InvalidInput, "ragged runs CSV row");
    RunRecord r;
    r.case_name = f[0];
    r.param_index = parse_u64(f[1]);
    r.alpha = parse_num(f[2]);
    r.seed = parse_u64(f[3]);
    r.ok = f[4] == "1";
    r.runtime = parse_num(f[5]);
    r.nodes = static_cast<Index>(parse_u64(f[6]));
    r.edges = static_cast<Index>(parse_u64(f[7]));
    r.average_degree = parse_num(f[8]);
    r.lambda_d2 = parse_num(f[9]);
    r.lambda_max = parse_num(f[10]);
    r.efficiency = parse_num(f[11]);
    r.verified = f[12] == "1";
    r.status = f[13];
    r.classes = static_cast<Index>(parse_u64(f[14]));
    r.error = f[15];
    out.push_back(std::move(r));
  }
  return out;
}

Json to_json(const BenchmarkReport& report) {
  auto n = [](double x) -> Json { return std::isfinite(x) ? Json(x) : Json(fmt(x)); };
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"case", r.case_name},         {"alpha", r.alpha},
                    {"beta", r.beta},              {"gamma", r.gamma},
                    {"runs", r.runs},              {"failures", r.failures},
                    {"pass_rate", r.pass_rate},    {"runtime_mean", n(r.runtime_mean)},
                    {"runtime_median", n(r.runtime_median)}, {"degree_mean", n(r.degree_mean)},
                    {"lambda_d2_mean", n(r.lambda_d2_mean)}, {"efficiency_mean", n(r.efficiency_mean)},
                    {"seeds", r.seeds}});
  }
  Json runs = Json::array();
  for (const auto& r : report.runs) {
    runs.push_back({{"case", r.case_name},       {"param_index", r.param_index},
                    {"alpha", r.alpha},          {"seed", r.seed},
                    {"ok", r.ok},                {"error", r.error},
                    {"runtime", r.runtime},      {"nodes", r.nodes},
                    {"edges", r.edges},          {"average_degree", n(r.average_degree)},
                    {"lambda_d2", n(r.lambda_d2)}, {"lambda_max", n(r.lambda_max)},
                    {"efficiency", n(r.efficiency)}, {"verified", r.verified},
                    {"status", r.status},        {"classes", r.classes}});
  }
  return Json{{"rows", rows}, {"runs", runs}};
}

BenchmarkReport benchmark_report_from_json(const Json& j) {
  auto n = [](const Json& x) { return x.is_string() ? parse_num(x.get<std::string>()) : x.get<double>(); };
  BenchmarkReport rep;
  for (const auto& x : j.at("rows")) {
    MetricsRow r;
    r.case_name = x.at("case");
    r.alpha = x.at("alpha");
    r.beta = x.at("beta");
    r.gamma = x.at("gamma");
    r.runs = x.at("runs");
    r.failures = x.at("failures");
    r.pass_rate = x.at("pass_rate");
    r.runtime_mean = n(x.at("runtime_mean"));
    r.runtime_median = n(x.at("runtime_median"));
    r.degree_mean = n(x.at("degree_mean"));
    r.lambda_d2_mean = n(x.at("lambda_d2_mean"));
    r.efficiency_mean = n(x.at("efficiency_mean"));
    r.seeds = x.at("seeds").get<std::vector<std::uint64_t>>();
    rep.rows.push_back(std::move(r));
  }
  for (const auto& x : j.at("runs")) {
    RunRecord r;
    r.case_name = x.at("case");
    r.param_index = x.at("param_index");
    r.alpha = x.at("alpha");
    r.seed = x.at("seed");
    r.ok = x.at("ok");
    r.error = x.at("error");
    r.runtime = x.at("runtime");
    r.nodes = x.at("nodes");
    r.edges = x.at("edges");
    r.average_degree = n(x.at("average_degree"));
    r.lambda_d2 = n(x.at("lambda_d2"));
    r.lambda_max = n(x.at("lambda_max"));
    r.efficiency = n(x.at("efficiency"));
    r.verified = x.at("verified");
    r.status = x.at("status");
    r.classes = x.at("classes");
    rep.runs.push_back(std::move(r));
  }
  return rep;
}

void write_benchmark(const BenchmarkReport& report, const fs::path& dir) {
  write_text(dir / "summary.csv", metrics_to_csv(report.rows));
  write_json(dir / "summary.json", to_json(report));
  write_text(dir / "runs.csv", runs_to_csv(report.runs));
  std::map<std::string, std::vector<RunRecord>> by_case;
  for (const auto& r : report.runs) by_case[r.case_name].push_back(r);
  for (const auto& [name, runs] : by_case) write_text(dir / "cases" / (name + ".csv"), runs_to_csv(runs));
}

}  // namespace stresslab
