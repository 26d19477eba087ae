#pragma once

// Benchmark harness: seeded design runs per (case, parameter set) with
// runtime, degree, convergence eigenvalue, efficiency and pass rate.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stresslab/io.hpp"

namespace stresslab {

/// Either explicit clusters or a split along a coordinate axis.
struct PartitionSpec {
  Index axis_bridges = 0;
  int axis = 0;
  std::vector<std::vector<Index>> clusters;
  bool segments = false;  // use the generator's own segments (repeated-segment only)
};

struct BenchmarkCase {
  std::string name;
  GeneratorSpec generator;
  std::vector<DesignParams> params;  // one metrics row each
  std::optional<PartitionSpec> partition;
  int repeat = 1;
  std::vector<std::uint64_t> seeds;  // empty: generator seed, +1, ... (repeat of them)
  bool usi = false;
  double tol_edm = 1e-9;

  std::vector<std::uint64_t> run_seeds() const;
};

struct BenchmarkSuite {
  std::string name;
  std::vector<BenchmarkCase> cases;
  fs::path output;
  unsigned threads = 0;  // 0: worker_count()

  /// Unique case names, repeat >= 1, at least one parameter set per case.
  void validate() const;
};

struct RunRecord {
  std::string case_name;
  std::size_t param_index = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;  // finished without an exception
  std::string error;
  double runtime = 0.0;
  Index nodes = 0;
  Index edges = 0;
  double average_degree = 0.0;
  double lambda_d2 = 0.0;
  double lambda_max = 0.0;
  double efficiency = 0.0;
  bool verified = false;
  std::string status;
  Index classes = 0;  // symmetry-reduced runs
};

struct MetricsRow {
  std::string case_name;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  Index runs = 0;
  Index failures = 0;  // runs that threw
  double pass_rate = 0.0;
  double runtime_mean = 0.0, runtime_median = 0.0;
  double degree_mean = 0.0;
  double lambda_d2_mean = 0.0;
  double efficiency_mean = 0.0;
  std::vector<std::uint64_t> seeds;
};

struct BenchmarkReport {
  std::vector<MetricsRow> rows;
  std::vector<RunRecord> runs;
};

BenchmarkSuite suite_from_json(const Json& j);
Json to_json(const BenchmarkSuite& suite);

/// Single run; failures are captured in the record.
RunRecord run_case(const BenchmarkCase& c, std::size_t param_index, std::uint64_t seed);

/// Runs every (case, params, seed) on the work pool. `progress` is called
/// after each finished run (serialized).
BenchmarkReport run_benchmark(const BenchmarkSuite& suite,
                              const std::function<void(const RunRecord&)>& progress = {});

std::vector<MetricsRow> aggregate(const BenchmarkSuite& suite, const std::vector<RunRecord>& runs);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> metrics_from_csv(const std::string& text);
std::string runs_to_csv(const std::vector<RunRecord>& runs);
std::vector<RunRecord> runs_from_csv(const std::string& text);

Json to_json(const BenchmarkReport& report);
BenchmarkReport benchmark_report_from_json(const Json& j);

/// summary.csv, summary.json and runs.csv in `dir`, plus one
/// cases/<name>.csv per case.
void write_benchmark(const BenchmarkReport& report, const fs::path& dir);

}  // namespace stresslab
