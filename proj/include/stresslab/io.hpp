#pragma once

// File formats. JSON for structured records, CSV for tables and series, SVG
// for quick looks. Every writer has a reader that restores the written value
// exactly (doubles are printed with 17 significant digits).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresslab/config_gen.hpp"
#include "stresslab/multicluster.hpp"
#include "stresslab/simulation.hpp"
#include "stresslab/stress_design.hpp"

namespace stresslab {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);

Json error_to_json(const Error& e);

// Configuration: { "dim", "coords": [[x, y(, z)], ...], "labels" }.
Json to_json(const Configuration& config);
Configuration configuration_from_json(const Json& j);

Json to_json(const AffineMap& map);
AffineMap affine_map_from_json(const Json& j);

Json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const Json& j);

Json to_json(const DesignParams& params);
/// Missing fields keep their defaults.
DesignParams design_params_from_json(const Json& j);

Json to_json(const SpectralReport& s);
SpectralReport spectral_report_from_json(const Json& j);
Json to_json(const VerificationReport& v);
VerificationReport verification_from_json(const Json& j);

/// Weights, edge list, spectrum, verification, timings; S, classes and
/// reduction_ratio when the symmetry-reduced program was used.
Json to_json(const DesignResult& result);
DesignResult design_result_from_json(const Json& j);

SolveStatus parse_solve_status(std::string_view name);

// Stress CSV: header edge_i,edge_j,weight; nonzero edges only.
std::string stress_to_csv(const StressVector& omega);
/// `nodes` < 0 infers N from the largest index.
StressVector stress_from_csv(const std::string& text, Index nodes = -1);

// Dense matrix CSV, no header.
std::string matrix_to_csv(const MatrixXd& m);
MatrixXd matrix_from_csv(const std::string& text);

// Partition: { "clusters": [[i, ...], ...], "leaders": [i, ...] }.
struct PartitionFile {
  ClusterPartition partition;
  std::vector<Index> leaders;
};

Json to_json(const ClusterPartition& partition, const std::vector<Index>& leaders = {});
/// `nodes` < 0 infers N from the largest index.
PartitionFile partition_from_json(const Json& j, Index nodes = -1);

/// Partition analysis: overlap, pair verdicts, leader verdicts and, when the
/// clusters were designed, the ensemble eigenvalue and bound decomposition.
struct AnalysisReport {
  PartitionReport partition;
  CollectiveReport collective;
  std::optional<LeaderReport> leaders;
  std::optional<BoundReport> bound;
  std::optional<double> ensemble_lambda_d2;
  std::vector<Index> cluster_edges;  // per designed cluster
};

Json to_json(const AnalysisReport& report);
AnalysisReport analysis_report_from_json(const Json& j);

// Keyframes: [{ "time", "ramp", "positions": [[...], ...] }].
Json to_json(const std::vector<Keyframe>& keyframes);
std::vector<Keyframe> keyframes_from_json(const Json& j);

// Trajectory CSV: t, z1_x, z1_y(, z1_z), ..., error. Position columns are
// present only when positions were stored.
std::string trajectory_to_csv(const Trajectory& traj);
/// Restores times, error and (if present) positions; `dim` is needed to
/// split the position columns.
Trajectory trajectory_from_csv(const std::string& text, int dim);

/// One panel per snapshot. 3D positions are projected onto x-y. Edges are
/// drawn as polylines between nodes, nodes as circle markers.
struct SvgPanel {
  std::string title;
  MatrixXd positions;  // D x N
};
std::string render_svg(const std::vector<SvgPanel>& panels, const std::vector<std::pair<Index, Index>>& edges,
                       const std::vector<Index>& highlight = {});
/// Panels at the stored samples closest to `times`.
std::vector<SvgPanel> trajectory_panels(const Trajectory& traj, const std::vector<double>& times);

}  // namespace stresslab
