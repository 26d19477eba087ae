#pragma once

// Single-integrator formation dynamics: the LTI flow of one stress, the
// randomized multicluster switching law and leader-driven maneuvers.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stresslab/config_gen.hpp"
#include "stresslab/multicluster.hpp"

namespace stresslab {

enum class Integrator { Euler, Rk4 };
std::string_view to_string(Integrator integrator);
Integrator parse_integrator(std::string_view name);

struct SimConfig {
  double h = 0.1;
  double horizon = 10.0;
  Integrator integrator = Integrator::Euler;
  std::uint64_t seed = 0;
  int switching_period = 1;  // steps between cluster re-draws
  int record_stride = 1;     // keep every k-th sample (the last step is always kept)
  bool store_positions = true;
  bool store_choices = false;
  double stop_ratio = 0.0;  // stop once error <= stop_ratio * e(0); 0 disables

  /// Step size 0.1 / beta.
  static SimConfig for_beta(double beta, double horizon);
  void validate() const;
};

/// Least-squares affine map z_i ≈ Theta p_i + t.
struct AffineFit {
  double error = 0.0;  // sqrt(residual / N)
  MatrixXd Theta;
  VectorXd t;
};

AffineFit affine_fit_error(const MatrixXd& z, const Configuration& target);

struct ClusterFits {
  std::vector<AffineFit> fits;
  double max_difference = 0.0;  // ||[dTheta dt]||_F over bridged pairs
};

ClusterFits affine_fit_clusters(const MatrixXd& z, const Configuration& target, const ClusterPartition& partition);

/// Leader targets: positions for every node at each keyframe. Leaders move
/// linearly from the previous keyframe over `ramp` seconds, then hold.
struct Keyframe {
  double time = 0.0;
  double ramp = 0.0;
  MatrixXd positions;  // D x N
};

struct LeaderPlan {
  std::vector<Index> leaders;
  std::vector<Keyframe> keyframes;  // increasing times

  void validate(Index dim, Index n) const;
  /// Interpolated target positions (all nodes) at time t.
  MatrixXd target_at(double t) const;
  /// Index k of the keyframe currently being approached (0 before the first).
  std::size_t phase_at(double t) const;
};

/// Node positions from one affine map per cluster. Maps must agree on shared
/// nodes.
MatrixXd keyframe_positions(const Configuration& config, const ClusterPartition& partition,
                            const std::vector<AffineMap>& maps, double tol = 1e-9);

struct PhaseSummary {
  double start = 0.0, end = 0.0;
  double initial_error = 0.0;   // against this phase's keyframe
  double terminal_error = 0.0;
  double ratio() const { return initial_error > 0.0 ? terminal_error / initial_error : 0.0; }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MatrixXd> positions;          // when stored
  std::vector<double> error;                // affine-fit or target error
  std::vector<std::vector<Index>> choices;  // per sample, cluster per agent
  MatrixXd final_positions;
  std::vector<PhaseSummary> phases;  // leader runs
  Index energy_increases = 0;        // steps where the error grew
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

/// zdot = -Z Omega, Z being D x N.
Trajectory simulate_single(const StressMatrix& omega, const Configuration& target, const MatrixXd& z0,
                           const SimConfig& sim);

/// Every switching instant each agent draws one of its clusters uniformly and
/// applies that cluster's stress row scaled by its membership count.
Trajectory simulate_multicluster(const std::vector<StressMatrix>& cluster_stresses, const ClusterPartition& partition,
                                 const Configuration& target, const MatrixXd& z0, const SimConfig& sim);

/// Leaders are placed on their plan every step; followers use the switching
/// law (plain LTI for a single cluster). The error is measured against the
/// keyframe being approached.
Trajectory simulate_leader_maneuver(const std::vector<StressMatrix>& cluster_stresses,
                                    const ClusterPartition& partition, const Configuration& target,
                                    const LeaderPlan& plan, const MatrixXd& z0, const SimConfig& sim);

/// Exponential rate from a log-linear fit of error samples between hi*e(0)
/// and lo*e(0). Throws UndefinedMetric with fewer than 3 samples.
double fit_decay_rate(const Trajectory& traj, double hi = 0.1, double lo = 0.01);

/// D x N matrix of independent standard normal entries scaled by `scale`.
MatrixXd random_positions(Index dim, Index n, std::uint64_t seed, double scale = 1.0);

}  // namespace stresslab
