#include "stresslab/simulation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace stresslab {

std::string_view to_string(Integrator integrator) { return integrator == Integrator::Euler ? "euler" : "rk4"; }

Integrator parse_integrator(std::string_view name) {
  if (name == "euler") return Integrator::Euler;
  if (name == "rk4") return Integrator::Rk4;
  throw Error(ErrorCode::InvalidInput, "unknown integrator '" + std::string(name) + "' (euler, rk4)");
}

SimConfig SimConfig::for_beta(double beta, double horizon) {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidInput, "beta must be positive");
  SimConfig s;
  s.h = 0.1 / beta;
  s.horizon = horizon;
  return s;
}

void SimConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidInput, "step size must be positive");
  if (!(horizon >= h)) throw Error(ErrorCode::InvalidInput, "horizon must be at least one step");
  if (switching_period < 1) throw Error(ErrorCode::InvalidInput, "switching period must be >= 1");
  if (record_stride < 1) throw Error(ErrorCode::InvalidInput, "record stride must be >= 1");
  if (!(stop_ratio >= 0.0)) throw Error(ErrorCode::InvalidInput, "stop ratio must be nonnegative");
}

MatrixXd random_positions(Index dim, Index n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  MatrixXd z(dim, n);
  for (Index k = 0; k < z.size(); k += 2) {
    // Box-Muller keeps the stream identical across standard libraries.
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * std::numbers::pi * uniform();
    z.data()[k] = scale * r * std::cos(a);
    if (k + 1 < z.size()) z.data()[k + 1] = scale * r * std::sin(a);
  }
  return z;
}

namespace {

// Affine fits against a fixed target: [Theta t] = Z P̄ᵀ (P̄ P̄ᵀ)⁻¹.
class Fitter {
 public:
  explicit Fitter(const MatrixXd& aug) : aug_(aug) {
    if (numeric_rank(aug) != aug.rows()) throw Error(ErrorCode::DegenerateConfiguration, "target configuration is affinely degenerate");
    right_ = (aug * aug.transpose()).ldlt().solve(aug);  // (D+1) x N
  }
  MatrixXd map(const MatrixXd& z) const { return z * right_.transpose(); }
  double error(const MatrixXd& z) const {
    return std::sqrt((z - map(z) * aug_).squaredNorm() / static_cast<double>(aug_.cols()));
  }

 private:
  MatrixXd aug_;
  MatrixXd right_;
};

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Control rows per cluster in global indices, scaled by membership counts.
struct SwitchingSystem {
  std::vector<RowSparse> rows;
  std::vector<std::vector<Index>> options;  // clusters per agent
  double lambda_bound = 0.0;

  SwitchingSystem(const std::vector<StressMatrix>& stresses, const ClusterPartition& partition) {
    const Index n = partition.nodes();
    if (static_cast<Index>(stresses.size()) != partition.size())
      throw Error(ErrorCode::DimensionMismatch, "one stress per cluster is required");
    int max_c = 1;
    for (Index i = 0; i < n; ++i) {
      options.push_back(partition.clusters_of(i));
      if (options.back().empty()) throw Error(ErrorCode::InvalidInput, "node " + std::to_string(i) + " belongs to no cluster");
      max_c = std::max(max_c, partition.membership(i));
    }
    for (Index c = 0; c < partition.size(); ++c) {
      const auto& nodes = partition.cluster(c);
      const MatrixXd& om = stresses[static_cast<std::size_t>(c)].matrix();
      if (om.rows() != static_cast<Index>(nodes.size())) throw Error(ErrorCode::DimensionMismatch, "cluster stress size differs from cluster");
      std::vector<Eigen::Triplet<double>> trip;
      for (std::size_t a = 0; a < nodes.size(); ++a) {
        const double gain = partition.membership(nodes[a]);
        for (std::size_t b = 0; b < nodes.size(); ++b) {
          const double v = om(static_cast<Index>(a), static_cast<Index>(b));
          if (v != 0.0) trip.emplace_back(nodes[a], nodes[b], gain * v);
        }
      }
      RowSparse r(n, n);
      r.setFromTriplets(trip.begin(), trip.end());
      rows.push_back(std::move(r));
      if (om.size() > 0) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(om, Eigen::EigenvaluesOnly);
        lambda_bound = std::max(lambda_bound, es.eigenvalues().cwiseAbs().maxCoeff() * max_c);
      }
    }
  }

  // out = -(selected rows) applied to z, column i using cluster choice[i].
  void apply(const MatrixXd& z, const std::vector<Index>& choice, MatrixXd& out) const {
    out.setZero(z.rows(), z.cols());
    for (Index i = 0; i < z.cols(); ++i) {
      const RowSparse& r = rows[static_cast<std::size_t>(choice[static_cast<std::size_t>(i)])];
      for (RowSparse::InnerIterator it(r, i); it; ++it) out.col(i).noalias() -= it.value() * z.col(it.col());
    }
  }
};

struct RunInputs {
  const Configuration* target = nullptr;
  const LeaderPlan* plan = nullptr;  // null for leaderless runs
};

Trajectory run(const SwitchingSystem& sys, const RunInputs& in, const MatrixXd& z0, const SimConfig& sim) {
  sim.validate();
  const Configuration& target = *in.target;
  const Index n = target.size();
  const Index dim = target.dim();
  if (z0.rows() != dim || z0.cols() != n) throw Error(ErrorCode::DimensionMismatch, "initial state must be D x N");
  if (!z0.allFinite()) throw Error(ErrorCode::InvalidInput, "initial state is not finite");
  const double limit = sim.integrator == Integrator::Euler ? 2.0 : 2.78;
  if (sim.h * sys.lambda_bound >= limit) {
    std::ostringstream os;
    os << "step size " << sim.h << " is unstable for spectral radius " << sys.lambda_bound << "; use h <= "
       << 0.5 * limit / sys.lambda_bound;
    throw Error(ErrorCode::InvalidInput, os.str());
  }

  const Fitter fitter(target.augmented());
  const LeaderPlan* plan = in.plan;
  std::vector<char> is_leader(static_cast<std::size_t>(n), 0);
  if (plan) {
    plan->validate(dim, n);
    for (Index l : plan->leaders) is_leader[static_cast<std::size_t>(l)] = 1;
  }

  Trajectory tr;
  MatrixXd z = z0;
  auto place_leaders = [&](double t) {
    if (!plan || plan->leaders.empty()) return;
    const MatrixXd goal = plan->target_at(t);
    for (Index l : plan->leaders) z.col(l) = goal.col(l);
  };
  auto measure = [&](double t) {
    if (!plan) return fitter.error(z);
    const MatrixXd& goal = plan->keyframes[plan->phase_at(t)].positions;
    return std::sqrt((z - goal).squaredNorm() / static_cast<double>(n));
  };

  std::mt19937_64 rng(sim.seed);
  std::vector<Index> choice(static_cast<std::size_t>(n), 0);
  auto redraw = [&] {
    for (Index i = 0; i < n; ++i) {
      const auto& opt = sys.options[static_cast<std::size_t>(i)];
      if (opt.size() == 1) {
        choice[static_cast<std::size_t>(i)] = opt[0];
      } else {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        choice[static_cast<std::size_t>(i)] = opt[std::min(opt.size() - 1, static_cast<std::size_t>(u * static_cast<double>(opt.size())))];
      }
    }
  };

  // Keyframe snapshots for phase summaries.
  std::vector<std::optional<MatrixXd>> snaps(plan ? plan->keyframes.size() : 0);
  auto snapshot = [&](double t, bool last) {
    for (std::size_t k = 0; k < snaps.size(); ++k)
      if (!snaps[k] && (t >= plan->keyframes[k].time - 0.5 * sim.h || last)) snaps[k] = z;
  };

  const auto steps = static_cast<long long>(std::floor(sim.horizon / sim.h + 1e-9));
  place_leaders(0.0);
  double e = measure(0.0);
  const double e0 = e;
  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.error.push_back(e);
    if (sim.store_positions) tr.positions.push_back(z);
    if (sim.store_choices) tr.choices.push_back(choice);
  };
  redraw();
  record(0.0);
  snapshot(0.0, false);

  MatrixXd k1, k2, k3, k4, tmp;
  for (long long s = 1; s <= steps; ++s) {
    if ((s - 1) % sim.switching_period == 0 && s > 1) redraw();
    const double t = static_cast<double>(s) * sim.h;
    if (sim.integrator == Integrator::Euler) {
      sys.apply(z, choice, k1);
      if (plan)
        for (Index l : plan->leaders) k1.col(l).setZero();
      z.noalias() += sim.h * k1;
    } else {
      auto f = [&](const MatrixXd& x, MatrixXd& out) {
        sys.apply(x, choice, out);
        if (plan)
          for (Index l : plan->leaders) out.col(l).setZero();
      };
      f(z, k1);
      tmp = z + 0.5 * sim.h * k1;
      f(tmp, k2);
      tmp = z + 0.5 * sim.h * k2;
      f(tmp, k3);
      tmp = z + sim.h * k3;
      f(tmp, k4);
      z.noalias() += (sim.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    place_leaders(t);
    if (!z.allFinite()) throw Error(ErrorCode::SolverFailure, "simulation diverged at t=" + std::to_string(t));
    const double e_new = measure(t);
    if (!plan && e_new > e * (1.0 + 1e-12) + 1e-15) ++tr.energy_increases;
    e = e_new;
    const bool stop = sim.stop_ratio > 0.0 && e <= sim.stop_ratio * e0;
    const bool last = s == steps || stop;
    snapshot(t, last);
    if (s % sim.record_stride == 0 || last) record(t);
    if (stop) {
      tr.stopped_early = s < steps;
      break;
    }
  }
  tr.final_positions = z;

  if (plan) {
    for (std::size_t k = 1; k < plan->keyframes.size(); ++k) {
      PhaseSummary ph;
      ph.start = plan->keyframes[k - 1].time;
      ph.end = plan->keyframes[k].time;
      const MatrixXd& goal = plan->keyframes[k].positions;
      const MatrixXd& a = snaps[k - 1] ? *snaps[k - 1] : z;
      const MatrixXd& b = snaps[k] ? *snaps[k] : z;
      ph.initial_error = std::sqrt((a - goal).squaredNorm() / static_cast<double>(n));
      ph.terminal_error = std::sqrt((b - goal).squaredNorm() / static_cast<double>(n));
      tr.phases.push_back(ph);
    }
  }
  return tr;
}

}  // namespace

AffineFit affine_fit_error(const MatrixXd& z, const Configuration& target) {
  if (z.rows() != target.dim() || z.cols() != target.size()) throw Error(ErrorCode::DimensionMismatch, "positions must be D x N");
  const Fitter f(target.augmented());
  const MatrixXd m = f.map(z);
  AffineFit out;
  out.Theta = m.leftCols(target.dim());
  out.t = m.col(target.dim());
  out.error = f.error(z);
  return out;
}

ClusterFits affine_fit_clusters(const MatrixXd& z, const Configuration& target, const ClusterPartition& partition) {
  ClusterFits out;
  std::vector<MatrixXd> maps;
  for (Index c = 0; c < partition.size(); ++c) {
    const auto& nodes = partition.cluster(c);
    MatrixXd zc(z.rows(), static_cast<Index>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k) zc.col(static_cast<Index>(k)) = z.col(nodes[k]);
    out.fits.push_back(affine_fit_error(zc, target.subset(nodes)));
    MatrixXd m(z.rows(), z.rows() + 1);
    m << out.fits.back().Theta, out.fits.back().t;
    maps.push_back(std::move(m));
  }
  for (Index a = 0; a < partition.size(); ++a)
    for (Index b = a + 1; b < partition.size(); ++b)
      if (!partition.bridge(a, b).empty())
        out.max_difference = std::max(out.max_difference, (maps[static_cast<std::size_t>(a)] - maps[static_cast<std::size_t>(b)]).norm());
  return out;
}

void LeaderPlan::validate(Index dim, Index n) const {
  for (Index l : leaders)
    if (l < 0 || l >= n) throw Error(ErrorCode::InvalidInput, "leader index out of range");
  if (keyframes.empty() && !leaders.empty()) throw Error(ErrorCode::InvalidInput, "leaders need at least one keyframe");
  for (std::size_t k = 0; k < keyframes.size(); ++k) {
    const Keyframe& f = keyframes[k];
    if (f.positions.rows() != dim || f.positions.cols() != n) throw Error(ErrorCode::DimensionMismatch, "keyframe positions must be D x N");
    if (!(f.ramp >= 0.0)) throw Error(ErrorCode::InvalidInput, "keyframe ramp must be nonnegative");
    if (k > 0 && !(f.time > keyframes[k - 1].time)) throw Error(ErrorCode::InvalidInput, "keyframe times must increase");
    if (k > 0 && f.ramp > f.time - keyframes[k - 1].time) throw Error(ErrorCode::InvalidInput, "keyframe ramp longer than its phase");
  }
}

std::size_t LeaderPlan::phase_at(double t) const {
  std::size_t k = 0;
  while (k + 1 < keyframes.size() && t > keyframes[k].time) ++k;
  return k;
}

MatrixXd LeaderPlan::target_at(double t) const {
  const std::size_t k = phase_at(t);
  if (k == 0 || t >= keyframes[k].time) return keyframes[k].positions;
  const Keyframe& prev = keyframes[k - 1];
  const Keyframe& next = keyframes[k];
  const double s = next.ramp > 0.0 ? std::clamp((t - prev.time) / next.ramp, 0.0, 1.0) : 1.0;
  return (1.0 - s) * prev.positions + s * next.positions;
}

MatrixXd keyframe_positions(const Configuration& config, const ClusterPartition& partition,
                            const std::vector<AffineMap>& maps, double tol) {
  if (static_cast<Index>(maps.size()) != partition.size()) throw Error(ErrorCode::DimensionMismatch, "one map per cluster is required");
  MatrixXd out(config.dim(), config.size());
  std::vector<char> set(static_cast<std::size_t>(config.size()), 0);
  for (Index c = 0; c < partition.size(); ++c) {
    const AffineMap& m = maps[static_cast<std::size_t>(c)];
    if (m.A.rows() != config.dim() || m.A.cols() != config.dim() || m.b.size() != config.dim())
      throw Error(ErrorCode::DimensionMismatch, "affine map dimension differs from configuration");
    for (Index i : partition.cluster(c)) {
      const VectorXd p = m.apply(config.point(i));
      if (set[static_cast<std::size_t>(i)]) {
        if ((out.col(i) - p).norm() > tol * std::max(1.0, p.norm()))
          throw Error(ErrorCode::InvalidInput, "cluster maps disagree on shared node " + std::to_string(i));
      } else {
        out.col(i) = p;
        set[static_cast<std::size_t>(i)] = 1;
      }
    }
  }
  for (Index i = 0; i < config.size(); ++i)
    if (!set[static_cast<std::size_t>(i)]) throw Error(ErrorCode::InvalidInput, "node " + std::to_string(i) + " belongs to no cluster");
  return out;
}

Trajectory simulate_single(const StressMatrix& omega, const Configuration& target, const MatrixXd& z0,
                           const SimConfig& sim) {
  if (omega.size() != target.size()) throw Error(ErrorCode::DimensionMismatch, "stress size differs from configuration");
  std::vector<Index> all(static_cast<std::size_t>(target.size()));
  for (Index i = 0; i < target.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  const ClusterPartition one(target.size(), {all});
  return run(SwitchingSystem({omega}, one), RunInputs{&target, nullptr}, z0, sim);
}

Trajectory simulate_multicluster(const std::vector<StressMatrix>& cluster_stresses, const ClusterPartition& partition,
                                 const Configuration& target, const MatrixXd& z0, const SimConfig& sim) {
  if (partition.nodes() != target.size()) throw Error(ErrorCode::DimensionMismatch, "partition node count differs from configuration");
  return run(SwitchingSystem(cluster_stresses, partition), RunInputs{&target, nullptr}, z0, sim);
}

Trajectory simulate_leader_maneuver(const std::vector<StressMatrix>& cluster_stresses,
                                    const ClusterPartition& partition, const Configuration& target,
                                    const LeaderPlan& plan, const MatrixXd& z0, const SimConfig& sim) {
  if (partition.nodes() != target.size()) throw Error(ErrorCode::DimensionMismatch, "partition node count differs from configuration");
  if (plan.keyframes.empty()) throw Error(ErrorCode::InvalidInput, "leader plan needs keyframes");
  const LeaderReport lr = leader_condition_check(target, partition, plan.leaders);
  std::vector<std::string> warnings;
  for (const LeaderVerdict& v : lr.clusters)
    if (!v.ok)
      warnings.push_back("cluster " + std::to_string(v.cluster) + " is not pinned: leader and bridge rank " +
                         std::to_string(v.rank) + " < " + std::to_string(target.dim() + 1));
  Trajectory tr = run(SwitchingSystem(cluster_stresses, partition), RunInputs{&target, &plan}, z0, sim);
  tr.warnings.insert(tr.warnings.begin(), warnings.begin(), warnings.end());
  return tr;
}

double fit_decay_rate(const Trajectory& traj, double hi, double lo) {
  if (traj.error.empty() || !(hi > lo) || !(lo > 0.0)) throw Error(ErrorCode::InvalidInput, "decay window must satisfy hi > lo > 0");
  const double e0 = traj.error.front();
  double st = 0, sy = 0, stt = 0, sty = 0;
  int m = 0;
  for (std::size_t k = 0; k < traj.error.size(); ++k) {
    const double e = traj.error[k];
    if (e <= hi * e0 && e >= lo * e0 && e > 0.0) {
      const double t = traj.times[k], y = std::log(e);
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
      ++m;
    }
  }
  if (m < 3) throw Error(ErrorCode::UndefinedMetric, "too few samples inside the decay window");
  const double denom = m * stt - st * st;
  if (denom <= 0.0) throw Error(ErrorCode::UndefinedMetric, "decay window has no time spread");
  return -(m * sty - st * sy) / denom;
}

}  // namespace stresslab
