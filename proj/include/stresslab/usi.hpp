#pragma once

// Symmetry reduction of the design program. Complete-graph edges with equal
// squared length share one decision variable.

#include <span>
#include <vector>

#include "stresslab/stress_design.hpp"

namespace stresslab {

/// N x N squared distances.
MatrixXd edm(const Configuration& config);

struct StressClassification {
  Index nodes = 0;
  Index classes = 0;
  std::vector<Index> class_of;        // per canonical edge, classes ordered by length
  std::vector<Index> representative;  // first edge of each class
  VectorXd squared_length;            // mean squared length per class
  VectorXd multiplicity;              // edges per class, sums to M̄
  SparseMatrix selection;             // M̄ x S, one 1 per row

  Index edges() const { return static_cast<Index>(class_of.size()); }
  /// Full edge vector from per-class values.
  VectorXd expand(const VectorXd& reduced) const;
  /// Per-class averages of a full edge vector.
  VectorXd restrict_mean(const VectorXd& full) const;
  /// Throws InvalidInput unless the invariants hold.
  void validate() const;
};

/// Edges are sorted by squared length and split wherever the relative gap
/// between consecutive values reaches tol_edm.
StressClassification classify_edges(const MatrixXd& edm, double tol_edm = 1e-9);

/// Exact edge orbits of a regular polygon under cyclic shifts (floor(N/2)).
StressClassification cyclic_orbit_classes(Index n);

/// True when every class of `fine` lies inside a single class of `coarse`.
bool refines(const StressClassification& fine, const StressClassification& coarse);

struct P3Problem {
  ConicProblem conic;  // x = [w_r (S) ; s (S)]
  Index classes = 0;
};

P3Problem reduce_p3(const StressClassification& classification, const DesignIngredients& ing,
                    const DesignParams& params);

/// Reduced solve, expansion and the standard post-processing. Falls back to
/// the full program when no two edges share a length.
DesignResult design_stress_usi(const Configuration& config, const DesignParams& params, double tol_edm = 1e-9,
                               const ConicSolver& solver = *default_solver());

/// ||Omega - P Omega Pᵀ||_F / ||Omega||_F, with perm[i] the image of node i.
double check_permutation_invariance(const StressMatrix& omega, std::span<const Index> perm);

}  // namespace stresslab
