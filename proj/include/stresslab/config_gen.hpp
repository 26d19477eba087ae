#pragma once

// Deterministic generators for the benchmark configurations.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stresslab/formation.hpp"

namespace stresslab {

enum class GeneratorKind { Random, Polygon, Octahedron, Cuboctahedron, TruncatedIcosahedron, RepeatedSegment };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

/// x' = A x + b.
struct AffineMap {
  MatrixXd A;
  VectorXd b;

  static AffineMap identity(int dim);
  VectorXd apply(const VectorXd& x) const { return A * x + b; }
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Random;
  Index n = 0;
  int dim = 2;
  std::optional<std::uint64_t> seed;  // mandatory for Random
  double radius = 1.0;                // Polygon and solids

  // RepeatedSegment: base configuration mapped through each transform.
  // Nodes landing within `merge_tol` of an earlier node are merged into it.
  std::optional<Configuration> base;
  std::vector<AffineMap> transforms;
  double merge_tol = 1e-9;
};

struct SegmentedConfiguration {
  Configuration config;
  std::vector<std::vector<Index>> segments;  // global node indices per segment, base order
};

Configuration generate(const GeneratorSpec& spec);
/// RepeatedSegment with the per-segment node lists kept.
SegmentedConfiguration generate_segmented(const GeneratorSpec& spec);

Configuration random_configuration(Index n, int dim, std::uint64_t seed);
Configuration polygon(Index n, double radius = 1.0);
Configuration octahedron(double radius = 1.0);
Configuration cuboctahedron(double radius = 1.0);
Configuration truncated_icosahedron(double radius = 1.0);

/// coords' = A coords + b 1ᵀ. Non-invertible A is allowed; `singular` reports it.
Configuration apply_affine(const Configuration& config, const MatrixXd& A, const VectorXd& b, bool* singular = nullptr);

// ---------------------------------------------------------------------------
// Letter "W": four sheared copies of a 3D bar. The bar has 14 square layers
// (corners at x, z = +-half_width) spaced along y in [0, height], plus two
// axis nodes at height/3 and 2 height/3: 58 nodes. Segment k maps
// (x, y, z) -> (x + f_k(y), y, z) with
//   f_1 = d - d y / H,  f_2 = d + d y / H,  f_3 = 3d - d y / H,  f_4 = 3d + d y / H
// so neighbouring segments share one 4-node square layer (bottom, top, bottom).

struct LetterWParams {
  double height = 13.0;
  double half_width = 1.0;
  double offset = 5.0;  // d
};

Configuration letter_w_bar(const LetterWParams& params = {});
/// Shear profile of segment k (0-based) as an affine map.
AffineMap letter_w_shear(int segment, const LetterWParams& params = {});
SegmentedConfiguration letter_w(const LetterWParams& params = {});
GeneratorSpec letter_w_spec(const LetterWParams& params = {});

/// Keyframe shapes reachable from the W by one affine map per segment: a
/// straight vertical bar, a V, and the W itself. Neighbouring maps agree on
/// the shared layers.
enum class LetterShape { Bar, V, W };
std::vector<AffineMap> letter_shape_maps(LetterShape shape, const LetterWParams& params = {});

}  // namespace stresslab
