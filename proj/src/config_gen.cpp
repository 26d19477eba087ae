#include "stresslab/config_gen.hpp"

#include <Eigen/LU>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace stresslab {

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Random: return "random";
    case GeneratorKind::Polygon: return "polygon";
    case GeneratorKind::Octahedron: return "octahedron";
    case GeneratorKind::Cuboctahedron: return "cuboctahedron";
    case GeneratorKind::TruncatedIcosahedron: return "truncated-icosahedron";
    case GeneratorKind::RepeatedSegment: return "repeated-segment";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(std::string_view name) {
  for (auto k : {GeneratorKind::Random, GeneratorKind::Polygon, GeneratorKind::Octahedron, GeneratorKind::Cuboctahedron,
                 GeneratorKind::TruncatedIcosahedron, GeneratorKind::RepeatedSegment}) {
    if (to_string(k) == name) return k;
  }
  if (name == "circular") return GeneratorKind::Polygon;
  throw Error(ErrorCode::InvalidInput, "unknown generator kind '" + std::string(name) + "'");
}

AffineMap AffineMap::identity(int dim) { return {MatrixXd::Identity(dim, dim), VectorXd::Zero(dim)}; }

namespace {

Configuration scaled_to_radius(MatrixXd coords, double radius) {
  const double r = coords.colwise().norm().maxCoeff();
  coords *= radius / r;
  return Configuration(std::move(coords));
}

void check_fixed_size(const GeneratorSpec& spec, Index expected, int dim) {
  if (spec.n != 0 && spec.n != expected) {
    throw Error(ErrorCode::InvalidInput, std::string(to_string(spec.kind)) + " has exactly " +
                                             std::to_string(expected) + " nodes, got n=" + std::to_string(spec.n));
  }
  if (spec.dim != dim && spec.dim != 0) {
    throw Error(ErrorCode::InvalidInput, std::string(to_string(spec.kind)) + " is " + std::to_string(dim) + "-dimensional");
  }
}

}  // namespace

// Uniform doubles use the top 53 bits of mt19937_64 so sequences are identical
// across standard libraries (std::uniform_real_distribution is not portable).
Configuration random_configuration(Index n, int dim, std::uint64_t seed) {
  if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidInput, "random configuration dimension must be 1..3");
  if (n < dim + 1) throw Error(ErrorCode::InvalidInput, "random configuration needs N >= D+1");
  std::mt19937_64 rng(seed);
  MatrixXd coords(dim, n);
  for (Index i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) coords(d, i) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return Configuration(std::move(coords));
}

Configuration polygon(Index n, double radius) {
  if (n < 3) throw Error(ErrorCode::InvalidInput, "polygon needs N >= 3");
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidInput, "polygon radius must be positive");
  MatrixXd coords(2, n);
  for (Index k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    coords(0, k) = radius * std::cos(a);
    coords(1, k) = radius * std::sin(a);
  }
  return Configuration(std::move(coords));
}

Configuration octahedron(double radius) {
  MatrixXd coords = MatrixXd::Zero(3, 6);
  for (int axis = 0; axis < 3; ++axis) {
    coords(axis, 2 * axis) = 1.0;
    coords(axis, 2 * axis + 1) = -1.0;
  }
  return scaled_to_radius(std::move(coords), radius);
}

// All permutations of (+-1, +-1, 0).
Configuration cuboctahedron(double radius) {
  MatrixXd coords(3, 12);
  Index k = 0;
  for (int zero = 2; zero >= 0; --zero) {
    for (double s0 : {1.0, -1.0}) {
      for (double s1 : {1.0, -1.0}) {
        Eigen::Vector3d v;
        int used = 0;
        for (int axis = 0; axis < 3; ++axis) v(axis) = axis == zero ? 0.0 : (used++ == 0 ? s0 : s1);
        coords.col(k++) = v;
      }
    }
  }
  return scaled_to_radius(std::move(coords), radius);
}

// Cyclic permutations of (0, +-1, +-3phi), (+-1, +-(2+phi), +-2phi) and
// (+-phi, +-2, +-phi^3).
Configuration truncated_icosahedron(double radius) {
  const double phi = std::numbers::phi;
  const std::array<Eigen::Vector3d, 3> seeds = {Eigen::Vector3d(0.0, 1.0, 3.0 * phi),
                                                Eigen::Vector3d(1.0, 2.0 + phi, 2.0 * phi),
                                                Eigen::Vector3d(phi, 2.0, phi * phi * phi)};
  std::vector<Eigen::Vector3d> pts;
  for (const auto& s : seeds) {
    for (int sx : {1, -1}) {
      for (int sy : {1, -1}) {
        for (int sz : {1, -1}) {
          if ((s(0) == 0.0 && sx < 0) || (s(1) == 0.0 && sy < 0) || (s(2) == 0.0 && sz < 0)) continue;
          const Eigen::Vector3d v(sx * s(0), sy * s(1), sz * s(2));
          for (int shift = 0; shift < 3; ++shift) pts.emplace_back(v((0 + shift) % 3), v((1 + shift) % 3), v((2 + shift) % 3));
        }
      }
    }
  }
  MatrixXd coords(3, static_cast<Index>(pts.size()));
  for (std::size_t k = 0; k < pts.size(); ++k) coords.col(static_cast<Index>(k)) = pts[k];
  return scaled_to_radius(std::move(coords), radius);
}

Configuration apply_affine(const Configuration& config, const MatrixXd& A, const VectorXd& b, bool* singular) {
  const int d = config.dim();
  if (A.rows() != d || A.cols() != d || b.size() != d) {
    throw Error(ErrorCode::DimensionMismatch, "affine map does not match configuration dimension");
  }
  if (singular) *singular = numeric_rank(A, 1e-12) < d;
  MatrixXd coords = (A * config.coords()).colwise() + b;
  return Configuration(std::move(coords), config.labels());
}

SegmentedConfiguration generate_segmented(const GeneratorSpec& spec) {
  if (spec.kind != GeneratorKind::RepeatedSegment) {
    throw Error(ErrorCode::InvalidInput, "generate_segmented requires the repeated-segment kind");
  }
  if (!spec.base) throw Error(ErrorCode::InvalidInput, "repeated-segment needs a base configuration");
  if (spec.transforms.empty()) throw Error(ErrorCode::InvalidInput, "repeated-segment needs at least one transform");
  const Configuration& base = *spec.base;
  const int d = base.dim();
  const double scale = std::max(1.0, base.coords().cwiseAbs().maxCoeff());

  std::vector<VectorXd> merged;
  std::vector<std::vector<Index>> segments;
  for (const AffineMap& t : spec.transforms) {
    if (t.A.rows() != d || t.A.cols() != d || t.b.size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "segment transform does not match base dimension");
    }
    if (numeric_rank(t.A, 1e-12) < d) throw Error(ErrorCode::InvalidInput, "segment transform is not invertible");
    std::vector<Index> ids;
    ids.reserve(static_cast<std::size_t>(base.size()));
    for (Index i = 0; i < base.size(); ++i) {
      const VectorXd p = t.apply(base.coords().col(i));
      Index found = -1;
      for (std::size_t k = 0; k < merged.size(); ++k) {
        if ((merged[k] - p).norm() <= spec.merge_tol * scale) {
          found = static_cast<Index>(k);
          break;
        }
      }
      if (found < 0) {
        found = static_cast<Index>(merged.size());
        merged.push_back(p);
      }
      ids.push_back(found);
    }
    segments.push_back(std::move(ids));
  }
  MatrixXd coords(d, static_cast<Index>(merged.size()));
  for (std::size_t k = 0; k < merged.size(); ++k) coords.col(static_cast<Index>(k)) = merged[k];
  return {Configuration(std::move(coords)), std::move(segments)};
}

Configuration generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case GeneratorKind::Random:
      if (!spec.seed) throw Error(ErrorCode::InvalidInput, "random generator requires a seed");
      return random_configuration(spec.n, spec.dim, *spec.seed);
    case GeneratorKind::Polygon:
      if (spec.dim != 2 && spec.dim != 0) throw Error(ErrorCode::InvalidInput, "polygon is 2-dimensional");
      return polygon(spec.n, spec.radius);
    case GeneratorKind::Octahedron:
      check_fixed_size(spec, 6, 3);
      return octahedron(spec.radius);
    case GeneratorKind::Cuboctahedron:
      check_fixed_size(spec, 12, 3);
      return cuboctahedron(spec.radius);
    case GeneratorKind::TruncatedIcosahedron:
      check_fixed_size(spec, 60, 3);
      return truncated_icosahedron(spec.radius);
    case GeneratorKind::RepeatedSegment:
      return generate_segmented(spec).config;
  }
  throw Error(ErrorCode::InvalidInput, "unknown generator kind");
}

// ---------------------------------------------------------------------------

Configuration letter_w_bar(const LetterWParams& params) {
  constexpr int layers = 14;
  MatrixXd coords(3, 4 * layers + 2);
  const double a = params.half_width;
  Index k = 0;
  for (int l = 0; l < layers; ++l) {
    const double y = params.height * l / (layers - 1);
    for (auto [sx, sz] : {std::pair{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}}) {
      coords.col(k++) = Eigen::Vector3d(sx * a, y, sz * a);
    }
  }
  coords.col(k++) = Eigen::Vector3d(0.0, params.height / 3.0, 0.0);
  coords.col(k++) = Eigen::Vector3d(0.0, 2.0 * params.height / 3.0, 0.0);
  return Configuration(std::move(coords));
}

AffineMap letter_w_shear(int segment, const LetterWParams& params) {
  if (segment < 0 || segment > 3) throw Error(ErrorCode::InvalidInput, "letter W has segments 0..3");
  const double d = params.offset;
  const double slope = d / params.height;
  static constexpr std::array<double, 4> base_shift = {1.0, 1.0, 3.0, 3.0};
  static constexpr std::array<double, 4> sign = {-1.0, 1.0, -1.0, 1.0};
  AffineMap m = AffineMap::identity(3);
  m.A(0, 1) = sign[static_cast<std::size_t>(segment)] * slope;
  m.b(0) = base_shift[static_cast<std::size_t>(segment)] * d;
  return m;
}

GeneratorSpec letter_w_spec(const LetterWParams& params) {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::RepeatedSegment;
  spec.dim = 3;
  spec.base = letter_w_bar(params);
  for (int s = 0; s < 4; ++s) spec.transforms.push_back(letter_w_shear(s, params));
  return spec;
}

SegmentedConfiguration letter_w(const LetterWParams& params) { return generate_segmented(letter_w_spec(params)); }

std::vector<AffineMap> letter_shape_maps(LetterShape shape, const LetterWParams& params) {
  const double h = params.height;
  const double slope = params.offset / h;
  // Per segment, the shape places bar height y at (x + f0 + f1 y, g0 + g1 y).
  struct Profile {
    double f0, f1, g0, g1;
  };
  std::array<Profile, 4> prof{};
  switch (shape) {
    case LetterShape::Bar:
      prof = {Profile{0, 0, 0, -1}, {0, 0, 0, 1}, {0, 0, 2 * h, -1}, {0, 0, 2 * h, 1}};
      break;
    case LetterShape::V:
      prof = {Profile{-params.offset, -slope, h, 1}, {-params.offset, slope, h, -1}, {params.offset, -slope, h, -1},
              {params.offset, slope, h, 1}};
      break;
    case LetterShape::W:
      for (int k = 0; k < 4; ++k) {
        const AffineMap s = letter_w_shear(k, params);
        prof[static_cast<std::size_t>(k)] = {s.b(0), s.A(0, 1), 0, 1};
      }
      break;
  }
  std::vector<AffineMap> out;
  for (int k = 0; k < 4; ++k) {
    // Undo the W shear, then apply the shape profile.
    const AffineMap w = letter_w_shear(k, params);
    const Profile& p = prof[static_cast<std::size_t>(k)];
    AffineMap m = AffineMap::identity(3);
    m.A(0, 1) = p.f1 - w.A(0, 1);
    m.b(0) = p.f0 - w.b(0);
    m.A(1, 1) = p.g1;
    m.b(1) = p.g0;
    out.push_back(m);
  }
  return out;
}

}  // namespace stresslab
