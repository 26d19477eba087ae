#include "stresslab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace stresslab {

namespace {

// Non-finite values are not representable in JSON; encode them as strings.
Json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double get_num(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw Error(ErrorCode::InvalidInput, "expected a number, got " + j.dump());
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidInput, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("field '") + key + "': " + e.what());
  }
}

double num_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidInput, std::string("missing field '") + key + "'");
  return get_num(j.at(key));
}

template <class T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_num(const Json& j, const char* key, double& out) {
  if (j.contains(key)) out = get_num(j.at(key));
}

Json vec(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

VectorXd to_vec(const Json& a) {
  if (!a.is_array()) throw Error(ErrorCode::InvalidInput, "expected an array of numbers");
  VectorXd v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = get_num(a[i]);
  return v;
}

// Column-major point lists: one inner array per column.
Json columns(const MatrixXd& m) {
  Json a = Json::array();
  for (Index c = 0; c < m.cols(); ++c) a.push_back(vec(m.col(c)));
  return a;
}

MatrixXd from_columns(const Json& a, Index rows = -1) {
  if (!a.is_array()) throw Error(ErrorCode::InvalidInput, "expected an array of points");
  if (a.empty()) return MatrixXd(std::max<Index>(rows, 0), 0);
  const Index r = static_cast<Index>(a[0].size());
  if (rows >= 0 && r != rows) throw Error(ErrorCode::DimensionMismatch, "point has the wrong dimension");
  MatrixXd m(r, static_cast<Index>(a.size()));
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c].size() != static_cast<std::size_t>(r)) throw Error(ErrorCode::DimensionMismatch, "ragged point list");
    m.col(static_cast<Index>(c)) = to_vec(a[c]);
  }
  return m;
}

Json rows_of(const MatrixXd& m) {
  Json a = Json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

MatrixXd from_rows(const Json& a) { return from_columns(a).transpose(); }

std::vector<Index> index_list(const Json& a) {
  std::vector<Index> out;
  for (const auto& x : a) {
    if (!x.is_number_integer()) throw Error(ErrorCode::InvalidInput, "node indices must be integers");
    out.push_back(x.get<Index>());
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidInput, "bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto p = line.find(sep, start);
    out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

std::vector<std::string_view> lines(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view s(text);
  std::size_t start = 0;
  while (start < s.size()) {
    auto p = s.find('\n', start);
    if (p == std::string_view::npos) p = s.size();
    auto l = s.substr(start, p - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
    start = p + 1;
  }
  return out;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json error_to_json(const Error& e) {
  Json j{{"error", std::string(to_string(e.code()))}, {"message", e.detail()}};
  if (!e.stage().empty()) j["stage"] = e.stage();
  return j;
}

// ---------------------------------------------------------------------------

Json to_json(const Configuration& config) {
  Json j{{"dim", config.dim()}, {"coords", columns(config.coords())}};
  if (!config.labels().empty()) j["labels"] = config.labels();
  return j;
}

Configuration configuration_from_json(const Json& j) {
  const int dim = field<int>(j, "dim");
  if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidInput, "dim must be 1, 2 or 3");
  MatrixXd coords = from_columns(field<Json>(j, "coords"), dim);
  std::vector<std::string> labels;
  maybe(j, "labels", labels);
  return Configuration(std::move(coords), std::move(labels));
}

Json to_json(const AffineMap& map) { return Json{{"A", rows_of(map.A)}, {"b", vec(map.b)}}; }

AffineMap affine_map_from_json(const Json& j) {
  AffineMap m;
  m.A = from_rows(field<Json>(j, "A"));
  m.b = to_vec(field<Json>(j, "b"));
  if (m.A.rows() != m.b.size()) throw Error(ErrorCode::DimensionMismatch, "affine map A and b disagree");
  return m;
}

Json to_json(const GeneratorSpec& spec) {
  Json j{{"kind", std::string(to_string(spec.kind))}, {"n", spec.n}, {"dim", spec.dim}, {"radius", spec.radius}};
  if (spec.seed) j["seed"] = *spec.seed;
  if (spec.kind == GeneratorKind::RepeatedSegment) {
    if (spec.base) j["base"] = to_json(*spec.base);
    Json t = Json::array();
    for (const auto& m : spec.transforms) t.push_back(to_json(m));
    j["transforms"] = t;
    j["merge_tol"] = spec.merge_tol;
  }
  return j;
}

GeneratorSpec generator_spec_from_json(const Json& j) {
  const auto kind = field<std::string>(j, "kind");
  // "letter-w" is the preset repeated-segment spec; later fields override it.
  GeneratorSpec s = kind == "letter-w" ? letter_w_spec() : GeneratorSpec{};
  if (kind != "letter-w") s.kind = parse_generator_kind(kind);
  maybe(j, "n", s.n);
  maybe(j, "dim", s.dim);
  maybe_num(j, "radius", s.radius);
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("base")) s.base = configuration_from_json(j.at("base"));
  if (j.contains("transforms"))
    for (const auto& t : j.at("transforms")) s.transforms.push_back(affine_map_from_json(t));
  maybe_num(j, "merge_tol", s.merge_tol);
  return s;
}

Json to_json(const DesignParams& p) {
  return Json{{"alpha", p.alpha},
              {"beta", p.beta},
              {"gamma", p.gamma},
              {"eps_rel", p.eps_rel},
              {"two_sided", p.two_sided},
              {"polish", p.polish},
              {"strict", p.strict},
              {"solver",
               {{"tol", p.solver.tol}, {"gap_tol", p.solver.gap_tol}, {"max_iterations", p.solver.max_iterations}}},
              {"tolerances", {{"psd_rel", p.tolerances.psd_rel}, {"rank_rel", p.tolerances.rank_rel}, {"eq", p.tolerances.eq}}}};
}

DesignParams design_params_from_json(const Json& j) {
  DesignParams p;
  maybe_num(j, "alpha", p.alpha);
  maybe_num(j, "beta", p.beta);
  maybe_num(j, "gamma", p.gamma);
  maybe_num(j, "eps_rel", p.eps_rel);
  maybe(j, "two_sided", p.two_sided);
  maybe(j, "polish", p.polish);
  maybe(j, "strict", p.strict);
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    maybe_num(s, "tol", p.solver.tol);
    maybe_num(s, "gap_tol", p.solver.gap_tol);
    maybe(s, "max_iterations", p.solver.max_iterations);
  }
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    maybe_num(t, "psd_rel", p.tolerances.psd_rel);
    maybe_num(t, "rank_rel", p.tolerances.rank_rel);
    maybe_num(t, "eq", p.tolerances.eq);
  }
  return p;
}

Json to_json(const SpectralReport& s) {
  return Json{{"eigenvalues", vec(s.eigenvalues)},
              {"dim", s.dim},
              {"lambda_d2", num(s.lambda_d2)},
              {"lambda_max", num(s.lambda_max)},
              {"lambda_min", num(s.lambda_min)},
              {"rank", s.rank},
              {"nullity", s.nullity},
              {"psd", s.psd},
              {"condition_number", num(s.condition_number)},
              {"tol_rank", num(s.tol_rank)},
              {"tol_psd", num(s.tol_psd)}};
}

SpectralReport spectral_report_from_json(const Json& j) {
  SpectralReport s;
  s.eigenvalues = to_vec(field<Json>(j, "eigenvalues"));
  s.dim = field<int>(j, "dim");
  s.lambda_d2 = num_field(j, "lambda_d2");
  s.lambda_max = num_field(j, "lambda_max");
  s.lambda_min = num_field(j, "lambda_min");
  s.rank = field<Index>(j, "rank");
  s.nullity = field<Index>(j, "nullity");
  s.psd = field<bool>(j, "psd");
  s.condition_number = num_field(j, "condition_number");
  s.tol_rank = num_field(j, "tol_rank");
  s.tol_psd = num_field(j, "tol_psd");
  return s;
}

Json to_json(const VerificationReport& v) {
  return Json{{"psd", v.psd},
              {"rank_ok", v.rank_ok},
              {"equilibrium_ok", v.equilibrium_ok},
              {"overall", v.overall},
              {"rank", v.rank},
              {"expected_rank", v.expected_rank},
              {"lambda_min", num(v.lambda_min)},
              {"equilibrium_residual", num(v.equilibrium_residual)},
              {"degenerate_configuration", v.degenerate_configuration}};
}

VerificationReport verification_from_json(const Json& j) {
  VerificationReport v;
  v.psd = field<bool>(j, "psd");
  v.rank_ok = field<bool>(j, "rank_ok");
  v.equilibrium_ok = field<bool>(j, "equilibrium_ok");
  v.overall = field<bool>(j, "overall");
  v.rank = field<Index>(j, "rank");
  v.expected_rank = field<Index>(j, "expected_rank");
  v.lambda_min = num_field(j, "lambda_min");
  v.equilibrium_residual = num_field(j, "equilibrium_residual");
  v.degenerate_configuration = field<bool>(j, "degenerate_configuration");
  return v;
}

SolveStatus parse_solve_status(std::string_view name) {
  for (auto s : {SolveStatus::Optimal, SolveStatus::OptimalInaccurate, SolveStatus::PrimalInfeasible,
                 SolveStatus::DualInfeasible, SolveStatus::MaxIterations, SolveStatus::NumericalError}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidInput, "unknown solver status '" + std::string(name) + "'");
}

Json to_json(const DesignResult& r) {
  const Index n = r.omega.nodes;
  Json edges = Json::array();
  for (const auto& [i, k] : r.topology.edges()) edges.push_back(Json::array({i, k, num(r.omega.weight(i, k))}));
  Json j{{"nodes", n},
         {"status", std::string(to_string(r.status))},
         {"success", r.success()},
         {"objective", num(r.objective)},
         {"final_objective", num(r.final_objective)},
         {"alpha_critical", num(r.alpha_critical)},
         {"polish_correction", num(r.polish_correction)},
         {"iterations", r.iterations},
         {"weights", vec(r.omega.weights)},
         {"edges", edges},
         {"edge_count", r.edge_count()},
         {"average_degree", r.topology.average_degree()},
         {"spectrum", to_json(r.spectrum)},
         {"verification", to_json(r.verification)},
         {"timings",
          {{"prepare", r.timings.prepare},
           {"assemble", r.timings.assemble},
           {"solve", r.timings.solve},
           {"post", r.timings.post},
           {"total", r.timings.total}}},
         {"warnings", r.warnings}};
  if (r.edge_count() > 0 && r.spectrum.lambda_max > 0.0) {
    j["efficiency"] = num(spectral_efficiency(r.spectrum, r.edge_count(), n));
  }
  if (r.usi) {
    j["S"] = r.usi->classes;
    j["classes"] = r.usi->class_of;
    j["reduction_ratio"] = r.usi->reduction_ratio;
    j["reduced"] = r.usi->reduced;
  }
  return j;
}

DesignResult design_result_from_json(const Json& j) {
  DesignResult r;
  const Index n = field<Index>(j, "nodes");
  r.omega = StressVector(n, to_vec(field<Json>(j, "weights")));
  r.Omega = assemble_stress(r.omega);
  std::vector<std::pair<Index, Index>> edges;
  for (const auto& e : field<Json>(j, "edges")) edges.emplace_back(e.at(0).get<Index>(), e.at(1).get<Index>());
  r.topology = Topology(n, std::move(edges));
  r.status = parse_solve_status(field<std::string>(j, "status"));
  r.objective = num_field(j, "objective");
  r.final_objective = num_field(j, "final_objective");
  r.alpha_critical = num_field(j, "alpha_critical");
  r.polish_correction = num_field(j, "polish_correction");
  r.iterations = field<int>(j, "iterations");
  r.spectrum = spectral_report_from_json(field<Json>(j, "spectrum"));
  r.verification = verification_from_json(field<Json>(j, "verification"));
  const Json& t = field<Json>(j, "timings");
  r.timings.prepare = num_field(t, "prepare");
  r.timings.assemble = num_field(t, "assemble");
  r.timings.solve = num_field(t, "solve");
  r.timings.post = num_field(t, "post");
  r.timings.total = num_field(t, "total");
  maybe(j, "warnings", r.warnings);
  if (j.contains("S")) {
    UsiSummary u;
    u.classes = field<Index>(j, "S");
    u.class_of = field<std::vector<Index>>(j, "classes");
    u.reduction_ratio = num_field(j, "reduction_ratio");
    u.reduced = field<bool>(j, "reduced");
    r.usi = std::move(u);
  }
  return r;
}

// ---------------------------------------------------------------------------

std::string stress_to_csv(const StressVector& omega) {
  std::string out = "edge_i,edge_j,weight\n";
  for (Index e = 0; e < omega.weights.size(); ++e) {
    if (omega.weights(e) == 0.0) continue;
    const auto [i, k] = edge_endpoints(e, omega.nodes);
    out += std::to_string(i) + "," + std::to_string(k) + "," + fmt(omega.weights(e)) + "\n";
  }
  return out;
}

StressVector stress_from_csv(const std::string& text, Index nodes) {
  struct Row {
    Index i, k;
    double w;
  };
  std::vector<Row> rows;
  Index max_index = -1;
  const auto ls = lines(text);
  for (std::size_t l = 0; l < ls.size(); ++l) {
    if (l == 0 && ls[l].rfind("edge_i", 0) == 0) continue;
    const auto f = split(ls[l]);
    if (f.size() != 3) throw Error(ErrorCode::InvalidInput, "stress CSV rows need 3 fields");
    Row r{static_cast<Index>(parse_double(f[0])), static_cast<Index>(parse_double(f[1])), parse_double(f[2])};
    if (r.i < 0 || r.k < 0 || r.i == r.k) throw Error(ErrorCode::InvalidInput, "bad edge in stress CSV");
    max_index = std::max({max_index, r.i, r.k});
    rows.push_back(r);
  }
  if (nodes < 0) nodes = max_index + 1;
  if (max_index >= nodes) throw Error(ErrorCode::DimensionMismatch, "stress CSV references a node beyond N");
  StressVector s = StressVector::zeros(nodes);
  for (const auto& r : rows) s.weights(edge_index(r.i, r.k, nodes)) = r.w;
  return s;
}

std::string matrix_to_csv(const MatrixXd& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += fmt(m(r, c));
    }
    out += '\n';
  }
  return out;
}

MatrixXd matrix_from_csv(const std::string& text) {
  const auto ls = lines(text);
  if (ls.empty()) return MatrixXd(0, 0);
  const Index cols = static_cast<Index>(split(ls[0]).size());
  MatrixXd m(static_cast<Index>(ls.size()), cols);
  for (std::size_t r = 0; r < ls.size(); ++r) {
    const auto f = split(ls[r]);
    if (static_cast<Index>(f.size()) != cols) throw Error(ErrorCode::InvalidInput, "ragged matrix CSV");
    for (Index c = 0; c < cols; ++c) m(static_cast<Index>(r), c) = parse_double(f[static_cast<std::size_t>(c)]);
  }
  return m;
}

// ---------------------------------------------------------------------------

Json to_json(const ClusterPartition& partition, const std::vector<Index>& leaders) {
  Json j{{"nodes", partition.nodes()}, {"clusters", partition.clusters()}};
  j["leaders"] = leaders;
  return j;
}

PartitionFile partition_from_json(const Json& j, Index nodes) {
  std::vector<std::vector<Index>> clusters;
  Index max_index = -1;
  for (const auto& c : field<Json>(j, "clusters")) {
    clusters.push_back(index_list(c));
    for (Index i : clusters.back()) max_index = std::max(max_index, i);
  }
  if (j.contains("nodes")) {
    const Index declared = j.at("nodes").get<Index>();
    if (nodes >= 0 && declared != nodes) {
      throw Error(ErrorCode::DimensionMismatch, "partition declares " + std::to_string(declared) +
                                                    " nodes, configuration has " + std::to_string(nodes));
    }
    nodes = declared;
  }
  if (nodes < 0) nodes = max_index + 1;
  PartitionFile f{ClusterPartition(nodes, std::move(clusters)), {}};
  if (j.contains("leaders")) f.leaders = index_list(j.at("leaders"));
  for (Index l : f.leaders)
    if (l < 0 || l >= nodes) throw Error(ErrorCode::InvalidInput, "leader index out of range");
  return f;
}

Json to_json(const AnalysisReport& r) {
  Json pairs = Json::array();
  for (const auto& p : r.collective.pairs) {
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"bridge_size", p.bridge_size}, {"rank", p.rank}, {"ok", p.ok}});
  }
  Json linked = Json::array();
  for (const auto& [a, b] : r.partition.linked_pairs) linked.push_back(Json::array({a, b}));
  Json j{{"overlap", r.partition.overlap},
         {"overlap_connected", r.partition.overlap_connected},
         {"linked_pairs", linked},
         {"pairs", pairs},
         {"collective", r.collective.overall}};
  if (r.leaders) {
    Json cl = Json::array();
    for (const auto& v : r.leaders->clusters) {
      cl.push_back({{"cluster", v.cluster}, {"leaders", v.leaders}, {"rank", v.rank}, {"ok", v.ok}});
    }
    j["leaders"] = {{"clusters", cl}, {"overall", r.leaders->overall}};
  }
  if (r.ensemble_lambda_d2) j["ensemble_lambda_d2"] = num(*r.ensemble_lambda_d2);
  if (!r.cluster_edges.empty()) j["cluster_edges"] = r.cluster_edges;
  if (r.bound) {
    const BoundReport& b = *r.bound;
    Json cl = Json::array();
    for (const auto& c : b.clusters) {
      cl.push_back({{"lambda_d2", num(c.lambda_d2)},
                    {"rho", num(c.rho)},
                    {"multiplicity", c.multiplicity},
                    {"eigenvector", vec(c.eigenvector)}});
    }
    j["bound"] = {{"clusters", cl},
                  {"bound", num(b.bound)},
                  {"measured", num(b.measured)},
                  {"holds", b.holds},
                  {"degenerate", b.degenerate},
                  {"within_hypotheses", b.within_hypotheses},
                  {"orthogonality_residual", num(b.orthogonality_residual)}};
  }
  return j;
}

AnalysisReport analysis_report_from_json(const Json& j) {
  AnalysisReport r;
  r.partition.overlap = field<Index>(j, "overlap");
  r.partition.overlap_connected = field<bool>(j, "overlap_connected");
  for (const auto& p : field<Json>(j, "linked_pairs")) r.partition.linked_pairs.emplace_back(p.at(0), p.at(1));
  for (const auto& p : field<Json>(j, "pairs")) {
    r.collective.pairs.push_back(PairVerdict{field<Index>(p, "a"), field<Index>(p, "b"), field<Index>(p, "bridge_size"),
                                             field<int>(p, "rank"), field<bool>(p, "ok")});
  }
  r.collective.overall = field<bool>(j, "collective");
  if (j.contains("leaders")) {
    LeaderReport lr;
    for (const auto& v : j.at("leaders").at("clusters")) {
      lr.clusters.push_back(
          LeaderVerdict{field<Index>(v, "cluster"), field<Index>(v, "leaders"), field<int>(v, "rank"), field<bool>(v, "ok")});
    }
    lr.overall = field<bool>(j.at("leaders"), "overall");
    r.leaders = std::move(lr);
  }
  if (j.contains("ensemble_lambda_d2")) r.ensemble_lambda_d2 = get_num(j.at("ensemble_lambda_d2"));
  maybe(j, "cluster_edges", r.cluster_edges);
  if (j.contains("bound")) {
    const Json& jb = j.at("bound");
    BoundReport b;
    for (const auto& c : field<Json>(jb, "clusters")) {
      ClusterBound cb;
      cb.lambda_d2 = num_field(c, "lambda_d2");
      cb.rho = num_field(c, "rho");
      cb.multiplicity = field<Index>(c, "multiplicity");
      cb.eigenvector = to_vec(field<Json>(c, "eigenvector"));
      b.clusters.push_back(std::move(cb));
    }
    b.bound = num_field(jb, "bound");
    b.measured = num_field(jb, "measured");
    b.holds = field<bool>(jb, "holds");
    b.degenerate = field<bool>(jb, "degenerate");
    b.within_hypotheses = field<bool>(jb, "within_hypotheses");
    b.orthogonality_residual = num_field(jb, "orthogonality_residual");
    r.bound = std::move(b);
  }
  return r;
}

Json to_json(const std::vector<Keyframe>& keyframes) {
  Json a = Json::array();
  for (const auto& k : keyframes) a.push_back({{"time", k.time}, {"ramp", k.ramp}, {"positions", columns(k.positions)}});
  return a;
}

std::vector<Keyframe> keyframes_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "keyframes must be an array");
  std::vector<Keyframe> out;
  for (const auto& k : j) {
    Keyframe f;
    f.time = num_field(k, "time");
    maybe_num(k, "ramp", f.ramp);
    f.positions = from_columns(field<Json>(k, "positions"));
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string trajectory_to_csv(const Trajectory& traj) {
  const bool with_pos = !traj.positions.empty();
  if (with_pos && traj.positions.size() != traj.times.size()) {
    throw Error(ErrorCode::DimensionMismatch, "trajectory positions and times differ in length");
  }
  const Index dim = with_pos ? traj.positions.front().rows() : 0;
  const Index n = with_pos ? traj.positions.front().cols() : 0;
  static const char* axes[] = {"x", "y", "z"};
  std::string out = "t";
  for (Index i = 0; i < n; ++i)
    for (Index d = 0; d < dim; ++d) out += ",z" + std::to_string(i + 1) + "_" + axes[d];
  out += ",error\n";
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    out += fmt(traj.times[s]);
    if (with_pos) {
      const MatrixXd& z = traj.positions[s];
      for (Index i = 0; i < n; ++i)
        for (Index d = 0; d < dim; ++d) out += "," + fmt(z(d, i));
    }
    out += "," + fmt(s < traj.error.size() ? traj.error[s] : std::numeric_limits<double>::quiet_NaN()) + "\n";
  }
  return out;
}

Trajectory trajectory_from_csv(const std::string& text, int dim) {
  const auto ls = lines(text);
  if (ls.empty()) throw Error(ErrorCode::InvalidInput, "empty trajectory CSV");
  const auto header = split(ls[0]);
  if (header.size() < 2 || header.front() != "t" || header.back() != "error") {
    throw Error(ErrorCode::InvalidInput, "trajectory CSV header must start with t and end with error");
  }
  const Index pos_cols = static_cast<Index>(header.size()) - 2;
  if (pos_cols > 0 && (dim <= 0 || pos_cols % dim != 0)) {
    throw Error(ErrorCode::DimensionMismatch, "position columns are not a multiple of the dimension");
  }
  const Index n = pos_cols > 0 ? pos_cols / dim : 0;
  static constexpr const char* axes[] = {"x", "y", "z"};
  for (Index i = 0; i < n; ++i)
    for (Index d = 0; d < dim; ++d) {
      const std::string want = "z" + std::to_string(i + 1) + "_" + axes[d];
      if (header[static_cast<std::size_t>(1 + i * dim + d)] != want) {
        throw Error(ErrorCode::DimensionMismatch, "trajectory column " + want + " expected, found " +
                                                      std::string(header[static_cast<std::size_t>(1 + i * dim + d)]));
      }
    }
  Trajectory t;
  for (std::size_t l = 1; l < ls.size(); ++l) {
    const auto f = split(ls[l]);
    if (f.size() != header.size()) throw Error(ErrorCode::InvalidInput, "ragged trajectory CSV row");
    t.times.push_back(parse_double(f.front()));
    t.error.push_back(parse_double(f.back()));
    if (n > 0) {
      MatrixXd z(dim, n);
      for (Index i = 0; i < n; ++i)
        for (Index d = 0; d < dim; ++d) z(d, i) = parse_double(f[static_cast<std::size_t>(1 + i * dim + d)]);
      t.positions.push_back(std::move(z));
    }
  }
  if (!t.positions.empty()) t.final_positions = t.positions.back();
  return t;
}

// ---------------------------------------------------------------------------

std::string render_svg(const std::vector<SvgPanel>& panels, const std::vector<std::pair<Index, Index>>& edges,
                       const std::vector<Index>& highlight) {
  constexpr double size = 320.0, margin = 20.0, title_h = 18.0;
  const double width = size * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << size + title_h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const MatrixXd& z = panels[p].positions;
    if (z.cols() == 0) continue;
    // x-y projection, shared scale on both axes
    const Eigen::ArrayXd xs = z.row(0).transpose().array();
    const Eigen::ArrayXd ys = z.rows() > 1 ? Eigen::ArrayXd(z.row(1).transpose().array()) : Eigen::ArrayXd::Zero(z.cols());
    const double span = std::max({xs.maxCoeff() - xs.minCoeff(), ys.maxCoeff() - ys.minCoeff(), 1e-12});
    const double scale = (size - 2 * margin) / span;
    const double ox = static_cast<double>(p) * size + margin, oy = title_h + margin;
    auto X = [&](Index i) { return ox + (xs(i) - xs.minCoeff()) * scale; };
    auto Y = [&](Index i) { return oy + (ys.maxCoeff() - ys(i)) * scale; };
    os << "<text x=\"" << static_cast<double>(p) * size + margin << "\" y=\"14\">" << panels[p].title << "</text>\n";
    for (const auto& [a, b] : edges) {
      if (a >= z.cols() || b >= z.cols()) continue;
      os << "<polyline points=\"" << X(a) << "," << Y(a) << " " << X(b) << "," << Y(b)
         << "\" stroke=\"#888\" stroke-width=\"0.6\" fill=\"none\"/>\n";
    }
    for (Index i = 0; i < z.cols(); ++i) {
      const bool hl = std::find(highlight.begin(), highlight.end(), i) != highlight.end();
      os << "<circle cx=\"" << X(i) << "\" cy=\"" << Y(i) << "\" r=\"" << (hl ? 4 : 2.5) << "\" fill=\""
         << (hl ? "#c0392b" : "#2c3e50") << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<SvgPanel> trajectory_panels(const Trajectory& traj, const std::vector<double>& times) {
  if (traj.positions.empty()) throw Error(ErrorCode::InvalidInput, "trajectory has no stored positions");
  std::vector<SvgPanel> out;
  for (double t : times) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < traj.times.size(); ++s)
      if (std::abs(traj.times[s] - t) < std::abs(traj.times[best] - t)) best = s;
    out.push_back({"t = " + fmt(traj.times[best]), traj.positions[best]});
  }
  return out;
}

}  // namespace stresslab
