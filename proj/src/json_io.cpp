#include "nashfiber/json_io.hpp"

#include "nashfiber/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace nashfiber {

namespace {

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::InvalidArgument, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("field '") + key + "': " + e.what());
  }
}

std::vector<Polynomial> poly_list(const Json& piece, const char* key, int n) {
  std::vector<Polynomial> out;
  if (!piece.contains(key)) return out;
  for (const auto& s : piece.at(key)) {
    if (!s.is_string()) throw Error(ErrorKind::InvalidArgument, std::string(key) + " entries must be strings");
    out.push_back(parse_polynomial(s.get<std::string>(), n));
  }
  return out;
}

BasicPiece piece_from_json(const Json& j, int n) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "piece must be an object");
  return BasicPiece(n, poly_list(j, "equations", n), poly_list(j, "ge", n), poly_list(j, "gt", n),
                    poly_list(j, "ne", n));
}

Json strings(const std::vector<Polynomial>& ps) {
  Json a = Json::array();
  for (const auto& p : ps) a.push_back(p.to_string());
  return a;
}

Json piece_json(const BasicPiece& p) {
  Json j;
  j["equations"] = strings(p.equations());
  if (!p.weak().empty()) j["ge"] = strings(p.weak());
  if (!p.strict().empty()) j["gt"] = strings(p.strict());
  if (!p.exclusions().empty()) j["ne"] = strings(p.exclusions());
  return j;
}

}  // namespace

Json to_json(const GrassPoint& p) {
  Json basis = Json::array();
  for (Eigen::Index i = 0; i < p.n(); ++i)
    for (Eigen::Index j = 0; j < p.k(); ++j) basis.push_back(p.basis()(i, j));
  return Json{{"n", p.n()}, {"k", p.k()}, {"basis", basis}};
}

GrassPoint grasspoint_from_json(const Json& j) {
  const int n = field<int>(j, "n");
  const int k = field<int>(j, "k");
  const auto basis = field<std::vector<double>>(j, "basis");
  if (n < 1 || k < 1 || k > n || basis.size() != static_cast<std::size_t>(n * k)) {
    throw Error(ErrorKind::InvalidArgument, "GrassPoint JSON has inconsistent n, k, basis");
  }
  Mat m(n, k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) m(i, c) = basis[static_cast<std::size_t>(i * k + c)];
  return GrassPoint(m);
}

Scene scene_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "scene must be a JSON object");
  const std::string name = j.contains("name") ? field<std::string>(j, "name") : "unnamed";
  const int n = field<int>(j, "ambient_dim");
  const int d = field<int>(j, "declared_dim");
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "ambient_dim must be positive");
  if (!j.contains("pieces") || !j.at("pieces").is_array()) {
    throw Error(ErrorKind::InvalidArgument, "missing array 'pieces'");
  }
  std::vector<BasicPiece> pieces;
  for (const auto& p : j.at("pieces")) pieces.push_back(piece_from_json(p, n));
  std::optional<std::vector<BasicPiece>> sing;
  if (j.contains("singular_locus")) {
    sing.emplace();
    for (const auto& p : j.at("singular_locus")) sing->push_back(piece_from_json(p, n));
  }
  return make_scene(name, n, d, std::move(pieces), std::move(sing));
}

Json to_json(const Scene& s) {
  Json j;
  j["name"] = s.name;
  j["ambient_dim"] = s.n;
  j["declared_dim"] = s.d;
  Json pieces = Json::array();
  for (const auto& p : s.pieces) pieces.push_back(piece_json(p));
  j["pieces"] = pieces;
  if (s.singular_locus) {
    Json sl = Json::array();
    for (const auto& p : *s.singular_locus) sl.push_back(piece_json(p));
    j["singular_locus"] = sl;
  }
  return j;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

std::filesystem::path catalog_dir() {
  if (const char* env = std::getenv("NASHFIBER_CATALOG")) return env;
  return NASHFIBER_CATALOG_DIR;
}

std::filesystem::path resolve_scene_path(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p)) return p;
  std::filesystem::path c = catalog_dir() / (name_or_path + ".json");
  if (std::filesystem::exists(c)) return c;
  throw Error(ErrorKind::Io, "no scene file or catalog entry named '" + name_or_path + "'");
}

std::string sample_json_lines(const std::vector<ScaleSample>& samples) {
  std::ostringstream out;
  for (const auto& s : samples) {
    for (const auto& p : s.points) {
      Json j;
      j["k"] = s.k;
      j["r"] = s.r;
      j["x"] = std::vector<double>(p.x.data(), p.x.data() + p.x.size());
      j["piece"] = p.piece;
      j["plane"] = p.tangent ? to_json(p.tangent->plane) : Json(nullptr);
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

Json to_json(const ScaleSchedule& s) {
  return Json{{"r0", s.r0},         {"lambda", s.lambda}, {"K", s.K},
              {"delta0", s.delta0}, {"mu", s.mu},         {"samples_per_scale", s.samples_per_scale},
              {"seed", s.seed}};
}

ScaleSchedule schedule_from_json(const Json& j, ScaleSchedule base) {
  if (j.contains("r0")) base.r0 = field<double>(j, "r0");
  if (j.contains("lambda")) base.lambda = field<double>(j, "lambda");
  if (j.contains("K")) base.K = field<int>(j, "K");
  if (j.contains("delta0")) base.delta0 = field<double>(j, "delta0");
  if (j.contains("mu")) base.mu = field<double>(j, "mu");
  if (j.contains("samples_per_scale")) base.samples_per_scale = field<int>(j, "samples_per_scale");
  if (j.contains("seed")) base.seed = field<std::uint64_t>(j, "seed");
  base.validate();
  return base;
}

Json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidArgument, "vector must be a JSON array");
  std::vector<double> xs;
  try {
    xs = j.get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("vector: ") + e.what());
  }
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

namespace {

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double number_or_inf(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

Json planes_json(const std::vector<GrassPoint>& ps) {
  Json a = Json::array();
  for (const auto& p : ps) a.push_back(to_json(p));
  return a;
}

std::vector<GrassPoint> planes_from_json(const Json& j) {
  std::vector<GrassPoint> out;
  for (const auto& p : j) out.push_back(grasspoint_from_json(p));
  return out;
}

}  // namespace

Json to_json(const ConeEstimate& c) {
  Json j;
  j["ambient_dim"] = c.n;
  j["declared_dim"] = c.d;
  j["cone_dim"] = c.cone_dim;
  j["stabilized"] = c.stabilized;
  j["radii"] = c.radii;
  Json trace = Json::array();
  for (double t : c.trace) trace.push_back(finite_or_null(t));
  j["trace"] = trace;
  j["finest_scale"] = c.finest;
  Json clusters = Json::array();
  for (const auto& cl : c.clusters) {
    clusters.push_back(Json{{"center", to_json(cl.center)},
                            {"size", cl.members.size()},
                            {"diameter", cl.diameter},
                            {"dim", cl.dim}});
  }
  j["clusters"] = clusters;
  Json forms = Json::array();
  for (const auto& piece : c.initial_forms) forms.push_back(strings(piece));
  j["initial_forms"] = forms;
  Json link = Json::array();
  if (!c.link_samples.empty())
    for (const auto& d : c.link()) link.push_back(to_json(d));
  j["link"] = link;
  return j;
}

Json to_json(const FiberEstimate& f) {
  Json j;
  j["ray"] = to_json(f.ray);
  j["widened"] = f.widened;
  j["stabilized"] = f.stabilized;
  j["dropped_minor"] = f.dropped_minor;
  Json scales = Json::array();
  for (std::size_t i = 0; i < f.scales.size(); ++i) {
    scales.push_back(Json{{"k", f.scales[i]},
                          {"r", f.radii[i]},
                          {"aperture", f.apertures[i]},
                          {"planes", planes_json(f.per_scale_planes[i])}});
  }
  j["per_scale_planes"] = scales;
  Json clusters = Json::array();
  for (const auto& c : f.clusters) {
    Json trace = Json::array();
    for (double t : c.trace) trace.push_back(finite_or_null(t));
    clusters.push_back(Json{{"representative", to_json(c.representative)},
                            {"diameter", c.diameter},
                            {"dim_estimate", c.dim_estimate},
                            {"stabilized", c.stabilized},
                            {"drift_tail", finite_or_null(c.drift_tail)},
                            {"trace", trace},
                            {"members", planes_json(c.members)}});
  }
  j["limit_clusters"] = clusters;
  Json comps = Json::array();
  for (const auto& c : fiber_connectivity(f)) comps.push_back(Json{{"size", c.planes.size()}, {"dim_estimate", c.dim_estimate}});
  j["components"] = comps;
  return j;
}

FiberEstimate fiber_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "fiber must be a JSON object");
  FiberEstimate f;
  try {
    f.ray = vec_from_json(j.at("ray"));
    f.widened = j.value("widened", false);
    f.stabilized = j.at("stabilized").get<bool>();
    f.dropped_minor = j.value("dropped_minor", 0);
    for (const auto& s : j.at("per_scale_planes")) {
      f.scales.push_back(s.at("k").get<int>());
      f.radii.push_back(s.at("r").get<double>());
      f.apertures.push_back(s.at("aperture").get<double>());
      f.per_scale_planes.push_back(planes_from_json(s.at("planes")));
    }
    for (const auto& c : j.at("limit_clusters")) {
      FiberCluster fc{grasspoint_from_json(c.at("representative")), planes_from_json(c.at("members")),
                      c.at("diameter").get<double>(), c.at("dim_estimate").get<int>(), c.at("stabilized").get<bool>(),
                      {}, number_or_inf(c.value("drift_tail", Json(0.0)))};
      for (const auto& t : c.at("trace")) fc.trace.push_back(number_or_inf(t));
      f.clusters.push_back(std::move(fc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("fiber JSON: ") + e.what());
  }
  return f;
}

Json to_json(const RayClassification& rc, bool include_fiber) {
  const auto& e = rc.evidence;
  Json ev;
  ev["cone_distance"] = finite_or_null(e.cone_distance);
  ev["fiber_diameter"] = e.fiber_diameter;
  ev["distance_to_TvC"] = finite_or_null(e.distance_to_TvC);
  ev["contains_TvC_min_angle"] = finite_or_null(e.contains_TvC_min_angle);
  ev["cluster_count"] = e.cluster_count;
  ev["cvc_is_d_plane"] = e.cvc_is_d_plane;
  ev["singular_flag"] = e.singular_flag;
  ev["in_cprime"] = e.in_cprime;
  ev["predicted_exceptional"] = e.predicted_exceptional;
  ev["stabilized"] = e.stabilized;
  ev["in_Eprime"] = e.eprime ? Json(*e.eprime) : Json(nullptr);
  ev["tvc_dim"] = e.tvc_dim;
  Json j;
  j["ray"] = to_json(rc.ray);
  j["verdict"] = to_string(rc.verdict);
  j["evidence"] = ev;
  j["thresholds"] = Json{{"eps_g", rc.eps_g}, {"link_eps", kLinkEps}};
  if (!rc.note.empty()) j["note"] = rc.note;
  if (include_fiber && rc.fiber) j["fiber"] = to_json(*rc.fiber);
  return j;
}

}  // namespace nashfiber
