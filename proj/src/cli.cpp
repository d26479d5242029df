#include "qgeom/cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "qgeom/models.hpp"
#include "qgeom/rays.hpp"

namespace qgeom::cli {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kShellTol = 1e-10;

// ---------------------------------------------------------------- config

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_as(const json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + " has the wrong type");
  }
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + " must be finite");
  return d;
}

int get_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
  return v.get<int>();
}

bool get_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
  return v.get<bool>();
}

std::vector<double> get_vector(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(get_number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Interval> get_box(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of [lower, upper] pairs");
  std::vector<Interval> box;
  for (size_t i = 0; i < v.size(); ++i) {
    const std::vector<double> pair = get_vector(v[i], where + "[" + std::to_string(i) + "]");
    if (pair.size() != 2 || !(pair[0] < pair[1]))
      throw ConfigError(where + "[" + std::to_string(i) + "] must be [lower, upper] with lower < upper");
    box.push_back({pair[0], pair[1]});
  }
  return box;
}

const std::map<std::string, std::set<std::string>>& model_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"minkowski", {"name", "m", "q", "E", "B"}},
      {"hyperbolic", {"name", "variant", "a", "m", "q", "E", "B"}},
      {"hyperbolic-half-plane", {"name", "a", "m", "q", "E", "B"}},
      {"hyperbolic-disk", {"name", "a", "m", "q", "E", "B"}},
      {"bloch", {"name"}},
      {"random", {"name", "n", "rank", "dim", "negative", "scale"}},
  };
  return keys;
}

ModelConfig parse_model(const json& v) {
  if (!v.is_object()) throw ConfigError("model must be an object");
  if (!v.contains("name") || !v["name"].is_string()) throw ConfigError("model.name is required");
  ModelConfig mc;
  mc.name = v["name"].get<std::string>();
  const auto it = model_keys().find(mc.name);
  if (it == model_keys().end()) throw ModelError("unknown model '" + mc.name + "'");
  reject_unknown(v, it->second, "model (" + mc.name + ")");
  if (mc.name == "hyperbolic") {
    if (!v.contains("variant") || !v["variant"].is_string())
      throw ConfigError("model.variant is required for the hyperbolic model");
    const std::string variant = v["variant"].get<std::string>();
    if (variant != "half-plane" && variant != "disk")
      throw ModelError("unknown hyperbolic variant '" + variant + "'");
    mc.name = "hyperbolic-" + variant;
  }
  if (v.contains("a")) mc.a = get_number(v["a"], "model.a");
  if (v.contains("m")) mc.m = get_number(v["m"], "model.m");
  if (v.contains("q")) mc.q = get_number(v["q"], "model.q");
  if (v.contains("E")) mc.E = get_number(v["E"], "model.E");
  if (v.contains("B")) mc.B = get_number(v["B"], "model.B");
  if (v.contains("n")) mc.n = get_int(v["n"], "model.n");
  if (v.contains("rank")) mc.rank = get_int(v["rank"], "model.rank");
  if (v.contains("dim")) mc.dim = get_int(v["dim"], "model.dim");
  if (v.contains("negative")) mc.negative = get_int(v["negative"], "model.negative");
  if (v.contains("scale")) mc.scale = get_number(v["scale"], "model.scale");
  return mc;
}

// ---------------------------------------------------------------- models

struct ResolvedModel {
  std::string name;
  std::optional<SpacetimeModel> spacetime;
  std::vector<std::string> coord_names;
  std::vector<Interval> default_box;
  double default_step = 0.02;
};

SpacetimeModel make_spacetime(const ModelConfig& mc) {
  const FieldConfig em{mc.E, mc.B};
  if (mc.name == "minkowski") return minkowski_model(mc.m, mc.q, em);
  const auto variant =
      mc.name == "hyperbolic-disk" ? HyperbolicChart::disk : HyperbolicChart::half_plane;
  return hyperbolic_model(mc.a, variant, mc.m, mc.q, em);
}

RandomModelOptions random_options(const ModelConfig& mc, double step) {
  RandomModelOptions o;
  o.n = mc.n;
  o.m = mc.rank;
  o.dim = mc.dim;
  o.negative = mc.negative;
  o.scale = mc.scale;
  o.step = step;
  return o;
}

ResolvedModel resolve_model(const ModelConfig& mc) {
  ResolvedModel rm;
  rm.name = mc.name;
  try {
    if (mc.name == "bloch") {
      rm.coord_names = {"theta", "phi"};
      rm.default_box = {{0.3, kPi - 0.3}, {-3.0, 3.0}};
      rm.default_step = 0.02;
      return rm;
    }
    if (mc.name == "random") {
      if (mc.n < 2 || mc.rank < 1 || mc.rank >= mc.n || mc.dim < 1 || mc.negative < 0 ||
          mc.negative > mc.n || !(mc.scale > 0.0))
        throw ModelError("random model needs n >= 2, 1 <= rank < n, dim >= 1, 0 <= negative <= n, scale > 0");
      for (int i = 0; i < mc.dim; ++i) {
        rm.coord_names.push_back("x" + std::to_string(i + 1));
        rm.default_box.push_back({-0.3, 0.3});
      }
      rm.default_step = 0.02;
      return rm;
    }
    if (!(mc.m > 0.0)) throw ModelError("mass m must be positive");
    rm.spacetime = make_spacetime(mc);
    rm.coord_names = {"t", "x", "y", "z", "p1", "p2", "p3"};
    if (mc.name == "minkowski")
      rm.default_box = {{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}};
    else if (mc.name == "hyperbolic-half-plane")
      rm.default_box = {{-1, 1}, {0.5, 2}, {-1, 1}, {-1, 1}};
    else
      rm.default_box = {{-1, 1}, {-0.5, 0.5}, {-0.5, 0.5}, {-1, 1}};
    for (int i = 0; i < 3; ++i) rm.default_box.push_back({-1, 1});
    rm.default_step = 0.01;
    return rm;
  } catch (const Error& e) {
    throw ModelError(e.what());
  }
}

/// Sub-bundle data shared by every point of a run.
struct Problem {
  ResolvedModel model;
  std::optional<ProjectorField> pf;
  std::vector<Point> points;
  double step = 0.0;
  FdScheme scheme = FdScheme::central4;
  BaseConnection alt_base;

  bool dirac() const { return model.spacetime.has_value(); }
  FrameField frame(const Point& y) const {
    if (dirac()) return dirac_frame_field(*model.spacetime, *pf);
    return FrameField::aligned(*pf, y);
  }
};

Chart lattice_chart(const std::vector<Interval>& box) {
  std::vector<std::string> names;
  std::vector<double> steps;
  for (size_t i = 0; i < box.size(); ++i) {
    names.push_back("u" + std::to_string(i));
    steps.push_back(box[i].width() / 8.0);
  }
  return Chart(names, box, steps);
}

std::vector<Point> collect_points(const RunConfig& cfg, const ResolvedModel& rm) {
  const int dim = static_cast<int>(rm.coord_names.size());
  const bool dirac = rm.spacetime.has_value();
  std::vector<Point> pts;
  int sources = 0;
  if (!cfg.points.empty()) {
    ++sources;
    for (size_t i = 0; i < cfg.points.size(); ++i) {
      if (cfg.points[i].size() != dim)
        throw ConfigError("points[" + std::to_string(i) + "] needs " + std::to_string(dim) +
                          " coordinates");
      pts.push_back(cfg.points[i]);
    }
  }
  if (cfg.grid) {
    ++sources;
    const GridSpec& g = *cfg.grid;
    const int gdim = static_cast<int>(g.counts.size());
    if (gdim != dim && !(dirac && gdim == 4))
      throw ConfigError("grid.counts needs " + std::to_string(dim) + " entries" +
                        (dirac ? " (or 4 with a fixed momentum)" : ""));
    for (int c : g.counts)
      if (c < 1) throw ConfigError("grid.counts entries must be >= 1");
    std::vector<Interval> box = g.box.empty()
                                    ? std::vector<Interval>(rm.default_box.begin(),
                                                            rm.default_box.begin() + gdim)
                                    : g.box;
    if (static_cast<int>(box.size()) != gdim)
      throw ConfigError("grid.box needs one interval per grid axis");
    std::vector<Point> lattice;
    try {
      lattice = grid_points(lattice_chart(box), g.counts, g.margin);
    } catch (const Error& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
    for (const Point& p : lattice) {
      if (gdim == dim) {
        pts.push_back(p);
      } else {
        Point y(7);
        y << p, cfg.momentum[0], cfg.momentum[1], cfg.momentum[2];
        pts.push_back(y);
      }
    }
  }
  if (cfg.sample) {
    ++sources;
    const SampleSpec& s = *cfg.sample;
    if (s.count < 1) throw ConfigError("sample.count must be >= 1");
    const std::vector<Interval> box = s.box.empty() ? rm.default_box : s.box;
    if (static_cast<int>(box.size()) != dim)
      throw ConfigError("sample.box needs " + std::to_string(dim) + " intervals");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long attempts = 0;
    int accepted = 0;
    while (accepted < s.count) {
      if (++attempts > 1000L * s.count) throw ConfigError("sample box rarely meets the chart domain");
      Point p(dim);
      for (int i = 0; i < dim; ++i) p[i] = box[i].lower + box[i].width() * u(rng);
      if (dirac && !rm.spacetime->chart.contains(p.head(4))) continue;
      pts.push_back(p);
      ++accepted;
    }
  }
  if (sources == 0) throw ConfigError("one of points, grid or sample is required");
  return pts;
}

Problem build_problem(const RunConfig& cfg) {
  Problem pr;
  pr.model = resolve_model(cfg.model);
  pr.points = collect_points(cfg, pr.model);
  pr.step = cfg.step.value_or(pr.model.default_step);
  pr.scheme = cfg.scheme;
  const int dim = static_cast<int>(pr.model.coord_names.size());
  try {
    if (pr.model.name == "bloch") {
      pr.pf = bloch_projector(pr.step);
    } else if (pr.model.name == "random") {
      pr.pf = random_projector_model(cfg.seed, random_options(cfg.model, pr.step));
    } else {
      double extent = 4.0;
      for (const Point& p : pr.points)
        extent = std::max(extent, 2.0 * p.tail(3).cwiseAbs().maxCoeff() + 1.0);
      pr.pf = dirac_projector_field(*pr.model.spacetime,
                                    phase_chart(*pr.model.spacetime, extent, std::min(pr.step, 0.1)));
    }
  } catch (const Error& e) {
    throw ModelError(e.what());
  }
  for (size_t i = 0; i < pr.points.size(); ++i)
    if (!pr.pf->chart().contains(pr.points[i])) {
      std::ostringstream os;
      os << "point " << i << " (" << pr.points[i].transpose() << ") lies outside the chart";
      throw ConfigError(os.str());
    }

  // second torsion-free base connection for the Codazzi cross-check
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  pr.alt_base = zero_base_connection(dim);
  for (auto& g : pr.alt_base)
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b) g(a, b) = g(b, a) = u(rng);
  return pr;
}

// ---------------------------------------------------------------- helpers

template <typename Fn>
void parallel_for(size_t count, int workers, Fn&& fn) {
  std::atomic<size_t> next{0};
  auto body = [&] {
    for (size_t i = next++; i < count; i = next++) fn(i);
  };
  const size_t extra = std::min(static_cast<size_t>(std::max(workers, 1)), count);
  std::vector<std::thread> pool;
  for (size_t w = 1; w < extra; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const Point& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

json model_echo(const Problem& pr) {
  return json{{"name", pr.model.name}, {"coordinates", pr.model.coord_names}};
}

json report_header(const std::string& command, const RunConfig& cfg) {
  return json{{"schema", 1},
              {"command", command},
              {"timestamp", timestamp()},
              {"config", cfg.source}};
}

// ---------------------------------------------------------------- verify

using Residuals = std::vector<std::pair<std::string, double>>;

Residuals identities_at(const Problem& pr, const Point& y, double h) {
  const ProjectorField& pf = *pr.pf;
  Residuals r;
  const ProjectorResiduals p = projector_residuals(pf, y);
  r.emplace_back("projector_idempotency", p.idempotency);
  r.emplace_back("projector_h_compat", p.h_compat);
  r.emplace_back("projector_trace", p.trace);
  r.emplace_back("compatibility", check_compatibility(pf.bundle(), y, h, pr.scheme));
  const FrameField ff = pr.frame(y);
  const AdaptedFrame frame = ff.at(y);
  r.emplace_back("adjointness", adjointness_residual(pf, frame, h, pr.scheme));
  const GaussResiduals g = gauss_residuals(ff, y, h, pr.scheme);
  r.emplace_back("gauss_parallel", g.parallel);
  r.emplace_back("gauss_perp", g.perp);
  const CodazziResiduals c =
      codazzi_residuals(ff, y, h, zero_base_connection(pf.chart().dim()), pr.alt_base, pr.scheme);
  r.emplace_back("codazzi_parallel", c.parallel);
  r.emplace_back("codazzi_perp", c.perp);
  r.emplace_back("codazzi_independence", c.independence);
  const QgtReport q = qgt(ff, y, h, pr.scheme);
  r.emplace_back("qgt_symmetric", q.symmetric_residual);
  r.emplace_back("qgt_hermiticity", q.hermiticity_residual);
  r.emplace_back("qgt_decomposition", q.antisymmetric_residual);
  r.emplace_back("qgt_alt_transport", q.alt_transport_residual);
  r.emplace_back("qgt_alt_projector", q.alt_projector_residual);
  if (pr.dirac()) {
    const AnalyticResiduals a =
        compare_with_analytic(*pr.model.spacetime, phase_point(*pr.model.spacetime, y), h, pr.scheme);
    r.emplace_back("analytic_Q", a.Q);
    r.emplace_back("analytic_G", a.G);
    r.emplace_back("analytic_F", a.F);
  }
  return r;
}

json order_value(double at_h, double at_half) {
  if (!(at_h > 1e-13) || !(at_half > 1e-13)) return nullptr;
  return std::log2(at_h / at_half);
}

}  // namespace

// ---------------------------------------------------------------- public

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> tol{
      {"projector_idempotency", 1e-10}, {"projector_h_compat", 1e-10},
      {"projector_trace", 1e-10},       {"compatibility", 1e-8},
      {"adjointness", 1e-5},            {"gauss_parallel", 1e-5},
      {"gauss_perp", 1e-5},             {"codazzi_parallel", 1e-5},
      {"codazzi_perp", 1e-5},           {"codazzi_independence", 1e-8},
      {"qgt_symmetric", 1e-10},         {"qgt_hermiticity", 1e-10},
      {"qgt_decomposition", 1e-5},      {"qgt_alt_transport", 1e-5},
      {"qgt_alt_projector", 1e-5},      {"analytic_Q", 1e-5},
      {"analytic_G", 1e-5},             {"analytic_F", 1e-5},
  };
  return tol;
}

RunConfig parse_config(const json& doc) {
  reject_unknown(doc,
                 {"model", "points", "grid", "sample", "momentum", "fd", "tolerances", "output",
                  "seed", "eval", "rays", "trace"},
                 "config");
  RunConfig cfg;
  cfg.source = doc;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (!doc.contains("model")) throw ConfigError("model is required");
  cfg.model = parse_model(doc["model"]);

  if (doc.contains("points")) {
    const json& pts = doc["points"];
    if (!pts.is_array() || pts.empty()) throw ConfigError("points must be a non-empty array");
    for (size_t i = 0; i < pts.size(); ++i) {
      const std::vector<double> v = get_vector(pts[i], "points[" + std::to_string(i) + "]");
      cfg.points.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    reject_unknown(g, {"counts", "box", "margin"}, "grid");
    GridSpec spec;
    if (!g.contains("counts") || !g["counts"].is_array()) throw ConfigError("grid.counts is required");
    for (size_t i = 0; i < g["counts"].size(); ++i)
      spec.counts.push_back(get_int(g["counts"][i], "grid.counts[" + std::to_string(i) + "]"));
    if (g.contains("box")) spec.box = get_box(g["box"], "grid.box");
    if (g.contains("margin")) spec.margin = get_number(g["margin"], "grid.margin");
    if (spec.margin < 0.0) throw ConfigError("grid.margin must be >= 0");
    cfg.grid = spec;
  }
  if (doc.contains("sample")) {
    const json& s = doc["sample"];
    reject_unknown(s, {"count", "box"}, "sample");
    SampleSpec spec;
    if (!s.contains("count")) throw ConfigError("sample.count is required");
    spec.count = get_int(s["count"], "sample.count");
    if (s.contains("box")) spec.box = get_box(s["box"], "sample.box");
    cfg.sample = spec;
  }
  if (doc.contains("momentum")) {
    cfg.momentum = get_vector(doc["momentum"], "momentum");
    if (cfg.momentum.size() != 3) throw ConfigError("momentum needs 3 components");
  }
  if (doc.contains("fd")) {
    const json& fd = doc["fd"];
    reject_unknown(fd, {"step", "scheme"}, "fd");
    if (fd.contains("step")) {
      cfg.step = get_number(fd["step"], "fd.step");
      if (!(*cfg.step > 0.0) || *cfg.step > 0.1) throw ConfigError("fd.step must lie in (0, 0.1]");
    }
    if (fd.contains("scheme")) {
      try {
        cfg.scheme = parse_scheme(get_as<std::string>(fd["scheme"], "fd.scheme"));
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    if (!t.is_object()) throw ConfigError("tolerances must be an object");
    for (const auto& [key, value] : t.items()) {
      if (!default_tolerances().count(key)) throw ConfigError("unknown tolerance '" + key + "'");
      const double v = get_number(value, "tolerances." + key);
      if (!(v > 0.0)) throw ConfigError("tolerance '" + key + "' must be > 0");
      cfg.tolerances[key] = v;
    }
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    reject_unknown(o, {"path", "format", "tidy"}, "output");
    if (o.contains("path")) cfg.out_dir = get_as<std::string>(o["path"], "output.path");
    if (o.contains("format")) {
      cfg.format = get_as<std::string>(o["format"], "output.format");
      if (cfg.format != "json" && cfg.format != "csv")
        throw ConfigError("output.format must be json or csv");
    }
    if (o.contains("tidy")) cfg.tidy = get_bool(o["tidy"], "output.tidy");
  }
  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    reject_unknown(e, {"what"}, "eval");
    if (e.contains("what")) {
      cfg.what = get_as<std::string>(e["what"], "eval.what");
      if (cfg.what != "qgt" && cfg.what != "metric" && cfg.what != "berry" && cfg.what != "shape")
        throw ConfigError("eval.what must be one of qgt, metric, berry, shape");
    }
  }
  if (doc.contains("rays")) {
    const json& rays = doc["rays"];
    if (!rays.is_array()) throw ConfigError("rays must be an array");
    for (size_t i = 0; i < rays.size(); ++i) {
      const std::string where = "rays[" + std::to_string(i) + "]";
      reject_unknown(rays[i], {"x", "k"}, where);
      if (!rays[i].contains("x") || !rays[i].contains("k"))
        throw ConfigError(where + " needs x and k");
      RayInput r{get_vector(rays[i]["x"], where + ".x"), get_vector(rays[i]["k"], where + ".k")};
      if (r.x.size() != 4) throw ConfigError(where + ".x needs 4 components");
      if (r.k.size() != 3 && r.k.size() != 4)
        throw ConfigError(where + ".k needs 3 spatial or 4 covariant components");
      cfg.rays.push_back(std::move(r));
    }
  }
  if (doc.contains("trace")) {
    const json& t = doc["trace"];
    reject_unknown(t, {"tau_end", "dt", "spinor", "no_name", "halving"}, "trace");
    if (t.contains("tau_end")) cfg.trace.tau_end = get_number(t["tau_end"], "trace.tau_end");
    if (t.contains("dt")) cfg.trace.dt = get_number(t["dt"], "trace.dt");
    if (t.contains("spinor")) cfg.trace.spinor = get_bool(t["spinor"], "trace.spinor");
    if (t.contains("no_name")) cfg.trace.no_name = get_bool(t["no_name"], "trace.no_name");
    if (t.contains("halving")) cfg.trace.halving = get_bool(t["halving"], "trace.halving");
    if (!(cfg.trace.dt > 0.0)) throw ConfigError("trace.dt must be > 0");
    if (!(cfg.trace.tau_end >= 0.0)) throw ConfigError("trace.tau_end must be >= 0");
  }
  return cfg;
}

json models_listing() {
  json spacetime_params = {{"m", 1.0}, {"q", 0.0}, {"E", 0.0}, {"B", 0.0}};
  json hyperbolic_params = spacetime_params;
  hyperbolic_params["a"] = 1.0;
  return json{
      {"schema", 1},
      {"models",
       json::array({
           {{"name", "minkowski"},
            {"chart", {"t", "x", "y", "z", "p1", "p2", "p3"}},
            {"parameters", spacetime_params}},
           {{"name", "hyperbolic-half-plane"},
            {"chart", {"t", "x", "y", "z", "p1", "p2", "p3"}},
            {"parameters", hyperbolic_params}},
           {{"name", "hyperbolic-disk"},
            {"chart", {"t", "x", "y", "z", "p1", "p2", "p3"}},
            {"parameters", hyperbolic_params}},
           {{"name", "bloch"}, {"chart", {"theta", "phi"}}, {"parameters", json::object()}},
           {{"name", "random"},
            {"chart", "x1..x<dim>"},
            {"parameters",
             {{"n", 3}, {"rank", 1}, {"dim", 2}, {"negative", 0}, {"scale", 0.3}}},
            {"seeded", true}},
       })},
      {"aliases", {{"hyperbolic", "hyperbolic-<variant>, variant = half-plane | disk"}}},
  };
}

json cmd_verify(const RunConfig& cfg, int workers) {
  const Problem pr = build_problem(cfg);
  std::map<std::string, double> tol = default_tolerances();
  for (const auto& [k, v] : cfg.tolerances) tol[k] = v;

  std::vector<json> per_point(pr.points.size());
  parallel_for(pr.points.size(), workers, [&](size_t i) {
    const Point& y = pr.points[i];
    json records = json::array();
    try {
      const Residuals a = identities_at(pr, y, pr.step);
      const Residuals b = identities_at(pr, y, pr.step / 2.0);
      for (size_t k = 0; k < a.size(); ++k) {
        const double t = tol.at(a[k].first);
        records.push_back({{"identity", a[k].first},
                           {"residual", a[k].second},
                           {"residual_half_step", b[k].second},
                           {"order", order_value(a[k].second, b[k].second)},
                           {"tolerance", t},
                           {"pass", b[k].second <= t}});
      }
    } catch (const Error& e) {
      records.push_back({{"identity", "evaluation"}, {"error", e.what()}, {"pass", false}});
    }
    per_point[i] = {{"index", i}, {"coordinates", to_json(y)}, {"records", records}};
  });

  size_t total = 0, passed = 0;
  for (const json& p : per_point)
    for (const json& r : p["records"]) {
      ++total;
      if (r["pass"].get<bool>()) ++passed;
    }
  json report = report_header("verify", cfg);
  report["model"] = model_echo(pr);
  report["fd"] = {{"step", pr.step}, {"half_step", pr.step / 2.0}, {"scheme", to_string(pr.scheme)}};
  report["tolerances"] = tol;
  report["points"] = per_point;
  report["summary"] = {{"points", pr.points.size()},
                       {"records", total},
                       {"passed", passed},
                       {"failed", total - passed}};
  report["pass"] = total == passed;
  return report;
}

namespace {

void flatten(json& columns, json& row, const std::string& prefix,
             const std::vector<std::string>& names, const PairTensor& t) {
  const int d = t.dim();
  const Eigen::Index m = t(0, 0).rows();
  for (Eigen::Index A = 0; A < m; ++A)
    for (Eigen::Index B = 0; B < t(0, 0).cols(); ++B)
      for (int mu = 0; mu < d; ++mu)
        for (int nu = 0; nu < d; ++nu) {
          const cplx v = t(mu, nu)(A, B);
          const std::string base = prefix + "." + std::to_string(A) + "." + std::to_string(B) +
                                   "." + names[mu] + "." + names[nu];
          columns.push_back(base + ".re");
          columns.push_back(base + ".im");
          row.push_back(v.real());
          row.push_back(v.imag());
        }
}

void flatten_diff(json& columns, json& row, const std::string& prefix,
                  const std::vector<std::string>& names, const PairTensor& a, const PairTensor& b) {
  const int d = a.dim();
  for (Eigen::Index A = 0; A < a(0, 0).rows(); ++A)
    for (Eigen::Index B = 0; B < a(0, 0).cols(); ++B)
      for (int mu = 0; mu < d; ++mu)
        for (int nu = 0; nu < d; ++nu) {
          columns.push_back(prefix + "." + std::to_string(A) + "." + std::to_string(B) + "." +
                            names[mu] + "." + names[nu]);
          row.push_back(std::abs(a(mu, nu)(A, B) - b(mu, nu)(A, B)));
        }
}

void flatten_shape(json& columns, json& row,
                   const std::vector<std::string>& names, const OneForm& s) {
  for (Eigen::Index I = 0; I < s[0].rows(); ++I)
    for (Eigen::Index A = 0; A < s[0].cols(); ++A)
      for (size_t mu = 0; mu < s.size(); ++mu) {
        const std::string base =
            "S." + std::to_string(I) + "." + std::to_string(A) + "." + names[mu];
        columns.push_back(base + ".re");
        columns.push_back(base + ".im");
        row.push_back(s[mu](I, A).real());
        row.push_back(s[mu](I, A).imag());
      }
}

}  // namespace

json cmd_eval(const RunConfig& cfg, int workers) {
  const Problem pr = build_problem(cfg);
  const std::vector<std::string>& names = pr.model.coord_names;
  const std::string& what = cfg.what;
  const std::string symbol = what == "qgt" ? "Q" : what == "metric" ? "G" : what == "berry" ? "F" : "S";

  std::vector<json> rows(pr.points.size());
  std::vector<json> columns(pr.points.size());
  std::vector<std::string> errors(pr.points.size());
  parallel_for(pr.points.size(), workers, [&](size_t i) {
    const Point& y = pr.points[i];
    json cols = json::array(), row = json::array();
    for (size_t k = 0; k < names.size(); ++k) {
      cols.push_back(names[k]);
      row.push_back(y[static_cast<Eigen::Index>(k)]);
    }
    try {
      const SubGeometryPoint sp = evaluate_point(pr.frame(y), y, pr.step, pr.scheme);
      if (what == "shape") {
        flatten_shape(cols, row, names, sp.S.up);
      } else {
        const PairTensor& num = what == "qgt" ? sp.Q : what == "metric" ? sp.G : sp.F;
        flatten(cols, row, symbol, names, num);
        if (pr.dirac()) {
          const AnalyticQgt ana = analytic_qgt(*pr.model.spacetime,
                                               phase_point(*pr.model.spacetime, y), sp.frame.parallel);
          const PairTensor& ref = what == "qgt" ? ana.Q : what == "metric" ? ana.G : ana.F;
          flatten(cols, row, "analytic_" + symbol, names, ref);
          flatten_diff(cols, row, "absdiff_" + symbol, names, num, ref);
        }
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    }
    rows[i] = std::move(row);
    columns[i] = std::move(cols);
  });

  json report = report_header("eval", cfg);
  report["model"] = model_echo(pr);
  report["what"] = what;
  report["fd"] = {{"step", pr.step}, {"scheme", to_string(pr.scheme)}};
  report["index_order"] = what == "shape" ? "I, A, mu row-major; complex as (re, im) pairs"
                                          : "A, B, mu, nu row-major; complex as (re, im) pairs";
  json failures = json::array();
  json ok_rows = json::array();
  json header;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) {
      failures.push_back({{"index", i}, {"coordinates", to_json(pr.points[i])}, {"error", errors[i]}});
      continue;
    }
    if (header.is_null()) header = columns[i];
    ok_rows.push_back(rows[i]);
  }
  report["columns"] = header.is_null() ? json::array() : header;
  report["rows"] = ok_rows;
  report["failures"] = failures;
  return report;
}

json cmd_trace(const RunConfig& cfg, int workers, const std::string& out_dir) {
  const ResolvedModel rm = resolve_model(cfg.model);
  if (!rm.spacetime) throw ModelError("trace needs a spacetime model, not '" + rm.name + "'");
  const SpacetimeModel& model = *rm.spacetime;
  if (cfg.rays.empty()) throw ConfigError("trace needs at least one entry in rays");

  std::vector<RayState> initial;
  for (size_t i = 0; i < cfg.rays.size(); ++i) {
    const RayInput& in = cfg.rays[i];
    Point x(4);
    x << in.x[0], in.x[1], in.x[2], in.x[3];
    if (!model.chart.contains(x))
      throw ConfigError("rays[" + std::to_string(i) + "].x lies outside the chart");
    try {
      RayState s = initial_ray(model, x, Eigen::Vector3d(in.k[in.k.size() - 3], in.k[in.k.size() - 2],
                                                         in.k[in.k.size() - 1]));
      if (in.k.size() == 4) {
        const PhasePoint pp{x, s.k.tail(3), in.k[0]};
        const double r = shell_residual(model, pp);
        if (!(std::abs(r) <= kShellTol)) {
          std::ostringstream os;
          os << "rays[" << i << "] is off shell: g^{mu nu} k_mu k_nu + m^2 = " << r;
          throw OffShellInput(os.str());
        }
        s.k[0] = in.k[0];
      }
      initial.push_back(s);
    } catch (const Error& e) {
      throw ModelError("rays[" + std::to_string(i) + "]: " + e.what());
    }
  }

  RayOptions opts;
  opts.tau_end = cfg.trace.tau_end;
  opts.dt = cfg.trace.dt;
  opts.no_name = cfg.trace.no_name;

  auto run_one = [&](const RayState& r0, const RayOptions& o) {
    const Trajectory t = integrate_ray(model, r0, o);
    return cfg.trace.spinor ? transport_spinor(model, t, r0.psi) : t;
  };

  std::vector<json> summaries(initial.size());
  std::vector<std::string> csv(initial.size());
  parallel_for(initial.size(), workers, [&](size_t i) {
    json s{{"index", i}};
    try {
      const Trajectory t = run_one(initial[i], opts);
      double kz = 0.0;
      for (const auto& p : t.points)
        kz = std::max(kz, std::abs(p.state.k[3] - initial[i].k[3]));
      s["status"] = "ok";
      s["steps"] = t.points.size() - 1;
      s["h_drift_max"] = t.max_h_drift();
      s["h_drift_final"] = t.points.back().h_drift;
      s["kz_drift"] = kz;
      s["shell_residual_max"] = t.max_shell_residual(model);
      if (t.has_spinor) {
        s["norm_drift_max"] = t.max_norm_drift();
        s["kernel_residual_max"] = t.max_kernel_residual();
      }
      if (cfg.trace.halving) {
        RayOptions half = opts;
        half.dt = opts.dt / 2.0;
        const Trajectory th = run_one(initial[i], half);
        const double a = t.max_h_drift(), b = th.max_h_drift();
        json hj{{"dt", half.dt},
                {"h_drift_max", b},
                {"h_drift_final", th.points.back().h_drift},
                {"h_drift_ratio", b > 0.0 ? json(a / b) : json()}};
        if (th.has_spinor) {
          hj["norm_drift_max"] = th.max_norm_drift();
          hj["kernel_residual_max"] = th.max_kernel_residual();
        }
        s["halving"] = hj;
      }
      std::ostringstream os;
      write_trajectory_csv(os, t);
      csv[i] = os.str();
      s["csv"] = "ray_" + std::to_string(i) + ".csv";
    } catch (const Error& e) {
      const ErrorKind k = e.kind();
      s["status"] = k == ErrorKind::LeftDomain      ? "left_domain"
                    : k == ErrorKind::StepRejected  ? "step_rejected"
                    : k == ErrorKind::KernelCollapse ? "kernel_collapse"
                                                     : "error";
      s["message"] = e.what();
    }
    summaries[i] = std::move(s);
  });

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (size_t i = 0; i < csv.size(); ++i) {
      if (csv[i].empty()) continue;
      std::ofstream f(std::filesystem::path(out_dir) / ("ray_" + std::to_string(i) + ".csv"));
      f << csv[i];
    }
  }

  json report = report_header("trace", cfg);
  report["model"] = {{"name", rm.name}};
  report["options"] = {{"tau_end", opts.tau_end},
                       {"dt", opts.dt},
                       {"spinor", cfg.trace.spinor},
                       {"no_name", opts.no_name},
                       {"halving", cfg.trace.halving}};
  report["rays"] = summaries;
  size_t ok = 0;
  for (const json& s : summaries)
    if (s["status"] == "ok") ++ok;
  report["summary"] = {{"rays", summaries.size()}, {"completed", ok}};
  return report;
}

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

void write_eval_csv(std::ostream& out, const json& report) {
  const json& cols = report["columns"];
  for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i].get<std::string>();
  out << '\n';
  for (const json& row : report["rows"]) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
    out << '\n';
  }
}

void write_eval_tidy_csv(std::ostream& out, const json& report) {
  const json& cols = report["columns"];
  const size_t ncoord = report["model"]["coordinates"].size();
  out << "point,tensor,component,value\n";
  size_t index = 0;
  for (const json& row : report["rows"]) {
    for (size_t i = ncoord; i < row.size(); ++i) {
      const std::string name = cols[i].get<std::string>();
      const size_t dot = name.find('.');
      out << index << ',' << name.substr(0, dot) << ',' << name.substr(dot + 1) << ','
          << csv_cell(row[i]) << '\n';
    }
    ++index;
  }
}

void write_verify_csv(std::ostream& out, const json& report) {
  out << "point,identity,residual,residual_half_step,order,tolerance,pass\n";
  for (const json& p : report["points"])
    for (const json& r : p["records"]) {
      out << p["index"].get<size_t>() << ',' << r["identity"].get<std::string>() << ','
          << csv_cell(r.value("residual", json())) << ','
          << csv_cell(r.value("residual_half_step", json())) << ','
          << csv_cell(r.value("order", json())) << ',' << csv_cell(r.value("tolerance", json()))
          << ',' << (r["pass"].get<bool>() ? "true" : "false") << '\n';
    }
}

namespace {

std::string resolve_out_dir(const std::string& flag, const RunConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("QGEOM_OUT_DIR"); env && *env) return env;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  return ".";
}

json load_json(const std::string& path, std::istream& in) {
  try {
    if (path == "-") return json::parse(in);
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Quantum geometry of projector sub-bundles: verification, evaluation, ray tracing",
               "qgeom"};
  app.require_subcommand(1);
  std::string config_path, out_flag, format;
  std::string what;
  int workers = 1;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration (path or - for stdin)")
        ->required();
    sub->add_option("--out", out_flag, "output directory");
    sub->add_option("--workers", workers, "concurrent points or rays")->check(CLI::PositiveNumber);
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv"}));
  };
  CLI::App* verify = app.add_subcommand("verify", "check the sub-bundle identities on sample points");
  CLI::App* eval = app.add_subcommand("eval", "dump tensors on sample points");
  CLI::App* trace = app.add_subcommand("trace", "integrate rays and transport spinors");
  CLI::App* models = app.add_subcommand("models", "list registered models");
  common(verify);
  common(eval);
  common(trace);
  eval->add_option("what", what, "qgt, metric, berry or shape")
      ->check(CLI::IsMember({"qgt", "metric", "berry", "shape"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kConfigError;
  }

  if (models->parsed()) {
    out << models_listing().dump(2) << '\n';
    return kPass;
  }

  try {
    RunConfig cfg = parse_config(load_json(config_path, in));
    if (!format.empty()) cfg.format = format;
    if (!what.empty()) cfg.what = what;
    const std::filesystem::path dir = resolve_out_dir(out_flag, cfg);
    std::filesystem::create_directories(dir);

    if (verify->parsed()) {
      const json report = cmd_verify(cfg, workers);
      if (cfg.format == "csv") {
        std::ostringstream os;
        write_verify_csv(os, report);
        write_file(dir / "verify_report.csv", os.str());
      } else {
        write_file(dir / "verify_report.json", report.dump(2) + "\n");
      }
      const json& s = report["summary"];
      out << "verify: " << s["passed"] << "/" << s["records"] << " identity checks passed on "
          << s["points"] << " points\n";
      return report["pass"].get<bool>() ? kPass : kVerificationFailure;
    }
    if (eval->parsed()) {
      const json report = cmd_eval(cfg, workers);
      if (cfg.format == "csv") {
        std::ostringstream os;
        write_eval_csv(os, report);
        write_file(dir / "eval_report.csv", os.str());
      } else {
        write_file(dir / "eval_report.json", report.dump(2) + "\n");
      }
      if (cfg.tidy) {
        std::ostringstream os;
        write_eval_tidy_csv(os, report);
        write_file(dir / "eval_tidy.csv", os.str());
      }
      out << "eval " << cfg.what << ": " << report["rows"].size() << " points written\n";
      return report["failures"].empty() ? kPass : kModelError;
    }
    const json report = cmd_trace(cfg, workers, dir.string());
    write_file(dir / "trace_summary.json", report.dump(2) + "\n");
    out << "trace: " << report["summary"]["completed"] << "/" << report["summary"]["rays"]
        << " rays completed\n";
    return kPass;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kModelError;
  } catch (const OffShellInput& e) {
    err << "off-shell input: " << e.what() << '\n';
    return kOffShell;
  } catch (const Error& e) {
    err << "model error: " << e.what() << '\n';
    return kModelError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace qgeom::cli
