#include "wyflow/config.hpp"

#include <cmath>
#include <random>
#include <set>

#include "json.hpp"

namespace wyflow {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.count(key)) fail(path + "." + key, "unknown key");
  }
}

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  return j;
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

long get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long>();
}

std::vector<double> get_number_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

FieldSpec parse_field(const json& j, const std::string& path) {
  if (j.is_number()) return FieldSpec::constant_value(get_number(j, path));
  require_object(j, path);
  reject_unknown(j, path, {"constant", "terms", "poly_cos", "samples", "random"});
  FieldSpec spec;
  if (j.contains("constant")) spec.constant = get_number(j["constant"], path + ".constant");
  if (j.contains("terms")) {
    const json& terms = j["terms"];
    if (!terms.is_array()) fail(path + ".terms", "expected an array");
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string tp = path + ".terms[" + std::to_string(i) + "]";
      require_object(terms[i], tp);
      reject_unknown(terms[i], tp, {"kind", "axis", "frequency", "amplitude"});
      FourierTerm term;
      if (terms[i].contains("kind")) {
        const json& kind = terms[i]["kind"];
        if (kind == "cos") {
          term.kind = FourierTerm::Kind::Cos;
        } else if (kind == "sin") {
          term.kind = FourierTerm::Kind::Sin;
        } else {
          fail(tp + ".kind", "expected \"cos\" or \"sin\"");
        }
      }
      if (terms[i].contains("axis")) term.axis = static_cast<int>(get_integer(terms[i]["axis"], tp + ".axis"));
      if (terms[i].contains("frequency")) {
        term.frequency = static_cast<int>(get_integer(terms[i]["frequency"], tp + ".frequency"));
      }
      if (!terms[i].contains("amplitude")) fail(tp + ".amplitude", "required");
      term.amplitude = get_number(terms[i]["amplitude"], tp + ".amplitude");
      if (term.frequency < 0) fail(tp + ".frequency", "must be >= 0");
      if (term.axis < 0) fail(tp + ".axis", "must be >= 0");
      spec.terms.push_back(term);
    }
  }
  if (j.contains("poly_cos")) spec.poly_cos = get_number_array(j["poly_cos"], path + ".poly_cos");
  if (j.contains("samples")) {
    spec.samples = get_number_array(j["samples"], path + ".samples");
    if (j.size() != 1) fail(path + ".samples", "cannot be combined with other field keys");
  }
  if (j.contains("random")) {
    const std::string rp = path + ".random";
    require_object(j["random"], rp);
    reject_unknown(j["random"], rp, {"amplitude", "modes"});
    if (j["random"].contains("amplitude")) spec.random_amplitude = get_number(j["random"]["amplitude"], rp + ".amplitude");
    if (j["random"].contains("modes")) spec.random_modes = static_cast<int>(get_integer(j["random"]["modes"], rp + ".modes"));
    if (spec.random_amplitude < 0.0) fail(rp + ".amplitude", "must be >= 0");
    if (spec.random_modes < 1 || spec.random_modes > 64) fail(rp + ".modes", "must lie in [1, 64]");
  }
  return spec;
}

json field_to_json(const FieldSpec& spec) {
  if (!spec.samples.empty()) return json{{"samples", spec.samples}};
  json j = json::object();
  j["constant"] = spec.constant;
  if (!spec.terms.empty()) {
    json terms = json::array();
    for (const auto& t : spec.terms) {
      terms.push_back({{"kind", t.kind == FourierTerm::Kind::Cos ? "cos" : "sin"},
                       {"axis", t.axis},
                       {"frequency", t.frequency},
                       {"amplitude", t.amplitude}});
    }
    j["terms"] = terms;
  }
  if (!spec.poly_cos.empty()) j["poly_cos"] = spec.poly_cos;
  if (spec.random_amplitude > 0.0) j["random"] = {{"amplitude", spec.random_amplitude}, {"modes", spec.random_modes}};
  return j;
}

void validate_field(const FieldSpec& spec, const GeometryConfig& g, const std::string& path) {
  if (!spec.samples.empty()) {
    const long expected = g.kind == ManifoldKind::SphereSym
                              ? g.grid_points
                              : static_cast<long>(std::pow(static_cast<double>(g.grid_points), g.k));
    if (static_cast<long>(spec.samples.size()) != expected) {
      fail(path + ".samples", "expected " + std::to_string(expected) + " values, got " + std::to_string(spec.samples.size()));
    }
  }
  if (g.kind == ManifoldKind::SphereSym && !spec.terms.empty()) fail(path + ".terms", "Fourier terms need a torus geometry");
  if (g.kind == ManifoldKind::TorusSym && !spec.poly_cos.empty()) fail(path + ".poly_cos", "poly_cos needs a sphere geometry");
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    if (spec.terms[i].axis >= g.k) {
      fail(path + ".terms[" + std::to_string(i) + "].axis", "must be below geometry.k = " + std::to_string(g.k));
    }
  }
}

bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

bool FieldSpec::is_identically_zero() const {
  if (!samples.empty()) {
    for (double s : samples) {
      if (s != 0.0) return false;
    }
    return true;
  }
  if (constant != 0.0 || random_amplitude != 0.0) return false;
  for (const auto& t : terms) {
    if (t.amplitude != 0.0 && !(t.kind == FourierTerm::Kind::Sin && t.frequency == 0)) return false;
  }
  for (double c : poly_cos) {
    if (c != 0.0) return false;
  }
  return true;
}

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  require_object(root, "config");
  reject_unknown(root, "config", {"geometry", "m", "phi0", "w0", "time", "spectral", "seed", "output"});

  RunConfig cfg;
  if (!root.contains("geometry")) fail("config.geometry", "required");
  const json& g = require_object(root["geometry"], "config.geometry");
  reject_unknown(g, "config.geometry", {"kind", "n", "k", "grid_points"});
  if (!g.contains("kind")) fail("config.geometry.kind", "required");
  if (g["kind"] == "torus") {
    cfg.geometry.kind = ManifoldKind::TorusSym;
  } else if (g["kind"] == "sphere") {
    cfg.geometry.kind = ManifoldKind::SphereSym;
  } else {
    fail("config.geometry.kind", "expected \"torus\" or \"sphere\"");
  }
  if (!g.contains("n")) fail("config.geometry.n", "required");
  const long n = get_integer(g["n"], "config.geometry.n");
  if (n < 3) fail("config.geometry.n", "dimension must be >= 3 (got " + std::to_string(n) + ")");
  if (n > 64) fail("config.geometry.n", "dimension must be <= 64 (got " + std::to_string(n) + ")");
  cfg.geometry.n = static_cast<int>(n);
  if (g.contains("k")) {
    const long k = get_integer(g["k"], "config.geometry.k");
    if (cfg.geometry.kind == ManifoldKind::SphereSym && k != 1) fail("config.geometry.k", "sphere fields are zonal; k must be 1");
    if (k < 1 || k > 3 || k > n) fail("config.geometry.k", "must lie in [1, min(3, n)]");
    cfg.geometry.k = static_cast<int>(k);
  }
  if (!g.contains("grid_points")) fail("config.geometry.grid_points", "required");
  const long points = get_integer(g["grid_points"], "config.geometry.grid_points");
  if (!is_power_of_two(points) || points < 32 || points > 1024) {
    fail("config.geometry.grid_points", "must be a power of two in [32, 1024] (got " + std::to_string(points) + ")");
  }
  cfg.geometry.grid_points = static_cast<int>(points);

  if (root.contains("m")) cfg.m = get_number(root["m"], "config.m");
  if (cfg.m < 0.0) fail("config.m", "must be >= 0");
  if (root.contains("phi0")) cfg.phi0 = parse_field(root["phi0"], "config.phi0");
  if (root.contains("w0")) cfg.w0 = parse_field(root["w0"], "config.w0");
  validate_field(cfg.phi0, cfg.geometry, "config.phi0");
  validate_field(cfg.w0, cfg.geometry, "config.w0");
  if (cfg.m == 0.0 && !cfg.phi0.is_identically_zero()) {
    throw ConfigError("config.phi0: phi0 must vanish identically when m = 0");
  }

  if (!root.contains("time")) fail("config.time", "required");
  const json& t = require_object(root["time"], "config.time");
  reject_unknown(t, "config.time", {"t_end", "dt_max", "stop_tol", "diagnostics_stride"});
  if (!t.contains("t_end")) fail("config.time.t_end", "required");
  cfg.time.t_end = get_number(t["t_end"], "config.time.t_end");
  if (cfg.time.t_end < 0.0) fail("config.time.t_end", "must be >= 0");
  if (t.contains("dt_max") && !t["dt_max"].is_null()) {
    cfg.time.dt_max = get_number(t["dt_max"], "config.time.dt_max");
    if (!(cfg.time.dt_max > 0.0)) fail("config.time.dt_max", "must be positive");
  }
  if (t.contains("stop_tol")) {
    cfg.time.stop_tol = get_number(t["stop_tol"], "config.time.stop_tol");
    if (!(cfg.time.stop_tol > 0.0 && cfg.time.stop_tol < 1.0)) fail("config.time.stop_tol", "must lie in (0, 1)");
  }
  if (t.contains("diagnostics_stride")) {
    cfg.time.diagnostics_stride = get_integer(t["diagnostics_stride"], "config.time.diagnostics_stride");
    if (cfg.time.diagnostics_stride < 1) fail("config.time.diagnostics_stride", "must be >= 1");
  }

  if (root.contains("spectral")) {
    const json& s = require_object(root["spectral"], "config.spectral");
    reject_unknown(s, "config.spectral", {"eigen_count", "newton_tol", "lojasiewicz_window"});
    if (s.contains("eigen_count")) {
      cfg.spectral.eigen_count = static_cast<int>(get_integer(s["eigen_count"], "config.spectral.eigen_count"));
      if (cfg.spectral.eigen_count < 1) fail("config.spectral.eigen_count", "must be >= 1");
    }
    if (s.contains("newton_tol")) {
      cfg.spectral.newton_tol = get_number(s["newton_tol"], "config.spectral.newton_tol");
      if (!(cfg.spectral.newton_tol > 0.0)) fail("config.spectral.newton_tol", "must be positive");
    }
    if (s.contains("lojasiewicz_window")) {
      cfg.spectral.lojasiewicz_window =
          static_cast<int>(get_integer(s["lojasiewicz_window"], "config.spectral.lojasiewicz_window"));
      if (cfg.spectral.lojasiewicz_window < 3) fail("config.spectral.lojasiewicz_window", "must be >= 3");
    }
  }
  if (root.contains("seed")) {
    const json& seed = root["seed"];
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long>() >= 0)) {
      fail("config.seed", "expected a non-negative integer");
    }
    cfg.seed = seed.get<std::uint64_t>();
  }
  if (root.contains("output")) {
    const json& o = require_object(root["output"], "config.output");
    reject_unknown(o, "config.output", {"diagnostics", "snapshot", "trajectory", "report"});
    auto path_of = [&](const char* key, std::string& dst) {
      if (!o.contains(key)) return;
      if (!o[key].is_string() || o[key].get<std::string>().empty()) {
        fail(std::string("config.output.") + key, "expected a non-empty string");
      }
      dst = o[key].get<std::string>();
    };
    path_of("diagnostics", cfg.output.diagnostics);
    path_of("snapshot", cfg.output.snapshot);
    path_of("trajectory", cfg.output.trajectory);
    path_of("report", cfg.output.report);
  }
  return cfg;
}

std::string config_to_json(const RunConfig& c, int indent) {
  json j;
  j["geometry"] = {{"kind", c.geometry.kind == ManifoldKind::TorusSym ? "torus" : "sphere"},
                   {"n", c.geometry.n},
                   {"k", c.geometry.k},
                   {"grid_points", c.geometry.grid_points}};
  j["m"] = c.m;
  j["phi0"] = field_to_json(c.phi0);
  j["w0"] = field_to_json(c.w0);
  j["time"] = {{"t_end", c.time.t_end},
               {"dt_max", std::isfinite(c.time.dt_max) ? json(c.time.dt_max) : json(nullptr)},
               {"stop_tol", c.time.stop_tol},
               {"diagnostics_stride", c.time.diagnostics_stride}};
  j["spectral"] = {{"eigen_count", c.spectral.eigen_count},
                   {"newton_tol", c.spectral.newton_tol},
                   {"lojasiewicz_window", c.spectral.lojasiewicz_window}};
  j["seed"] = c.seed;
  j["output"] = {{"diagnostics", c.output.diagnostics},
                 {"snapshot", c.output.snapshot},
                 {"trajectory", c.output.trajectory},
                 {"report", c.output.report}};
  return j.dump(indent);
}

RunConfig default_config() {
  RunConfig c;
  c.geometry = {.kind = ManifoldKind::SphereSym, .n = 3, .k = 1, .grid_points = 64};
  c.m = 1.0;
  // 1 + 0.1 cos(2 theta) = 0.9 + 0.2 cos^2(theta)
  c.w0 = FieldSpec{.constant = 0.9, .poly_cos = {0.0, 0.0, 0.2}};
  c.time.t_end = 10.0;
  return c;
}

GeometryPtr build_geometry(const RunConfig& c) {
  if (c.geometry.kind == ManifoldKind::TorusSym) {
    return Geometry::torus(c.geometry.n, c.m, c.geometry.k, c.geometry.grid_points);
  }
  return Geometry::sphere(c.geometry.n, c.m, c.geometry.grid_points);
}

Field build_field(const FieldSpec& spec, const GeometryPtr& geometry, std::uint64_t seed, std::uint64_t stream) {
  if (!spec.samples.empty()) {
    if (static_cast<Eigen::Index>(spec.samples.size()) != geometry->size()) {
      throw GeometryMismatch("sample array has " + std::to_string(spec.samples.size()) + " values, grid has " +
                             std::to_string(geometry->size()));
    }
    return Field(geometry, Eigen::Map<const Eigen::ArrayXd>(spec.samples.data(), geometry->size()));
  }
  const bool sphere = geometry->kind() == ManifoldKind::SphereSym;
  const int dims = sphere ? 1 : geometry->active_dims();

  // Random coefficients: random_coeff[d][j] = {cos, sin} for frequency j + 1.
  std::vector<std::vector<std::pair<double, double>>> random_coeff(dims);
  if (spec.random_amplitude > 0.0) {
    std::mt19937_64 engine(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    auto uniform = [&engine] { return 2.0 * static_cast<double>(engine() >> 11) * 0x1.0p-53 - 1.0; };
    for (int d = 0; d < dims; ++d) {
      for (int j = 1; j <= spec.random_modes; ++j) {
        const double a = uniform();
        const double b = uniform();
        random_coeff[d].emplace_back(a / (j * j), sphere ? 0.0 : b / (j * j));
      }
    }
  }

  return Field::sample(geometry, [&](std::span<const double> x) {
    double v = spec.constant;
    for (const auto& t : spec.terms) {
      const double arg = t.frequency * x[t.axis];
      v += t.amplitude * (t.kind == FourierTerm::Kind::Cos ? std::cos(arg) : std::sin(arg));
    }
    if (!spec.poly_cos.empty()) {
      const double c = std::cos(x[0]);
      double term = 0.0;
      for (auto it = spec.poly_cos.rbegin(); it != spec.poly_cos.rend(); ++it) term = term * c + *it;
      v += term;
    }
    for (int d = 0; d < dims; ++d) {
      for (std::size_t j = 0; j < random_coeff[d].size(); ++j) {
        const double arg = static_cast<double>(j + 1) * x[d];
        v += spec.random_amplitude * (random_coeff[d][j].first * std::cos(arg) + random_coeff[d][j].second * std::sin(arg));
      }
    }
    return v;
  });
}

}  // namespace wyflow
