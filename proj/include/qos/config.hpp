#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qos/dynamics.hpp"
#include "qos/lattice.hpp"
#include "qos/observables.hpp"
#include "qos/scene.hpp"
#include "qos/state.hpp"

namespace qos {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario description. Builders run in build_scene(); this struct only
/// holds validated values.
struct SimConfig {
  struct Angular {
    Vec2 origin;
    double r_min = 0.0;
    std::optional<double> r_max;
    double forward = 0.0;  // radians
    // Classical two-slit reference evaluated on the same bins.
    std::optional<double> k;
    std::optional<double> slit_width;
    std::optional<double> separation;
    double compare_window = 0.3;
    std::optional<double> at;  // snapshot time that supplies the metric; default: last snapshot
  };
  struct Slice {
    int axis = 0;
    int fixed_mode = 0;
  };
  struct Outputs {
    bool energy_density = false;
    bool mode_probs = false;
    bool atom_excitation = false;
    bool analyzer_spectrum = false;
    bool input_spectrum = false;
    bool log_scale = false;
    bool state_dump = false;
    std::optional<Angular> angular;
    std::optional<Slice> mode_slice;
    std::optional<std::optional<std::pair<double, double>>> decay_fit;
    std::vector<std::pair<std::string, Region>> regions;
  };
  struct Run {
    std::optional<double> dt;
    double t_end = 0.0;
    std::optional<double> snapshot_every;
    std::vector<double> snapshot_times;
    std::optional<double> diag_every;
    std::optional<long> step_budget;
  };
  struct Group {
    std::string label;
    std::string type;
    std::size_t first = 0;
    std::size_t last = 0;  // exclusive
    // Analyzer arrays: mirror line (point, angle) applied to the probe
    // positions when the free-photon reference spectrum is evaluated.
    std::optional<std::pair<Vec2, double>> input_reflect;
  };

  std::string name;
  std::string source_text;
  double side = 10.0 * std::numbers::pi;
  int n = 256;
  std::optional<GaussianSpec> photon;
  std::optional<std::size_t> excited_element;  // index into elements for an excited single atom
  nlohmann::json elements = nlohmann::json::array();
  Run run;
  Outputs outputs;
  Warnings warnings;
};

namespace config_detail {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string join(const std::string& path, std::size_t idx) { return path + "[" + std::to_string(idx) + "]"; }

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key) + ": missing required field");
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path + ": must be finite");
  return d;
}

inline double number(const json& obj, const std::string& key, const std::string& path) {
  return as_number(require(obj, key, path), join(path, key));
}

inline std::optional<double> opt_number(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return as_number(*it, join(path, key));
}

inline double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  return opt_number(obj, key, path).value_or(fallback);
}

inline long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return v.get<long>();
}

inline long integer_or(const json& obj, const std::string& key, const std::string& path, long fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  return integer(*it, join(path, key));
}

inline bool boolean_or(const json& obj, const std::string& key, const std::string& path, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) throw ConfigError(join(path, key) + ": expected true or false");
  return it->get<bool>();
}

inline Vec2 as_vec2(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(path + ": expected [x, y]");
  return {as_number(v[0], join(path, 0)), as_number(v[1], join(path, 1))};
}

inline Vec2 vec2(const json& obj, const std::string& key, const std::string& path) {
  return as_vec2(require(obj, key, path), join(path, key));
}

inline Vec2 vec2_or(const json& obj, const std::string& key, const std::string& path, Vec2 fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  return as_vec2(*it, join(path, key));
}

/// Dipole as a real number or [re, im].
inline cplx dipole(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (v.is_array()) {
    const Vec2 d = as_vec2(v, join(path, key));
    return {d.x, d.y};
  }
  return as_number(v, join(path, key));
}

inline cplx dipole_or(const json& obj, const std::string& key, const std::string& path, cplx fallback) {
  return obj.contains(key) ? dipole(obj, key, path) : fallback;
}

inline void check_keys(const json& obj, std::initializer_list<const char*> known, const std::string& path,
                       Warnings& warnings) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) warnings.push_back(join(path, it.key()) + ": unknown field ignored");
  }
}

inline double angle_of(const json& obj, const std::string& path) {
  if (obj.contains("angle_deg")) return number(obj, "angle_deg", path) * std::numbers::pi / 180.0;
  if (obj.contains("angle")) return number(obj, "angle", path);
  throw ConfigError(join(path, "angle_deg") + ": missing required field");
}

inline Region parse_region(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path + ": expected a region object");
  try {
    if (v.contains("rect")) {
      const auto& r = v["rect"];
      if (!r.is_array() || r.size() != 4) throw ConfigError(join(path, "rect") + ": expected [x0, x1, y0, y1]");
      return Region::rect(as_number(r[0], join(path, "rect")), as_number(r[1], join(path, "rect")),
                          as_number(r[2], join(path, "rect")), as_number(r[3], join(path, "rect")));
    }
    if (v.contains("halfplane")) {
      const auto& h = v["halfplane"];
      const std::string hp = join(path, "halfplane");
      return Region::halfplane(vec2(h, "normal", hp), number_or(h, "offset", hp, 0.0));
    }
    if (v.contains("all")) {
      const auto& a = v["all"];
      if (!a.is_array() || a.empty()) throw ConfigError(join(path, "all") + ": expected a non-empty list of regions");
      Region out;
      for (std::size_t i = 0; i < a.size(); ++i) out = out.intersect(parse_region(a[i], join(join(path, "all"), i)));
      return out;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  throw ConfigError(path + ": region needs one of rect, halfplane, all");
}

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace config_detail

/// Parses scenario JSON. Syntax errors report line and column, semantic
/// errors the offending field path (e.g. elements[1].omega).
inline SimConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  using namespace config_detail;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error: " +
                      e.what());
  }
  SimConfig cfg;
  cfg.source_text = text;
  if (!root.is_object()) throw ConfigError("top level: expected an object");
  check_keys(root, {"name", "description", "lattice", "photon", "elements", "run", "outputs"}, "", cfg.warnings);
  if (root.contains("name")) {
    if (!root["name"].is_string()) throw ConfigError("name: expected a string");
    cfg.name = root["name"].get<std::string>();
  }

  const auto& lat = require(root, "lattice", "");
  check_keys(lat, {"L", "L_pi", "n"}, "lattice", cfg.warnings);
  if (lat.contains("L") == lat.contains("L_pi")) throw ConfigError("lattice: give exactly one of L or L_pi");
  cfg.side = lat.contains("L") ? number(lat, "L", "lattice") : number(lat, "L_pi", "lattice") * std::numbers::pi;
  if (!(cfg.side > 0.0)) throw ConfigError(std::string("lattice.") + (lat.contains("L") ? "L" : "L_pi") + ": must be positive");
  const long n = integer(require(lat, "n", "lattice"), "lattice.n");
  if (n < 4 || n % 2 != 0 || n > 4096) throw ConfigError("lattice.n: must be even, >= 4 and <= 4096");
  cfg.n = static_cast<int>(n);

  if (root.contains("photon") && !root["photon"].is_null()) {
    const auto& p = root["photon"];
    check_keys(p, {"r0", "k0", "var_kx", "var_ky", "covar"}, "photon", cfg.warnings);
    GaussianSpec g;
    g.r0 = vec2(p, "r0", "photon");
    g.k0 = vec2(p, "k0", "photon");
    g.var_kx = number(p, "var_kx", "photon");
    g.var_ky = number(p, "var_ky", "photon");
    g.covar_kxky = number_or(p, "covar", "photon", 0.0);
    if (!(g.var_kx >= kMinVariance)) throw ConfigError("photon.var_kx: must be >= 1e-6");
    if (!(g.var_ky >= kMinVariance)) throw ConfigError("photon.var_ky: must be >= 1e-6");
    if (!(g.determinant() > 0.0)) throw ConfigError("photon.covar: covariance matrix is not positive definite");
    cfg.photon = g;
  }

  if (root.contains("elements")) {
    const auto& el = root["elements"];
    if (!el.is_array()) throw ConfigError("elements: expected a list");
    for (std::size_t i = 0; i < el.size(); ++i) {
      const std::string path = join("elements", i);
      const auto& e = el[i];
      if (!e.is_object()) throw ConfigError(path + ": expected an object");
      const auto& type = require(e, "type", path);
      if (!type.is_string()) throw ConfigError(join(path, "type") + ": expected a string");
      const auto t = type.get<std::string>();
      static const char* kTypes[] = {"slab_mirror", "beam_splitter", "parabola", "two_slit",
                                     "analyzer_array", "interferometer", "atom"};
      bool known = false;
      for (const char* k : kTypes) known = known || t == k;
      if (!known) throw ConfigError(join(path, "type") + ": unknown element type '" + t + "'");
      if (t == "atom" && boolean_or(e, "excited", path, false)) {
        if (cfg.excited_element) throw ConfigError(join(path, "excited") + ": only one atom can hold the excitation");
        cfg.excited_element = i;
      }
    }
    cfg.elements = el;
  }
  if (cfg.photon && cfg.excited_element)
    throw ConfigError("photon: a photon and an excited atom cannot share the single excitation");
  if (!cfg.photon && !cfg.excited_element)
    throw ConfigError("photon: no excitation given (add a photon or an atom with \"excited\": true)");

  const auto& run = require(root, "run", "");
  check_keys(run, {"dt", "t_end", "snapshot_every", "snapshot_times", "diag_every", "step_budget"}, "run",
             cfg.warnings);
  cfg.run.dt = opt_number(run, "dt", "run");
  if (cfg.run.dt && !(*cfg.run.dt > 0.0)) throw ConfigError("run.dt: must be positive");
  cfg.run.t_end = number(run, "t_end", "run");
  if (!(cfg.run.t_end >= 0.0)) throw ConfigError("run.t_end: must be non-negative");
  cfg.run.snapshot_every = opt_number(run, "snapshot_every", "run");
  if (cfg.run.snapshot_every && !(*cfg.run.snapshot_every > 0.0))
    throw ConfigError("run.snapshot_every: must be positive");
  if (run.contains("snapshot_times")) {
    const auto& st = run["snapshot_times"];
    if (!st.is_array()) throw ConfigError("run.snapshot_times: expected a list of times");
    for (std::size_t i = 0; i < st.size(); ++i) {
      const double v = as_number(st[i], join("run.snapshot_times", i));
      if (v < 0.0 || v > cfg.run.t_end) throw ConfigError(join("run.snapshot_times", i) + ": outside [0, t_end]");
      cfg.run.snapshot_times.push_back(v);
    }
  }
  cfg.run.diag_every = opt_number(run, "diag_every", "run");
  if (cfg.run.diag_every && !(*cfg.run.diag_every > 0.0)) throw ConfigError("run.diag_every: must be positive");
  if (run.contains("step_budget")) {
    cfg.run.step_budget = integer(run["step_budget"], "run.step_budget");
    if (*cfg.run.step_budget <= 0) throw ConfigError("run.step_budget: must be positive");
  }

  if (root.contains("outputs")) {
    const auto& o = root["outputs"];
    const std::string op = "outputs";
    check_keys(o,
               {"energy_density", "mode_probs", "atom_excitation", "angular_intensity", "analyzer_spectrum",
                "input_spectrum", "regions", "mode_slice", "decay_fit", "log_scale", "state_dump"},
               op, cfg.warnings);
    auto& out = cfg.outputs;
    out.energy_density = boolean_or(o, "energy_density", op, false);
    out.mode_probs = boolean_or(o, "mode_probs", op, false);
    out.atom_excitation = boolean_or(o, "atom_excitation", op, false);
    out.analyzer_spectrum = boolean_or(o, "analyzer_spectrum", op, false);
    out.input_spectrum = boolean_or(o, "input_spectrum", op, false);
    out.log_scale = boolean_or(o, "log_scale", op, false);
    out.state_dump = boolean_or(o, "state_dump", op, false);
    if (o.contains("angular_intensity")) {
      const auto& a = o["angular_intensity"];
      const std::string ap = join(op, "angular_intensity");
      check_keys(a, {"origin", "r_min", "r_max", "forward_deg", "classical", "at"}, ap, cfg.warnings);
      SimConfig::Angular ang;
      ang.origin = vec2_or(a, "origin", ap, {});
      ang.r_min = number_or(a, "r_min", ap, 0.0);
      ang.r_max = opt_number(a, "r_max", ap);
      ang.forward = number_or(a, "forward_deg", ap, 0.0) * std::numbers::pi / 180.0;
      ang.at = opt_number(a, "at", ap);
      if (ang.at && (*ang.at < 0.0 || *ang.at > cfg.run.t_end)) throw ConfigError(join(ap, "at") + ": outside [0, t_end]");
      const double rmax = ang.r_max.value_or(cfg.side / 2.0);
      if (!(ang.r_min >= 0.0) || !(ang.r_min < rmax)) throw ConfigError(join(ap, "r_min") + ": need 0 <= r_min < r_max");
      if (a.contains("classical")) {
        const auto& c = a["classical"];
        const std::string cp = join(ap, "classical");
        check_keys(c, {"k", "slit_width", "separation", "window"}, cp, cfg.warnings);
        ang.k = number(c, "k", cp);
        ang.slit_width = number(c, "slit_width", cp);
        ang.separation = number(c, "separation", cp);
        ang.compare_window = number_or(c, "window", cp, 0.3);
        if (!(*ang.k > 0.0)) throw ConfigError(join(cp, "k") + ": must be positive");
        if (!(*ang.slit_width > 0.0)) throw ConfigError(join(cp, "slit_width") + ": must be positive");
      }
      out.angular = ang;
    }
    if (o.contains("mode_slice")) {
      const auto& m = o["mode_slice"];
      const std::string mp = join(op, "mode_slice");
      check_keys(m, {"axis", "fixed_mode"}, mp, cfg.warnings);
      SimConfig::Slice sl;
      const auto& ax = require(m, "axis", mp);
      if (!ax.is_string() || (ax != "x" && ax != "y")) throw ConfigError(join(mp, "axis") + ": expected \"x\" or \"y\"");
      sl.axis = ax == "x" ? 0 : 1;
      sl.fixed_mode = static_cast<int>(integer_or(m, "fixed_mode", mp, 0));
      if (sl.fixed_mode < -cfg.n / 2 || sl.fixed_mode >= cfg.n / 2)
        throw ConfigError(join(mp, "fixed_mode") + ": mode number outside the lattice");
      out.mode_slice = sl;
    }
    if (o.contains("decay_fit")) {
      const auto& d = o["decay_fit"];
      const std::string dp = join(op, "decay_fit");
      if (d.is_boolean()) {
        if (d.get<bool>()) out.decay_fit = std::optional<std::pair<double, double>>{};
      } else if (d.is_object()) {
        check_keys(d, {"window"}, dp, cfg.warnings);
        if (d.contains("window")) {
          const Vec2 w = vec2(d, "window", dp);
          if (!(w.y > w.x)) throw ConfigError(join(dp, "window") + ": need window[0] < window[1]");
          out.decay_fit = std::optional<std::pair<double, double>>{std::pair{w.x, w.y}};
        } else {
          out.decay_fit = std::optional<std::pair<double, double>>{};
        }
      } else {
        throw ConfigError(dp + ": expected true/false or an object");
      }
    }
    if (o.contains("regions")) {
      const auto& r = o["regions"];
      const std::string rp = join(op, "regions");
      if (!r.is_object()) throw ConfigError(rp + ": expected an object of named regions");
      for (auto it = r.begin(); it != r.end(); ++it)
        out.regions.emplace_back(it.key(), parse_region(it.value(), join(rp, it.key())));
    }
  }
  return cfg;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

/// 64-bit FNV-1a of the raw config text.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline ModeLattice make_lattice(const SimConfig& cfg) { return ModeLattice(cfg.side, cfg.n); }

struct BuiltScene {
  Scene scene;
  std::vector<SimConfig::Group> groups;
  std::optional<std::size_t> excited_atom;
  Warnings warnings;
};

/// Runs the element builders in order. Builder errors are rethrown as
/// ConfigError with the element path.
inline BuiltScene build_scene(const ModeLattice& lat, const SimConfig& cfg) {
  using namespace config_detail;
  BuiltScene out{Scene(lat), {}, std::nullopt, {}};
  for (std::size_t i = 0; i < cfg.elements.size(); ++i) {
    const std::string path = join("elements", i);
    const auto& e = cfg.elements[i];
    const auto type = e["type"].get<std::string>();
    std::string label = e.contains("label") && e["label"].is_string() ? e["label"].get<std::string>() : path;
    Scene part(lat);
    std::optional<std::pair<Vec2, double>> reflect;
    try {
      if (type == "slab_mirror" || type == "beam_splitter") {
        const bool bs = type == "beam_splitter";
        check_keys(e, {"type", "label", "center", "angle_deg", "angle", "length", "length_cells", "layers", "omega", "D"},
                   path, out.warnings);
        SlabGeometry g;
        g.center = vec2(e, "center", path);
        g.angle = angle_of(e, path);
        if (e.contains("length_cells")) {
          const long cells = integer(e["length_cells"], join(path, "length_cells"));
          if (cells < 0) throw ConfigError(join(path, "length_cells") + ": must be non-negative");
          g.length = static_cast<double>(cells) * lattice_line_spacing(lat, g.angle);
        } else {
          g.length = number(e, "length", path);
        }
        g.layers = bs ? 1 : static_cast<int>(integer_or(e, "layers", path, 8));
        if (bs && e.contains("layers") && integer(e["layers"], join(path, "layers")) != 1)
          throw ConfigError(join(path, "layers") + ": a beam splitter has exactly one layer");
        const double w = number(e, "omega", path);
        if (!(w > 0.0)) throw ConfigError(join(path, "omega") + ": must be positive");
        part = build_slab(lat, g, w, dipole(e, "D", path));
      } else if (type == "parabola") {
        check_keys(e, {"type", "label", "x0", "p", "inv_2p", "y_extent", "layers", "omega", "D"}, path, out.warnings);
        ParabolaGeometry g;
        g.x0 = number(e, "x0", path);
        if (e.contains("inv_2p")) {
          const double c = number(e, "inv_2p", path);
          if (c == 0.0) throw ConfigError(join(path, "inv_2p") + ": must be non-zero");
          g.p = 1.0 / (2.0 * c);
        } else {
          g.p = number(e, "p", path);
          if (g.p == 0.0) throw ConfigError(join(path, "p") + ": must be non-zero");
        }
        g.y_extent = number(e, "y_extent", path);
        g.layers = static_cast<int>(integer_or(e, "layers", path, 8));
        const double w = number(e, "omega", path);
        if (!(w > 0.0)) throw ConfigError(join(path, "omega") + ": must be positive");
        part = build_parabola(lat, g, w, dipole(e, "D", path));
      } else if (type == "two_slit") {
        check_keys(e, {"type", "label", "x_pos", "slit_width", "slit_rows", "separation", "layers", "center_y", "extent",
                       "omega", "D"},
                   path, out.warnings);
        TwoSlitGeometry g;
        g.x_pos = number(e, "x_pos", path);
        if (e.contains("slit_rows")) {
          const long rows = integer(e["slit_rows"], join(path, "slit_rows"));
          if (rows <= 0) throw ConfigError(join(path, "slit_rows") + ": must be positive");
          g.slit_width = static_cast<double>(rows) * lat.dx();
        } else {
          g.slit_width = number(e, "slit_width", path);
        }
        g.separation = number(e, "separation", path);
        g.layers = static_cast<int>(integer_or(e, "layers", path, 8));
        g.center_y = number_or(e, "center_y", path, 0.0);
        g.extent = opt_number(e, "extent", path);
        const double w = number(e, "omega", path);
        if (!(w > 0.0)) throw ConfigError(join(path, "omega") + ": must be positive");
        part = build_two_slit(lat, g, w, dipole(e, "D", path));
      } else if (type == "analyzer_array") {
        check_keys(e, {"type", "label", "omega_min", "omega_max", "count", "C", "positions", "block", "input_reflect"},
                   path, out.warnings);
        if (e.contains("input_reflect")) {
          const auto& r = e["input_reflect"];
          const std::string rp = join(path, "input_reflect");
          check_keys(r, {"point", "angle_deg"}, rp, out.warnings);
          reflect = std::pair{vec2_or(r, "point", rp, {}), number(r, "angle_deg", rp) * std::numbers::pi / 180.0};
        }
        AnalyzerArray a;
        a.omega_min = number(e, "omega_min", path);
        a.omega_max = number(e, "omega_max", path);
        a.count = static_cast<int>(integer(require(e, "count", path), join(path, "count")));
        a.C = number_or(e, "C", path, 1e-4);
        if (e.contains("positions")) {
          const auto& ps = e["positions"];
          if (!ps.is_array()) throw ConfigError(join(path, "positions") + ": expected a list of [x, y]");
          for (std::size_t k = 0; k < ps.size(); ++k) a.positions.push_back(as_vec2(ps[k], join(join(path, "positions"), k)));
        } else {
          const auto& b = require(e, "block", path);
          const std::string bp = join(path, "block");
          check_keys(b, {"center", "axis", "along", "across"}, bp, out.warnings);
          const auto& ax = require(b, "axis", bp);
          if (!ax.is_string() || (ax != "x" && ax != "y")) throw ConfigError(join(bp, "axis") + ": expected \"x\" or \"y\"");
          const int along = static_cast<int>(integer(require(b, "along", bp), join(bp, "along")));
          const int across = static_cast<int>(integer(require(b, "across", bp), join(bp, "across")));
          if (static_cast<long>(along) * across != a.count)
            throw ConfigError(bp + ": along * across must equal count");
          a.positions = analyzer_block(lat, vec2(b, "center", bp), ax == "x" ? 0 : 1, along, across);
        }
        part = build_analyzer_array(lat, a);
      } else if (type == "interferometer") {
        check_keys(e, {"type", "label", "arm_difference", "center", "arm_length", "splitter_length", "splitter_omega",
                       "splitter_D", "mirror_length", "mirror_layers", "mirror_omega", "mirror_D"},
                   path, out.warnings);
        InterferometerOptions opt;
        opt.center = vec2_or(e, "center", path, opt.center);
        opt.arm_length = number_or(e, "arm_length", path, opt.arm_length);
        opt.splitter_length = number_or(e, "splitter_length", path, opt.splitter_length);
        opt.splitter_omega = number_or(e, "splitter_omega", path, opt.splitter_omega);
        opt.splitter_dipole = dipole_or(e, "splitter_D", path, opt.splitter_dipole);
        opt.mirror_length = number_or(e, "mirror_length", path, opt.mirror_length);
        opt.mirror_layers = static_cast<int>(integer_or(e, "mirror_layers", path, opt.mirror_layers));
        opt.mirror_omega = number_or(e, "mirror_omega", path, opt.mirror_omega);
        opt.mirror_dipole = dipole_or(e, "mirror_D", path, opt.mirror_dipole);
        part = build_interferometer(lat, number_or(e, "arm_difference", path, 0.0), opt).scene;
      } else if (type == "atom") {
        check_keys(e, {"type", "label", "pos", "omega", "D", "excited"}, path, out.warnings);
        const double w = number(e, "omega", path);
        if (!(w > 0.0)) throw ConfigError(join(path, "omega") + ": must be positive");
        part = build_single_atom(lat, vec2(e, "pos", path), w, dipole(e, "D", path));
      }
    } catch (const SceneError& err) {
      throw ConfigError(path + ": " + err.what());
    }
    const std::size_t first = out.scene.size();
    out.scene.append(part);
    if (cfg.excited_element && *cfg.excited_element == i) {
      if (out.scene.size() == first) throw ConfigError(path + ": excited atom collides with an earlier element");
      out.excited_atom = first;
    }
    out.groups.push_back({label, type, first, out.scene.size(), reflect});
  }
  if (out.scene.duplicates_merged() > 0)
    out.warnings.push_back(std::to_string(out.scene.duplicates_merged()) + " duplicate atom position(s) merged");
  for (const auto& w : out.scene.warnings()) out.warnings.push_back(w);
  return out;
}

inline StateVector initial_state(const ModeLattice& lat, const SimConfig& cfg, const BuiltScene& built,
                                 Warnings* warnings = nullptr) {
  if (cfg.photon) {
    try {
      return make_gaussian_photon(lat, *cfg.photon, built.scene.size(), warnings);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("photon: ") + e.what());
    }
  }
  StateVector s(lat.mode_count(), built.scene.size());
  if (!built.excited_atom) throw ConfigError("no initial excitation");
  s.atoms[*built.excited_atom] = 1.0;
  return s;
}

}  // namespace qos
