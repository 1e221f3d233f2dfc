#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qos/config.hpp"
#include "qos/dynamics.hpp"
#include "qos/io.hpp"
#include "qos/observables.hpp"
#include "qos/oracle.hpp"

namespace qos {

/// Angular RMS over |theta| < window. The simulated profile is normalized to its
/// maximum behind the slits (|theta| < pi/2), the reference to its own maximum.
/// NaN bins are skipped.
inline double angular_rms_deviation(const AngularProfile& raw, const AngularProfile& ref, double window) {
  const AngularProfile sim = forward_normalized(raw);
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t b = 0; b < sim.theta.size(); ++b) {
    if (std::abs(sim.theta[b]) >= window || std::isnan(sim.intensity[b])) continue;
    const double d = sim.intensity[b] - ref.intensity[b];
    acc += d * d;
    ++cnt;
  }
  return cnt > 0 ? std::sqrt(acc / static_cast<double>(cnt)) : std::nan("");
}

struct RunOptions {
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<double> snapshot_every;
  bool log_scale = false;
  bool halve_dt_check = false;
  bool write_files = true;
  std::ostream* log = nullptr;
};

enum class ExitCode : int { ok = 0, config_error = 2, numerical_failure = 3 };

/// Called at every snapshot with the Schroedinger- and interaction-picture states.
using SnapshotObserver = std::function<void(const StateVector& schroedinger, const StateVector& interaction, long step)>;

/// Drift diagnostics and snapshot schedule derived from a config.
class Simulation {
 public:
  Simulation(const SimConfig& cfg, RunOptions opt = {})
      : cfg_(cfg), opt_(opt), lat_(make_lattice(cfg)), built_(build_scene(lat_, cfg)) {
    warnings_ = cfg.warnings;
    warnings_.insert(warnings_.end(), built_.warnings.begin(), built_.warnings.end());
    initial_ = initial_state(lat_, cfg, built_, &warnings_);
    t_end_ = opt.t_end.value_or(cfg.run.t_end);
    if (!(t_end_ >= 0.0)) throw ConfigError("run.t_end: must be non-negative");
    const double dt_req = opt.dt.value_or(cfg.run.dt.value_or(default_dt(lat_, built_.scene)));
    if (!(dt_req > 0.0)) throw ConfigError("run.dt: must be positive");
    steps_ = t_end_ > 0.0 ? static_cast<long>(std::ceil(t_end_ / dt_req - 1e-9)) : 0;
    dt_ = steps_ > 0 ? t_end_ / static_cast<double>(steps_) : dt_req;
    stability_ = dt_ * (lat_.max_omega() + max_atom_omega(built_.scene));
    if (stability_ > kStabilityProduct * (1.0 + 1e-9)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "dt = %.6g gives dt*(w_max + w_atom) = %.3g > 0.1; suggested dt <= %.6g", dt_,
                    stability_, default_dt(lat_, built_.scene));
      warnings_.push_back(buf);
    }
    const auto every = opt.snapshot_every ? opt.snapshot_every : cfg.run.snapshot_every;
    snap_steps_.insert(0);
    snap_steps_.insert(steps_);
    if (every && steps_ > 0) {
      long prev = 0;
      for (long m = 1;; ++m) {
        const long s = std::max(prev + 1, std::lround(static_cast<double>(m) * *every / dt_));
        if (s >= steps_) break;
        snap_steps_.insert(s);
        prev = s;
      }
    }
    for (double t : cfg.run.snapshot_times) snap_steps_.insert(std::min(steps_, std::lround(t / dt_)));
    if (cfg.outputs.angular && cfg.outputs.angular->at) {
      angular_step_ = std::min(steps_, std::lround(*cfg.outputs.angular->at / dt_));
      snap_steps_.insert(angular_step_);
    }
    const double diag = cfg.run.diag_every.value_or(t_end_ > 0.0 ? t_end_ / 200.0 : 1.0);
    diag_interval_ = std::max(1L, std::lround(diag / dt_));
  }

  const ModeLattice& lattice() const { return lat_; }
  const BuiltScene& built() const { return built_; }
  const Scene& scene() const { return built_.scene; }
  const StateVector& initial() const { return initial_; }
  const Warnings& warnings() const { return warnings_; }
  double dt() const { return dt_; }
  double t_end() const { return t_end_; }
  long steps() const { return steps_; }
  double stability_product() const { return stability_; }
  bool free_path() const { return built_.scene.empty(); }
  const std::set<long>& snapshot_steps() const { return snap_steps_; }

  nlohmann::json run(const std::string& out_dir, SnapshotObserver observer = {}) {
    namespace fs = std::filesystem;
    const auto wall0 = std::chrono::steady_clock::now();
    files_.clear();
    metrics_ = nlohmann::json::object();
    out_dir_ = out_dir;
    if (opt_.write_files) fs::create_directories(out_dir_);

    std::optional<io::CsvWriter> diag_csv;
    if (opt_.write_files) {
      diag_csv.emplace(path("diagnostics.csv"), std::vector<std::string>{"t", "norm", "E_total", "E_field", "E_atoms",
                                                                          "E_int", "P_atoms"});
      files_.push_back("diagnostics.csv");
    }
    std::optional<io::CsvWriter> region_csv;
    if (opt_.write_files && !cfg_.outputs.regions.empty()) {
      std::vector<std::string> hdr{"t"};
      for (const auto& [name, r] : cfg_.outputs.regions) hdr.push_back(name);
      region_csv.emplace(path("regions.csv"), hdr);
      files_.push_back("regions.csv");
    }

    nlohmann::json manifest;
    manifest["status"] = "running";
    FourierGrid fft(lat_);
    Integrator integ(lat_, built_.scene, initial_, dt_);
    const StateVector free_inter = integ.state();
    double e0 = 0.0;
    double max_norm_drift = 0.0;
    double max_energy_drift = 0.0;
    const double n0 = norm(initial_);
    std::vector<double> decay_t, decay_p;
    long step = 0;
    StateVector last_schr;

    auto current_inter = [&]() -> const StateVector& {
      if (!free_path()) return integ.state();
      free_state_ = free_inter;
      free_state_.t = dt_ * static_cast<double>(step);
      return free_state_;
    };
    auto diagnose = [&](const StateVector& inter) {
      const Energies e = energies(inter, integ.workspace());
      const double nn = norm(inter);
      if (step == 0) e0 = e.total();
      max_norm_drift = std::max(max_norm_drift, std::abs(nn - n0));
      const double scale = std::abs(e0) > 0.0 ? std::abs(e0) : 1.0;
      max_energy_drift = std::max(max_energy_drift, std::abs(e.total() - e0) / scale);
      const double pa = atom_probability(inter);
      decay_t.push_back(inter.t);
      decay_p.push_back(pa);
      if (diag_csv) diag_csv->row({inter.t, nn, e.total(), e.field, e.atoms, e.interaction, pa});
    };
    auto snapshot = [&](const StateVector& inter) {
      StateVector schr = to_picture(inter, Picture::schroedinger, lat_, built_.scene.omegas());
      write_snapshot(schr, inter, fft, region_csv ? &*region_csv : nullptr, step);
      if (observer) observer(schr, inter, step);
      if (opt_.log != nullptr) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "t = %9.4f  step %8ld/%ld  |norm-1| max %.2e  dE/E max %.2e\n", inter.t, step,
                      steps_, max_norm_drift, max_energy_drift);
        *opt_.log << buf << std::flush;
      }
      last_schr = std::move(schr);
    };

    try {
      for (;;) {
        const bool snap = snap_steps_.contains(step);
        if (step % diag_interval_ == 0 || snap || step == steps_) {
          const StateVector& inter = current_inter();
          diagnose(inter);
          if (snap) snapshot(inter);
        }
        if (step == steps_) break;
        if (free_path()) {
          // Interaction-picture amplitudes are constant; jump to the next event.
          long next = std::min(steps_, (step / diag_interval_ + 1) * diag_interval_);
          if (auto it = snap_steps_.upper_bound(step); it != snap_steps_.end()) next = std::min(next, *it);
          step = next;
        } else {
          integ.step();
          ++step;
        }
      }
    } catch (const NumericalFailure& f) {
      manifest["status"] = "failed";
      manifest["failed_step"] = f.step();
      manifest["error"] = f.what();
    }

    manifest["config_hash"] = fnv_hex(fnv1a(cfg_.source_text));
    manifest["name"] = cfg_.name;
    manifest["lattice"] = {{"L", lat_.side()}, {"n", lat_.n()}, {"dk", lat_.dk()}, {"dx", lat_.dx()},
                           {"modes", lat_.mode_count()}};
    manifest["atom_count"] = built_.scene.size();
    manifest["analyzer_count"] = built_.scene.count(AtomKind::analyzer);
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : built_.groups)
      groups.push_back({{"label", g.label}, {"type", g.type}, {"atoms", g.last - g.first}});
    manifest["elements"] = groups;
    manifest["integrator"] = free_path() ? "free_evolve" : "rk4";
    manifest["dt"] = dt_;
    manifest["t_end"] = t_end_;
    manifest["steps"] = steps_;
    manifest["steps_done"] = step;
    if (cfg_.run.step_budget) {
      manifest["step_budget"] = *cfg_.run.step_budget;
      manifest["within_budget"] = steps_ <= *cfg_.run.step_budget;
    }
    manifest["stability_product"] = stability_;
    manifest["max_norm_drift"] = max_norm_drift;
    manifest["max_energy_drift"] = max_energy_drift;
    manifest["warnings"] = warnings_;

    if (manifest["status"] == "running") {
      finish(last_schr, decay_t, decay_p);
      if (opt_.halve_dt_check && !free_path()) halve_dt_check(last_schr);
      manifest["status"] = "ok";
    }
    manifest["metrics"] = metrics_;
    manifest["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    if (opt_.write_files) {
      files_.push_back("manifest.json");
      manifest["outputs"] = files_;
      std::ofstream os(path("manifest.json"));
      os << manifest.dump(2) << "\n";
    } else {
      manifest["outputs"] = files_;
    }
    return manifest;
  }

 private:
  std::string path(const std::string& name) const { return (std::filesystem::path(out_dir_) / name).string(); }

  static std::string fnv_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  static std::string stamp(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%09.4f", t);
    return buf;
  }

  void write_snapshot(const StateVector& schr, const StateVector& inter, FourierGrid& fft, io::CsvWriter* region_csv,
                      long step) {
    const auto& out = cfg_.outputs;
    const bool need_density = out.energy_density || out.angular || !out.regions.empty();
    EnergyField e;
    if (need_density) e = energy_density(schr, lat_, fft);
    const std::string st = stamp(schr.t);
    if (out.energy_density && opt_.write_files) {
      io::save_density(path("density_" + st + ".qosn"), e);
      io::save_pgm(path("density_" + st + ".pgm"), e, out.log_scale || opt_.log_scale);
      files_.push_back("density_" + st + ".qosn");
      files_.push_back("density_" + st + ".pgm");
    }
    if (out.mode_probs && opt_.write_files) {
      // Interaction-picture amplitudes: free-field probabilities stay bit-identical.
      io::CsvWriter csv(path("modes_" + st + ".csv"), {"kx", "ky", "p"});
      for (std::size_t f = 0; f < inter.field.size(); ++f) {
        const Vec2 k = lat_.k(f);
        csv.row({k.x, k.y, std::norm(inter.field[f])});
      }
      files_.push_back("modes_" + st + ".csv");
    }
    if (out.atom_excitation && opt_.write_files && !built_.scene.empty()) {
      io::CsvWriter csv(path("atoms_" + st + ".csv"), {"j", "x", "y", "omega", "analyzer", "p"});
      for (std::size_t j = 0; j < built_.scene.size(); ++j) {
        const auto& a = built_.scene.atoms()[j];
        csv.row({static_cast<double>(j), a.pos.x, a.pos.y, a.omega, a.kind == AtomKind::analyzer ? 1.0 : 0.0,
                 std::norm(schr.atoms[j])});
      }
      files_.push_back("atoms_" + st + ".csv");
    }
    if (out.mode_slice && opt_.write_files) {
      const auto sl = mode_slice(inter, lat_, out.mode_slice->axis, lat_.index_of(out.mode_slice->fixed_mode));
      io::CsvWriter csv(path("slice_" + st + ".csv"), {"k", "p"});
      for (const auto& pnt : sl) csv.row({pnt.k, pnt.probability});
      files_.push_back("slice_" + st + ".csv");
    }
    if (out.angular) {
      const auto& a = *out.angular;
      const auto prof = angular_intensity(e, lat_, a.origin, a.r_min, a.r_max, a.forward);
      std::optional<AngularProfile> ref;
      if (a.k) ref = classical_two_slit(*a.k, *a.slit_width, *a.separation, prof.theta);
      if (opt_.write_files) {
        std::vector<std::string> hdr{"theta", "intensity", "intensity_forward"};
        if (ref) hdr.push_back("classical");
        io::CsvWriter csv(path("angular_" + st + ".csv"), hdr);
        const auto fwd = forward_normalized(prof);
        for (std::size_t b = 0; b < prof.theta.size(); ++b) {
          std::vector<double> row{prof.theta[b], prof.intensity[b], fwd.intensity[b]};
          if (ref) row.push_back(ref->intensity[b]);
          csv.row(row);
        }
        files_.push_back("angular_" + st + ".csv");
      }
      if (angular_step_ < 0 || step == angular_step_) {
        if (ref) metrics_["angular_rms_vs_classical"] = angular_rms_deviation(prof, *ref, a.compare_window);
        metrics_["angular_gaps"] = prof.gaps;
        metrics_["angular_t"] = schr.t;
      }
    }
    if (!out.regions.empty()) {
      std::vector<double> row{schr.t};
      nlohmann::json fr;
      for (const auto& [name, r] : out.regions) {
        const double v = region_energy_fraction(e, lat_, r);
        row.push_back(v);
        fr[name] = v;
      }
      if (region_csv != nullptr) region_csv->row(row);
      metrics_["region_fraction"] = fr;
    }
  }

  void finish(const StateVector& schr, const std::vector<double>& ts, const std::vector<double>& ps) {
    const auto& out = cfg_.outputs;
    metrics_["final_atom_probability"] = atom_probability(schr);
    metrics_["final_norm"] = norm(schr);
    if (out.analyzer_spectrum && built_.scene.count(AtomKind::analyzer) > 0) {
      nlohmann::json spectra = nlohmann::json::object();
      std::vector<std::pair<std::string, std::vector<double>>> curves;
      for (const auto& g : built_.groups) {
        if (g.type != "analyzer_array") continue;
        std::vector<double> w, p;
        Scene probes(lat_);
        for (std::size_t j = g.first; j < g.last; ++j) {
          w.push_back(built_.scene.atoms()[j].omega);
          p.push_back(std::norm(schr.atoms[j]));
          Atom a = built_.scene.atoms()[j];
          if (g.input_reflect) {
            const auto [pt, ang] = *g.input_reflect;
            const Vec2 u{std::cos(ang), std::sin(ang)};
            const Vec2 d = a.pos - pt;
            a.pos = pt + 2.0 * dot(u, d) * u - d;
            a.cell = lat_.nearest_grid(a.pos);
          }
          probes.add(a);
        }
        std::vector<double> ref;
        if (out.input_spectrum) ref = oracle::perturbative_excitation(lat_, probes, initial_, schr.t);
        if (opt_.write_files) {
          std::vector<std::string> hdr{"omega", "p"};
          if (!ref.empty()) hdr.push_back("p_input");
          const std::string fname = "spectrum_" + sanitize(g.label) + ".csv";
          io::CsvWriter csv(path(fname), hdr);
          for (std::size_t i = 0; i < w.size(); ++i) {
            std::vector<double> row{w[i], p[i]};
            if (!ref.empty()) row.push_back(ref[i]);
            csv.row(row);
          }
          files_.push_back(fname);
        }
        nlohmann::json entry{{"total", std::accumulate(p.begin(), p.end(), 0.0)},
                             {"peak_omega", w[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())]}};
        if (!ref.empty()) entry["rms_vs_input"] = normalized_rms(p, ref);
        spectra[g.label] = entry;
        curves.emplace_back(g.label, p);
      }
      for (std::size_t a = 0; a < curves.size(); ++a)
        for (std::size_t b = a + 1; b < curves.size(); ++b)
          if (curves[a].second.size() == curves[b].second.size())
            spectra[curves[a].first + "~" + curves[b].first] = normalized_rms(curves[a].second, curves[b].second);
      metrics_["analyzer_spectra"] = spectra;
    }
    if (out.decay_fit) {
      if (opt_.write_files) {
        io::CsvWriter csv(path("decay.csv"), {"t", "P_exc"});
        for (std::size_t i = 0; i < ts.size(); ++i) csv.row({ts[i], ps[i]});
        files_.push_back("decay.csv");
      }
      try {
        const auto fit = fit_decay(ts, ps, *out.decay_fit);
        metrics_["decay_fit"] = {{"gamma", fit.gamma},   {"t_start", fit.t_start}, {"t_end", fit.t_end},
                                 {"residual", fit.residual}, {"points", fit.points}};
      } catch (const std::invalid_argument& e) {
        metrics_["decay_fit"] = {{"error", e.what()}};
      }
    }
    if (out.state_dump && opt_.write_files) {
      io::save_state(path("final_state.qos1"), schr, static_cast<std::uint32_t>(lat_.n()));
      files_.push_back("final_state.qos1");
    }
  }

  void halve_dt_check(const StateVector& reference) {
    Integrator fine(lat_, built_.scene, initial_, dt_ / 2.0);
    fine.advance(2 * steps_);
    const StateVector s = fine.schroedinger_state();
    double d2 = 0.0;
    for (std::size_t f = 0; f < s.field.size(); ++f) d2 += std::norm(s.field[f] - reference.field[f]);
    for (std::size_t j = 0; j < s.atoms.size(); ++j) d2 += std::norm(s.atoms[j] - reference.atoms[j]);
    const double diff = std::sqrt(d2);
    metrics_["halve_dt_check"] = {{"dt", dt_}, {"diff", diff}, {"error_estimate", diff * 16.0 / 15.0}};
  }

  static std::string sanitize(std::string s) {
    for (auto& c : s)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s;
  }

  SimConfig cfg_;
  RunOptions opt_;
  ModeLattice lat_;
  BuiltScene built_;
  StateVector initial_;
  Warnings warnings_;
  double t_end_ = 0.0;
  double dt_ = 0.0;
  long steps_ = 0;
  double stability_ = 0.0;
  std::set<long> snap_steps_;
  long diag_interval_ = 1;
  long angular_step_ = -1;
  std::string out_dir_;
  std::vector<std::string> files_;
  nlohmann::json metrics_;
  StateVector free_state_;
};

}  // namespace qos
