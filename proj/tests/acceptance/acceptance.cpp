// Acceptance gate: one PASS/FAIL line per criterion. Exit status is non-zero
// when any line fails.
//
// Usage: acceptance [criterion ...]   (e.g. "acceptance 2 3 4"; default: all)
// QOS_ACCEPT_FULL=1 adds the 512x512 two-slit run (about 20 min on one core).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "qos/config.hpp"
#include "qos/dynamics.hpp"
#include "qos/observables.hpp"
#include "qos/oracle.hpp"
#include "qos/runner.hpp"
#include "qos/verify.hpp"

using namespace qos;
namespace fs = std::filesystem;

namespace {

int g_pass = 0;
int g_fail = 0;

void report(bool ok, const std::string& id, const std::string& what, const char* fmt, ...)
    __attribute__((format(printf, 4, 5)));

void report(bool ok, const std::string& id, const std::string& what, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  std::printf("%s  %-4s %-44s %s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str(), buf);
  std::fflush(stdout);
  (ok ? g_pass : g_fail)++;
}

fs::path scenario(const std::string& rel) { return fs::path(QOS_SOURCE_DIR) / "scenarios" / rel; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  nlohmann::json manifest;
  double seconds = 0.0;
};

Outcome run_scenario(const fs::path& path, SnapshotObserver observer = {}) {
  const auto cfg = load_config(path.string());
  RunOptions opt;
  opt.write_files = false;
  Simulation sim(cfg, opt);
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out{sim.run("", std::move(observer)), 0.0};
  out.seconds = seconds_since(t0);
  return out;
}

// Stricter of the two conservation bounds reported for every run.
void conservation_line(const std::string& id, const std::string& name, const Outcome& o, double time_limit = -1.0) {
  const auto& m = o.manifest;
  const double dn = m["max_norm_drift"].get<double>();
  const double de = m["max_energy_drift"].get<double>();
  bool ok = m["status"] == "ok" && dn < 1e-6 && de < 1e-5;
  if (time_limit > 0.0) ok = ok && o.seconds < time_limit;
  report(ok, id, "conservation " + name, "|norm-1| = %.2e (< 1e-6), dE/E = %.2e (< 1e-5), %ld steps, %.1f s%s", dn, de,
         m["steps"].get<long>(), o.seconds, time_limit > 0.0 ? " (< 120 s)" : "");
}

double region(const Outcome& o, const std::string& name) {
  return o.manifest["metrics"]["region_fraction"][name].get<double>();
}

// --- 1 ---------------------------------------------------------------------

void criterion_conservation() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scenario("desk128")))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) conservation_line("1", "desk128/" + p.stem().string(), run_scenario(p), 120.0);
}

// --- 2 ---------------------------------------------------------------------

void criterion_direct_sum() {
  const auto rep = verify::direct_sum_check(8, 4, 1000, 20240601);
  report(rep.max_rel < 1e-12 && rep.seconds < 1.0 && rep.max_atoms == 4, "2", "FFT right-hand side vs direct sum",
         "max rel = %.2e (< 1e-12) over %zu states, 1..%zu atoms, 8x8, %.3f s (< 1 s)", rep.max_rel, rep.states,
         rep.max_atoms, rep.seconds);
}

// --- 3 ---------------------------------------------------------------------

void criterion_parseval() {
  const ModeLattice lat(10.0 * std::numbers::pi, 32);
  FourierGrid fft(lat);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> u;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    StateVector s(lat.mode_count(), 0);
    for (auto& c : s.field) c = {u(rng), u(rng)};
    const double nn = norm(s);
    for (auto& c : s.field) c /= nn;
    const double em = field_energy_modes(s, lat);
    const double es = field_energy_space(energy_density(s, lat, fft), lat);
    worst = std::max(worst, std::abs(em - es) / em);
  }
  report(worst < 1e-10, "3", "Parseval: mode sum vs spatial integral", "max rel = %.2e (< 1e-10) over 1000 states",
         worst);
}

// --- 4 ---------------------------------------------------------------------

void criterion_rabi() {
  const auto r1 = verify::rabi_check(0.01, 10.0);
  report(r1.max_error < 1e-8, "4a", "Rabi oscillation vs closed form", "max amplitude error = %.2e (< 1e-8), |g|dt = 0.01",
         r1.max_error);
  const auto r4 = verify::rabi_check(0.04, 10.0);
  const auto r2 = verify::rabi_check(0.02, 10.0);
  const double p1 = verify::observed_order(r4.max_error, r2.max_error);
  const double p2 = verify::observed_order(r2.max_error, r1.max_error);
  report(std::abs(p1 - 4.0) <= 0.2 && std::abs(p2 - 4.0) <= 0.2, "4b", "RK4 observed order under dt halving",
         "%.3f (0.04 -> 0.02), %.3f (0.02 -> 0.01), target 4.0 +- 0.2", p1, p2);
}

// --- 5 ---------------------------------------------------------------------

double min_image(double d, double side) { return d - side * std::round(d / side); }

// Peak-normalized density outside the light cone r > ct + 2 dx around `src`.
double leakage(const EnergyField& e, const ModeLattice& lat, Vec2 src, double t) {
  double peak = 0.0, outside = 0.0;
  const double radius = t + 2.0 * lat.dx();
  for (std::size_t f = 0; f < e.electric.size(); ++f) {
    const Vec2 p = lat.position(f);
    const double r = std::hypot(min_image(p.x - src.x, lat.side()), min_image(p.y - src.y, lat.side()));
    const double v = e.total(f);
    peak = std::max(peak, v);
    if (r > radius) outside = std::max(outside, v);
  }
  return peak > 0.0 ? outside / peak : 0.0;
}

// RK4 in the interaction picture driven by the explicit double sum.
double direct_sum_decay_rate(const SimConfig& cfg) {
  const auto lat = make_lattice(cfg);
  const auto built = build_scene(lat, cfg);
  const oracle::DirectSum ds(lat, built.scene);
  Simulation sim(cfg, {});
  const double dt = sim.dt();
  const long diag = std::max(1L, std::lround(*cfg.run.diag_every / dt));
  StateVector s = to_picture(initial_state(lat, cfg, built), Picture::interaction, lat, built.scene);
  auto axpy = [](const StateVector& a, double h, const StateVector& d) {
    StateVector r = a;
    for (std::size_t f = 0; f < r.field.size(); ++f) r.field[f] += h * d.field[f];
    for (std::size_t j = 0; j < r.atoms.size(); ++j) r.atoms[j] += h * d.atoms[j];
    return r;
  };
  std::vector<double> ts{0.0}, ps{atom_probability(s)};
  for (long n = 1; n <= sim.steps(); ++n) {
    const double t = s.t;
    const auto k1 = ds.derivative(s, t);
    const auto k2 = ds.derivative(axpy(s, dt / 2, k1), t + dt / 2);
    const auto k3 = ds.derivative(axpy(s, dt / 2, k2), t + dt / 2);
    const auto k4 = ds.derivative(axpy(s, dt, k3), t + dt);
    for (std::size_t f = 0; f < s.field.size(); ++f)
      s.field[f] += dt / 6.0 * (k1.field[f] + 2.0 * k2.field[f] + 2.0 * k3.field[f] + k4.field[f]);
    for (std::size_t j = 0; j < s.atoms.size(); ++j)
      s.atoms[j] += dt / 6.0 * (k1.atoms[j] + 2.0 * k2.atoms[j] + 2.0 * k3.atoms[j] + k4.atoms[j]);
    s.t = static_cast<double>(n) * dt;
    if (n % diag == 0 || sim.snapshot_steps().contains(n) || n == sim.steps()) {
      ts.push_back(s.t);
      ps.push_back(atom_probability(s));
    }
  }
  return fit_decay(ts, ps, *cfg.outputs.decay_fit).gamma;
}

void criterion_decay() {
  const auto cfg = load_config(scenario("decay.json").string());
  const auto lat = make_lattice(cfg);
  const Vec2 src = build_scene(lat, cfg).scene.atoms().at(0).pos;
  const double dt = Simulation(cfg, {}).dt();
  std::map<double, double> leaks;
  double slice_peak = std::nan(""), slice_t = 0.0;
  const auto o = run_scenario(scenario("decay.json"), [&](const StateVector& schr, const StateVector& inter, long) {
    for (double t : {4.0, 12.0})
      if (std::abs(schr.t - t) <= 0.5 * dt) leaks[t] = leakage(energy_density(schr, lat), lat, src, schr.t);
    const auto sl = mode_slice(inter, lat, 0, lat.index_of(0));
    const auto it = std::max_element(sl.begin(), sl.end(), [](auto& a, auto& b) { return a.probability < b.probability; });
    slice_peak = std::abs(it->k);
    slice_t = schr.t;
  });
  conservation_line("5", "decay (256)", o);
  const auto& fit = o.manifest["metrics"]["decay_fit"];
  const double gamma = fit.contains("gamma") ? fit["gamma"].get<double>() : std::nan("");
  report(std::abs(gamma - 0.14) <= 0.15 * 0.14, "5a", "decay rate, w = 15, D = 0.05, 256x256",
         "gamma = %.4f (0.14 +- 15%%), fit window [%.2f, %.2f]", gamma, fit.value("t_start", 0.0),
         fit.value("t_end", 0.0));
  report(std::abs(slice_peak - 15.0) <= 2.0 * lat.dk(), "5b", "mode slice k_y = 0 peak",
         "|k_x| = %.2f at t = %.2f (15 +- %.2f)", slice_peak, slice_t, 2.0 * lat.dk());
  for (double t : {4.0, 12.0}) {
    const double l = leaks.count(t) ? leaks[t] : std::nan("");
    report(l < 1e-3, "5c", "causality leakage beyond ct + 2dx, t = " + std::to_string(static_cast<int>(t)),
           "max outside / peak = %.2e (< 1e-3)", l);
  }

  const auto small = load_config(scenario("desk128/decay.json").string());
  const auto os = run_scenario(scenario("desk128/decay.json"));
  const double g_fft = os.manifest["metrics"]["decay_fit"]["gamma"].get<double>();
  const auto t0 = std::chrono::steady_clock::now();
  const double g_ds = direct_sum_decay_rate(small);
  report(std::abs(g_fft - g_ds) <= 1e-6 * g_ds && std::abs(g_fft - 0.14) <= 0.15 * 0.14, "5d",
         "128x128 smoke: gamma via FFT vs direct sum", "FFT %.6f, direct sum %.6f (rel diff %.1e, < 1e-6), %.1f s", g_fft,
         g_ds, std::abs(g_fft - g_ds) / g_ds, seconds_since(t0));
}

// --- 6 ---------------------------------------------------------------------

void criterion_mirror() {
  const auto o = run_scenario(scenario("mirror.json"));
  conservation_line("6", "mirror (256)", o);
  const long atoms = o.manifest["atom_count"].get<long>();
  const double behind = region(o, "behind");
  report(behind < 0.01 && atoms == 1584, "6", "mirror transmission at t = 20",
         "energy past the slab = %.2e (< 0.01), %ld atoms (1584)", behind, atoms);
}

// --- 7 ---------------------------------------------------------------------

void criterion_beam_splitter() {
  const auto o = run_scenario(scenario("beam_splitter.json"));
  conservation_line("7", "beam_splitter (256)", o);
  const long atoms = o.manifest["atom_count"].get<long>();
  report(atoms == 881, "7a", "beam splitter atom count",
         "%ld atoms (881 expected; one lattice line of length 20 holds at most 256 points)", atoms);
  const double tr = region(o, "transmitted"), rf = region(o, "reflected");
  report(std::abs(tr - 0.5) <= 0.05 && std::abs(rf - 0.5) <= 0.05, "7b", "beam splitter energy split at t = 20",
         "transmitted %.4f, reflected %.4f (0.50 +- 0.05)", tr, rf);
  const double pa = o.manifest["metrics"]["final_atom_probability"].get<double>();
  report(pa < 0.01, "7c", "beam splitter residual atomic excitation", "%.2e (< 0.01)", pa);
}

// --- 8 ---------------------------------------------------------------------

void criterion_interferometer() {
  const auto eq = run_scenario(scenario("interferometer_equal.json"));
  conservation_line("8", "interferometer_equal (256)", eq);
  const double up = region(eq, "up");
  report(up >= 0.8, "8a", "interferometer, equal arms: upward port", "up %.4f (>= 0.80), left %.4f", up,
         region(eq, "left"));
  const auto sh = run_scenario(scenario("interferometer_shifted.json"));
  conservation_line("8", "interferometer_shifted (256)", sh);
  const double left = region(sh, "left");
  report(left > 0.5, "8b", "interferometer, arms differ by lambda: left port", "left %.4f (> 0.50), up %.4f", left,
         region(sh, "up"));
}

// --- 9 ---------------------------------------------------------------------

void two_slit_line(const std::string& file, const std::string& label) {
  const auto o = run_scenario(scenario(file));
  conservation_line("9", label, o);
  const auto& m = o.manifest["metrics"];
  const double rms = m.contains("angular_rms_vs_classical") ? m["angular_rms_vs_classical"].get<double>() : std::nan("");
  report(rms < 0.1, "9", "two-slit angular profile vs classical, " + label,
         "RMS = %.4f (< 0.1) over |theta| < 0.3, r_min = 10, t = %.2f, %ld atoms", rms, m.value("angular_t", 0.0),
         o.manifest["atom_count"].get<long>());
}

void criterion_two_slit() {
  two_slit_line("two_slit_256.json", "256x256");
  const char* full = std::getenv("QOS_ACCEPT_FULL");
  if (full != nullptr && std::string(full) == "1") two_slit_line("two_slit.json", "512x512");
}

// --- 10 --------------------------------------------------------------------

void criterion_spectra() {
  const auto o = run_scenario(scenario("bs_spectra.json"));
  conservation_line("10", "bs_spectra (256)", o);
  const auto& sp = o.manifest["metrics"]["analyzer_spectra"];
  for (const char* arm : {"transmitted", "reflected"}) {
    const double rms = sp[arm]["rms_vs_input"].get<double>();
    report(rms < 0.02, "10", std::string("analyzer spectrum vs input, ") + arm,
           "normalized RMS = %.4f (< 0.02), peak at w = %.3f", rms, sp[arm]["peak_omega"].get<double>());
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, void (*)()> criteria{{1, criterion_conservation},  {2, criterion_direct_sum},
                                           {3, criterion_parseval},      {4, criterion_rabi},
                                           {5, criterion_decay},         {6, criterion_mirror},
                                           {7, criterion_beam_splitter}, {8, criterion_interferometer},
                                           {9, criterion_two_slit},      {10, criterion_spectra}};
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [id, fn] : criteria) {
    if (!chosen.empty() && !chosen.contains(id)) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, std::to_string(id), "criterion raised an exception", "%s", e.what());
    }
  }
  std::printf("acceptance: %d passed, %d failed, %.0f s\n", g_pass, g_fail, seconds_since(t0));
  return g_fail == 0 ? 0 : 1;
}
