// qos: command-line front end for the single-photon cavity simulator.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include "CLI11.hpp"
#include "qos/config.hpp"
#include "qos/io.hpp"
#include "qos/observables.hpp"
#include "qos/runner.hpp"
#include "qos/verify.hpp"

namespace {

constexpr int kOk = static_cast<int>(qos::ExitCode::ok);
constexpr int kConfigError = static_cast<int>(qos::ExitCode::config_error);
constexpr int kNumericalFailure = static_cast<int>(qos::ExitCode::numerical_failure);

struct RunArgs {
  std::string config;
  std::string out_pos;
  std::string out;
  double dt = 0.0;
  double t_end = -1.0;
  double snapshot_every = 0.0;
  bool log_scale = false;
  bool halve_dt = false;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  try {
    const auto cfg = qos::load_config(a.config);
    qos::RunOptions opt;
    if (a.dt > 0.0) opt.dt = a.dt;
    if (a.t_end >= 0.0) opt.t_end = a.t_end;
    if (a.snapshot_every > 0.0) opt.snapshot_every = a.snapshot_every;
    opt.log_scale = a.log_scale;
    opt.halve_dt_check = a.halve_dt;
    if (!a.quiet) opt.log = &std::cerr;
    qos::Simulation sim(cfg, opt);
    for (const auto& w : sim.warnings()) std::cerr << "warning: " << w << "\n";
    std::string out = !a.out.empty() ? a.out : a.out_pos;
    if (out.empty()) out = "out";
    if (!a.quiet)
      std::cerr << "lattice " << sim.lattice().n() << "x" << sim.lattice().n() << ", " << sim.scene().size()
                << " atoms, dt " << sim.dt() << ", " << sim.steps() << " steps\n";
    const auto manifest = sim.run(out);
    std::cout << manifest.dump(2) << "\n";
    if (manifest["status"] != "ok") {
      std::cerr << "error: " << manifest.value("error", std::string("numerical failure")) << "\n";
      return kNumericalFailure;
    }
    return kOk;
  } catch (const qos::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

int cmd_check(const std::string& path) {
  int errors = 0;
  auto finding = [&](const char* level, const std::string& msg) {
    std::cout << level << ": " << msg << "\n";
    if (std::string(level) == "error") ++errors;
  };
  try {
    const auto cfg = qos::load_config(path);
    qos::Simulation sim(cfg, {});
    const auto& lat = sim.lattice();
    char buf[256];
    std::snprintf(buf, sizeof buf, "lattice L = %.6g, n = %d, dk = %.6g, dx = %.6g", lat.side(), lat.n(), lat.dk(),
                  lat.dx());
    finding("info", buf);
    for (const auto& g : sim.built().groups)
      finding("info", "element " + g.label + " (" + g.type + "): " + std::to_string(g.last - g.first) + " atoms");
    finding("info", "atoms predicted: " + std::to_string(sim.scene().size()));
    std::snprintf(buf, sizeof buf, "dt = %.6g, steps = %ld, dt*(w_max + w_atom) = %.4g", sim.dt(), sim.steps(),
                  sim.stability_product());
    finding("info", buf);
    if (cfg.run.step_budget && sim.steps() > *cfg.run.step_budget)
      finding("error", "step count " + std::to_string(sim.steps()) + " exceeds step_budget " +
                           std::to_string(*cfg.run.step_budget));
    for (const auto& w : sim.warnings()) finding("warning", w);
  } catch (const qos::ConfigError& e) {
    finding("error", e.what());
  } catch (const std::invalid_argument& e) {
    finding("error", e.what());
  }
  std::cout << (errors == 0 ? "ok" : "failed") << "\n";
  return errors == 0 ? kOk : kConfigError;
}

int oracle_two_slit(double k, double d, double a, double theta_max, int bins, const std::string& out) {
  if (!(k > 0.0) || !(d > 0.0) || a < 0.0 || bins < 2 || !(theta_max > 0.0)) {
    std::cerr << "bad parameters: need k > 0, d > 0, a >= 0, bins >= 2, theta-max > 0\n";
    return kConfigError;
  }
  std::vector<double> theta;
  for (int b = 0; b < bins; ++b) theta.push_back(-theta_max + 2.0 * theta_max * b / (bins - 1));
  const auto prof = qos::classical_two_slit(k, d, a, theta);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file.open(out);
    if (!file) {
      std::cerr << "cannot open " << out << "\n";
      return kConfigError;
    }
    os = &file;
  }
  *os << "theta,intensity\n";
  for (std::size_t i = 0; i < theta.size(); ++i) *os << theta[i] << "," << prof.intensity[i] << "\n";
  return kOk;
}

int oracle_rabi(double g_dt, double periods, const std::string& out) {
  if (!(g_dt > 0.0) || !(periods > 0.0)) {
    std::cerr << "bad parameters: need g-dt > 0 and periods > 0\n";
    return kConfigError;
  }
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) {
      std::cerr << "cannot open " << out << "\n";
      return kConfigError;
    }
    file << "t,p_atom,p_exact\n";
    file.precision(17);
  }
  const auto rep = qos::verify::rabi_check(g_dt, periods, [&](double t, double p, double q) {
    if (file.is_open()) file << t << "," << p << "," << q << "\n";
  });
  std::printf("rabi: G = %.6g, dt = %.6g, steps = %ld, max amplitude error = %.3e, final = %.3e\n", rep.coupling,
              rep.dt, rep.steps, rep.max_error, rep.final_error);
  return kOk;
}

int oracle_direct_sum(int n, int atoms, int states, unsigned seed) {
  if (n < 4 || n % 2 != 0 || atoms < 1 || states < 1) {
    std::cerr << "bad parameters: need even n >= 4, atoms >= 1, states >= 1\n";
    return kConfigError;
  }
  const auto rep = qos::verify::direct_sum_check(n, atoms, static_cast<std::size_t>(states), seed);
  std::printf("direct_sum: n = %d, states = %zu, max atoms = %zu, max abs diff = %.3e, max rel diff = %.3e (%.3f s)\n",
              rep.n, rep.states, rep.max_atoms, rep.max_abs, rep.max_rel, rep.seconds);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-photon wave packets in a 2D periodic cavity with two-level-atom optics"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "run a scenario and write snapshots, diagnostics and a manifest");
  run->add_option("config", ra.config, "scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("out_dir", ra.out_pos, "output directory (default: out)");
  run->add_option("--out", ra.out, "output directory");
  run->add_option("--dt", ra.dt, "time step override");
  run->add_option("--t-end", ra.t_end, "final time override");
  run->add_option("--snapshot-every", ra.snapshot_every, "snapshot interval override");
  run->add_flag("--log-scale", ra.log_scale, "log-scale PGM images");
  run->add_flag("--halve-dt-check", ra.halve_dt, "rerun at dt/2 and report the end-state difference");
  run->add_flag("-q,--quiet", ra.quiet, "no progress output");

  std::string check_path;
  auto* check = app.add_subcommand("check", "validate a scenario without running it");
  check->add_option("config", check_path, "scenario JSON file")->required();

  auto* oracle = app.add_subcommand("oracle", "evaluate independent reference models");
  oracle->require_subcommand(1);
  double k = 5.0, d = 1.0, a = 2.5, theta_max = 1.5;
  int bins = 256;
  std::string ts_out;
  auto* ts = oracle->add_subcommand("two_slit", "classical two-slit intensity");
  ts->add_option("--k", k, "wavenumber");
  ts->add_option("--d", d, "slit width");
  ts->add_option("--a", a, "slit separation (centre to centre)");
  ts->add_option("--theta-max", theta_max, "largest |theta| in radians");
  ts->add_option("--bins", bins, "number of samples");
  ts->add_option("--out", ts_out, "CSV file (default: stdout)");

  double g_dt = 0.01, periods = 10.0;
  std::string rabi_out;
  auto* rabi = oracle->add_subcommand("rabi", "one atom, one mode: RK4 against the closed form");
  rabi->add_option("--g-dt", g_dt, "coupling times step");
  rabi->add_option("--periods", periods, "number of amplitude periods");
  rabi->add_option("--out", rabi_out, "CSV trace of the atomic population");

  int ds_n = 8, ds_atoms = 4, ds_states = 100;
  unsigned ds_seed = 1;
  auto* ds = oracle->add_subcommand("direct_sum", "FFT right-hand side against the explicit double sum");
  ds->add_option("--n", ds_n, "modes per axis");
  ds->add_option("--atoms", ds_atoms, "maximum atoms per sample");
  ds->add_option("--states", ds_states, "number of random states");
  ds->add_option("--seed", ds_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(ra);
    if (*check) return cmd_check(check_path);
    if (*ts) return oracle_two_slit(k, d, a, theta_max, bins, ts_out);
    if (*rabi) return oracle_rabi(g_dt, periods, rabi_out);
    if (*ds) return oracle_direct_sum(ds_n, ds_atoms, ds_states, ds_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
  return kOk;
}
