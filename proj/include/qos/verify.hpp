#pragma once

// Self-checks shared by the CLI oracle subcommands and the test suites.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>

#include "qos/dynamics.hpp"
#include "qos/oracle.hpp"

namespace qos::verify {

struct RabiReport {
  double coupling = 0.0;  ///< G = |gamma| / hbar
  double dt = 0.0;
  long steps = 0;
  double max_error = 0.0;
  double final_error = 0.0;
};

/// One resonant atom and one retained mode k = (1, 0) on the 4x4 lattice of
/// side 2 pi, integrated with the production RK4 and FFT right-hand side for
/// `periods` full periods 2 pi / G of the amplitudes. Errors are the largest
/// amplitude deviation from the closed form.
inline RabiReport rabi_check(double g_dt, double periods,
                             const std::function<void(double t, double p_num, double p_exact)>& sample = {}) {
  if (!(g_dt > 0.0) || !(periods > 0.0)) throw std::invalid_argument("rabi: need g*dt > 0 and periods > 0");
  const ModeLattice lat(2.0 * std::numbers::pi, 4);
  const cplx dip = std::polar(1.0, 0.3);
  Scene scene(lat);
  scene.add(Atom{lat.position(GridIndex{1, 2}), GridIndex{1, 2}, 1.0, dip, AtomKind::element});
  const int px = lat.index_of(1);
  const int py = lat.index_of(0);
  StateVector s(lat.mode_count(), 1);
  s.field[lat.flat(px, py)] = 1.0;

  const double G = std::abs(CouplingTable(lat, scene).gamma[0]) / lat.units().hbar;
  const double phase = std::arg(dip) + dot(lat.k(px, py), scene.atoms()[0].pos);
  RabiReport rep;
  rep.coupling = G;
  rep.steps = std::lround(periods * 2.0 * std::numbers::pi / g_dt);
  rep.dt = periods * 2.0 * std::numbers::pi / G / static_cast<double>(rep.steps);
  Integrator integ(lat, scene, s, rep.dt, single_mode_mask(lat, px, py));
  const std::size_t f = lat.flat(px, py);
  for (long i = 1; i <= rep.steps; ++i) {
    integ.step();
    const auto exact = oracle::rabi_two_level(G, phase, integ.time());
    const auto& st = integ.state();
    const double err = std::max(std::abs(st.field[f] - exact.field), std::abs(st.atoms[0] - exact.atom));
    rep.max_error = std::max(rep.max_error, err);
    if (i == rep.steps) rep.final_error = err;
    if (sample) sample(integ.time(), std::norm(st.atoms[0]), std::norm(exact.atom));
  }
  return rep;
}

/// Observed order from errors at two step sizes in ratio 2.
inline double observed_order(double err_coarse, double err_fine) { return std::log2(err_coarse / err_fine); }

struct DirectSumReport {
  int n = 0;
  std::size_t states = 0;
  std::size_t max_atoms = 0;
  double max_abs = 0.0;
  double max_rel = 0.0;
  double seconds = 0.0;
};

/// Random atoms (distinct grid points, random omega and complex D) and random
/// one-excitation states on an n x n lattice; compares the FFT right-hand side
/// with the explicit double sum.
inline DirectSumReport direct_sum_check(int n, int max_atoms, std::size_t states, unsigned seed) {
  if (max_atoms < 1) throw std::invalid_argument("direct_sum: need at least one atom");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> cell(0, n - 1);
  std::uniform_int_distribution<int> natoms(1, max_atoms);
  DirectSumReport rep;
  rep.n = n;
  rep.states = states;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < states; ++it) {
    const ModeLattice lat(1.0 + 5.0 * std::abs(u(rng)), n);
    Scene scene(lat);
    const int want = natoms(rng);
    while (static_cast<int>(scene.size()) < want) {
      const GridIndex g{cell(rng), cell(rng)};
      if (scene.occupied(g)) continue;
      scene.add(Atom{lat.position(g), g, 0.5 + 10.0 * std::abs(u(rng)), cplx(u(rng), u(rng)), AtomKind::element});
    }
    rep.max_atoms = std::max(rep.max_atoms, scene.size());
    StateVector s(lat.mode_count(), scene.size(), Picture::interaction, 10.0 * u(rng));
    for (auto& c : s.field) c = {u(rng), u(rng)};
    for (auto& c : s.atoms) c = {u(rng), u(rng)};
    const double nn = norm(s);
    for (auto& c : s.field) c /= nn;
    for (auto& c : s.atoms) c /= nn;

    RhsWorkspace ws(lat, scene);
    StateVector fast;
    apply_hamiltonian_into(s, s.t, ws, fast);
    const auto ref = oracle::DirectSum(lat, scene).derivative(s, s.t);
    double scale = 0.0, diff = 0.0;
    for (std::size_t f = 0; f < s.field.size(); ++f) {
      scale = std::max(scale, std::abs(ref.field[f]));
      diff = std::max(diff, std::abs(fast.field[f] - ref.field[f]));
    }
    for (std::size_t j = 0; j < s.atoms.size(); ++j) {
      scale = std::max(scale, std::abs(ref.atoms[j]));
      diff = std::max(diff, std::abs(fast.atoms[j] - ref.atoms[j]));
    }
    rep.max_abs = std::max(rep.max_abs, diff);
    rep.max_rel = std::max(rep.max_rel, scale > 0.0 ? diff / scale : diff);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace qos::verify
