#pragma once

// Reference implementations that avoid the FFT path entirely. They are
// O(modes * atoms) and meant for small lattices and single atoms.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qos/lattice.hpp"
#include "qos/scene.hpp"
#include "qos/state.hpp"

namespace qos::oracle {

/// Explicit double sum of the interaction-picture equations of motion
///   dc_j/dt = -(i/hbar) sum_k g(j,k) e^{i(w_j - w_k)t} c_k
///   dc_k/dt = -(i/hbar) sum_j g(j,k)^* e^{-i(w_j - w_k)t} c_j
/// with g(j,k) = -(i hbar / 2 eps0 L) sqrt(w_j) D_j e^{ik.r_j}.
/// Positions e^{ik.r_j} are evaluated directly from the atom coordinates.
class DirectSum {
 public:
  DirectSum(const ModeLattice& lat, const Scene& scene) : lat_(&lat) {
    scene.require_compatible(lat);
    const auto& u = lat.units();
    const double pref = u.hbar / (2.0 * u.epsilon0 * lat.side());
    const std::size_t m = lat.mode_count();
    for (const auto& a : scene.atoms()) {
      omega_.push_back(a.omega);
      // g(j,k) = -i pref sqrt(w_j) D_j e^{ik.r_j}
      const cplx base = cplx(0.0, -1.0) * pref * std::sqrt(a.omega) * a.dipole;
      std::vector<cplx> row(m);
      for (std::size_t f = 0; f < m; ++f) row[f] = base * std::polar(1.0, dot(lat.k(f), a.pos));
      g_.push_back(std::move(row));
    }
  }

  std::size_t atom_count() const { return g_.size(); }
  const std::vector<cplx>& coupling_row(std::size_t j) const { return g_.at(j); }

  StateVector derivative(const StateVector& s, double t) const {
    if (s.picture != Picture::interaction) throw std::invalid_argument("direct sum needs an interaction-picture state");
    if (s.field.size() != lat_->mode_count() || s.atoms.size() != g_.size())
      throw std::invalid_argument("state does not match lattice/scene");
    const double hbar = lat_->units().hbar;
    const auto w = lat_->omegas();
    StateVector out(s.field.size(), s.atoms.size(), Picture::interaction, t);
    const cplx mi(0.0, -1.0 / hbar);
    for (std::size_t j = 0; j < g_.size(); ++j) {
      cplx acc = 0.0;
      for (std::size_t f = 0; f < s.field.size(); ++f)
        acc += g_[j][f] * std::polar(1.0, (omega_[j] - w[f]) * t) * s.field[f];
      out.atoms[j] = mi * acc;
    }
    for (std::size_t f = 0; f < s.field.size(); ++f) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < g_.size(); ++j)
        acc += std::conj(g_[j][f]) * std::polar(1.0, -(omega_[j] - w[f]) * t) * s.atoms[j];
      out.field[f] = mi * acc;
    }
    return out;
  }

  /// <H0 + H_I> of a Schroedinger-picture state.
  double energy(const StateVector& s) const {
    if (s.picture != Picture::schroedinger) throw std::invalid_argument("direct energy needs a Schroedinger state");
    const auto w = lat_->omegas();
    const double hbar = lat_->units().hbar;
    double e = 0.0;
    for (std::size_t f = 0; f < s.field.size(); ++f) e += hbar * w[f] * std::norm(s.field[f]);
    for (std::size_t j = 0; j < g_.size(); ++j) {
      e += hbar * omega_[j] * std::norm(s.atoms[j]);
      cplx acc = 0.0;
      for (std::size_t f = 0; f < s.field.size(); ++f) acc += g_[j][f] * s.field[f];
      e += 2.0 * (std::conj(s.atoms[j]) * acc).real();
    }
    return e;
  }

 private:
  const ModeLattice* lat_;
  std::vector<double> omega_;
  std::vector<std::vector<cplx>> g_;
};

/// Resonant atom coupled to one mode in the interaction picture, starting
/// from the photon (c_k = 1). With g = -i G hbar e^{ik.r} and G = |gamma|/hbar:
///   c_k(t) = cos(G t),  c_j(t) = -e^{i(arg D + k.r)} sin(G t).
struct RabiSolution {
  cplx field;
  cplx atom;
};

inline RabiSolution rabi_two_level(double G, double phase, double t) {
  return {cplx(std::cos(G * t), 0.0), -std::polar(1.0, phase) * std::sin(G * t)};
}

/// First-order excitation of weakly coupled probe atoms by a free field:
///   c_j(T) = -(i/hbar) sum_k g(j,k) c_k(0) (e^{i(w_j - w_k)T} - 1) / (i (w_j - w_k)).
/// Returns |c_j(T)|^2 per atom. Valid while the probes barely perturb the field.
inline std::vector<double> perturbative_excitation(const ModeLattice& lat, const Scene& probes,
                                                   const StateVector& initial, double T) {
  if (initial.picture != Picture::schroedinger || initial.t != 0.0)
    throw std::invalid_argument("perturbative spectrum needs the t = 0 Schroedinger state");
  const DirectSum ds(lat, probes);
  const auto w = lat.omegas();
  const double hbar = lat.units().hbar;
  std::vector<double> out;
  for (std::size_t j = 0; j < ds.atom_count(); ++j) {
    const double wj = probes.atoms()[j].omega;
    const auto& row = ds.coupling_row(j);
    cplx acc = 0.0;
    for (std::size_t f = 0; f < w.size(); ++f) {
      const double d = wj - w[f];
      const cplx kernel = std::abs(d * T) < 1e-8 ? cplx(T, 0.0) : (std::polar(1.0, d * T) - 1.0) / cplx(0.0, d);
      acc += row[f] * initial.field[f] * kernel;
    }
    out.push_back(std::norm(acc / hbar));
  }
  return out;
}

}  // namespace qos::oracle
