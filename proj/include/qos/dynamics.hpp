#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qos/fourier.hpp"
#include "qos/lattice.hpp"
#include "qos/scene.hpp"
#include "qos/state.hpp"

namespace qos {

/// Per-atom coupling gamma_j = (hbar / (2 eps0 L)) sqrt(omega_j) D_j and the
/// flat grid index of r_j. The positional phase e^{ik.r_j} is supplied by the FFT.
struct CouplingTable {
  std::vector<cplx> gamma;
  std::vector<std::size_t> cell;
  std::vector<double> omega;

  CouplingTable() = default;
  CouplingTable(const ModeLattice& lat, const Scene& scene) {
    scene.require_compatible(lat);
    const auto& u = lat.units();
    const double pref = u.hbar / (2.0 * u.epsilon0 * lat.side());
    gamma.reserve(scene.size());
    for (const auto& a : scene.atoms()) {
      gamma.push_back(pref * std::sqrt(a.omega) * a.dipole);
      cell.push_back(lat.flat(a.cell.ix, a.cell.iy));
      omega.push_back(a.omega);
    }
  }
  std::size_t size() const { return gamma.size(); }
};

/// Optional restriction of the field to a subset of modes. Inactive modes are
/// neither read nor written by the Hamiltonian, which keeps it Hermitian on the
/// retained subspace (used for few-level reductions).
using ModeMask = std::vector<double>;

inline ModeMask single_mode_mask(const ModeLattice& lat, int px, int py) {
  ModeMask m(lat.mode_count(), 0.0);
  m[lat.flat(px, py)] = 1.0;
  return m;
}

/// Caches e^{-i omega t} for a fixed frequency list. Repeated requests that
/// advance time by the same increment reuse one multiplication per entry; the
/// cache is recomputed exactly every kResync advances or when the increment
/// changes.
class PhaseCache {
 public:
  static constexpr int kResync = 256;

  explicit PhaseCache(std::span<const double> omega) : omega_(omega.begin(), omega.end()), phase_(omega.size()) {}

  std::span<const cplx> at(double t) {
    const double h = t - t_;
    if (valid_ && std::abs(h) <= 1e-13 * std::max(1.0, std::abs(t))) return phase_;
    const bool reuse = valid_ && advances_ < kResync && h > 0.0 && step_h_ > 0.0 &&
                       std::abs(h - step_h_) <= 1e-12 * step_h_;
    if (reuse) {
      for (std::size_t i = 0; i < phase_.size(); ++i) phase_[i] *= step_[i];
      ++advances_;
    } else {
      if (valid_ && h > 0.0) {
        step_h_ = h;
        step_.resize(omega_.size());
        for (std::size_t i = 0; i < omega_.size(); ++i) step_[i] = std::polar(1.0, -omega_[i] * h);
      }
      for (std::size_t i = 0; i < omega_.size(); ++i) phase_[i] = std::polar(1.0, -omega_[i] * t);
      advances_ = 0;
    }
    t_ = t;
    valid_ = true;
    return phase_;
  }

 private:
  std::vector<double> omega_;
  std::vector<cplx> phase_;
  std::vector<cplx> step_;
  double t_ = 0.0;
  double step_h_ = 0.0;
  int advances_ = 0;
  bool valid_ = false;
};

/// FFT buffers, phase caches and coupling constants for one (lattice, scene).
class RhsWorkspace {
 public:
  RhsWorkspace(const ModeLattice& lat, const Scene& scene, std::optional<ModeMask> mask = std::nullopt)
      : lat_(&lat), coupling_(lat, scene), fft_(lat), mode_phase_(lat.omegas()), mask_(std::move(mask)),
        atom_phase_(scene.size()) {
    if (mask_ && mask_->size() != lat.mode_count()) throw std::invalid_argument("mode mask size mismatch");
  }

  const ModeLattice& lattice() const { return *lat_; }
  const CouplingTable& coupling() const { return coupling_; }
  FourierGrid& fft() { return fft_; }
  const std::optional<ModeMask>& mask() const { return mask_; }
  std::size_t atom_count() const { return coupling_.size(); }

  std::span<const cplx> mode_phase(double t) { return mode_phase_.at(t); }
  std::span<const cplx> atom_phase(double t) {
    for (std::size_t j = 0; j < atom_phase_.size(); ++j) atom_phase_[j] = std::polar(1.0, -coupling_.omega[j] * t);
    return atom_phase_;
  }

  void check(const StateVector& s, Picture expected) const {
    if (s.picture != expected) throw std::invalid_argument("state is in the wrong picture");
    if (s.field.size() != lat_->mode_count() || s.atoms.size() != coupling_.size())
      throw std::invalid_argument("state does not match lattice/scene");
  }

 private:
  const ModeLattice* lat_;
  CouplingTable coupling_;
  FourierGrid fft_;
  PhaseCache mode_phase_;
  std::optional<ModeMask> mask_;
  std::vector<cplx> atom_phase_;
};

/// Writes d|psi>/dt = -(i/hbar) H_I(t) |psi> for an interaction-picture state
/// into `out` (resized as needed). Two FFTs per call; none without atoms.
inline void apply_hamiltonian_into(const StateVector& s, double t, RhsWorkspace& ws, StateVector& out) {
  ws.check(s, Picture::interaction);
  out.field.resize(s.field.size());
  out.atoms.resize(s.atoms.size());
  out.picture = Picture::interaction;
  out.t = t;
  const auto& cp = ws.coupling();
  if (cp.size() == 0) {
    std::fill(out.field.begin(), out.field.end(), cplx{});
    return;
  }
  const double hbar = ws.lattice().units().hbar;
  const auto ph = ws.mode_phase(t);
  const auto ah = ws.atom_phase(t);
  const auto* mask = ws.mask() ? ws.mask()->data() : nullptr;
  auto& fft = ws.fft();

  // T(r) = sum_k c_k e^{-i w_k t} e^{ik.r}
  auto mb = fft.mode_buffer();
  if (mask != nullptr) {
    for (std::size_t f = 0; f < mb.size(); ++f) mb[f] = s.field[f] * ph[f] * mask[f];
  } else {
    for (std::size_t f = 0; f < mb.size(); ++f) mb[f] = s.field[f] * ph[f];
  }
  const auto T = fft.synthesize();
  for (std::size_t j = 0; j < cp.size(); ++j)
    out.atoms[j] = -(cp.gamma[j] / hbar) * std::conj(ah[j]) * T[cp.cell[j]];

  // U(k) = sum_r G(r) e^{-ik.r},  G(r_j) = conj(gamma_j) c_j e^{-i w_j t}
  fft.clear_field();
  auto fb = fft.field_buffer();
  for (std::size_t j = 0; j < cp.size(); ++j) fb[cp.cell[j]] += std::conj(cp.gamma[j]) * s.atoms[j] * ah[j];
  const auto U = fft.analyze();
  const double inv = 1.0 / hbar;
  if (mask != nullptr) {
    for (std::size_t f = 0; f < U.size(); ++f) out.field[f] = inv * mask[f] * std::conj(ph[f]) * U[f];
  } else {
    for (std::size_t f = 0; f < U.size(); ++f) out.field[f] = inv * std::conj(ph[f]) * U[f];
  }
}

inline StateVector apply_hamiltonian(const StateVector& s, const Scene& scene, const ModeLattice& lat, double t,
                                     RhsWorkspace& ws) {
  scene.require_compatible(lat);
  if (ws.lattice().n() != lat.n() || ws.lattice().side() != lat.side()) throw std::invalid_argument("workspace lattice mismatch");
  if (ws.atom_count() != scene.size()) throw std::invalid_argument("workspace scene mismatch");
  StateVector out;
  apply_hamiltonian_into(s, t, ws, out);
  return out;
}

namespace detail {

/// y = x + a * k over both field and atom parts.
inline void axpy(const StateVector& x, double a, const StateVector& k, StateVector& y) {
  y.field.resize(x.field.size());
  y.atoms.resize(x.atoms.size());
  y.picture = x.picture;
  for (std::size_t i = 0; i < x.field.size(); ++i) y.field[i] = x.field[i] + a * k.field[i];
  for (std::size_t i = 0; i < x.atoms.size(); ++i) y.atoms[i] = x.atoms[i] + a * k.atoms[i];
}

}  // namespace detail

/// Classical RK4 with stage weights (1/6, 1/3, 1/3, 1/6). `rhs(t, y, out)`
/// must write dy/dt into out. Scratch vectors are reused between steps.
class Rk4 {
 public:
  template <class Rhs>
  void step(StateVector& s, double t, double dt, Rhs&& rhs) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4 step needs dt > 0");
    const double h2 = 0.5 * dt;
    rhs(t, s, k1_);
    detail::axpy(s, h2, k1_, tmp_);
    rhs(t + h2, tmp_, k2_);
    detail::axpy(s, h2, k2_, tmp_);
    rhs(t + h2, tmp_, k3_);
    detail::axpy(s, dt, k3_, tmp_);
    rhs(t + dt, tmp_, k4_);
    const double w1 = dt / 6.0;
    const double w2 = dt / 3.0;
    for (std::size_t i = 0; i < s.field.size(); ++i)
      s.field[i] += w1 * (k1_.field[i] + k4_.field[i]) + w2 * (k2_.field[i] + k3_.field[i]);
    for (std::size_t i = 0; i < s.atoms.size(); ++i)
      s.atoms[i] += w1 * (k1_.atoms[i] + k4_.atoms[i]) + w2 * (k2_.atoms[i] + k3_.atoms[i]);
    s.t = t + dt;
  }

 private:
  StateVector k1_, k2_, k3_, k4_, tmp_;
};

inline StateVector rk4_step(StateVector s, const Scene& scene, const ModeLattice& lat, double t, double dt,
                            RhsWorkspace& ws) {
  scene.require_compatible(lat);
  ws.check(s, Picture::interaction);
  Rk4 rk;
  rk.step(s, t, dt, [&](double tt, const StateVector& y, StateVector& out) { apply_hamiltonian_into(y, tt, ws, out); });
  return s;
}

/// Exact free-field evolution in the Schroedinger picture: c_k -> c_k e^{-i w_k dt}.
inline StateVector free_evolve(StateVector s, const ModeLattice& lat, double dt) {
  if (s.picture != Picture::schroedinger) throw std::invalid_argument("free_evolve needs a Schroedinger-picture state");
  if (s.field.size() != lat.mode_count()) throw std::invalid_argument("state does not match lattice");
  if (dt != 0.0) {
    const auto w = lat.omegas();
    for (std::size_t f = 0; f < s.field.size(); ++f) s.field[f] *= std::polar(1.0, -w[f] * dt);
  }
  s.t += dt;
  return s;
}

/// Default step: dt (w_max + max_j w_j) = 0.1.
inline constexpr double kStabilityProduct = 0.1;

inline double max_atom_omega(const Scene& scene) {
  double m = 0.0;
  for (const auto& a : scene.atoms()) m = std::max(m, a.omega);
  return m;
}

inline double default_dt(const ModeLattice& lat, const Scene& scene) {
  return kStabilityProduct / (lat.max_omega() + max_atom_omega(scene));
}

struct Energies {
  double field = 0.0;
  double atoms = 0.0;
  double interaction = 0.0;
  double total() const { return field + atoms + interaction; }
};

/// <H0> + <H_I> for a state in either picture. Uses one FFT.
inline Energies energies(const StateVector& s, RhsWorkspace& ws) {
  const auto& lat = ws.lattice();
  if (s.field.size() != lat.mode_count() || s.atoms.size() != ws.atom_count())
    throw std::invalid_argument("state does not match lattice/scene");
  const double hbar = lat.units().hbar;
  const auto w = lat.omegas();
  const auto& cp = ws.coupling();
  const auto* mask = ws.mask() ? ws.mask()->data() : nullptr;
  Energies e;
  for (std::size_t f = 0; f < s.field.size(); ++f) {
    const double m = mask != nullptr ? mask[f] : 1.0;
    e.field += hbar * w[f] * m * std::norm(s.field[f]);
  }
  for (std::size_t j = 0; j < s.atoms.size(); ++j) e.atoms += hbar * cp.omega[j] * std::norm(s.atoms[j]);
  if (cp.size() == 0) return e;

  // Schroedinger amplitudes: interaction-picture values times e^{-i w t}.
  const bool inter = s.picture == Picture::interaction;
  auto mb = ws.fft().mode_buffer();
  if (inter) {
    const auto ph = ws.mode_phase(s.t);
    for (std::size_t f = 0; f < mb.size(); ++f) mb[f] = s.field[f] * ph[f];
  } else {
    for (std::size_t f = 0; f < mb.size(); ++f) mb[f] = s.field[f];
  }
  if (mask != nullptr)
    for (std::size_t f = 0; f < mb.size(); ++f) mb[f] *= mask[f];
  const auto T = ws.fft().synthesize();
  const auto ah = inter ? ws.atom_phase(s.t) : std::span<const cplx>{};
  double acc = 0.0;
  for (std::size_t j = 0; j < cp.size(); ++j) {
    const cplx cj = inter ? s.atoms[j] * ah[j] : s.atoms[j];
    acc += (std::conj(cj) * (cplx(0.0, -1.0) * cp.gamma[j] * T[cp.cell[j]])).real();
  }
  e.interaction = 2.0 * acc;
  return e;
}

class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, long step) : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Owns an interaction-picture state and advances it on a fixed grid
/// t_n = t0 + n dt. Every step checks the state for NaN or overflow.
class Integrator {
 public:
  Integrator(const ModeLattice& lat, const Scene& scene, StateVector initial, double dt,
             std::optional<ModeMask> mask = std::nullopt)
      : lat_(&lat), ws_(lat, scene, std::move(mask)), dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive and finite");
    state_ = to_picture(std::move(initial), Picture::interaction, lat, ws_.coupling().omega);
    t0_ = state_.t;
  }

  double dt() const { return dt_; }
  long steps() const { return steps_; }
  double time() const { return state_.t; }
  const StateVector& state() const { return state_; }
  RhsWorkspace& workspace() { return ws_; }

  StateVector schroedinger_state() const {
    return to_picture(state_, Picture::schroedinger, *lat_, ws_.coupling().omega);
  }

  void step() {
    const double t = t0_ + static_cast<double>(steps_) * dt_;
    rk_.step(state_, t, dt_, [this](double tt, const StateVector& y, StateVector& out) {
      apply_hamiltonian_into(y, tt, ws_, out);
    });
    ++steps_;
    state_.t = t0_ + static_cast<double>(steps_) * dt_;
    const double n2 = norm_squared(state_);
    if (!std::isfinite(n2) || n2 > 1e6)
      throw NumericalFailure("non-finite state at step " + std::to_string(steps_), steps_);
  }

  void advance(long count) {
    for (long i = 0; i < count; ++i) step();
  }

  Energies energies() { return qos::energies(state_, ws_); }

 private:
  const ModeLattice* lat_;
  RhsWorkspace ws_;
  Rk4 rk_;
  StateVector state_;
  double dt_;
  double t0_ = 0.0;
  long steps_ = 0;
};

}  // namespace qos
