#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qos/lattice.hpp"

namespace qos {

using Warnings = std::vector<std::string>;

enum class Picture : std::uint8_t { schroedinger = 0, interaction = 1 };

inline const char* to_string(Picture p) {
  return p == Picture::schroedinger ? "schroedinger" : "interaction";
}

/// One-excitation state: amplitude of one photon in each field mode
/// (s = 1 polarization only) plus amplitude of each atom being excited.
/// Field amplitudes use ModeLattice storage order.
struct StateVector {
  std::vector<cplx> field;
  std::vector<cplx> atoms;
  Picture picture = Picture::schroedinger;
  double t = 0.0;

  StateVector() = default;
  StateVector(std::size_t modes, std::size_t atom_count, Picture pic = Picture::schroedinger, double time = 0.0)
      : field(modes), atoms(atom_count), picture(pic), t(time) {}
};

inline double norm_squared(const StateVector& s) {
  double acc = 0.0;
  for (const auto& c : s.field) acc += std::norm(c);
  for (const auto& c : s.atoms) acc += std::norm(c);
  return acc;
}

inline double norm(const StateVector& s) { return std::sqrt(norm_squared(s)); }

/// Total probability that some atom holds the excitation.
inline double atom_probability(const StateVector& s) {
  double acc = 0.0;
  for (const auto& c : s.atoms) acc += std::norm(c);
  return acc;
}

/// Initial photon packet: Gaussian in k around k0 with (co)variances of |c_k|^2,
/// centred at r0 in configuration space.
struct GaussianSpec {
  Vec2 r0;
  Vec2 k0;
  double var_kx = 1.0;
  double var_ky = 1.0;
  double covar_kxky = 0.0;

  double determinant() const { return var_kx * var_ky - covar_kxky * covar_kxky; }
};

inline constexpr double kMinVariance = 1e-6;

/// Builds c_k ~ exp(-i k.r0) exp(-(dky^2 qx^2 + dkx^2 qy^2 - 2 cov qx qy) / 4M),
/// q = k - k0, M = dkx^2 dky^2 - cov^2, then normalizes the lattice sum to 1.
/// Without covariance this is the product of two 1D Gaussians.
inline StateVector make_gaussian_photon(const ModeLattice& lat, const GaussianSpec& spec,
                                        std::size_t atom_count = 0, Warnings* warnings = nullptr) {
  if (!(spec.var_kx >= kMinVariance) || !(spec.var_ky >= kMinVariance))
    throw std::invalid_argument("gaussian photon: variances must be >= 1e-6");
  const double det = spec.determinant();
  if (!(det > 0.0)) throw std::invalid_argument("gaussian photon: covariance matrix is not positive definite");
  const double kn = lat.nyquist();
  if (std::abs(spec.k0.x) >= kn || std::abs(spec.k0.y) >= kn)
    throw std::invalid_argument("gaussian photon: k0 outside the lattice band |k_i| < " + std::to_string(kn));
  if (warnings != nullptr) {
    const double mx = std::abs(spec.k0.x) + 3.0 * std::sqrt(spec.var_kx);
    const double my = std::abs(spec.k0.y) + 3.0 * std::sqrt(spec.var_ky);
    if (mx > kn || my > kn)
      warnings->push_back("gaussian photon: k0 +- 3 sigma reaches beyond the lattice band");
  }

  StateVector s(lat.mode_count(), atom_count);
  const int n = lat.n();
  for (int px = 0; px < n; ++px) {
    for (int py = 0; py < n; ++py) {
      const Vec2 k = lat.k(px, py);
      const double qx = k.x - spec.k0.x;
      const double qy = k.y - spec.k0.y;
      const double expo = -(spec.var_ky * qx * qx + spec.var_kx * qy * qy - 2.0 * spec.covar_kxky * qx * qy) /
                          (4.0 * det);
      s.field[lat.flat(px, py)] = std::polar(std::exp(expo), -dot(k, spec.r0));
    }
  }
  const double nrm = norm(s);
  if (!(nrm > 0.0) || !std::isfinite(nrm))
    throw std::invalid_argument("gaussian photon: packet has no weight on the lattice");
  for (auto& c : s.field) c /= nrm;
  return s;
}

/// Multiplies amplitudes by exp(+i w t) (to interaction) or exp(-i w t)
/// (to Schroedinger). Identity when already in the target picture.
inline StateVector to_picture(StateVector s, Picture target, const ModeLattice& lat,
                              std::span<const double> atom_omega) {
  if (s.picture == target) return s;
  if (s.field.size() != lat.mode_count() || s.atoms.size() != atom_omega.size())
    throw std::invalid_argument("to_picture: state does not match lattice/scene");
  const double sign = target == Picture::interaction ? 1.0 : -1.0;
  const auto w = lat.omegas();
  for (std::size_t f = 0; f < s.field.size(); ++f) s.field[f] *= std::polar(1.0, sign * w[f] * s.t);
  for (std::size_t j = 0; j < s.atoms.size(); ++j) s.atoms[j] *= std::polar(1.0, sign * atom_omega[j] * s.t);
  s.picture = target;
  return s;
}

}  // namespace qos
