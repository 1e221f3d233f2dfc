#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qos {

using cplx = std::complex<double>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Physical constants. Natural units (all ones) by default; every formula
/// keeps the symbols so other unit systems only need c^2 eps0 mu0 = 1.
struct SimUnits {
  double hbar = 1.0;
  double c = 1.0;
  double epsilon0 = 1.0;
  double mu0 = 1.0;

  void validate() const {
    if (!(hbar > 0 && c > 0 && epsilon0 > 0 && mu0 > 0))
      throw std::invalid_argument("SimUnits: constants must be positive");
    if (std::abs(c * c * epsilon0 * mu0 - 1.0) > 1e-12)
      throw std::invalid_argument("SimUnits: c^2 * eps0 * mu0 must equal 1");
  }
};

/// Integer position on the configuration-space grid (ix along x, iy along y).
struct GridIndex {
  int ix = 0;
  int iy = 0;
  friend bool operator==(GridIndex, GridIndex) = default;
};

/// Square periodic cavity of side L with n x n plane-wave modes.
///
/// Mode storage uses FFT wraparound order on each axis: storage index p holds
/// mode number p for p < n/2 and p - n otherwise, so the unpaired Nyquist mode
/// -n/2 sits at p = n/2. It is kept as a regular mode. All arrays are flat with
/// flat = px * n + py, and configuration-space arrays use the same layout with
/// flat = ix * n + iy.
class ModeLattice {
 public:
  ModeLattice(double side, int modes_per_axis, SimUnits units = {})
      : side_(side), n_(modes_per_axis), units_(units) {
    if (!(side > 0.0) || !std::isfinite(side))
      throw std::invalid_argument("ModeLattice: side length must be positive");
    if (modes_per_axis < 4 || modes_per_axis % 2 != 0)
      throw std::invalid_argument("ModeLattice: modes per axis must be even and >= 4, got " +
                                  std::to_string(modes_per_axis));
    units_.validate();
    const auto count = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    omega_.resize(count);
    parity_.resize(count);
    for (int px = 0; px < n_; ++px) {
      for (int py = 0; py < n_; ++py) {
        const std::size_t f = flat(px, py);
        omega_[f] = units_.c * std::hypot(wavenumber(px), wavenumber(py));
        parity_[f] = ((mode_number(px) + mode_number(py)) & 1) ? -1.0 : 1.0;
      }
    }
  }

  double side() const { return side_; }
  int n() const { return n_; }
  std::size_t mode_count() const { return omega_.size(); }
  const SimUnits& units() const { return units_; }

  double dk() const { return 2.0 * std::numbers::pi / side_; }
  double dx() const { return side_ / n_; }
  /// Largest |k| component representable on one axis, pi n / L.
  double nyquist() const { return std::numbers::pi * n_ / side_; }

  std::size_t flat(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  /// Storage index -> integer mode number in [-n/2, n/2).
  int mode_number(int index) const {
    check_index(index);
    return index < n_ / 2 ? index : index - n_;
  }

  /// Integer mode number -> storage index.
  int index_of(int mode) const {
    if (mode < -n_ / 2 || mode >= n_ / 2)
      throw std::out_of_range("ModeLattice: mode number " + std::to_string(mode) + " out of range");
    return mode >= 0 ? mode : mode + n_;
  }

  double wavenumber(int index) const { return dk() * mode_number(index); }

  Vec2 k(int px, int py) const { return {wavenumber(px), wavenumber(py)}; }
  Vec2 k(std::size_t f) const { return k(static_cast<int>(f / n_), static_cast<int>(f % n_)); }

  double omega(int px, int py) const {
    check_index(px);
    check_index(py);
    return omega_[flat(px, py)];
  }
  std::span<const double> omegas() const { return omega_; }
  double max_omega() const { return units_.c * std::sqrt(2.0) * nyquist(); }

  /// (-1)^(nx+ny): converts between e^{ik.r} on the centred grid and the
  /// plain DFT kernel, since r = i dx - L/2 gives k.r = 2 pi n i / N - pi n.
  std::span<const double> parity() const { return parity_; }

  Vec2 position(GridIndex g) const {
    return {g.ix * dx() - side_ / 2.0, g.iy * dx() - side_ / 2.0};
  }
  Vec2 position(std::size_t f) const {
    return position(GridIndex{static_cast<int>(f / n_), static_cast<int>(f % n_)});
  }

  /// Nearest grid point; throws when the point lies outside the cavity.
  GridIndex nearest_grid(Vec2 r) const {
    const auto ix = static_cast<long>(std::lround((r.x + side_ / 2.0) / dx()));
    const auto iy = static_cast<long>(std::lround((r.y + side_ / 2.0) / dx()));
    if (ix < 0 || iy < 0 || ix >= n_ || iy >= n_)
      throw std::out_of_range("point (" + std::to_string(r.x) + ", " + std::to_string(r.y) +
                              ") lies outside the cavity");
    return {static_cast<int>(ix), static_cast<int>(iy)};
  }

  bool contains(GridIndex g) const { return g.ix >= 0 && g.iy >= 0 && g.ix < n_ && g.iy < n_; }

 private:
  void check_index(int index) const {
    if (index < 0 || index >= n_)
      throw std::out_of_range("ModeLattice: index " + std::to_string(index) + " out of range");
  }

  double side_;
  int n_;
  SimUnits units_;
  std::vector<double> omega_;
  std::vector<double> parity_;
};

inline ModeLattice build_lattice(double side, int modes_per_axis, SimUnits units = {}) {
  return ModeLattice(side, modes_per_axis, units);
}

inline double mode_frequency(const ModeLattice& lat, int px, int py) { return lat.omega(px, py); }

}  // namespace qos
