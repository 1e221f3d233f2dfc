#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qos/fourier.hpp"
#include "qos/lattice.hpp"
#include "qos/scene.hpp"
#include "qos/state.hpp"

namespace qos {

/// Normal-ordered energy density on the configuration grid (flat = ix * n + iy).
struct EnergyField {
  int n = 0;
  double side = 0.0;
  double t = 0.0;
  std::vector<double> electric;
  std::vector<double> magnetic;

  double total(std::size_t f) const { return electric[f] + magnetic[f]; }
  std::vector<double> total() const {
    std::vector<double> out(electric.size());
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = electric[f] + magnetic[f];
    return out;
  }
  double cell_area() const { return (side / n) * (side / n); }
};

/// Electric part (hbar / 2L^2)|R|^2 with R = sum_k sqrt(w_k) c_k e^{ik.r} and
/// magnetic part (hbar / 2L^2 eps0 mu0)(|S_x|^2 + |S_y|^2) with
/// S_i = sum_k (k_i / sqrt(w_k)) c_k e^{ik.r}. The zero mode has weight 0 in both.
inline EnergyField energy_density(const StateVector& s, const ModeLattice& lat, FourierGrid& fft) {
  if (s.picture != Picture::schroedinger) throw std::invalid_argument("energy density needs a Schroedinger-picture state");
  if (s.field.size() != lat.mode_count()) throw std::invalid_argument("state does not match lattice");
  const std::size_t m = lat.mode_count();
  const auto w = lat.omegas();
  const auto& u = lat.units();
  const double l2 = lat.side() * lat.side();
  const double e_pref = u.hbar / (2.0 * l2);
  const double b_pref = u.hbar / (2.0 * l2 * u.epsilon0 * u.mu0);

  EnergyField e{lat.n(), lat.side(), s.t, std::vector<double>(m), std::vector<double>(m, 0.0)};
  auto mb = fft.mode_buffer();
  for (std::size_t f = 0; f < m; ++f) mb[f] = std::sqrt(w[f]) * s.field[f];
  auto R = fft.synthesize();
  for (std::size_t f = 0; f < m; ++f) e.electric[f] = e_pref * std::norm(R[f]);

  for (int axis = 0; axis < 2; ++axis) {
    for (std::size_t f = 0; f < m; ++f) {
      const Vec2 k = lat.k(f);
      const double ki = axis == 0 ? k.x : k.y;
      mb[f] = w[f] > 0.0 ? (ki / std::sqrt(w[f])) * s.field[f] : cplx{};
    }
    auto S = fft.synthesize();
    for (std::size_t f = 0; f < m; ++f) e.magnetic[f] += b_pref * std::norm(S[f]);
  }
  return e;
}

inline EnergyField energy_density(const StateVector& s, const ModeLattice& lat) {
  FourierGrid fft(lat);
  return energy_density(s, lat, fft);
}

/// sum_k hbar w_k |c_k|^2
inline double field_energy_modes(const StateVector& s, const ModeLattice& lat) {
  const auto w = lat.omegas();
  double e = 0.0;
  for (std::size_t f = 0; f < s.field.size(); ++f) e += w[f] * std::norm(s.field[f]);
  return lat.units().hbar * e;
}

/// Rectangle-rule integral of the energy density.
inline double field_energy_space(const EnergyField& e, const ModeLattice& lat) {
  if (e.n != lat.n()) throw std::invalid_argument("energy field does not match lattice");
  double acc = 0.0;
  for (std::size_t f = 0; f < e.electric.size(); ++f) acc += e.electric[f] + e.magnetic[f];
  return acc * lat.dx() * lat.dx();
}

inline std::vector<double> mode_probabilities(const StateVector& s) {
  std::vector<double> p(s.field.size());
  for (std::size_t f = 0; f < p.size(); ++f) p[f] = std::norm(s.field[f]);
  return p;
}

inline std::vector<double> atom_excitations(const StateVector& s) {
  std::vector<double> p(s.atoms.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::norm(s.atoms[j]);
  return p;
}

struct SpectrumPoint {
  double omega = 0.0;
  double probability = 0.0;
};

/// Excitation probability versus transition frequency for kind == analyzer.
inline std::vector<SpectrumPoint> analyzer_spectrum(const Scene& scene, const StateVector& s) {
  if (s.atoms.size() != scene.size()) throw std::invalid_argument("state does not match scene");
  std::vector<SpectrumPoint> out;
  for (std::size_t j = 0; j < scene.size(); ++j)
    if (scene.atoms()[j].kind == AtomKind::analyzer) out.push_back({scene.atoms()[j].omega, std::norm(s.atoms[j])});
  if (out.empty()) throw std::invalid_argument("scene has no analyzer atoms");
  return out;
}

/// RMS distance between two curves after scaling each to max 1.
inline double normalized_rms(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("normalized_rms: size mismatch");
  const double ma = *std::max_element(a.begin(), a.end());
  const double mb = *std::max_element(b.begin(), b.end());
  if (!(ma > 0.0) || !(mb > 0.0)) throw std::invalid_argument("normalized_rms: curve has no positive value");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] / ma - b[i] / mb;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

struct DecayFit {
  double gamma = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  double residual = 0.0;  ///< RMS residual of ln P about the fitted line
  std::size_t points = 0;
};

/// Least-squares fit of ln P = a - gamma t. Without a window the fit uses
/// [0.5 / g, 2 / g] where g is the inverse of the first e-folding time.
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& p,
                          std::optional<std::pair<double, double>> window = std::nullopt) {
  if (t.size() != p.size() || t.size() < 2) throw std::invalid_argument("fit_decay: need matching series of >= 2 points");
  if (!window) {
    if (!(p.front() > 0.0)) throw std::invalid_argument("fit_decay: initial probability must be positive");
    const double target = p.front() / std::numbers::e;
    std::optional<double> te;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (p[i] <= target) {
        const double f = (p[i - 1] - target) / (p[i - 1] - p[i]);
        te = t[i - 1] + f * (t[i] - t[i - 1]) - t.front();
        break;
      }
    }
    if (!te || !(*te > 0.0)) throw std::invalid_argument("fit_decay: series never falls by a factor e");
    window = {t.front() + 0.5 * *te, t.front() + 2.0 * *te};
  }
  const auto [lo, hi] = *window;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < lo || t[i] > hi) continue;
    if (!(p[i] > 0.0)) throw std::invalid_argument("fit_decay: non-positive probability inside the window");
    const double y = std::log(p[i]);
    pts.emplace_back(t[i], y);
    sx += t[i];
    sy += y;
    sxx += t[i] * t[i];
    sxy += t[i] * y;
    ++cnt;
  }
  if (cnt < 2) throw std::invalid_argument("fit_decay: fewer than two samples inside the window");
  const double nn = static_cast<double>(cnt);
  const double den = nn * sxx - sx * sx;
  const double slope = (nn * sxy - sx * sy) / den;
  const double icpt = (sy - slope * sx) / nn;
  double r2 = 0.0;
  for (const auto& [x, y] : pts) r2 += (y - (icpt + slope * x)) * (y - (icpt + slope * x));
  return {-slope, lo, hi, std::sqrt(r2 / nn), cnt};
}

struct SlicePoint {
  double k = 0.0;
  double probability = 0.0;
};

/// |c_k|^2 along one k axis (0 = vary k_x, 1 = vary k_y) with the other
/// storage index fixed, ordered by increasing wavenumber.
inline std::vector<SlicePoint> mode_slice(const StateVector& s, const ModeLattice& lat, int axis, int fixed_index) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("mode_slice: axis must be 0 or 1");
  if (fixed_index < 0 || fixed_index >= lat.n()) throw std::out_of_range("mode_slice: fixed index out of range");
  std::vector<SlicePoint> out;
  for (int m = -lat.n() / 2; m < lat.n() / 2; ++m) {
    const int p = lat.index_of(m);
    const std::size_t f = axis == 0 ? lat.flat(p, fixed_index) : lat.flat(fixed_index, p);
    out.push_back({lat.dk() * m, std::norm(s.field[f])});
  }
  return out;
}

struct AngularProfile {
  std::vector<double> theta;
  std::vector<double> intensity;  ///< max 1; NaN marks empty bins
  double r_min = 0.0;
  std::size_t gaps = 0;
};

inline constexpr int kAngularBins = 256;

/// I(phi) = int_{r_min}^{r_max} I(r, phi) dr on 256 uniform bins over [-pi, pi].
/// Each grid cell goes to the bin containing its polar angle about `origin`.
/// `forward` rotates the angle origin so phi = 0 points along it.
inline AngularProfile angular_intensity(const EnergyField& e, const ModeLattice& lat, Vec2 origin, double r_min,
                                        std::optional<double> r_max = std::nullopt, double forward = 0.0) {
  const double rmax = r_max.value_or(lat.side() / 2.0);
  if (!(r_min >= 0.0) || !(r_min < rmax)) throw std::invalid_argument("angular_intensity: need 0 <= r_min < r_max");
  if (e.n != lat.n()) throw std::invalid_argument("energy field does not match lattice");
  const int nb = kAngularBins;
  const double bw = 2.0 * std::numbers::pi / nb;
  // Per bin: sum e w / sum w with w = 1/r, times the radial span. Normalizing by
  // the sampled measure keeps bins with more cells from reading brighter.
  std::vector<double> acc(nb, 0.0), wsum(nb, 0.0);
  std::vector<int> hits(nb, 0);
  for (std::size_t f = 0; f < e.electric.size(); ++f) {
    const Vec2 d = lat.position(f) - origin;
    const double r = norm(d);
    if (r < r_min || r > rmax || r == 0.0) continue;
    double phi = std::atan2(d.y, d.x) - forward;
    phi = std::remainder(phi, 2.0 * std::numbers::pi);
    int b = static_cast<int>(std::floor((phi + std::numbers::pi) / bw));
    b = std::clamp(b, 0, nb - 1);
    acc[b] += e.total(f) / r;
    wsum[b] += 1.0 / r;
    ++hits[b];
  }
  for (int b = 0; b < nb; ++b)
    if (hits[b] > 0) acc[b] = acc[b] / wsum[b] * (rmax - r_min);
  AngularProfile out;
  out.r_min = r_min;
  double mx = 0.0;
  for (int b = 0; b < nb; ++b) mx = std::max(mx, acc[b]);
  for (int b = 0; b < nb; ++b) {
    out.theta.push_back(-std::numbers::pi + (b + 0.5) * bw);
    if (hits[b] == 0) {
      out.intensity.push_back(std::numeric_limits<double>::quiet_NaN());
      ++out.gaps;
    } else {
      out.intensity.push_back(mx > 0.0 ? acc[b] / mx : 0.0);
    }
  }
  return out;
}

/// Copy of `p` rescaled so its maximum over the forward half-plane |theta| < pi/2 is 1.
inline AngularProfile forward_normalized(const AngularProfile& p) {
  double mx = 0.0;
  for (std::size_t b = 0; b < p.theta.size(); ++b)
    if (std::abs(p.theta[b]) < 0.5 * std::numbers::pi && !std::isnan(p.intensity[b])) mx = std::max(mx, p.intensity[b]);
  AngularProfile out = p;
  if (mx > 0.0)
    for (auto& v : out.intensity) v /= mx;
  return out;
}

/// Huygens two-slit pattern cos^2((ka/2) sin t) sin^2((kd/2) sin t) / (k sin t)^2,
/// normalized to max 1. The t = 0 value is the limit (d/2)^2.
inline double classical_two_slit_raw(double k, double d, double a, double theta) {
  const double s = std::sin(theta);
  const double c = std::cos(0.5 * k * a * s);
  const double x = 0.5 * k * d * s;
  const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return c * c * (0.5 * d) * (0.5 * d) * sinc * sinc;
}

inline AngularProfile classical_two_slit(double k, double d, double a, const std::vector<double>& theta) {
  if (!(k > 0.0) || !(d > 0.0)) throw std::invalid_argument("classical_two_slit: need k > 0 and d > 0");
  AngularProfile out;
  out.theta = theta;
  double mx = 0.0;
  for (double t : theta) {
    out.intensity.push_back(classical_two_slit_raw(k, d, a, t));
    mx = std::max(mx, out.intensity.back());
  }
  if (mx > 0.0)
    for (auto& v : out.intensity) v /= mx;
  return out;
}

/// Convex region as an intersection of half-planes n.r >= c.
struct HalfPlane {
  Vec2 normal;
  double offset = 0.0;
  bool contains(Vec2 r) const { return dot(normal, r) >= offset; }
};

struct Region {
  std::vector<HalfPlane> planes;

  bool contains(Vec2 r) const {
    return std::all_of(planes.begin(), planes.end(), [&](const HalfPlane& h) { return h.contains(r); });
  }

  static Region rect(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("region: degenerate rectangle");
    return Region{{{{1, 0}, x0}, {{-1, 0}, -x1}, {{0, 1}, y0}, {{0, -1}, -y1}}};
  }
  static Region halfplane(Vec2 normal, double offset) {
    if (!(norm(normal) > 0.0)) throw std::invalid_argument("region: half-plane normal must be non-zero");
    return Region{{{normal, offset}}};
  }
  Region intersect(const Region& o) const {
    Region r = *this;
    r.planes.insert(r.planes.end(), o.planes.begin(), o.planes.end());
    return r;
  }
};

inline double region_energy(const EnergyField& e, const ModeLattice& lat, const Region& region) {
  std::size_t cells = 0;
  double acc = 0.0;
  for (std::size_t f = 0; f < e.electric.size(); ++f) {
    if (!region.contains(lat.position(f))) continue;
    acc += e.total(f);
    ++cells;
  }
  if (cells == 0) throw std::invalid_argument("region: no grid cells inside (degenerate region)");
  return acc * lat.dx() * lat.dx();
}

inline double region_energy_fraction(const EnergyField& e, const ModeLattice& lat, const Region& region) {
  const double total = field_energy_space(e, lat);
  if (!(total > 0.0)) throw std::invalid_argument("region: field carries no energy");
  return region_energy(e, lat, region) / total;
}

struct DensityMoments {
  Vec2 mean;
  Vec2 variance;
  double total = 0.0;
};

/// First and second moments of the total density in plain (unwrapped) coordinates.
inline DensityMoments density_moments(const EnergyField& e, const ModeLattice& lat) {
  DensityMoments m;
  double sx = 0, sy = 0, sxx = 0, syy = 0;
  for (std::size_t f = 0; f < e.electric.size(); ++f) {
    const double v = e.total(f);
    const Vec2 r = lat.position(f);
    m.total += v;
    sx += v * r.x;
    sy += v * r.y;
    sxx += v * r.x * r.x;
    syy += v * r.y * r.y;
  }
  if (!(m.total > 0.0)) return m;
  m.mean = {sx / m.total, sy / m.total};
  m.variance = {sxx / m.total - m.mean.x * m.mean.x, syy / m.total - m.mean.y * m.mean.y};
  return m;
}

inline std::size_t peak_cell(const EnergyField& e) {
  std::size_t best = 0;
  for (std::size_t f = 1; f < e.electric.size(); ++f)
    if (e.total(f) > e.total(best)) best = f;
  return best;
}

}  // namespace qos
