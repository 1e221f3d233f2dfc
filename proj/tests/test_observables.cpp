#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qos/dynamics.hpp"
#include "qos/observables.hpp"
#include "qos/oracle.hpp"

using namespace qos;

namespace {

constexpr double kPi = std::numbers::pi;

StateVector random_photon(const ModeLattice& lat, std::mt19937_64& rng) {
  std::normal_distribution<double> u;
  StateVector s(lat.mode_count(), 0);
  for (auto& c : s.field) c = {u(rng), u(rng)};
  const double n = norm(s);
  for (auto& c : s.field) c /= n;
  return s;
}

double decay_rate(double dipole, double t_end) {
  const ModeLattice lat(5.0 * kPi, 128);
  Scene scene(lat);
  scene.add(Atom{{0.0, 0.0}, lat.nearest_grid({0.0, 0.0}), 15.0, dipole});
  StateVector s(lat.mode_count(), 1);
  s.atoms[0] = 1.0;
  Integrator integ(lat, scene, s, default_dt(lat, scene));
  std::vector<double> t{0.0}, p{1.0};
  const long steps = std::lround(t_end / integ.dt());
  for (long i = 1; i <= steps; ++i) {
    integ.step();
    if (i % 10 == 0) {
      t.push_back(integ.time());
      p.push_back(atom_probability(integ.state()));
    }
  }
  return fit_decay(t, p).gamma;
}

}  // namespace

TEST(EnergyDensity, SingleModeIsUniform) {
  const ModeLattice lat(10.0 * kPi, 64);
  StateVector s(lat.mode_count(), 0);
  s.field[lat.flat(lat.index_of(20), 0)] = 1.0;
  const auto e = energy_density(s, lat);
  const double expect = 4.0 / (100.0 * kPi * kPi);
  EXPECT_NEAR(expect, 4.05e-3, 1e-5);
  for (std::size_t f = 0; f < e.electric.size(); ++f) {
    EXPECT_NEAR(e.total(f), expect, 1e-15);
    EXPECT_NEAR(e.electric[f], e.magnetic[f], 1e-15);
  }
}

TEST(EnergyDensity, Figure1PacketPeaksAtR0) {
  const ModeLattice lat(10.0 * kPi, 256);
  const auto s = make_gaussian_photon(lat, {{-8.0, 0.0}, {4.0, 0.0}, 1.0, 1.0, 0.0});
  const Vec2 p = lat.position(peak_cell(energy_density(s, lat)));
  EXPECT_LE(std::abs(p.x + 8.0), lat.dx());
  EXPECT_LE(std::abs(p.y), lat.dx());
}

TEST(EnergyDensity, VacuumIsZeroAndDensityNonNegative) {
  const ModeLattice lat(4.0, 16);
  const auto zero = energy_density(StateVector(lat.mode_count(), 0), lat);
  for (std::size_t f = 0; f < zero.electric.size(); ++f) EXPECT_EQ(zero.total(f), 0.0);
  std::mt19937_64 rng(9);
  const auto e = energy_density(random_photon(lat, rng), lat);
  for (std::size_t f = 0; f < e.electric.size(); ++f) {
    EXPECT_GE(e.electric[f], 0.0);
    EXPECT_GE(e.magnetic[f], 0.0);
  }
  StateVector inter(lat.mode_count(), 0, Picture::interaction);
  EXPECT_THROW(energy_density(inter, lat), std::invalid_argument);
}

TEST(FieldEnergy, SingleModeFive) {
  const ModeLattice lat(2.0 * kPi, 16);
  StateVector s(lat.mode_count(), 0);
  s.field[lat.flat(lat.index_of(3), lat.index_of(-4))] = 1.0;
  EXPECT_NEAR(field_energy_modes(s, lat), 5.0, 1e-14);
  EXPECT_NEAR(field_energy_space(energy_density(s, lat), lat), 5.0, 1e-12);
}

TEST(FieldEnergy, GaussianMeanFrequency) {
  const ModeLattice lat(10.0 * kPi, 256);
  const auto s = make_gaussian_photon(lat, {{0.0, 0.0}, {5.0, 0.0}, 0.125, 0.125, 0.0});
  // Weighted lattice sum <omega>, the first-order estimate 5 (1 + var_ky / (2 k0^2)).
  double ref = 0.0;
  for (std::size_t f = 0; f < s.field.size(); ++f) ref += lat.omegas()[f] * std::norm(s.field[f]);
  EXPECT_NEAR(field_energy_modes(s, lat), ref, 1e-12);
  EXPECT_NEAR(ref, 5.0 * (1.0 + 0.125 / 50.0), 2e-4);
}

TEST(FieldEnergy, ParsevalOnRandomStates) {
  std::mt19937_64 rng(2024);
  const ModeLattice lat(7.3, 16);
  FourierGrid fft(lat);
  double worst = 0.0, worst_em = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_photon(lat, rng);
    const auto e = energy_density(s, lat, fft);
    const double em = field_energy_modes(s, lat);
    worst = std::max(worst, std::abs(em - field_energy_space(e, lat)) / em);
    double el = 0.0, mg = 0.0;
    for (std::size_t f = 0; f < e.electric.size(); ++f) {
      el += e.electric[f];
      mg += e.magnetic[f];
    }
    worst_em = std::max(worst_em, std::abs(el - mg) / (el + mg));
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_LT(worst_em, 1e-10);
}

TEST(Atoms, ExcitationsAndSpectrum) {
  const ModeLattice lat(10.0 * kPi, 64);
  const auto s = make_gaussian_photon(lat, {{}, {1.0, 0.0}, 1.0, 1.0, 0.0}, 3);
  for (double p : atom_excitations(s)) EXPECT_EQ(p, 0.0);

  StateVector d(lat.mode_count(), 2);
  d.atoms[1] = 1.0;
  EXPECT_EQ(atom_excitations(d), (std::vector<double>{0.0, 1.0}));

  Scene plain(lat);
  plain.add(Atom{{0.0, 0.0}, lat.nearest_grid({0.0, 0.0}), 2.0, 0.1});
  StateVector one(lat.mode_count(), 1);
  EXPECT_THROW(analyzer_spectrum(plain, one), std::invalid_argument);
}

TEST(Atoms, AnalyzersPeakAtPacketFrequency) {
  const ModeLattice lat(10.0 * kPi, 256);
  const auto photon = make_gaussian_photon(lat, {{-10.0, 0.0}, {15.0, 0.0}, 0.125, 0.125, 0.0});
  AnalyzerArray a{13.0, 17.0, 41, 1e-4, analyzer_block(lat, {0.0, 0.0}, 1, 41, 1)};
  const auto scene = build_analyzer_array(lat, a);
  const auto p = oracle::perturbative_excitation(lat, scene, photon, 20.0);
  const auto it = std::max_element(p.begin(), p.end());
  EXPECT_NEAR(scene.atoms()[static_cast<std::size_t>(it - p.begin())].omega, 15.0, 0.11);
}

TEST(Atoms, WeakProbesBarelyDisturbTheField) {
  const ModeLattice lat(5.0 * kPi, 128);
  AnalyzerArray a{14.0, 16.0, 20, 1e-4, analyzer_block(lat, {0.0, 0.0}, 1, 20, 1)};
  const auto scene = build_analyzer_array(lat, a);
  const auto photon = make_gaussian_photon(lat, {{-4.0, 0.0}, {15.0, 0.0}, 0.125, 0.125, 0.0}, scene.size());
  Integrator integ(lat, scene, photon, default_dt(lat, scene));
  integ.advance(std::lround(8.0 / integ.dt()));
  const double absorbed = atom_probability(integ.state());
  EXPECT_LT(absorbed, 1e-6);
  EXPECT_GT(absorbed, 0.0);

  // Off-resonant pair at one position.
  Scene off(lat);
  off.add(Atom{{2.0, 0.0}, lat.nearest_grid({2.0, 0.0}), 40.0, 1e-4 / 40.0, AtomKind::analyzer});
  off.add(Atom{{2.0, 0.2}, lat.nearest_grid({2.0, 0.2}), 45.0, 1e-4 / 45.0, AtomKind::analyzer});
  for (double p : oracle::perturbative_excitation(lat, off, make_gaussian_photon(lat, {{-4.0, 0.0}, {15.0, 0.0}, 0.125, 0.125, 0.0}), 8.0))
    EXPECT_LT(p, 1e-8);
}

TEST(Atoms, BackActionScalesAsCSquared) {
  const ModeLattice lat(5.0 * kPi, 128);
  auto absorbed = [&](double C) {
    AnalyzerArray a{14.0, 16.0, 10, C, analyzer_block(lat, {0.0, 0.0}, 1, 10, 1)};
    const auto scene = build_analyzer_array(lat, a);
    const auto photon = make_gaussian_photon(lat, {{-4.0, 0.0}, {15.0, 0.0}, 0.125, 0.125, 0.0}, scene.size());
    Integrator integ(lat, scene, photon, default_dt(lat, scene));
    integ.advance(std::lround(7.0 / integ.dt()));
    return atom_probability(integ.state());
  };
  const double ratio = absorbed(2e-4) / absorbed(1e-4);
  EXPECT_NEAR(ratio, 4.0, 0.8);
}

TEST(DecayFit, ExactExponential) {
  std::vector<double> t, p;
  for (int i = 0; i <= 400; ++i) {
    t.push_back(0.05 * i);
    p.push_back(std::exp(-0.14 * t.back()));
  }
  const auto fit = fit_decay(t, p);
  EXPECT_NEAR(fit.gamma, 0.14, 1e-12);
  EXPECT_NEAR(fit.t_start, 0.5 / 0.14, 1e-3);
  EXPECT_NEAR(fit.t_end, 2.0 / 0.14, 1e-3);
  EXPECT_LT(fit.residual, 1e-12);
  const auto win = fit_decay(t, p, std::pair{1.0, 3.0});
  EXPECT_NEAR(win.gamma, 0.14, 1e-12);
  EXPECT_EQ(win.points, 41u);
  EXPECT_THROW(fit_decay(t, std::vector<double>(t.size(), 1.0)), std::invalid_argument);
  auto bad = p;
  for (auto& v : bad) v = 0.0;
  EXPECT_THROW(fit_decay(t, bad, std::pair{1.0, 3.0}), std::invalid_argument);
}

TEST(DecayFit, RateScalesWithDipoleSquared) {
  const double g1 = decay_rate(0.05, 12.0);
  const double g2 = decay_rate(0.1, 4.0);
  EXPECT_GT(g1, 0.0);
  EXPECT_NEAR(g2 / g1, 4.0, 0.8);
}

TEST(ModeSlice, GaussianPeakAndOrdering) {
  const ModeLattice lat(10.0 * kPi, 256);
  const auto s = make_gaussian_photon(lat, {{-8.0, 0.0}, {4.0, 0.0}, 1.0, 1.0, 0.0});
  const auto sl = mode_slice(s, lat, 0, lat.index_of(0));
  ASSERT_EQ(sl.size(), 256u);
  EXPECT_NEAR(sl.front().k, -25.6, 1e-12);
  for (std::size_t i = 1; i < sl.size(); ++i) EXPECT_GT(sl[i].k, sl[i - 1].k);
  const auto it = std::max_element(sl.begin(), sl.end(), [](auto& a, auto& b) { return a.probability < b.probability; });
  EXPECT_NEAR(it->k, 4.0, 1e-12);
  EXPECT_THROW(mode_slice(s, lat, 2, 0), std::invalid_argument);
  EXPECT_THROW(mode_slice(s, lat, 0, 256), std::out_of_range);
}

TEST(ModeSlice, DecayIsParitySymmetric) {
  const ModeLattice lat(5.0 * kPi, 64);
  Scene scene(lat);
  scene.add(Atom{{0.0, 0.0}, lat.nearest_grid({0.0, 0.0}), 6.0, 0.1});
  StateVector s(lat.mode_count(), 1);
  s.atoms[0] = 1.0;
  Integrator integ(lat, scene, s, default_dt(lat, scene));
  integ.advance(400);
  const auto sl = mode_slice(integ.state(), lat, 0, 0);
  // m and -m sit at i and n - i in the ordered slice; the Nyquist entry i = 0 is unpaired.
  for (std::size_t i = 1; i < sl.size(); ++i) EXPECT_NEAR(sl[i].probability, sl[sl.size() - i].probability, 1e-10);
}

TEST(Angular, IsotropicRingIsFlat) {
  const ModeLattice lat(10.0 * kPi, 256);
  EnergyField e;
  e.n = lat.n();
  e.side = lat.side();
  e.electric.resize(lat.mode_count());
  e.magnetic.assign(lat.mode_count(), 0.0);
  for (std::size_t f = 0; f < lat.mode_count(); ++f) {
    const double r = norm(lat.position(f));
    e.electric[f] = std::exp(-(r - 10.0) * (r - 10.0) / 8.0);
  }
  const auto prof = angular_intensity(e, lat, {0.0, 0.0}, 6.0, 14.0);
  EXPECT_EQ(prof.gaps, 0u);
  for (double v : prof.intensity) EXPECT_NEAR(v, 1.0, 0.05);
  EXPECT_THROW(angular_intensity(e, lat, {0.0, 0.0}, 16.0), std::invalid_argument);
}

TEST(Angular, SymmetricSceneGivesEvenProfile) {
  const ModeLattice lat(10.0 * kPi, 128);
  EnergyField e;
  e.n = lat.n();
  e.side = lat.side();
  e.electric.resize(lat.mode_count());
  e.magnetic.assign(lat.mode_count(), 0.0);
  // Mirror axis half a cell off the grid rows: y - y0 -> y0 - y maps cells onto cells and no
  // cell falls on the phi = 0 bin edge.
  const double y0 = 0.5 * lat.dx();
  for (std::size_t f = 0; f < lat.mode_count(); ++f) {
    const Vec2 r = lat.position(f);
    const double y = r.y - y0;
    e.electric[f] = std::exp(-0.1 * (r.x - 8.0) * (r.x - 8.0) - 0.05 * y * y) * (2.0 + std::cos(y));
  }
  const auto prof = angular_intensity(e, lat, {0.0, y0}, 2.0, 12.0);
  const std::size_t nb = prof.theta.size();
  for (std::size_t b = 0; b < nb; ++b) {
    const double v = prof.intensity[b], w = prof.intensity[nb - 1 - b];
    if (std::isnan(v) || std::isnan(w)) continue;
    EXPECT_NEAR(v, w, 0.05);
  }
}

TEST(Classical, LimitsZerosAndSymmetry) {
  const double k = 5.0, d = 2.0, a = 2.5;
  EXPECT_NEAR(classical_two_slit_raw(k, d, a, 0.0), 0.25 * d * d, 1e-15);
  EXPECT_NEAR(classical_two_slit_raw(k, d, a, 1e-10), 0.25 * d * d, 1e-12);
  const double zero = std::asin(2.0 * kPi / (k * d));
  EXPECT_NEAR(classical_two_slit_raw(k, d, a, zero), 0.0, 1e-14);
  std::vector<double> th;
  for (int i = -100; i <= 100; ++i) th.push_back(0.01 * i);
  const auto p = classical_two_slit(k, d, a, th);
  EXPECT_NEAR(*std::max_element(p.intensity.begin(), p.intensity.end()), 1.0, 1e-15);
  for (std::size_t i = 0; i < th.size(); ++i) EXPECT_NEAR(p.intensity[i], p.intensity[th.size() - 1 - i], 1e-15);
  // a = 0: cos factor is 1, leaving the single-slit shape.
  const auto merged = classical_two_slit(k, d, 0.0, th);
  for (std::size_t i = 0; i < th.size(); ++i) {
    const double x = 0.5 * k * d * std::sin(th[i]);
    const double single = std::abs(x) < 1e-12 ? 1.0 : std::pow(std::sin(x) / x, 2);
    EXPECT_NEAR(merged.intensity[i], single, 1e-12);
  }
  EXPECT_THROW(classical_two_slit(0.0, d, a, th), std::invalid_argument);
}

TEST(Angular, ForwardNormalizationIgnoresBackwardLight) {
  AngularProfile p;
  p.theta = {-3.0, -0.5, 0.0, 0.5, 3.0};
  p.intensity = {1.0, 0.1, 0.25, std::nan(""), 0.8};
  const auto f = forward_normalized(p);
  EXPECT_DOUBLE_EQ(f.intensity[1], 0.4);
  EXPECT_DOUBLE_EQ(f.intensity[2], 1.0);
  EXPECT_TRUE(std::isnan(f.intensity[3]));
  EXPECT_DOUBLE_EQ(f.intensity[4], 3.2);
}

TEST(Region, FractionsAndErrors) {
  const ModeLattice lat(10.0 * kPi, 64);
  const auto s = make_gaussian_photon(lat, {{-6.0, 0.0}, {4.0, 0.0}, 1.0, 1.0, 0.0});
  const auto e = energy_density(s, lat);
  const double h = lat.side() / 2.0;
  EXPECT_NEAR(region_energy_fraction(e, lat, Region::rect(-h, h, -h, h)), 1.0, 1e-14);
  EXPECT_NEAR(region_energy_fraction(e, lat, Region{}), 1.0, 1e-14);
  const double left = region_energy_fraction(e, lat, Region::halfplane({-1.0, 0.0}, 0.0));
  const double right = region_energy_fraction(e, lat, Region::halfplane({1.0, 0.0}, 1e-9));
  EXPECT_NEAR(left + right, 1.0, 1e-12);
  EXPECT_GT(left, 0.99);
  EXPECT_THROW(region_energy(e, lat, Region::rect(0.01, 0.02, 0.01, 0.02)), std::invalid_argument);
  EXPECT_THROW(Region::halfplane({0.0, 0.0}, 1.0), std::invalid_argument);
}
