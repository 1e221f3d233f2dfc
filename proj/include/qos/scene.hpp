#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "qos/lattice.hpp"
#include "qos/state.hpp"

namespace qos {

enum class AtomKind : std::uint8_t { element, analyzer };

/// Two-level atom pinned to a grid point. The dipole points along e3 only.
struct Atom {
  Vec2 pos;
  GridIndex cell;
  double omega = 1.0;
  cplx dipole = 0.0;
  AtomKind kind = AtomKind::element;
};

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered atom list on one lattice. No two atoms share a grid point: adding
/// an atom to an occupied point keeps the first one and records a warning.
class Scene {
 public:
  Scene() = default;
  explicit Scene(const ModeLattice& lat) : side_(lat.side()), n_(lat.n()) {}

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Warnings& warnings() const { return warnings_; }
  std::size_t duplicates_merged() const { return duplicates_; }

  bool compatible(const ModeLattice& lat) const { return n_ == lat.n() && side_ == lat.side(); }
  void require_compatible(const ModeLattice& lat) const {
    if (!compatible(lat)) throw SceneError("scene was built for a different lattice");
  }

  /// Returns false (and warns) when the grid point is already occupied.
  bool add(const Atom& a) {
    const auto key = static_cast<std::int64_t>(a.cell.ix) * n_ + a.cell.iy;
    if (!occupied_.insert(key).second) {
      ++duplicates_;
      if (duplicates_ <= 8) {
        std::ostringstream os;
        os << "duplicate atom at grid point (" << a.cell.ix << ", " << a.cell.iy << ") merged";
        warnings_.push_back(os.str());
      }
      return false;
    }
    atoms_.push_back(a);
    return true;
  }

  void append(const Scene& other) {
    if (other.n_ != n_ || other.side_ != side_) throw SceneError("cannot merge scenes from different lattices");
    for (const auto& a : other.atoms_) add(a);
    warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
  }

  bool occupied(GridIndex g) const { return occupied_.contains(static_cast<std::int64_t>(g.ix) * n_ + g.iy); }

  std::vector<double> omegas() const {
    std::vector<double> w;
    w.reserve(atoms_.size());
    for (const auto& a : atoms_) w.push_back(a.omega);
    return w;
  }

  std::size_t count(AtomKind kind) const {
    return static_cast<std::size_t>(std::count_if(atoms_.begin(), atoms_.end(), [&](const Atom& a) { return a.kind == kind; }));
  }

 private:
  double side_ = 0.0;
  int n_ = 0;
  std::vector<Atom> atoms_;
  std::unordered_set<std::int64_t> occupied_;
  Warnings warnings_;
  std::size_t duplicates_ = 0;
};

inline StateVector to_picture(StateVector s, Picture target, const ModeLattice& lat, const Scene& scene) {
  const auto w = scene.omegas();
  return to_picture(std::move(s), target, lat, w);
}

namespace detail {

inline constexpr double kTie = 1e-9;

inline Atom make_atom(const ModeLattice& lat, GridIndex g, double omega, cplx dipole, AtomKind kind) {
  if (!(omega > 0.0)) throw SceneError("atom transition frequency must be positive");
  if (!lat.contains(g)) throw SceneError("atom lies outside the cavity");
  return Atom{lat.position(g), g, omega, dipole, kind};
}

/// Integer direction for angles that are multiples of 45 degrees.
struct LatticeDirection {
  int a = 1;
  int b = 0;
  bool diagonal() const { return a != 0 && b != 0; }
  double length() const { return std::hypot(a, b); }
};

inline LatticeDirection lattice_direction(double angle) {
  const double q = angle / (std::numbers::pi / 4.0);
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9)
    throw SceneError("slab angle must be a multiple of 45 degrees (lattice-aligned)");
  static constexpr int table[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  const int idx = static_cast<int>(((static_cast<long>(r) % 8) + 8) % 8);
  return {table[idx][0], table[idx][1]};
}

inline bool inside_box(const ModeLattice& lat, Vec2 p) {
  const double h = lat.side() / 2.0 + kTie;
  return p.x >= -h && p.x <= h && p.y >= -h && p.y <= h;
}

}  // namespace detail

/// Straight multi-layer slab on lattice lines.
///
/// The element runs along u = (cos angle, sin angle). Layer 0 is the lattice
/// line parallel to u nearest to `center`; further layers step towards the
/// right-hand normal of u, one grid column apart for axis-aligned slabs and
/// two diagonals (sqrt(2) dx) apart for 45 degree slabs. Along each layer the
/// atoms whose coordinate relative to `center` lies in [-length/2, length/2)
/// are kept, so a length that is a multiple of the point spacing yields
/// exactly length/spacing atoms. Zero length keeps the single nearest point.
struct SlabGeometry {
  Vec2 center;
  double angle = 0.0;
  double length = 0.0;
  int layers = 1;
};

/// Spacing of consecutive atoms along a lattice line in direction `angle`.
inline double lattice_line_spacing(const ModeLattice& lat, double angle) {
  const auto d = detail::lattice_direction(angle);
  return d.diagonal() ? std::sqrt(2.0) * lat.dx() : lat.dx();
}

inline Scene build_slab(const ModeLattice& lat, const SlabGeometry& g, double omega, cplx dipole,
                        AtomKind kind = AtomKind::element) {
  if (g.layers < 1) throw SceneError("slab needs at least one layer");
  if (!(g.length >= 0.0)) throw SceneError("slab length must be non-negative");
  const auto dir = detail::lattice_direction(g.angle);
  const double dx = lat.dx();
  const double unit = dir.length();
  const int step = dir.diagonal() ? 2 : 1;
  const double gx = (g.center.x + lat.side() / 2.0) / dx;
  const double gy = (g.center.y + lat.side() / 2.0) / dx;
  // Lines parallel to u: c = b*i - a*j. Along coordinate: s = a*i + b*j.
  const long c0 = std::lround(dir.b * gx - dir.a * gy);
  const double s_center = (dir.a * gx + dir.b * gy) / unit * dx;
  const double half = g.length / 2.0;
  // The along interval is half-open in the orientation with angle in [0, pi),
  // so a slab and its reverse select the same points.
  const double orient = (dir.b > 0 || (dir.b == 0 && dir.a > 0)) ? 1.0 : -1.0;

  Scene scene(lat);
  const Vec2 u{dir.a / unit, dir.b / unit};
  for (int l = 0; l < g.layers; ++l) {
    const long c = c0 + static_cast<long>(step) * l;
    // Segment end points must stay inside the cavity.
    const double c_dist = (static_cast<double>(c) - (dir.b * gx - dir.a * gy)) / unit * dx;
    const Vec2 foot = g.center + c_dist * Vec2{u.y, -u.x};
    if (!detail::inside_box(lat, foot + half * u) || !detail::inside_box(lat, foot - half * u))
      throw SceneError("slab exits the cavity bounds");

    std::optional<GridIndex> nearest;
    double nearest_d = 0.0;
    for (int i = 0; i < lat.n(); ++i) {
      // Solve c = b*i - a*j for j where possible.
      for (int j = 0; j < lat.n(); ++j) {
        if (dir.b * i - dir.a * j != c) continue;
        const double s = orient * ((dir.a * i + dir.b * j) / unit * dx - s_center);
        if (g.length == 0.0) {
          if (!nearest || std::abs(s) < nearest_d - detail::kTie * dx) {
            nearest = GridIndex{i, j};
            nearest_d = std::abs(s);
          }
          continue;
        }
        if (s >= -half - detail::kTie * dx && s < half - detail::kTie * dx)
          scene.add(detail::make_atom(lat, {i, j}, omega, dipole, kind));
      }
    }
    if (g.length == 0.0 && nearest) scene.add(detail::make_atom(lat, *nearest, omega, dipole, kind));
  }
  return scene;
}

inline Scene build_slab_mirror(const ModeLattice& lat, Vec2 center, double angle, double length, int layers,
                               double omega, cplx dipole) {
  return build_slab(lat, {center, angle, length, layers}, omega, dipole);
}

/// Single-layer slab; detune omega from the photon to get partial reflection.
inline Scene build_beam_splitter(const ModeLattice& lat, Vec2 center, double angle, double length, double omega,
                                 cplx dipole) {
  return build_slab(lat, {center, angle, length, 1}, omega, dipole);
}

/// Parabolic mirror x = x0 + y^2 / (2p).
///
/// Atoms occupy the grid points on the far side of the curve from its focus
/// whose perpendicular distance to the curve is below layers * dx and whose
/// foot point satisfies |y| <= y_extent. Near the vertex this is `layers`
/// columns along x.
struct ParabolaGeometry {
  double x0 = 0.0;
  double p = 1.0;
  double y_extent = 1.0;
  int layers = 1;

  Vec2 focus() const { return {x0 + p / 2.0, 0.0}; }
  double curve_x(double y) const { return x0 + y * y / (2.0 * p); }
};

inline Scene build_parabola(const ModeLattice& lat, const ParabolaGeometry& g, double omega, cplx dipole) {
  if (!(std::abs(g.p) > 0.0)) throw SceneError("parabola parameter p must be non-zero");
  if (g.layers < 1) throw SceneError("parabola needs at least one layer");
  if (!(g.y_extent >= 0.0)) throw SceneError("parabola y extent must be non-negative");
  const double thickness = g.layers * lat.dx();
  const double back = g.p < 0 ? 1.0 : -1.0;  // side away from the focus
  for (double y : {-g.y_extent, 0.0, g.y_extent}) {
    const Vec2 front{g.curve_x(y), y};
    const Vec2 rear{g.curve_x(y) + back * thickness, y};
    if (!detail::inside_box(lat, front) || !detail::inside_box(lat, rear))
      throw SceneError("parabola exits the cavity bounds");
  }

  Scene scene(lat);
  const double dx = lat.dx();
  for (int j = 0; j < lat.n(); ++j) {
    for (int i = 0; i < lat.n(); ++i) {
      const Vec2 r = lat.position(GridIndex{i, j});
      const double side = (r.x - g.curve_x(r.y)) * back;
      if (side < -detail::kTie * dx || side > thickness + std::abs(r.y / g.p) * thickness + dx) continue;
      // Foot point by Newton iteration on the squared distance.
      double y = r.y;
      for (int it = 0; it < 50; ++it) {
        const double xc = g.curve_x(y);
        const double slope = y / g.p;
        const double d1 = (xc - r.x) * slope + (y - r.y);
        const double d2 = slope * slope + (xc - r.x) / g.p + 1.0;
        const double delta = d1 / d2;
        y -= delta;
        if (std::abs(delta) < 1e-15 * (1.0 + std::abs(y))) break;
      }
      const double dist = std::hypot(r.x - g.curve_x(y), r.y - y);
      if (dist < thickness - detail::kTie * dx && std::abs(y) <= g.y_extent + detail::kTie * dx)
        scene.add(detail::make_atom(lat, {i, j}, omega, dipole, AtomKind::element));
    }
  }
  return scene;
}

/// Vertical mirror with two slits.
///
/// The mirror face is the grid column nearest to x_pos, with `layers`
/// columns towards +x, spanning rows with y in [center_y - extent/2,
/// center_y + extent/2). Rows with y in [yc - d/2, yc + d/2) are removed for
/// yc = center_y +- a/2. With a = 0 both slits coincide.
struct TwoSlitGeometry {
  double x_pos = 0.0;
  double slit_width = 1.0;
  double separation = 2.0;
  int layers = 8;
  double center_y = 0.0;
  std::optional<double> extent;  // defaults to the cavity side
};

inline Scene build_two_slit(const ModeLattice& lat, const TwoSlitGeometry& g, double omega, cplx dipole) {
  if (!(g.slit_width > 0.0)) throw SceneError("slit width must be positive");
  if (!(g.separation >= 0.0)) throw SceneError("slit separation must be non-negative");
  if (g.separation > 0.0 && g.separation < g.slit_width) throw SceneError("slits overlap");
  if (g.layers < 1) throw SceneError("two-slit mirror needs at least one layer");
  const double extent = g.extent.value_or(lat.side());
  if (g.separation / 2.0 + g.slit_width / 2.0 > extent / 2.0 + detail::kTie)
    throw SceneError("slits extend beyond the mirror");

  const double dx = lat.dx();
  const long col0 = std::lround((g.x_pos + lat.side() / 2.0) / dx);
  if (col0 < 0 || col0 + g.layers > lat.n()) throw SceneError("two-slit mirror exits the cavity bounds");
  if (g.center_y - extent / 2.0 < -lat.side() / 2.0 - detail::kTie ||
      g.center_y + extent / 2.0 > lat.side() / 2.0 + detail::kTie)
    throw SceneError("two-slit mirror exits the cavity bounds");

  const double tie = detail::kTie * dx;
  auto in_half_open = [&](double y, double lo, double hi) { return y >= lo - tie && y < hi - tie; };
  const double centers[2] = {g.center_y + g.separation / 2.0, g.center_y - g.separation / 2.0};

  Scene scene(lat);
  for (int l = 0; l < g.layers; ++l) {
    for (int j = 0; j < lat.n(); ++j) {
      const double y = lat.position(GridIndex{0, j}).y;
      if (!in_half_open(y, g.center_y - extent / 2.0, g.center_y + extent / 2.0)) continue;
      bool gap = false;
      for (double yc : centers) gap = gap || in_half_open(y, yc - g.slit_width / 2.0, yc + g.slit_width / 2.0);
      if (gap) continue;
      scene.add(detail::make_atom(lat, {static_cast<int>(col0) + l, j}, omega, dipole, AtomKind::element));
    }
  }
  return scene;
}

/// Weakly coupled analyzer atoms with a linear frequency ladder and D = C / omega,
/// which gives every analyzer the same decay constant.
struct AnalyzerArray {
  double omega_min = 1.0;
  double omega_max = 2.0;
  int count = 2;
  double C = 1e-4;
  std::vector<Vec2> positions;

  double frequency(int j) const { return omega_min + (omega_max - omega_min) / (count - 1) * j; }
};

inline Scene build_analyzer_array(const ModeLattice& lat, const AnalyzerArray& spec) {
  if (spec.count < 2) throw SceneError("analyzer array needs at least two atoms");
  if (!(spec.C > 0.0)) throw SceneError("analyzer coupling scale C must be positive");
  if (!(spec.omega_min > 0.0)) throw SceneError("analyzer band must have omega_min > 0");
  if (!(spec.omega_max > spec.omega_min)) throw SceneError("analyzer band must have omega_max > omega_min");
  if (spec.positions.size() != static_cast<std::size_t>(spec.count))
    throw SceneError("analyzer array needs one position per atom");
  Scene scene(lat);
  for (int j = 0; j < spec.count; ++j) {
    const double w = spec.frequency(j);
    GridIndex g;
    try {
      g = lat.nearest_grid(spec.positions[static_cast<std::size_t>(j)]);
    } catch (const std::out_of_range&) {
      throw SceneError("analyzer atom lies outside the cavity");
    }
    scene.add(detail::make_atom(lat, g, w, spec.C / w, AtomKind::analyzer));
  }
  return scene;
}

/// Grid positions of an n_along x n_across block centred on `center`, with
/// rows running along the lattice axis `along` (0 = x, 1 = y). Ordered along
/// first, so consecutive frequencies sit next to each other on the beam axis.
inline std::vector<Vec2> analyzer_block(const ModeLattice& lat, Vec2 center, int along, int n_along,
                                        int n_across) {
  if (n_along < 1 || n_across < 1) throw SceneError("analyzer block needs positive dimensions");
  if (along != 0 && along != 1) throw SceneError("analyzer block axis must be 0 (x) or 1 (y)");
  std::vector<Vec2> out;
  const double dx = lat.dx();
  for (int b = 0; b < n_across; ++b) {
    for (int a = 0; a < n_along; ++a) {
      const double da = (a - (n_along - 1) / 2.0) * dx;
      const double db = (b - (n_across - 1) / 2.0) * dx;
      out.push_back(along == 0 ? center + Vec2{da, db} : center + Vec2{db, da});
    }
  }
  return out;
}

inline Scene build_single_atom(const ModeLattice& lat, Vec2 pos, double omega, cplx dipole) {
  Scene scene(lat);
  GridIndex g;
  try {
    g = lat.nearest_grid(pos);
  } catch (const std::out_of_range&) {
    throw SceneError("atom lies outside the cavity");
  }
  scene.add(detail::make_atom(lat, g, omega, dipole, AtomKind::element));
  return scene;
}

/// Beam splitter along the anti-diagonal plus two axis-aligned mirrors.
///
/// A photon arriving from -x is split into a transmitted arm along +x and a
/// reflected arm along -y. The +x mirror sits arm_length + arm_difference
/// from the splitter (difference snapped to a whole number of grid cells),
/// the -y mirror arm_length. Recombined light leaves along +y or -x.
struct InterferometerOptions {
  Vec2 center;
  double arm_length = 11.65;
  double splitter_length = 14.0;
  double splitter_omega = 10.4;
  cplx splitter_dipole = 0.5;
  double mirror_length = 12.0;
  int mirror_layers = 8;
  double mirror_omega = 15.0;
  cplx mirror_dipole = 0.5;
};

struct InterferometerLayout {
  Scene scene;
  Vec2 mirror_x;  ///< front-face point of the +x mirror
  Vec2 mirror_y;  ///< front-face point of the -y mirror
  double applied_difference = 0.0;
};

inline InterferometerLayout build_interferometer(const ModeLattice& lat, double arm_difference,
                                                 const InterferometerOptions& opt = {}) {
  const double dx = lat.dx();
  const double snapped = std::round(arm_difference / dx) * dx;
  const double arm = std::round(opt.arm_length / dx) * dx;
  InterferometerLayout out{Scene(lat), {}, {}, snapped};
  out.mirror_x = opt.center + Vec2{arm + snapped, 0.0};
  out.mirror_y = opt.center + Vec2{0.0, -arm};

  const Scene splitter = build_beam_splitter(lat, opt.center, 3.0 * std::numbers::pi / 4.0, opt.splitter_length,
                                             opt.splitter_omega, opt.splitter_dipole);
  const Scene mx = build_slab(lat, {out.mirror_x, std::numbers::pi / 2.0, opt.mirror_length, opt.mirror_layers},
                              opt.mirror_omega, opt.mirror_dipole);
  const Scene my =
      build_slab(lat, {out.mirror_y, 0.0, opt.mirror_length, opt.mirror_layers}, opt.mirror_omega, opt.mirror_dipole);
  for (const Scene* part : {&splitter, &mx, &my}) {
    for (const auto& a : part->atoms()) {
      if (out.scene.occupied(a.cell)) throw SceneError("interferometer elements overlap");
      out.scene.add(a);
    }
  }
  return out;
}

}  // namespace qos
