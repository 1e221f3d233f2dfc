#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qos/observables.hpp"
#include "qos/state.hpp"

namespace qos::io {

static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("unexpected end of file");
  return v;
}

inline void put_complex(std::ostream& os, cplx c) {
  put(os, static_cast<float>(c.real()));
  put(os, static_cast<float>(c.imag()));
}

inline cplx get_complex(std::istream& is) {
  const float re = get<float>(is);
  const float im = get<float>(is);
  return {re, im};
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  return os;
}

}  // namespace detail

/// State dump: "QOS1", u32 n, u32 N_A, f64 t, u8 picture, n^2 field then N_A
/// atom amplitudes as complex64 (two f32, real first). Field amplitudes are
/// in lattice storage order.
inline void write_state(std::ostream& os, const StateVector& s, std::uint32_t n) {
  if (static_cast<std::size_t>(n) * n != s.field.size()) throw FormatError("state size does not match n");
  os.write("QOS1", 4);
  detail::put<std::uint32_t>(os, n);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.atoms.size()));
  detail::put<double>(os, s.t);
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(s.picture));
  for (const auto& c : s.field) detail::put_complex(os, c);
  for (const auto& c : s.atoms) detail::put_complex(os, c);
  if (!os) throw FormatError("write failed");
}

inline StateVector read_state(std::istream& is, std::uint32_t* n_out = nullptr) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "QOS1", 4) != 0) throw FormatError("not a QOS1 state dump");
  const auto n = detail::get<std::uint32_t>(is);
  const auto na = detail::get<std::uint32_t>(is);
  const auto t = detail::get<double>(is);
  const auto pic = detail::get<std::uint8_t>(is);
  if (pic > 1) throw FormatError("bad picture tag");
  StateVector s(static_cast<std::size_t>(n) * n, na, static_cast<Picture>(pic), t);
  for (auto& c : s.field) c = detail::get_complex(is);
  for (auto& c : s.atoms) c = detail::get_complex(is);
  if (n_out != nullptr) *n_out = n;
  return s;
}

inline void save_state(const std::string& path, const StateVector& s, std::uint32_t n) {
  auto os = detail::open_out(path);
  write_state(os, s, n);
}

inline StateVector load_state(const std::string& path, std::uint32_t* n_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_state(is, n_out);
}

/// Energy snapshot: "QOSN", u32 nx, u32 ny, f64 t, then nx*ny f32 values of
/// the total density, row-major with value(ix, iy) at index iy * nx + ix.
inline void write_density(std::ostream& os, const EnergyField& e) {
  const auto n = static_cast<std::uint32_t>(e.n);
  os.write("QOSN", 4);
  detail::put<std::uint32_t>(os, n);
  detail::put<std::uint32_t>(os, n);
  detail::put<double>(os, e.t);
  for (std::uint32_t iy = 0; iy < n; ++iy)
    for (std::uint32_t ix = 0; ix < n; ++ix) detail::put(os, static_cast<float>(e.total(static_cast<std::size_t>(ix) * n + iy)));
  if (!os) throw FormatError("write failed");
}

struct DensityImage {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  double t = 0.0;
  std::vector<float> data;  ///< data[iy * nx + ix]
};

inline DensityImage read_density(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "QOSN", 4) != 0) throw FormatError("not a QOSN snapshot");
  DensityImage img;
  img.nx = detail::get<std::uint32_t>(is);
  img.ny = detail::get<std::uint32_t>(is);
  img.t = detail::get<double>(is);
  img.data.resize(static_cast<std::size_t>(img.nx) * img.ny);
  for (auto& v : img.data) v = detail::get<float>(is);
  return img;
}

inline void save_density(const std::string& path, const EnergyField& e) {
  auto os = detail::open_out(path);
  write_density(os, e);
}

/// 8-bit binary PGM of the total density scaled to its maximum. With
/// log_scale the grey level spans `decades` decades below the maximum.
/// Image rows run from +y (top) to -y.
inline void write_pgm(std::ostream& os, const EnergyField& e, bool log_scale, double decades = 6.0) {
  const int n = e.n;
  double mx = 0.0;
  for (std::size_t f = 0; f < e.electric.size(); ++f) mx = std::max(mx, e.total(f));
  os << "P5\n" << n << " " << n << "\n255\n";
  for (int row = 0; row < n; ++row) {
    const int iy = n - 1 - row;
    for (int ix = 0; ix < n; ++ix) {
      const double v = mx > 0.0 ? e.total(static_cast<std::size_t>(ix) * n + iy) / mx : 0.0;
      double g = v;
      if (log_scale) g = v > 0.0 ? std::clamp(1.0 + std::log10(v) / decades, 0.0, 1.0) : 0.0;
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * g))));
    }
  }
  if (!os) throw FormatError("write failed");
}

inline void save_pgm(const std::string& path, const EnergyField& e, bool log_scale) {
  auto os = detail::open_out(path);
  write_pgm(os, e, log_scale);
}

/// Minimal CSV writer: header row, then numeric rows at full precision.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw FormatError("cannot open " + path + " for writing");
    os_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << "\n";
    width_ = header.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw FormatError("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) os_ << ",";
      if (std::isnan(values[i]))
        os_ << "nan";
      else
        os_ << values[i];
    }
    os_ << "\n";
  }

  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
  std::size_t width_ = 0;
};

}  // namespace qos::io
