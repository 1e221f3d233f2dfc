#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

#include "qos/lattice.hpp"

namespace qos {

/// Owns FFTW buffers and plans for one lattice and fixes the transform
/// convention used everywhere else:
///
///   synthesize:  f(r) = sum_k a_k e^{ i k.r}     (no scaling)
///   analyze:     a_k  = sum_r f(r) e^{-i k.r}    (no scaling)
///
/// with r on the centred grid of ModeLattice. Plans use FFTW_ESTIMATE so the
/// chosen algorithm, and therefore every output bit, is reproducible.
class FourierGrid {
 public:
  explicit FourierGrid(const ModeLattice& lat)
      : n_(lat.n()), parity_(lat.parity().begin(), lat.parity().end()) {
    const std::size_t count = lat.mode_count();
    modes_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
    field_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
    if (modes_ == nullptr || field_ == nullptr) {
      release();
      throw std::bad_alloc();
    }
    std::memset(modes_, 0, sizeof(fftw_complex) * count);
    std::memset(field_, 0, sizeof(fftw_complex) * count);
    to_field_ = fftw_plan_dft_2d(n_, n_, modes_, field_, FFTW_BACKWARD, FFTW_ESTIMATE);
    to_modes_ = fftw_plan_dft_2d(n_, n_, field_, modes_, FFTW_FORWARD, FFTW_ESTIMATE);
    if (to_field_ == nullptr || to_modes_ == nullptr) {
      release();
      throw std::runtime_error("FourierGrid: FFTW planning failed");
    }
  }

  FourierGrid(const FourierGrid&) = delete;
  FourierGrid& operator=(const FourierGrid&) = delete;
  ~FourierGrid() { release(); }

  std::size_t size() const { return parity_.size(); }
  int n() const { return n_; }

  /// Mode-space input for synthesize(), physical amplitudes a_k.
  std::span<cplx> mode_buffer() { return {reinterpret_cast<cplx*>(modes_), size()}; }
  /// Configuration-space input for analyze(), values f(r).
  std::span<cplx> field_buffer() { return {reinterpret_cast<cplx*>(field_), size()}; }

  /// Transforms mode_buffer() in place of field_buffer(). Consumes the mode buffer.
  std::span<const cplx> synthesize() {
    auto in = mode_buffer();
    for (std::size_t f = 0; f < in.size(); ++f) in[f] *= parity_[f];
    fftw_execute(to_field_);
    return field_buffer();
  }

  /// Transforms field_buffer() into mode_buffer(). Leaves field_buffer() intact.
  std::span<const cplx> analyze() {
    fftw_execute(to_modes_);
    auto out = mode_buffer();
    for (std::size_t f = 0; f < out.size(); ++f) out[f] *= parity_[f];
    return out;
  }

  void clear_field() { std::memset(field_, 0, sizeof(fftw_complex) * size()); }

 private:
  void release() {
    if (to_field_ != nullptr) fftw_destroy_plan(to_field_);
    if (to_modes_ != nullptr) fftw_destroy_plan(to_modes_);
    if (modes_ != nullptr) fftw_free(modes_);
    if (field_ != nullptr) fftw_free(field_);
    to_field_ = to_modes_ = nullptr;
    modes_ = field_ = nullptr;
  }

  int n_;
  std::vector<double> parity_;
  fftw_complex* modes_ = nullptr;
  fftw_complex* field_ = nullptr;
  fftw_plan to_field_ = nullptr;
  fftw_plan to_modes_ = nullptr;
};

}  // namespace qos
