// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "wstack/common.hpp"

namespace wstack {

/// forward: exp(-2 pi i k n / N); inverse: exp(+2 pi i k n / N). Neither scales.
enum class FftDirection { forward, inverse };

/// Iterative in-place radix-2 Cooley-Tukey transform of a fixed length.
template <typename Scalar>
class Radix2Fft {
 public:
  using value_type = std::complex<Scalar>;

  explicit Radix2Fft(std::size_t n) : n_(n), bitrev_(n), twiddle_(n / 2) {
    if (n == 0 || !std::has_single_bit(n)) throw UsageError("FFT length must be a power of two");
    const int bits = std::countr_zero(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bitrev_[i] = r;
    }
    // Twiddles from long double angles keep the table accurate for float and double.
    for (std::size_t k = 0; k < n / 2; ++k) {
      const long double a = -2.0L * 3.141592653589793238462643383279502884L *
                            static_cast<long double>(k) / static_cast<long double>(n);
      twiddle_[k] = value_type(static_cast<Scalar>(std::cos(a)), static_cast<Scalar>(std::sin(a)));
    }
  }

  std::size_t size() const { return n_; }

  void operator()(std::span<value_type> x, FftDirection dir) const {
    if (x.size() != n_) throw UsageError("FFT input length mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
    }
    const bool inv = dir == FftDirection::inverse;
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          value_type w = twiddle_[k * stride];
          if (inv) w = std::conj(w);
          const value_type t = w * x[start + k + half];
          x[start + k + half] = x[start + k] - t;
          x[start + k] += t;
        }
      }
    }
  }

  /// Butterflies per call, used as an operation count.
  std::size_t butterflies() const {
    return n_ / 2 * static_cast<std::size_t>(std::countr_zero(n_));
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<value_type> twiddle_;
};

/// One-shot convenience wrapper.
template <typename Scalar>
void fft_inplace(std::span<std::complex<Scalar>> x, FftDirection dir) {
  Radix2Fft<Scalar>(x.size())(x, dir);
}

}  // namespace wstack
