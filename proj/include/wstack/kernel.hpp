// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "wstack/common.hpp"

namespace wstack {

enum class KernelKind { gaussian, kaiser_bessel };

/// Gridding kernel. shape_param is sigma (cells) for Gaussian, beta for Kaiser-Bessel.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  int half_support = 3;
  double shape_param = 1.0;

  static KernelSpec gaussian(int half_support = 3, double sigma = 1.0) {
    return {KernelKind::gaussian, half_support, sigma};
  }
  static KernelSpec kaiser_bessel(int half_support = 3) {
    return {KernelKind::kaiser_bessel, half_support, 2.34 * half_support};
  }
  static KernelSpec kaiser_bessel(int half_support, double beta) {
    return {KernelKind::kaiser_bessel, half_support, beta};
  }
};

inline void validate(const KernelSpec& k) {
  if (k.half_support < 1) throw UsageError("kernel half_support must be >= 1");
  if (!(k.shape_param > 0.0)) throw UsageError("kernel shape_param must be > 0");
}

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view s);

/// One-dimensional factor of the separable kernel, unit peak at d = 0.
template <typename Scalar>
Scalar kernel_factor(const KernelSpec& k, Scalar d) {
  if (k.kind == KernelKind::gaussian) {
    const Scalar sigma = static_cast<Scalar>(k.shape_param);
    return std::exp(-(d * d) / (Scalar(2) * sigma * sigma));
  }
  const Scalar s = static_cast<Scalar>(k.half_support);
  if (std::abs(d) > s) return Scalar(0);
  const Scalar beta = static_cast<Scalar>(k.shape_param);
  const Scalar r = d / s;
  return static_cast<Scalar>(std::cyl_bessel_i(0.0, static_cast<double>(beta * std::sqrt(Scalar(1) - r * r))) /
                             std::cyl_bessel_i(0.0, static_cast<double>(beta)));
}

/// Kernel weight at cell offset (du, dv).
template <typename Scalar>
Scalar kernel_value(const KernelSpec& k, Scalar du, Scalar dv) {
  if (k.kind == KernelKind::gaussian) {
    const Scalar sigma = static_cast<Scalar>(k.shape_param);
    return std::exp(-(du * du + dv * dv) / (Scalar(2) * sigma * sigma));
  }
  return kernel_factor(k, du) * kernel_factor(k, dv);
}

}  // namespace wstack
