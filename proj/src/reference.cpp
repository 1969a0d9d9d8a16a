// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/reference.hpp"

#include <algorithm>
#include <cmath>

namespace wstack::reference {

ComplexGridd grid_direct(std::span<const VisRecord> records, const GridSpec& spec,
                         const KernelSpec& kernel) {
  ComplexGridd out(spec, {0, 0, spec.n_v});
  const double S = kernel.half_support;
  for (const VisRecord& r : records) {
    cplx value{0.0, 0.0};
    for (std::size_t c = 0; c < r.vis.size(); ++c) {
      value += cplx(r.vis[c].real(), r.vis[c].imag()) * static_cast<double>(r.weight[c]);
    }
    const double gu = r.u * static_cast<double>(spec.n_u);
    const double gv = r.v * static_cast<double>(spec.n_v);
    std::size_t plane = 0;
    if (spec.n_w > 1) {
      const double pos = r.w * static_cast<double>(spec.n_w - 1);
      plane = static_cast<std::size_t>(std::floor(pos + 0.5));
      if (plane > spec.n_w - 1) plane = spec.n_w - 1;
    }
    const auto lo = [](double x) { return static_cast<long>(std::max(0.0, std::ceil(x))); };
    const long j_hi = std::min(static_cast<long>(spec.n_v) - 1, static_cast<long>(std::floor(gv + S)));
    const long i_hi = std::min(static_cast<long>(spec.n_u) - 1, static_cast<long>(std::floor(gu + S)));
    for (long j = lo(gv - S); j <= j_hi; ++j) {
      for (long i = lo(gu - S); i <= i_hi; ++i) {
        const double du = gu - static_cast<double>(i);
        const double dv = gv - static_cast<double>(j);
        out.at(plane, static_cast<std::size_t>(j), static_cast<std::size_t>(i)) +=
            value * kernel_value(kernel, du, dv);
      }
    }
  }
  return out;
}

RowMatrix<cplx> dft2d(const RowMatrix<cplx>& x, FftDirection dir) {
  const auto nv = x.rows();
  const auto nu = x.cols();
  const double sign = dir == FftDirection::forward ? -1.0 : 1.0;
  RowMatrix<cplx> out(nv, nu);
  for (Eigen::Index q = 0; q < nv; ++q) {
    for (Eigen::Index p = 0; p < nu; ++p) {
      cplx acc{0.0, 0.0};
      for (Eigen::Index j = 0; j < nv; ++j) {
        for (Eigen::Index i = 0; i < nu; ++i) {
          // Reduce the phase index first so large products stay exact.
          const double a = 2.0 * kPi *
                           (static_cast<double>((p * i) % nu) / static_cast<double>(nu) +
                            static_cast<double>((q * j) % nv) / static_cast<double>(nv));
          acc += x(j, i) * cplx(std::cos(a), sign * std::sin(a));
        }
      }
      out(q, p) = acc;
    }
  }
  if (dir == FftDirection::inverse) out /= static_cast<double>(nu * nv);
  return out;
}

}  // namespace wstack::reference
