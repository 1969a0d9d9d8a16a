// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/mesh.hpp"

#include <algorithm>
#include <bit>

namespace wstack {

void validate(const GridSpec& spec) {
  if (spec.n_u < 2 || spec.n_v < 2 || !std::has_single_bit(spec.n_u) ||
      !std::has_single_bit(spec.n_v)) {
    throw UsageError("grid n_u and n_v must be powers of two >= 2");
  }
  if (spec.n_w < 1) throw UsageError("grid n_w must be >= 1");
  if (!(spec.cell_size_lm > 0.0)) throw UsageError("grid cell_size_lm must be > 0");
  // Corner pixels must stay inside the unit circle of direction cosines.
  const double half_l = static_cast<double>(spec.n_u) * spec.cell_size_lm / 2.0;
  const double half_m = static_cast<double>(spec.n_v) * spec.cell_size_lm / 2.0;
  if (!(half_l < 1.0 && half_m < 1.0) || !(half_l * half_l + half_m * half_m < 1.0)) {
    throw UsageError("grid field of view exceeds valid direction cosines");
  }
}

SlabRange slab_of(const GridSpec& spec, std::size_t rank, std::size_t n_ranks) {
  if (n_ranks < 1 || n_ranks > spec.n_v) throw UsageError("slab_of: n_ranks > n_v");
  if (rank >= n_ranks) throw UsageError("slab_of: rank out of range");
  const Block b = balanced_block(spec.n_v, n_ranks, rank);
  return {rank, b.start, b.count};
}

std::size_t owner_rank(const GridSpec& spec, double gv, std::size_t n_ranks) {
  if (!(gv >= 0.0 && gv < static_cast<double>(spec.n_v))) {
    throw UsageError("owner_rank: gv outside [0, n_v)");
  }
  return balanced_owner(spec.n_v, n_ranks, static_cast<std::size_t>(std::floor(gv)));
}

CellCoord uvw_to_cell(const GridSpec& spec, double u, double v, double w) {
  if (!(u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0 && w >= 0.0 && w <= 1.0)) {
    throw UsageError("uvw_to_cell: coordinate outside normalized bounds");
  }
  CellCoord c;
  c.gu = u * static_cast<double>(spec.n_u);
  c.gv = v * static_cast<double>(spec.n_v);
  if (spec.n_w > 1) {
    const double top = static_cast<double>(spec.n_w - 1);
    c.plane = static_cast<std::size_t>(std::clamp(std::floor(w * top + 0.5), 0.0, top));
  }
  return c;
}

DirectionCosines pixel_to_lm(const GridSpec& spec, std::size_t i, std::size_t j) {
  const auto half_u = static_cast<double>(spec.n_u / 2);
  const auto half_v = static_cast<double>(spec.n_v / 2);
  return {(static_cast<double>(i) - half_u) * spec.cell_size_lm,
          (static_cast<double>(j) - half_v) * spec.cell_size_lm};
}

double plane_w_native(const GridSpec& spec, std::size_t k, const WRange& w) {
  if (spec.n_w == 1) return w.min + 0.5 * w.span();
  return w.min + w.span() * static_cast<double>(k) / static_cast<double>(spec.n_w - 1);
}

}  // namespace wstack
