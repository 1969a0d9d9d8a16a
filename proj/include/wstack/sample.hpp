// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "wstack/mesh.hpp"
#include "wstack/visdata.hpp"

namespace wstack {

/// A record reduced to what gridding needs: cell position, plane and the
/// weighted visibility summed over its channels.
struct GriddedSample {
  double gu = 0.0;
  double gv = 0.0;
  std::complex<double> value{};
  std::uint64_t seq = 0;
  std::uint32_t plane = 0;
  std::uint32_t time_index = 0;
};

/// Samples whose kernel footprint touches one slab (owned plus halo).
struct SectorBatch {
  SlabRange slab;
  std::vector<GriddedSample> samples;
};

/// Integer cells c with |x - c| <= half_support, clipped to [0, n).
inline Block footprint(double x, int half_support, std::size_t n) {
  const double lo = std::max(0.0, std::ceil(x - half_support));
  const double hi = std::min(static_cast<double>(n) - 1.0, std::floor(x + half_support));
  if (hi < lo) return {static_cast<std::size_t>(lo), 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo) + 1};
}

/// Converts records to samples. Weights multiply visibilities before
/// convolution and channels are summed. seq numbers start at seq_offset.
std::vector<GriddedSample> to_samples(std::span<const VisRecord> records, const GridSpec& spec,
                                      std::uint64_t seq_offset = 0);

/// Ranks whose slabs intersect the sample's footprint rows, as [first, last].
struct RankSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  bool empty = true;
};
RankSpan ranks_touched(const GridSpec& spec, double gv, int half_support, std::size_t n_ranks);

/// Splits one rank's samples into one batch per sector (halo duplicates included).
std::vector<SectorBatch> bin_by_sector(std::span<const GriddedSample> samples,
                                       const GridSpec& spec, int half_support,
                                       std::size_t n_ranks);

}  // namespace wstack
