// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/sample.hpp"

namespace wstack {

std::vector<GriddedSample> to_samples(std::span<const VisRecord> records, const GridSpec& spec,
                                      std::uint64_t seq_offset) {
  std::vector<GriddedSample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const VisRecord& r = records[i];
    const CellCoord c = uvw_to_cell(spec, r.u, r.v, r.w);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t ch = 0; ch < r.vis.size(); ++ch) {
      acc += std::complex<double>(r.vis[ch]) * static_cast<double>(r.weight[ch]);
    }
    out.push_back({c.gu, c.gv, acc, seq_offset + i, static_cast<std::uint32_t>(c.plane),
                   r.time_index});
  }
  return out;
}

RankSpan ranks_touched(const GridSpec& spec, double gv, int half_support, std::size_t n_ranks) {
  const Block rows = footprint(gv, half_support, spec.n_v);
  if (rows.count == 0) return {};
  return {balanced_owner(spec.n_v, n_ranks, rows.start),
          balanced_owner(spec.n_v, n_ranks, rows.end() - 1), false};
}

std::vector<SectorBatch> bin_by_sector(std::span<const GriddedSample> samples,
                                       const GridSpec& spec, int half_support,
                                       std::size_t n_ranks) {
  std::vector<SectorBatch> batches(n_ranks);
  for (std::size_t r = 0; r < n_ranks; ++r) batches[r].slab = slab_of(spec, r, n_ranks);
  for (const GriddedSample& s : samples) {
    const RankSpan span = ranks_touched(spec, s.gv, half_support, n_ranks);
    if (span.empty) continue;
    for (std::size_t r = span.first; r <= span.last; ++r) batches[r].samples.push_back(s);
  }
  return batches;
}

}  // namespace wstack
