// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <vector>

#include "wstack/comms.hpp"
#include "wstack/kernel.hpp"
#include "wstack/mesh.hpp"
#include "wstack/sample.hpp"

namespace wstack {

struct GridOptions {
  std::size_t threads = 1;
  /// Deterministic: threads own disjoint row bands and visit samples in batch
  /// order, so results do not depend on the thread count. Otherwise threads
  /// split the samples and accumulate with atomic adds.
  bool deterministic = true;
};

/// Contribution that fell outside the target slab.
struct HaloCell {
  std::size_t plane = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  cplx value{};
};

/// Out-of-slab contributions collected during grid_sector, to be added by the
/// rank that owns the rows.
struct HaloBuffer {
  std::vector<HaloCell> cells;
};

/// Accumulates out[plane, j, i] += value * kernel(gu - i, gv - j) over the
/// kernel footprint; footprints are clipped at the mesh edges. Rows outside
/// the slab go to `halo` when given and are dropped otherwise.
///
/// Returns the number of kernel evaluations applied to the slab.
std::size_t grid_sector(const SectorBatch& batch, const KernelSpec& kernel, ComplexGridd& out,
                        const GridOptions& opts = {}, HaloBuffer* halo = nullptr);

/// Adds halo contributions that fall inside `out`'s slab; others are ignored.
void apply_halo(const HaloBuffer& halo, ComplexGridd& out);

/// Operation counters for one rank's gridding.
struct GridStats {
  std::size_t kernel_evaluations = 0;
  std::size_t samples = 0;
  /// Wall time spent in the exchange or the partial-grid reduce.
  std::chrono::nanoseconds comm_time{0};
};

/// SPMD gridding of one rank's (time-ordered) samples into its owned slab.
///
/// Deterministic strategy: samples move to their slab owners first and each
/// slab is gridded in canonical order; bit-identical for any rank or thread
/// count. Concurrent strategy: every rank grids a partial for each sector in
/// turn and the partials are reduced onto the owner with strategy.kind.
/// Adds into `slab`, which must be this rank's slab.
GridStats grid_rank(Communicator& comm, std::span<const GriddedSample> local, const GridSpec& spec,
                    const KernelSpec& kernel, const ReduceStrategy& strategy,
                    std::size_t threads, ComplexGridd& slab);

struct GridAllResult {
  std::vector<ComplexGridd> slabs;  // one per rank
  MessageLog log;
};

/// Whole-topology gridding: records[r] are rank r's time-ordered records.
GridAllResult grid_all(const std::vector<std::vector<VisRecord>>& records, const GridSpec& spec,
                       const KernelSpec& kernel, const Topology& topo,
                       const ReduceStrategy& strategy);

/// Concatenates per-rank slabs into one full-mesh grid (rank 0's slab first).
ComplexGridd assemble(const std::vector<ComplexGridd>& slabs);

}  // namespace wstack
