// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/gridder.hpp"

#include <atomic>
#include <thread>

namespace wstack {
namespace {

struct Footprint {
  Block cols;
  Block rows;
  std::vector<double> wu;
  std::vector<double> wv;
};

Footprint make_footprint(const GriddedSample& s, const KernelSpec& k, const GridSpec& spec) {
  Footprint f;
  f.cols = footprint(s.gu, k.half_support, spec.n_u);
  f.rows = footprint(s.gv, k.half_support, spec.n_v);
  f.wu.resize(f.cols.count);
  f.wv.resize(f.rows.count);
  for (std::size_t c = 0; c < f.cols.count; ++c) {
    f.wu[c] = kernel_factor(k, s.gu - static_cast<double>(f.cols.start + c));
  }
  for (std::size_t r = 0; r < f.rows.count; ++r) {
    f.wv[r] = kernel_factor(k, s.gv - static_cast<double>(f.rows.start + r));
  }
  return f;
}

/// Applies one sample to rows [row_lo, row_hi) of `out`.
template <typename Add>
std::size_t splat(const GriddedSample& s, const Footprint& f, ComplexGridd& out,
                  std::size_t row_lo, std::size_t row_hi, Add&& add) {
  const std::size_t lo = std::max(row_lo, f.rows.start);
  const std::size_t hi = std::min(row_hi, f.rows.end());
  std::size_t n = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    const cplx row_value = s.value * f.wv[j - f.rows.start];
    cplx* row = &out.at(s.plane, j, f.cols.start);
    for (std::size_t c = 0; c < f.cols.count; ++c) add(row[c], row_value * f.wu[c]);
    n += f.cols.count;
  }
  return n;
}

void plain_add(cplx& cell, cplx v) { cell += v; }

void atomic_add(cplx& cell, cplx v) {
  // std::complex<double> is layout-compatible with double[2].
  auto* parts = reinterpret_cast<double*>(&cell);
  std::atomic_ref<double>(parts[0]).fetch_add(v.real(), std::memory_order_relaxed);
  std::atomic_ref<double>(parts[1]).fetch_add(v.imag(), std::memory_order_relaxed);
}

template <typename Fn>
void parallel_for(std::size_t threads, Fn&& fn) {
  if (threads <= 1) {
    fn(std::size_t{0});
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back([&fn, t] { fn(t); });
  fn(std::size_t{0});
}

}  // namespace

std::size_t grid_sector(const SectorBatch& batch, const KernelSpec& kernel, ComplexGridd& out,
                        const GridOptions& opts, HaloBuffer* halo) {
  validate(kernel);
  const GridSpec& spec = out.spec();
  const SlabRange& slab = out.slab();
  if (slab.v_start != batch.slab.v_start || slab.v_count != batch.slab.v_count) {
    throw UsageError("grid_sector: output slab does not match batch slab");
  }
  const auto S = static_cast<double>(kernel.half_support);
  for (const GriddedSample& s : batch.samples) {
    const double row = std::floor(s.gv);
    if (!(row >= static_cast<double>(slab.v_start) - S &&
          row < static_cast<double>(slab.v_end()) + S) ||
        !(s.gu >= 0.0 && s.gu < static_cast<double>(spec.n_u)) || s.plane >= spec.n_w) {
      throw UsageError("grid_sector: record outside slab+halo");
    }
  }

  const std::size_t T = std::max<std::size_t>(1, opts.threads);
  std::vector<std::size_t> evals(T, 0);
  if (T == 1) {
    for (const GriddedSample& s : batch.samples) {
      evals[0] += splat(s, make_footprint(s, kernel, spec), out, slab.v_start, slab.v_end(),
                        plain_add);
    }
  } else if (opts.deterministic) {
    parallel_for(T, [&](std::size_t t) {
      const Block band = balanced_block(slab.v_count, T, t);
      const std::size_t lo = slab.v_start + band.start;
      const std::size_t hi = slab.v_start + band.end();
      for (const GriddedSample& s : batch.samples) {
        const Block rows = footprint(s.gv, kernel.half_support, spec.n_v);
        if (rows.end() <= lo || rows.start >= hi) continue;
        evals[t] += splat(s, make_footprint(s, kernel, spec), out, lo, hi, plain_add);
      }
    });
  } else {
    parallel_for(T, [&](std::size_t t) {
      const Block mine = balanced_block(batch.samples.size(), T, t);
      for (std::size_t i = mine.start; i < mine.end(); ++i) {
        const GriddedSample& s = batch.samples[i];
        evals[t] += splat(s, make_footprint(s, kernel, spec), out, slab.v_start, slab.v_end(),
                          atomic_add);
      }
    });
  }

  if (halo != nullptr) {
    for (const GriddedSample& s : batch.samples) {
      const Footprint f = make_footprint(s, kernel, spec);
      for (std::size_t r = 0; r < f.rows.count; ++r) {
        const std::size_t j = f.rows.start + r;
        if (slab.contains(j)) continue;
        for (std::size_t c = 0; c < f.cols.count; ++c) {
          halo->cells.push_back({s.plane, j, f.cols.start + c, s.value * f.wv[r] * f.wu[c]});
        }
      }
    }
  }

  std::size_t total = 0;
  for (std::size_t e : evals) total += e;
  return total;
}

void apply_halo(const HaloBuffer& halo, ComplexGridd& out) {
  for (const HaloCell& h : halo.cells) {
    if (out.slab().contains(h.row)) out.at(h.plane, h.row, h.col) += h.value;
  }
}

GridStats grid_rank(Communicator& comm, std::span<const GriddedSample> local, const GridSpec& spec,
                    const KernelSpec& kernel, const ReduceStrategy& strategy,
                    std::size_t threads, ComplexGridd& slab) {
  GridStats stats;
  const std::size_t R = comm.size();
  if (strategy.deterministic) {
    const auto t0 = std::chrono::steady_clock::now();
    const SectorBatch batch = exchange_to_space_order(comm, spec, kernel.half_support, local);
    stats.comm_time += std::chrono::steady_clock::now() - t0;
    stats.samples = batch.samples.size();
    stats.kernel_evaluations = grid_sector(batch, kernel, slab, {threads, true});
    return stats;
  }
  const std::vector<SectorBatch> batches = bin_by_sector(local, spec, kernel.half_support, R);
  for (std::size_t s = 0; s < R; ++s) {
    ComplexGridd partial(spec, batches[s].slab);
    stats.samples += batches[s].samples.size();
    stats.kernel_evaluations += grid_sector(batches[s], kernel, partial, {threads, false});
    const auto& d = partial.data();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<cplx> sum =
        reduce<cplx>(comm, strategy, std::span<const cplx>(d.data(), d.size()), s);
    stats.comm_time += std::chrono::steady_clock::now() - t0;
    if (comm.rank() == s) {
      slab.data() += Eigen::Map<const ComplexGridd::Storage>(sum.data(),
                                                             static_cast<Eigen::Index>(sum.size()));
    }
  }
  return stats;
}

GridAllResult grid_all(const std::vector<std::vector<VisRecord>>& records, const GridSpec& spec,
                       const KernelSpec& kernel, const Topology& topo,
                       const ReduceStrategy& strategy) {
  validate(spec);
  validate(kernel);
  validate(topo);
  if (records.size() != topo.world_size()) throw UsageError("grid_all: need records per rank");
  std::vector<std::uint64_t> offsets(records.size() + 1, 0);
  for (std::size_t r = 0; r < records.size(); ++r) offsets[r + 1] = offsets[r] + records[r].size();

  GridAllResult res;
  res.slabs.resize(topo.world_size());
  res.log = run_ranks(topo, [&](Communicator& comm) {
    const std::size_t r = comm.rank();
    ComplexGridd slab(spec, slab_of(spec, r, comm.size()));
    const auto samples = to_samples(records[r], spec, offsets[r]);
    grid_rank(comm, samples, spec, kernel, strategy, topo.threads_per_rank, slab);
    res.slabs[r] = std::move(slab);
  });
  return res;
}

ComplexGridd assemble(const std::vector<ComplexGridd>& slabs) {
  if (slabs.empty()) throw UsageError("assemble: no slabs");
  const GridSpec& spec = slabs.front().spec();
  ComplexGridd full(spec, {0, 0, spec.n_v});
  for (const ComplexGridd& s : slabs) {
    for (std::size_t k = 0; k < spec.n_w; ++k) {
      full.plane(k).middleRows(static_cast<Eigen::Index>(s.slab().v_start),
                               static_cast<Eigen::Index>(s.slab().v_count)) = s.plane(k);
    }
  }
  return full;
}

}  // namespace wstack
