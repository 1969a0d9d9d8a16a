// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "wstack/gridder.hpp"

namespace wstack {
namespace {

struct RankCounters {
  std::uint64_t kernel_evaluations = 0;
  std::uint64_t butterflies = 0;
  std::uint64_t pixels = 0;
  std::uint64_t written_bytes = 0;
};

using Samples = std::vector<GriddedSample>;

}  // namespace

GridSpec resolve_grid(const GridSpec& grid, const DatasetHeader& header) {
  GridSpec g = grid;
  if (g.cell_size_lm == 0.0) {
    if (!(header.uv_max_native > 0.0)) {
      throw UsageError("grid.cell_size_lm = 0 needs a dataset with a uv extent");
    }
    g.cell_size_lm = 1.0 / (2.0 * header.uv_max_native);
  }
  validate(g);
  return g;
}

std::pair<std::size_t, std::size_t> expected_pixel(const GridSpec& grid, double l, double m) {
  const auto i = static_cast<long long>(grid.n_u / 2) + std::llround(l / grid.cell_size_lm);
  const auto j = static_cast<long long>(grid.n_v / 2) + std::llround(m / grid.cell_size_lm);
  if (i < 0 || j < 0 || i >= static_cast<long long>(grid.n_u) ||
      j >= static_cast<long long>(grid.n_v)) {
    throw UsageError("expected_pixel: direction outside the image");
  }
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

PixelPeak find_peak(const FinalImage& img) {
  PixelPeak p;
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  p.value = img.pixels.maxCoeff(&r, &c);
  p.i = static_cast<std::size_t>(c);
  p.j = img.slab.v_start + static_cast<std::size_t>(r);
  const DirectionCosines lm = pixel_to_lm(img.spec, p.i, p.j);
  p.l = lm.l;
  p.m = lm.m;
  return p;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset* preloaded,
                            const CostModel& model) {
  validate(cfg.topo);
  validate(cfg.kernel);
  if (cfg.n_chunks < 1) throw UsageError("n_chunks must be >= 1");
  const std::size_t R = cfg.topo.world_size();

  PhaseTimer outer;
  outer.start(Phase::total);
  outer.start(Phase::read);

  PipelineResult res;
  DatasetHeader header;
  // chunk -> rank -> samples
  std::vector<std::vector<Samples>> chunks;
  auto ingest = [&](const Dataset& ds, std::uint64_t seq_base) {
    const auto parts = partition_time_ordered(ds.records, R, ds.header.n_time_slices);
    std::vector<Samples> per_rank(R);
    std::uint64_t offset = seq_base;
    for (std::size_t r = 0; r < R; ++r) {
      per_rank[r] = to_samples(parts[r], res.grid, offset);
      offset += parts[r].size();
    }
    chunks.push_back(std::move(per_rank));
    return static_cast<std::uint64_t>(ds.records.size());
  };
  if (preloaded != nullptr) {
    header = preloaded->header;
    validate(header, preloaded->records);
    res.grid = resolve_grid(cfg.grid, header);
    ingest(*preloaded, 0);
  } else {
    header = read_dataset_header(cfg.dataset);
    res.grid = resolve_grid(cfg.grid, header);
    std::uint64_t seq = 0;
    for (std::uint32_t c = 0; c < cfg.n_chunks; ++c) {
      const Dataset ds = read_dataset(cfg.dataset, {cfg.chunk_axis, c, cfg.n_chunks});
      const std::uint64_t n = ingest(ds, seq);
      if (cfg.chunk_axis == ChunkAxis::time) seq += n;
    }
  }
  if (R > res.grid.n_v || R > res.grid.n_u) throw UsageError("more ranks than mesh rows");
  res.ops.records = header.n_records;
  res.ops.bytes_read = kDatasetHeaderBytes + header.n_records * header.record_bytes();
  outer.stop(Phase::read);

  const GridSpec grid = res.grid;
  const WRange wr{header.w_min_native, header.w_max_native};
  std::vector<PhaseTimer> timers(R);
  std::vector<RankCounters> counters(R);

  res.log = run_ranks(cfg.topo, [&](Communicator& comm) {
    const std::size_t r = comm.rank();
    PhaseTimer& timer = timers[r];
    RankCounters& cnt = counters[r];
    comm.barrier();

    ComplexGridd slab(grid, slab_of(grid, r, R));
    const auto g0 = PhaseTimer::clock::now();
    std::chrono::nanoseconds comm_time{0};
    for (const auto& chunk : chunks) {
      const GridStats st = grid_rank(comm, chunk[r], grid, cfg.kernel, cfg.reduce,
                                     cfg.topo.threads_per_rank, slab);
      cnt.kernel_evaluations += st.kernel_evaluations;
      comm_time += st.comm_time;
    }
    const auto grid_time =
        std::chrono::duration_cast<std::chrono::nanoseconds>(PhaseTimer::clock::now() - g0);
    timer.add(Phase::gridding, grid_time - comm_time);
    timer.add(Phase::reduce, comm_time);

    PlaneStack stack(grid, slab.slab());
    for (std::size_t k = 0; k < grid.n_w; ++k) {
      timer.start(Phase::fft);
      RowMatrix<cplx> rows = slab.plane(k);
      shift_grid_origin(rows, slab.slab());
      cnt.butterflies += fft2d_slab(comm, grid, slab.slab(), rows, FftDirection::inverse);
      shift_image_center(rows, slab.slab(), grid);
      timer.stop(Phase::fft);

      timer.start(Phase::wcorrect);
      ImagePlaned plane{grid, slab.slab(), std::move(rows)};
      apply_w_correction(plane, k, wr);
      stack.add(plane);
      cnt.pixels += static_cast<std::uint64_t>(plane.data.size());
      timer.stop(Phase::wcorrect);
    }
    timer.start(Phase::wcorrect);
    FinalImage part = stack.finish();
    timer.stop(Phase::wcorrect);

    timer.start(Phase::write);
    const double norms[2] = {part.real_norm_sq, part.imag_norm_sq};
    auto pix = gather<double>(
        comm, std::span<const double>(part.pixels.data(), static_cast<std::size_t>(part.pixels.size())),
        0, "gather");
    auto nrm = gather<double>(comm, std::span<const double>(norms, 2), 0, "gather");
    if (r == 0) {
      std::vector<FinalImage> parts(R);
      for (std::size_t q = 0; q < R; ++q) {
        parts[q].spec = grid;
        parts[q].slab = slab_of(grid, q, R);
        parts[q].pixels = Eigen::Map<RowMatrix<double>>(
            pix[q].data(), static_cast<Eigen::Index>(parts[q].slab.v_count),
            static_cast<Eigen::Index>(grid.n_u));
        parts[q].real_norm_sq = nrm[q][0];
        parts[q].imag_norm_sq = nrm[q][1];
      }
      res.image = assemble_image(parts);
      if (!cfg.output.empty()) {
        ImageProvenance prov;
        prov.w_min_native = wr.min;
        prov.w_max_native = wr.max;
        prov.fields = {{"label", cfg.label},
                       {"dataset", cfg.dataset.string()},
                       {"kernel", std::string(to_string(cfg.kernel.kind))},
                       {"kernel.half_support", std::to_string(cfg.kernel.half_support)},
                       {"kernel.shape_param", fmt_fixed(cfg.kernel.shape_param, 6)},
                       {"topology", to_string(cfg.topo)},
                       {"reduce", std::string(to_string(cfg.reduce.kind))},
                       {"deterministic", cfg.reduce.deterministic ? "true" : "false"},
                       {"seed", std::to_string(header.seed)},
                       {"n_chunks", std::to_string(cfg.n_chunks)}};
        write_image(res.image, cfg.output, prov, cfg.pgm_preview);
      }
      cnt.written_bytes = grid.plane_cells() * sizeof(double);
    }
    timer.stop(Phase::write);
  });
  outer.stop(Phase::total);

  // Wall clock: shared read, collective phases as max over ranks.
  std::vector<PhaseSeconds> per_rank;
  for (const PhaseTimer& t : timers) per_rank.push_back(t.seconds());
  res.seconds = merge_max(per_rank);
  res.seconds[Phase::read] = outer.seconds().at(Phase::read);
  for (Phase p : kPhases) res.seconds.try_emplace(p, 0.0);
  double phase_sum = 0.0;
  for (Phase p : kPhases) {
    if (p != Phase::total) phase_sum += res.seconds[p];
  }
  // Maxima of different ranks can overshoot the wall total by a hair.
  res.seconds[Phase::total] = std::max(outer.seconds().at(Phase::total), phase_sum);

  // Operation counts and the modelled clock.
  std::vector<std::uint64_t> reduce_intra(R, 0), reduce_inter(R, 0), fft_bytes(R, 0),
      gather_bytes(R, 0);
  for (const Message& m : res.log.messages()) {
    ++res.ops.messages;
    (m.intra_node ? res.ops.intra_node_bytes : res.ops.inter_node_bytes) += m.bytes;
    if (m.phase == "fft") {
      fft_bytes[m.src_rank] += m.bytes;
    } else if (m.phase == "gather") {
      gather_bytes[m.src_rank] += m.bytes;
    } else {
      (m.intra_node ? reduce_intra : reduce_inter)[m.src_rank] += m.bytes;
    }
  }
  std::vector<PhaseSeconds> modelled(R);
  for (std::size_t r = 0; r < R; ++r) {
    const RankCounters& c = counters[r];
    res.ops.kernel_evaluations += c.kernel_evaluations;
    res.ops.fft_butterflies += c.butterflies;
    res.ops.wcorrect_pixels += c.pixels;
    PhaseSeconds& s = modelled[r];
    s[Phase::read] = model.per_read_byte * static_cast<double>(res.ops.bytes_read);
    s[Phase::gridding] = model.per_kernel_eval * static_cast<double>(c.kernel_evaluations);
    s[Phase::reduce] = model.per_intra_byte * static_cast<double>(reduce_intra[r]) +
                       model.per_inter_byte * static_cast<double>(reduce_inter[r]);
    s[Phase::fft] = model.per_butterfly * static_cast<double>(c.butterflies) +
                    model.per_intra_byte * static_cast<double>(fft_bytes[r]);
    s[Phase::wcorrect] = model.per_wcorrect_pixel * static_cast<double>(c.pixels);
    s[Phase::write] = model.per_intra_byte * static_cast<double>(gather_bytes[r]) +
                      model.per_write_byte * static_cast<double>(c.written_bytes);
  }
  res.model_seconds = merge_max(modelled);
  double model_total = 0.0;
  for (const auto& [p, v] : res.model_seconds) model_total += v;
  res.model_seconds[Phase::total] = model_total;
  res.image_hash = image_hash(res.image);
  res.peak = find_peak(res.image);
  return res;
}

}  // namespace wstack
