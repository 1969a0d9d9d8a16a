// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "wstack/comms.hpp"
#include "wstack/kernel.hpp"
#include "wstack/metrics.hpp"
#include "wstack/transform.hpp"
#include "wstack/visdata.hpp"

namespace wstack {

struct PipelineConfig {
  std::filesystem::path dataset;
  /// cell_size_lm = 0 derives 1 / (2 uv_max) from the dataset header.
  GridSpec grid;
  KernelSpec kernel;
  Topology topo;
  ReduceStrategy reduce;
  ChunkAxis chunk_axis = ChunkAxis::frequency;
  std::uint32_t n_chunks = 1;
  /// Empty: the image is kept in memory only.
  std::filesystem::path output;
  bool pgm_preview = true;
  std::string label = "run";
};

/// Deterministic work counters; summed over ranks unless noted.
struct OperationCounts {
  std::uint64_t records = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t kernel_evaluations = 0;
  std::uint64_t fft_butterflies = 0;
  std::uint64_t wcorrect_pixels = 0;
  std::uint64_t messages = 0;
  std::uint64_t intra_node_bytes = 0;
  std::uint64_t inter_node_bytes = 0;
};

/// Seconds charged per unit of work by the modelled clock.
struct CostModel {
  double per_read_byte = 1e-9;
  double per_kernel_eval = 2e-9;
  double per_butterfly = 4e-9;
  double per_wcorrect_pixel = 2e-8;
  double per_intra_byte = 1e-10;
  double per_inter_byte = 1e-9;
  double per_write_byte = 2e-9;
};

struct PixelPeak {
  std::size_t i = 0;  // column
  std::size_t j = 0;  // row
  double value = 0.0;
  double l = 0.0;
  double m = 0.0;
};

PixelPeak find_peak(const FinalImage& img);

struct PipelineResult {
  FinalImage image;
  GridSpec grid;  // with the derived cell size
  PhaseSeconds seconds;
  /// Phase seconds from the cost model (max over ranks, like the timers).
  PhaseSeconds model_seconds;
  OperationCounts ops;
  MessageLog log;
  std::uint64_t image_hash = 0;
  PixelPeak peak;
};

/// Runs read, grid (+ exchange or reduce), per-plane inverse FFT, w-correction
/// and stacking, gather and write. `preloaded` skips the file read.
PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset* preloaded = nullptr,
                            const CostModel& model = {});

/// Grid spec with the cell size filled in from the dataset when it is 0.
GridSpec resolve_grid(const GridSpec& grid, const DatasetHeader& header);

/// Pixel where a source at (l, m) should land.
std::pair<std::size_t, std::size_t> expected_pixel(const GridSpec& grid, double l, double m);

}  // namespace wstack
