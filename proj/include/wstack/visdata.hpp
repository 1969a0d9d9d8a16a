// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wstack/common.hpp"

namespace wstack {

/// One baseline sample: normalized (u, v, w) plus per-channel visibilities.
///
/// Coordinates are stored normalized: u, v in [0, 1) and w in [0, 1]. The
/// vis and weight arrays are laid out channel-major, index f * n_corr + c.
struct VisRecord {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
  std::uint32_t time_index = 0;
  std::vector<std::complex<float>> vis;
  std::vector<float> weight;

  friend bool operator==(const VisRecord&, const VisRecord&) = default;
};

inline constexpr std::array<char, 4> kDatasetMagic{'R', 'V', 'I', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 64;
/// mt19937_64 with 53-bit mantissa draws.
inline constexpr std::uint32_t kPrngMt19937_64 = 1;

struct DatasetHeader {
  std::array<char, 4> magic = kDatasetMagic;
  std::uint32_t version = kDatasetVersion;
  std::uint64_t n_records = 0;
  std::uint32_t n_freq = 1;
  std::uint32_t n_corr = 1;
  std::uint32_t n_time_slices = 1;
  double w_min_native = 0.0;
  double w_max_native = 0.0;
  // Reserved block: generator provenance and the native uv half-extent.
  std::uint32_t prng_id = 0;
  std::uint64_t seed = 0;
  double uv_max_native = 0.0;

  std::size_t channels() const { return std::size_t{n_freq} * n_corr; }
  std::size_t record_bytes() const { return 28 + 12 * channels(); }
  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<VisRecord> records;
  /// First frequency channel of this (possibly chunked) view.
  std::uint32_t first_channel = 0;
};

enum class ChunkAxis { frequency, time };

struct ChunkSpec {
  ChunkAxis axis = ChunkAxis::frequency;
  std::uint32_t chunk_index = 0;
  std::uint32_t n_chunks = 1;
};

struct PointSource {
  double l = 0.0;
  double m = 0.0;
  double flux = 1.0;
};

struct SkyModel {
  std::vector<PointSource> sources;
};

struct SyntheticOptions {
  std::uint32_t n_corr = 1;
  std::uint32_t n_time_slices = 8;
  /// Native half-width of the uv box in wavelengths.
  double uv_max = 128.0;
  double w_min = 0.0;
  double w_max = 32.0;
  /// Fraction of the uv box actually sampled, centred on the origin.
  double uv_fill = 0.8;
  /// Emit each sample together with its conjugate mirror (-u, -v, -w).
  bool hermitian = false;
};

void validate(const DatasetHeader& header);
void validate(const DatasetHeader& header, std::span<const VisRecord> records);

void write_dataset(std::span<const VisRecord> records, const DatasetHeader& header,
                   const std::filesystem::path& path);

Dataset read_dataset(const std::filesystem::path& path, ChunkSpec chunk = {});

/// Header only; cheap.
DatasetHeader read_dataset_header(const std::filesystem::path& path);

/// Splits time-sorted records into n_ranks contiguous runs of time slices
/// (balanced: the first S % R ranks get one extra slice).
std::vector<std::vector<VisRecord>> partition_time_ordered(std::span<const VisRecord> records,
                                                           std::size_t n_ranks,
                                                           std::uint32_t n_time_slices);

/// Point-source sky evaluated directly at pseudo-random baselines.
Dataset generate_synthetic(const SkyModel& sky, std::uint64_t n_records, std::uint32_t n_freq,
                           std::uint64_t seed, const SyntheticOptions& opts = {});

/// Exact visibility of `sky` at native coordinates (u', v', w').
std::complex<double> sky_visibility(const SkyModel& sky, double u, double v, double w);

/// Native coordinates of a record, per the header's extents.
struct NativeUvw {
  double u, v, w;
};
NativeUvw denormalize(const DatasetHeader& header, const VisRecord& rec);

}  // namespace wstack
