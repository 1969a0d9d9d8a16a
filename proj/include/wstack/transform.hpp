// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wstack/comms.hpp"
#include "wstack/fft.hpp"
#include "wstack/mesh.hpp"

namespace wstack {

/// Complex image rows [slab.v_start, slab.v_end()) of one w-plane, v_count x n_u.
template <typename Scalar>
struct ImagePlane {
  GridSpec spec;
  SlabRange slab;
  RowMatrix<std::complex<Scalar>> data;
};

using ImagePlaned = ImagePlane<double>;

/// Real image (or a slab of it), pixels(row j, column i).
struct FinalImage {
  GridSpec spec;
  SlabRange slab;
  RowMatrix<double> pixels;
  /// Sums of squares of the real and discarded imaginary parts.
  double real_norm_sq = 0.0;
  double imag_norm_sq = 0.0;

  double imag_residual_ratio() const;
};

/// Distributed 2D transform of one plane held as row slabs (collective).
/// Rows are transformed locally, columns after a blockwise transpose through
/// the fabric, then transposed back. The inverse is scaled by 1/(n_u n_v).
/// Returns the butterflies performed by this rank.
std::size_t fft2d_slab(Communicator& comm, const GridSpec& spec, const SlabRange& slab,
                       RowMatrix<cplx>& rows, FftDirection dir);

struct Fft2dResult {
  RowMatrix<cplx> plane;
  MessageLog log;
};

/// Whole-plane view: scatters `plane` over n_ranks slabs and gathers the result.
Fft2dResult fft2d_slab(const RowMatrix<cplx>& plane, std::size_t n_ranks, FftDirection dir);

/// Multiplies slab rows by (-1)^(i+j): moves the uv origin from the mesh centre
/// to cell (0, 0) before the transform.
void shift_grid_origin(RowMatrix<cplx>& rows, const SlabRange& slab);

/// Multiplies image rows by (-1)^(p+q+n_u/2+n_v/2): puts the phase centre at
/// pixel (n_u/2, n_v/2). Together with shift_grid_origin this equals an
/// ifftshift / fftshift pair.
void shift_image_center(RowMatrix<cplx>& rows, const SlabRange& slab, const GridSpec& spec);

/// Multiplies every pixel by exp(2 pi i w_k (sqrt(1 - l^2 - m^2) - 1)), w_k the
/// native w of plane `plane_index`.
void apply_w_correction(ImagePlaned& plane, std::size_t plane_index, const WRange& w);

/// Sum of corrected planes, finished into a real image slab.
class PlaneStack {
 public:
  PlaneStack(const GridSpec& spec, const SlabRange& slab);

  void add(const ImagePlaned& plane);
  std::size_t planes() const { return added_; }

  /// I(l, m) = sqrt(1 - l^2 - m^2) / n_w * sum_k plane_k(l, m), real part kept.
  FinalImage finish() const;

 private:
  GridSpec spec_;
  SlabRange slab_;
  RowMatrix<cplx> sum_;
  std::size_t added_ = 0;
};

FinalImage stack_planes(std::span<const ImagePlaned> planes, const GridSpec& spec);

/// Stitches row slabs (any order) into one full image.
FinalImage assemble_image(const std::vector<FinalImage>& slabs);

/// n(l, m) - 1 without cancellation for small l, m.
double n_minus_one(double l, double m);

struct ImageProvenance {
  std::map<std::string, std::string> fields;
  double w_min_native = 0.0;
  double w_max_native = 0.0;
};

/// Writes <path> (raw little-endian f64, row-major, n_v rows of n_u pixels),
/// <path>.json (dimensions and provenance) and optionally a PGM preview with a
/// linear min-max stretch (a constant image maps to 0).
void write_image(const FinalImage& img, const std::filesystem::path& path,
                 const ImageProvenance& prov, bool pgm_preview = true);

/// Reads an image written by write_image (dimensions from the sidecar).
FinalImage read_image(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& image);
std::filesystem::path pgm_path(const std::filesystem::path& image);

/// Fingerprint of the pixel bytes.
std::uint64_t image_hash(const FinalImage& img);

}  // namespace wstack
