// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/transform.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include "json.hpp"

namespace wstack {
namespace {

void check_fft_geometry(const GridSpec& spec, std::size_t n_ranks) {
  if (!std::has_single_bit(spec.n_u) || !std::has_single_bit(spec.n_v)) {
    throw UsageError("fft2d_slab: non-power-of-two dims");
  }
  if (n_ranks > spec.n_u || n_ranks > spec.n_v) {
    throw UsageError("fft2d_slab: more ranks than rows or columns");
  }
}

void put_f64_le(std::ostream& os, double v) {
  auto u = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (char& c : b) {
    c = static_cast<char>(u & 0xffu);
    u >>= 8;
  }
  os.write(b, 8);
}

double get_f64_le(const unsigned char* p) {
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) u = (u << 8) | p[i];
  return std::bit_cast<double>(u);
}

}  // namespace

double FinalImage::imag_residual_ratio() const {
  return real_norm_sq > 0.0 ? std::sqrt(imag_norm_sq / real_norm_sq) : std::sqrt(imag_norm_sq);
}

std::size_t fft2d_slab(Communicator& comm, const GridSpec& spec, const SlabRange& slab,
                       RowMatrix<cplx>& rows, FftDirection dir) {
  const std::size_t R = comm.size();
  const std::size_t me = comm.rank();
  check_fft_geometry(spec, R);
  if (static_cast<std::size_t>(rows.rows()) != slab.v_count ||
      static_cast<std::size_t>(rows.cols()) != spec.n_u) {
    throw UsageError("fft2d_slab: row block shape does not match slab");
  }
  const Radix2Fft<double> row_fft(spec.n_u);
  const Radix2Fft<double> col_fft(spec.n_v);
  std::size_t butterflies = 0;

  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    row_fft(std::span<cplx>(rows.row(r).data(), spec.n_u), dir);
    butterflies += row_fft.butterflies();
  }

  // Transpose: rank b receives columns cols(b) of every row slab.
  const Block my_cols = balanced_block(spec.n_u, R, me);
  RowMatrix<cplx> cols(static_cast<Eigen::Index>(my_cols.count), static_cast<Eigen::Index>(spec.n_v));
  auto pack = [](const auto& block) {
    RowMatrix<cplx> copy = block;
    return std::vector<cplx>(copy.data(), copy.data() + copy.size());
  };
  for (std::size_t b = 0; b < R; ++b) {
    if (b == me) continue;
    const Block cb = balanced_block(spec.n_u, R, b);
    comm.send<cplx>(b,
                    pack(rows.middleCols(static_cast<Eigen::Index>(cb.start),
                                         static_cast<Eigen::Index>(cb.count))),
                    "fft");
  }
  for (std::size_t a = 0; a < R; ++a) {
    const SlabRange sa = slab_of(spec, a, R);
    RowMatrix<cplx> block;
    if (a == me) {
      block = rows.middleCols(static_cast<Eigen::Index>(my_cols.start),
                              static_cast<Eigen::Index>(my_cols.count));
    } else {
      std::vector<cplx> in = comm.recv<cplx>(a);
      block = Eigen::Map<RowMatrix<cplx>>(in.data(), static_cast<Eigen::Index>(sa.v_count),
                                          static_cast<Eigen::Index>(my_cols.count));
    }
    cols.middleCols(static_cast<Eigen::Index>(sa.v_start), static_cast<Eigen::Index>(sa.v_count)) =
        block.transpose();
  }

  for (Eigen::Index c = 0; c < cols.rows(); ++c) {
    col_fft(std::span<cplx>(cols.row(c).data(), spec.n_v), dir);
    butterflies += col_fft.butterflies();
  }

  // Transpose back to row slabs.
  for (std::size_t a = 0; a < R; ++a) {
    if (a == me) continue;
    const SlabRange sa = slab_of(spec, a, R);
    comm.send<cplx>(a,
                    pack(cols.middleCols(static_cast<Eigen::Index>(sa.v_start),
                                         static_cast<Eigen::Index>(sa.v_count))),
                    "fft");
  }
  for (std::size_t b = 0; b < R; ++b) {
    const Block cb = balanced_block(spec.n_u, R, b);
    RowMatrix<cplx> block;
    if (b == me) {
      block = cols.middleCols(static_cast<Eigen::Index>(slab.v_start),
                              static_cast<Eigen::Index>(slab.v_count));
    } else {
      std::vector<cplx> in = comm.recv<cplx>(b);
      block = Eigen::Map<RowMatrix<cplx>>(in.data(), static_cast<Eigen::Index>(cb.count),
                                          static_cast<Eigen::Index>(slab.v_count));
    }
    rows.middleCols(static_cast<Eigen::Index>(cb.start), static_cast<Eigen::Index>(cb.count)) =
        block.transpose();
  }

  if (dir == FftDirection::inverse) {
    rows *= 1.0 / static_cast<double>(spec.n_u * spec.n_v);
  }
  return butterflies;
}

Fft2dResult fft2d_slab(const RowMatrix<cplx>& plane, std::size_t n_ranks, FftDirection dir) {
  GridSpec spec;
  spec.n_u = static_cast<std::size_t>(plane.cols());
  spec.n_v = static_cast<std::size_t>(plane.rows());
  spec.n_w = 1;
  check_fft_geometry(spec, n_ranks);
  Fft2dResult res;
  res.plane.resize(plane.rows(), plane.cols());
  res.log = run_ranks({1, n_ranks, 1}, [&](Communicator& comm) {
    const SlabRange slab = slab_of(spec, comm.rank(), n_ranks);
    RowMatrix<cplx> rows = plane.middleRows(static_cast<Eigen::Index>(slab.v_start),
                                            static_cast<Eigen::Index>(slab.v_count));
    fft2d_slab(comm, spec, slab, rows, dir);
    // Ranks write disjoint rows.
    res.plane.middleRows(static_cast<Eigen::Index>(slab.v_start),
                         static_cast<Eigen::Index>(slab.v_count)) = rows;
  });
  return res;
}

void shift_grid_origin(RowMatrix<cplx>& rows, const SlabRange& slab) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const std::size_t j = slab.v_start + static_cast<std::size_t>(r);
    for (Eigen::Index i = 0; i < rows.cols(); ++i) {
      if ((j + static_cast<std::size_t>(i)) % 2 == 1) rows(r, i) = -rows(r, i);
    }
  }
}

void shift_image_center(RowMatrix<cplx>& rows, const SlabRange& slab, const GridSpec& spec) {
  const std::size_t base = spec.n_u / 2 + spec.n_v / 2;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const std::size_t q = slab.v_start + static_cast<std::size_t>(r);
    for (Eigen::Index p = 0; p < rows.cols(); ++p) {
      if ((base + q + static_cast<std::size_t>(p)) % 2 == 1) rows(r, p) = -rows(r, p);
    }
  }
}

double n_minus_one(double l, double m) {
  const double r2 = l * l + m * m;
  if (!(r2 < 1.0)) throw UsageError("direction cosines outside the unit circle");
  return -r2 / (1.0 + std::sqrt(1.0 - r2));
}

void apply_w_correction(ImagePlaned& plane, std::size_t plane_index, const WRange& w) {
  const double wk = plane_w_native(plane.spec, plane_index, w);
  if (wk == 0.0) return;
  for (Eigen::Index r = 0; r < plane.data.rows(); ++r) {
    const std::size_t j = plane.slab.v_start + static_cast<std::size_t>(r);
    for (Eigen::Index i = 0; i < plane.data.cols(); ++i) {
      const DirectionCosines lm = pixel_to_lm(plane.spec, static_cast<std::size_t>(i), j);
      const double phase = 2.0 * kPi * wk * n_minus_one(lm.l, lm.m);
      plane.data(r, i) *= cplx(std::cos(phase), std::sin(phase));
    }
  }
}

PlaneStack::PlaneStack(const GridSpec& spec, const SlabRange& slab)
    : spec_(spec),
      slab_(slab),
      sum_(RowMatrix<cplx>::Zero(static_cast<Eigen::Index>(slab.v_count),
                                 static_cast<Eigen::Index>(spec.n_u))) {}

void PlaneStack::add(const ImagePlaned& plane) {
  if (plane.slab.v_start != slab_.v_start || plane.slab.v_count != slab_.v_count ||
      plane.data.rows() != sum_.rows() || plane.data.cols() != sum_.cols()) {
    throw UsageError("stack_planes: plane is not co-registered with the stack");
  }
  sum_ += plane.data;
  ++added_;
}

FinalImage PlaneStack::finish() const {
  if (added_ != spec_.n_w) throw UsageError("stack_planes: plane count mismatch");
  FinalImage img;
  img.spec = spec_;
  img.slab = slab_;
  img.pixels.resize(sum_.rows(), sum_.cols());
  for (Eigen::Index r = 0; r < sum_.rows(); ++r) {
    const std::size_t j = slab_.v_start + static_cast<std::size_t>(r);
    for (Eigen::Index i = 0; i < sum_.cols(); ++i) {
      const DirectionCosines lm = pixel_to_lm(spec_, static_cast<std::size_t>(i), j);
      const double n = 1.0 + n_minus_one(lm.l, lm.m);
      const cplx v = sum_(r, i) * (n / static_cast<double>(spec_.n_w));
      img.pixels(r, i) = v.real();
      img.real_norm_sq += v.real() * v.real();
      img.imag_norm_sq += v.imag() * v.imag();
    }
  }
  return img;
}

FinalImage stack_planes(std::span<const ImagePlaned> planes, const GridSpec& spec) {
  if (planes.size() != spec.n_w) throw UsageError("stack_planes: plane count mismatch");
  PlaneStack stack(spec, planes.front().slab);
  for (const ImagePlaned& p : planes) stack.add(p);
  return stack.finish();
}

FinalImage assemble_image(const std::vector<FinalImage>& slabs) {
  if (slabs.empty()) throw UsageError("assemble_image: no slabs");
  FinalImage img;
  img.spec = slabs.front().spec;
  img.slab = {0, 0, img.spec.n_v};
  img.pixels = RowMatrix<double>::Zero(static_cast<Eigen::Index>(img.spec.n_v),
                                       static_cast<Eigen::Index>(img.spec.n_u));
  std::size_t rows = 0;
  for (const FinalImage& s : slabs) {
    img.pixels.middleRows(static_cast<Eigen::Index>(s.slab.v_start),
                          static_cast<Eigen::Index>(s.slab.v_count)) = s.pixels;
    img.real_norm_sq += s.real_norm_sq;
    img.imag_norm_sq += s.imag_norm_sq;
    rows += s.slab.v_count;
  }
  if (rows != img.spec.n_v) throw UsageError("assemble_image: slabs do not cover the image");
  return img;
}

std::filesystem::path sidecar_path(const std::filesystem::path& image) {
  return std::filesystem::path(image.string() + ".json");
}

std::filesystem::path pgm_path(const std::filesystem::path& image) {
  std::filesystem::path p = image;
  p.replace_extension(".pgm");
  return p;
}

void write_image(const FinalImage& img, const std::filesystem::path& path,
                 const ImageProvenance& prov, bool pgm_preview) {
  if (!img.pixels.allFinite()) throw UsageError("write_image: non-finite pixels");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (Eigen::Index r = 0; r < img.pixels.rows(); ++r) {
      for (Eigen::Index c = 0; c < img.pixels.cols(); ++c) put_f64_le(out, img.pixels(r, c));
    }
    if (!out.flush()) throw IoError("write failed: " + path.string());
  }

  nlohmann::ordered_json j;
  j["format"] = "f64le-row-major";
  j["n_u"] = img.spec.n_u;
  j["n_v"] = img.spec.n_v;
  j["n_w"] = img.spec.n_w;
  j["cell_size_lm"] = img.spec.cell_size_lm;
  j["w_min_native"] = prov.w_min_native;
  j["w_max_native"] = prov.w_max_native;
  j["imag_residual_ratio"] = img.imag_residual_ratio();
  j["provenance"] = prov.fields;
  {
    std::ofstream side(sidecar_path(path), std::ios::trunc);
    if (!side) throw IoError("cannot write sidecar for " + path.string());
    side << j.dump(2) << '\n';
  }

  if (!pgm_preview) return;
  std::ofstream pgm(pgm_path(path), std::ios::binary | std::ios::trunc);
  if (!pgm) throw IoError("cannot write preview for " + path.string());
  pgm << "P5\n" << img.pixels.cols() << ' ' << img.pixels.rows() << "\n255\n";
  const double lo = img.pixels.size() ? img.pixels.minCoeff() : 0.0;
  const double hi = img.pixels.size() ? img.pixels.maxCoeff() : 0.0;
  // Row 0 is written first, the conventional top line of a PGM.
  for (Eigen::Index r = 0; r < img.pixels.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.pixels.cols(); ++c) {
      const double t = hi > lo ? (img.pixels(r, c) - lo) / (hi - lo) : 0.0;
      pgm.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
  }
}

FinalImage read_image(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw IoError("image sidecar not found: " + sidecar_path(path).string());
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad image sidecar: ") + e.what());
  }
  FinalImage img;
  img.spec.n_u = j.at("n_u").get<std::size_t>();
  img.spec.n_v = j.at("n_v").get<std::size_t>();
  img.spec.n_w = j.value("n_w", std::size_t{1});
  img.spec.cell_size_lm = j.at("cell_size_lm").get<double>();
  img.slab = {0, 0, img.spec.n_v};

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("image not found: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() != img.spec.n_u * img.spec.n_v * 8) throw IoError("truncated image file");
  img.pixels.resize(static_cast<Eigen::Index>(img.spec.n_v), static_cast<Eigen::Index>(img.spec.n_u));
  for (std::size_t k = 0; k < img.spec.n_u * img.spec.n_v; ++k) {
    img.pixels.data()[k] = get_f64_le(bytes.data() + 8 * k);
  }
  img.real_norm_sq = img.pixels.squaredNorm();
  return img;
}

std::uint64_t image_hash(const FinalImage& img) {
  std::uint64_t h = fnv1a(&img.spec.n_u, sizeof(img.spec.n_u));
  h = fnv1a(&img.spec.n_v, sizeof(img.spec.n_v), h);
  return fnv1a(img.pixels.data(), static_cast<std::size_t>(img.pixels.size()) * sizeof(double), h);
}

}  // namespace wstack
