// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "wstack/pipeline.hpp"
#include "wstack/transform.hpp"

using namespace wstack;

namespace {

RowMatrix<cplx> random_plane(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  RowMatrix<cplx> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = {d(rng), d(rng)};
  return m;
}

double max_diff(const RowMatrix<cplx>& a, const std::vector<oracle::cld>& b) {
  long double worst = 0.0L;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(oracle::cld(a.data()[i].real(), a.data()[i].imag()) -
                                     b[static_cast<std::size_t>(i)]));
  }
  return static_cast<double>(worst);
}

std::vector<oracle::cld> to_ld(const RowMatrix<cplx>& a) {
  std::vector<oracle::cld> out(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = {a.data()[i].real(), a.data()[i].imag()};
  return out;
}

GridSpec spec_of(std::size_t n, std::size_t n_w, double cell) {
  GridSpec s;
  s.n_u = n;
  s.n_v = n;
  s.n_w = n_w;
  s.cell_size_lm = cell;
  return s;
}

}  // namespace

TEST_SUITE("transform") {
  TEST_CASE("constant plane transforms to DC") {
    RowMatrix<cplx> c = RowMatrix<cplx>::Constant(8, 8, cplx(0.5, -0.25));
    const auto res = fft2d_slab(c, 2, FftDirection::forward);
    CHECK(std::abs(res.plane(0, 0) - cplx(32.0, -16.0)) < 1e-12);
    double rest = 0.0;
    for (Eigen::Index i = 1; i < 64; ++i) rest = std::max(rest, std::abs(res.plane.data()[i]));
    CHECK(rest < 1e-12);
  }

  TEST_CASE("distributed FFT against the direct DFT") {
    for (std::size_t n : {8, 16}) {
      const auto x = random_plane(n, n, n);
      const auto ref_f = oracle::dft2d(to_ld(x), n, n, -1);
      const auto ref_i = oracle::dft2d(to_ld(x), n, n, +1);
      RowMatrix<cplx> first;
      for (std::size_t R : {1, 2, 4, 8}) {
        const auto f = fft2d_slab(x, R, FftDirection::forward);
        CHECK(max_diff(f.plane, ref_f) <= 1e-12);
        CHECK(max_diff(fft2d_slab(x, R, FftDirection::inverse).plane, ref_i) <= 1e-12);
        if (R == 1) {
          first = f.plane;
          CHECK(f.log.count() == 0);
        } else {
          CHECK(f.plane == first);
          CHECK(f.log.count() > 0);
        }
      }
    }
  }

  TEST_CASE("rectangular planes") {
    const auto x = random_plane(4, 16, 99);
    const auto ref = oracle::dft2d(to_ld(x), 4, 16, -1);
    CHECK(max_diff(fft2d_slab(x, 4, FftDirection::forward).plane, ref) <= 1e-12);
  }

  TEST_CASE("round trip and Parseval on 64x64") {
    const auto x = random_plane(64, 64, 5);
    const auto f = fft2d_slab(x, 4, FftDirection::forward).plane;
    const auto back = fft2d_slab(f, 4, FftDirection::inverse).plane;
    CHECK((back - x).cwiseAbs().maxCoeff() <= 1e-12);
    const double ex = x.cwiseAbs2().sum();
    const double ef = f.cwiseAbs2().sum() / (64.0 * 64.0);
    CHECK(std::abs(ex - ef) <= 1e-10);
  }

  TEST_CASE("non power of two is rejected") {
    const auto x = random_plane(6, 8, 1);
    CHECK_THROWS_AS(fft2d_slab(x, 1, FftDirection::forward), UsageError);
  }

  TEST_CASE("w-correction") {
    SUBCASE("closed form at l^2 + m^2 = 0.19") {
      // Pixel (7, 7) of an 8 x 8 mesh sits at l = m = 3 cells.
      const double cell = std::sqrt(0.19 / 2.0) / 3.0;
      const GridSpec s = spec_of(8, 2, cell);
      ImagePlaned p{s, slab_of(s, 0, 1), RowMatrix<cplx>::Ones(8, 8)};
      apply_w_correction(p, 1, WRange{0.0, 0.5});
      const cplx z = p.data(7, 7);
      CHECK(z.real() == doctest::Approx(0.951057).epsilon(1e-6));
      CHECK(z.imag() == doctest::Approx(-0.309017).epsilon(1e-6));
      CHECK(p.data(4, 4) == cplx(1.0, 0.0));
    }
    SUBCASE("zero w is the identity") {
      const GridSpec s = spec_of(16, 2, 0.02);
      ImagePlaned p{s, slab_of(s, 0, 1), random_plane(16, 16, 3)};
      const auto before = p.data;
      apply_w_correction(p, 0, WRange{0.0, 10.0});
      CHECK(p.data == before);
    }
    SUBCASE("phase only") {
      const GridSpec s = spec_of(32, 4, 0.02);
      ImagePlaned p{s, slab_of(s, 1, 2), random_plane(16, 32, 4)};
      const auto before = p.data;
      apply_w_correction(p, 3, WRange{-20.0, 40.0});
      double worst = 0.0;
      for (Eigen::Index i = 0; i < before.size(); ++i) {
        const double a = std::abs(before.data()[i]);
        worst = std::max(worst, std::abs(std::abs(p.data.data()[i]) - a) / a);
      }
      CHECK(worst <= 1e-14);
    }
    SUBCASE("n - 1 without cancellation") {
      CHECK(n_minus_one(0.0, 0.0) == 0.0);
      // Series -r2/2 - r2^2/8 is exact to double precision at r2 = 2e-18.
      const double r2 = 2e-18;
      const double ref = -r2 / 2.0 - r2 * r2 / 8.0;
      CHECK(std::abs(n_minus_one(1e-9, 1e-9) - ref) <= 1e-15 * std::abs(ref));
      CHECK_THROWS_AS(n_minus_one(0.8, 0.7), UsageError);
    }
  }

  TEST_CASE("stacking") {
    SUBCASE("single plane, tiny field") {
      const GridSpec s = spec_of(8, 1, 1e-9);
      const auto x = random_plane(8, 8, 6);
      const std::vector<ImagePlaned> planes{{s, slab_of(s, 0, 1), x}};
      const FinalImage img = stack_planes(planes, s);
      CHECK((img.pixels - x.real()).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(img.imag_residual_ratio() > 0.0);
    }
    SUBCASE("zero planes give a zero image") {
      const GridSpec s = spec_of(8, 3, 0.01);
      const std::vector<ImagePlaned> planes(3, {s, slab_of(s, 0, 1), RowMatrix<cplx>::Zero(8, 8)});
      const FinalImage img = stack_planes(planes, s);
      CHECK(img.pixels.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("plane count mismatch") {
      const GridSpec s = spec_of(8, 3, 0.01);
      const std::vector<ImagePlaned> planes(2, {s, slab_of(s, 0, 1), RowMatrix<cplx>::Zero(8, 8)});
      CHECK_THROWS_WITH_AS(stack_planes(planes, s), doctest::Contains("plane count mismatch"),
                           UsageError);
    }
    SUBCASE("slabs reassemble") {
      const GridSpec s = spec_of(8, 1, 0.01);
      const auto x = random_plane(8, 8, 2);
      const FinalImage whole = stack_planes(std::vector<ImagePlaned>{{s, slab_of(s, 0, 1), x}}, s);
      std::vector<FinalImage> parts;
      for (std::size_t r : {2, 0, 1}) {
        const SlabRange sl = slab_of(s, r, 3);
        PlaneStack st(s, sl);
        st.add({s, sl, x.middleRows(static_cast<Eigen::Index>(sl.v_start), static_cast<Eigen::Index>(sl.v_count))});
        parts.push_back(st.finish());
      }
      CHECK(assemble_image(parts).pixels == whole.pixels);
    }
  }

  TEST_CASE("shifts match an fftshift pair") {
    // A delta at the uv centre images to a constant.
    const GridSpec s = spec_of(8, 1, 0.01);
    RowMatrix<cplx> g = RowMatrix<cplx>::Zero(8, 8);
    g(4, 4) = 1.0;
    shift_grid_origin(g, slab_of(s, 0, 1));
    auto img = fft2d_slab(g, 1, FftDirection::inverse).plane;
    shift_image_center(img, slab_of(s, 0, 1), s);
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(std::abs(img.data()[i] - cplx(1.0 / 64)) < 1e-15);
  }

  TEST_CASE("image files") {
    testutil::TempDir dir;
    SUBCASE("2x2 round trip") {
      const GridSpec s = spec_of(2, 1, 0.1);
      FinalImage img{s, slab_of(s, 0, 1), RowMatrix<double>(2, 2)};
      img.pixels << 0, 1, 2, 3;
      const auto p = dir / "img.f64";
      write_image(img, p, {{{"seed", "7"}}, -1.0, 1.0}, true);
      CHECK(std::filesystem::file_size(p) == 32);
      const auto bytes = testutil::read_bytes(p);
      double v[4];
      std::memcpy(v, bytes.data(), 32);
      CHECK(v[0] == 0.0);
      CHECK(v[1] == 1.0);
      CHECK(v[2] == 2.0);
      CHECK(v[3] == 3.0);

      const auto side = nlohmann::json::parse(testutil::read_text(sidecar_path(p)));
      CHECK(side["n_u"] == 2);
      CHECK(side["n_v"] == 2);
      CHECK(side["provenance"]["seed"] == "7");

      const FinalImage back = read_image(p);
      CHECK(back.pixels == img.pixels);
      write_image(back, dir / "again.f64", {{{"seed", "7"}}, -1.0, 1.0}, false);
      CHECK(testutil::read_bytes(dir / "again.f64") == bytes);
      CHECK(image_hash(back) == image_hash(img));

      const auto pgm = testutil::read_bytes(pgm_path(p));
      const std::string head(pgm.begin(), pgm.begin() + 2);
      CHECK(head == "P5");
      CHECK(static_cast<unsigned char>(pgm[pgm.size() - 4]) == 0);
      CHECK(static_cast<unsigned char>(pgm[pgm.size() - 1]) == 255);
    }
    SUBCASE("constant image previews as zero") {
      const GridSpec s = spec_of(4, 1, 0.1);
      FinalImage img{s, slab_of(s, 0, 1), RowMatrix<double>::Constant(4, 4, 2.5)};
      write_image(img, dir / "c.f64", {}, true);
      const auto pgm = testutil::read_bytes(pgm_path(dir / "c.f64"));
      for (std::size_t i = pgm.size() - 16; i < pgm.size(); ++i) CHECK(pgm[i] == 0);
    }
    SUBCASE("missing sidecar") {
      CHECK_THROWS_AS(read_image(dir / "nothing.f64"), IoError);
    }
  }

  TEST_CASE("point source lands on its pixel") {
    const SkyModel sky{{{0.05, -0.03, 1.0}}};
    const Dataset ds = generate_synthetic(sky, 20000, 1, 17);
    PipelineConfig cfg;
    cfg.grid = spec_of(256, 8, 0.0);
    cfg.topo = {2, 2, 1};
    cfg.reduce = {ReduceKind::hybrid_ring, true};
    const PipelineResult res = run_pipeline(cfg, &ds);
    const auto [ei, ej] = expected_pixel(res.grid, 0.05, -0.03);
    CHECK(std::abs(static_cast<long>(res.peak.i) - static_cast<long>(ei)) <= 1);
    CHECK(std::abs(static_cast<long>(res.peak.j) - static_cast<long>(ej)) <= 1);
    CHECK(res.peak.value > 0.0);
  }
}
