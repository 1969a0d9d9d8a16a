// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"
#include "wstack/visdata.hpp"

using namespace wstack;

namespace {

DatasetHeader header_for(std::uint64_t n, std::uint32_t n_freq = 1) {
  DatasetHeader h;
  h.n_records = n;
  h.n_freq = n_freq;
  h.w_min_native = -4.0;
  h.w_max_native = 4.0;
  h.uv_max_native = 64.0;
  return h;
}

}  // namespace

TEST_SUITE("visdata") {
  TEST_CASE("single record file size follows the layout") {
    testutil::TempDir dir;
    VisRecord r{0.25, 0.5, 0.75, 0, {{1.0f, -2.0f}}, {1.0f}};
    const auto p = dir / "one.rvis";
    write_dataset(std::span<const VisRecord>(&r, 1), header_for(1), p);
    CHECK(std::filesystem::file_size(p) == kDatasetHeaderBytes + 28 + 8 + 4);
    const auto bytes = testutil::read_bytes(p);
    CHECK(std::memcmp(bytes.data(), "RVIS", 4) == 0);
    double u = 0.0;
    std::memcpy(&u, bytes.data() + kDatasetHeaderBytes, 8);
    CHECK(u == 0.25);
  }

  TEST_CASE("empty record list is rejected") {
    testutil::TempDir dir;
    DatasetHeader h = header_for(0);
    CHECK_THROWS_WITH_AS(write_dataset({}, h, dir / "e.rvis"),
                         doctest::Contains("header/record count mismatch"), UsageError);
    h.n_records = 3;
    CHECK_THROWS_WITH_AS(write_dataset({}, h, dir / "e.rvis"),
                         doctest::Contains("header/record count mismatch"), UsageError);
  }

  TEST_CASE("1000 random records round trip byte-identically") {
    testutil::TempDir dir;
    SyntheticOptions o;
    o.n_corr = 2;
    const Dataset ds = generate_synthetic({{{0.01, -0.02, 1.5}, {-0.03, 0.0, 0.5}}}, 1000, 3, 11, o);
    write_dataset(ds.records, ds.header, dir / "a.rvis");
    const Dataset back = read_dataset(dir / "a.rvis");
    CHECK(back.header == ds.header);
    CHECK(back.records == ds.records);
    write_dataset(back.records, back.header, dir / "b.rvis");
    CHECK(testutil::read_bytes(dir / "a.rvis") == testutil::read_bytes(dir / "b.rvis"));
    CHECK(read_dataset_header(dir / "a.rvis") == ds.header);
  }

  TEST_CASE("read errors") {
    testutil::TempDir dir;
    CHECK_THROWS_WITH_AS(read_dataset(dir / "missing.rvis"), doctest::Contains("dataset not found"),
                         IoError);

    const Dataset ds = generate_synthetic({{{0, 0, 1}}}, 10, 1, 1);
    write_dataset(ds.records, ds.header, dir / "d.rvis");
    auto bytes = testutil::read_bytes(dir / "d.rvis");

    auto rewrite = [&](const std::vector<char>& b) {
      std::ofstream(dir / "x.rvis", std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
    };
    auto bad = bytes;
    bad[0] = 'X';
    rewrite(bad);
    CHECK_THROWS_WITH_AS(read_dataset(dir / "x.rvis"), doctest::Contains("bad magic"), IoError);

    bad = bytes;
    bad[4] = 9;
    rewrite(bad);
    CHECK_THROWS_WITH_AS(read_dataset(dir / "x.rvis"), doctest::Contains("version mismatch"), IoError);

    bad.assign(bytes.begin(), bytes.end() - 3);
    rewrite(bad);
    CHECK_THROWS_WITH_AS(read_dataset(dir / "x.rvis"), doctest::Contains("truncated"), IoError);

    CHECK_THROWS_WITH(read_dataset(dir / "d.rvis", {ChunkAxis::time, 2, 2}),
                      doctest::Contains("chunk_index out of range"));
  }

  TEST_CASE("chunked reads") {
    testutil::TempDir dir;
    const Dataset ds = generate_synthetic({{{0.02, 0.01, 1.0}}}, 400, 2, 3);
    const auto p = dir / "c.rvis";
    write_dataset(ds.records, ds.header, p);

    SUBCASE("one chunk is the whole dataset") {
      const Dataset all = read_dataset(p, {ChunkAxis::frequency, 0, 1});
      CHECK(all.records == ds.records);
    }
    SUBCASE("frequency chunks split channels") {
      const Dataset c0 = read_dataset(p, {ChunkAxis::frequency, 0, 2});
      const Dataset c1 = read_dataset(p, {ChunkAxis::frequency, 1, 2});
      REQUIRE(c0.records.size() == ds.records.size());
      CHECK(c0.first_channel == 0);
      CHECK(c1.first_channel == 1);
      for (std::size_t i = 0; i < ds.records.size(); ++i) {
        REQUIRE(c0.records[i].vis.size() == 1);
        CHECK(c0.records[i].vis[0] == ds.records[i].vis[0]);
        CHECK(c1.records[i].vis[0] == ds.records[i].vis[1]);
      }
    }
    SUBCASE("time chunks partition the records") {
      std::vector<VisRecord> joined;
      for (std::uint32_t k = 0; k < 8; ++k) {
        const Dataset c = read_dataset(p, {ChunkAxis::time, k, 8});
        for (const auto& r : c.records) CHECK(r.time_index == k);
        std::size_t expected = 0;
        for (const auto& r : ds.records) expected += r.time_index == k;
        CHECK(c.records.size() == expected);
        joined.insert(joined.end(), c.records.begin(), c.records.end());
      }
      CHECK(joined == ds.records);
    }
  }

  TEST_CASE("partition_time_ordered") {
    SyntheticOptions o;
    o.n_time_slices = 8;
    const Dataset ds = generate_synthetic({{{0, 0, 1}}}, 80, 1, 5, o);

    SUBCASE("8 slices over 8 ranks") {
      const auto parts = partition_time_ordered(ds.records, 8, 8);
      REQUIRE(parts.size() == 8);
      for (std::size_t r = 0; r < 8; ++r) {
        CHECK(parts[r].size() == 10);
        for (const auto& rec : parts[r]) CHECK(rec.time_index == r);
      }
    }
    SUBCASE("one rank is the identity") {
      const auto parts = partition_time_ordered(ds.records, 1, 8);
      CHECK(parts[0] == ds.records);
    }
    SUBCASE("10 slices over 4 ranks") {
      std::vector<VisRecord> recs(10);
      for (std::uint32_t t = 0; t < 10; ++t) recs[t].time_index = t;
      const auto parts = partition_time_ordered(recs, 4, 10);
      CHECK(parts[0].size() == 3);
      CHECK(parts[1].size() == 3);
      CHECK(parts[2].size() == 2);
      CHECK(parts[3].size() == 2);
      CHECK(parts[2].front().time_index == 6);
    }
    SUBCASE("unsorted input") {
      std::vector<VisRecord> recs(2);
      recs[0].time_index = 1;
      CHECK_THROWS_WITH_AS(partition_time_ordered(recs, 2, 2), doctest::Contains("unsorted"),
                           UsageError);
    }
  }

  TEST_CASE("generate_synthetic") {
    SUBCASE("phase-centre source gives 1 + 0i") {
      const Dataset ds = generate_synthetic({{{0, 0, 1}}}, 500, 2, 7);
      for (const auto& r : ds.records) {
        for (auto z : r.vis) CHECK(z == std::complex<float>(1.0f, 0.0f));
        for (float w : r.weight) CHECK(w == 1.0f);
      }
    }
    SUBCASE("symmetric pair at w = 0 is real") {
      SyntheticOptions o;
      o.w_min = 0.0;
      o.w_max = 0.0;
      const Dataset ds = generate_synthetic({{{0.1, 0.0, 1.0}, {-0.1, 0.0, 1.0}}}, 200, 1, 2, o);
      for (const auto& r : ds.records) CHECK(std::abs(r.vis[0].imag()) < 1e-6f);
    }
    SUBCASE("matches the long double visibility sum") {
      const SkyModel sky{{{0.05, -0.03, 2.0}, {-0.1, 0.07, 0.5}}};
      const Dataset ds = generate_synthetic(sky, 300, 1, 13);
      double worst = 0.0;
      for (const auto& r : ds.records) {
        const NativeUvw x = denormalize(ds.header, r);
        const auto ref = oracle::visibility(sky, x.u, x.v, x.w);
        const auto got = std::complex<double>(r.vis[0]);
        worst = std::max(worst, static_cast<double>(std::abs(oracle::cld(got) - ref)));
      }
      CHECK(worst < 5e-6);
    }
    SUBCASE("seeded") {
      const SkyModel sky{{{0.05, 0.0, 1.0}}};
      CHECK(generate_synthetic(sky, 50, 1, 9).records == generate_synthetic(sky, 50, 1, 9).records);
      CHECK_FALSE(generate_synthetic(sky, 50, 1, 9).records ==
                  generate_synthetic(sky, 50, 1, 10).records);
    }
    SUBCASE("errors") {
      CHECK_THROWS_AS(generate_synthetic({{{0.8, 0.7, 1.0}}}, 10, 1, 1), UsageError);
      CHECK_THROWS_AS(generate_synthetic({{{0, 0, 1}}}, 0, 1, 1), UsageError);
      CHECK_THROWS_AS(generate_synthetic({}, 10, 1, 1), UsageError);
    }
  }
}
