// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "wstack/config.hpp"

using namespace wstack;

TEST_SUITE("config") {
  TEST_CASE("defaults and dump round trip") {
    Config c;
    c.set("grid.n_u", "128");
    c.set("reduce.kind", "direct");
    std::ostringstream os;
    c.dump(os);
    Config back;
    std::istringstream is(os.str());
    back.parse(is);
    CHECK(back == c);
    CHECK(back.get_size("grid.n_u") == 128);
  }

  TEST_CASE("parse errors name the line") {
    Config c;
    std::istringstream unknown("# header\ngrid.n_u = 64\nnope = 1\n");
    CHECK_THROWS_WITH_AS(c.parse(unknown, "f.cfg"), doctest::Contains("f.cfg:3"), UsageError);
    std::istringstream noeq("grid.n_u 64\n");
    CHECK_THROWS_WITH(c.parse(noeq, "g.cfg"), doctest::Contains("g.cfg:1"));
    CHECK_THROWS_AS(c.get("missing.key"), UsageError);
    c.set("grid.n_u", "abc");
    CHECK_THROWS_AS(c.get_size("grid.n_u"), UsageError);
    c.set("io.pgm", "maybe");
    CHECK_THROWS_AS(c.get_bool("io.pgm"), UsageError);
  }

  TEST_CASE("file load with comments") {
    testutil::TempDir dir;
    testutil::write_text(dir / "a.cfg", "topo.n_nodes = 2   # two nodes\n\nkernel.kind = kb\n");
    Config c;
    c.load(dir / "a.cfg");
    CHECK(topology(c) == Topology{2, 1, 1});
    CHECK(kernel_spec(c).kind == KernelKind::kaiser_bessel);
    CHECK(kernel_spec(c).shape_param == doctest::Approx(2.34 * 3));
    CHECK_THROWS_AS(c.load(dir / "missing.cfg"), UsageError);
  }

  TEST_CASE("list parsers") {
    const SkyModel sky = parse_sources("0,0,1;0.01,-0.02,0.5");
    REQUIRE(sky.sources.size() == 2);
    CHECK(sky.sources[1].m == -0.02);
    CHECK_THROWS_AS(parse_sources("0,0"), UsageError);
    CHECK(parse_topology_list("1x1,2x2x2").size() == 2);
    CHECK(parse_strategy_list("direct,ring_rdma_like", false)[1].kind == ReduceKind::ring_rdma_like);
    CHECK(parse_freq_list("default,low")[0] == FreqLevel::os_default);
  }

  TEST_CASE("builders") {
    Config c;
    CHECK(grid_spec(c).n_w == 8);
    CHECK(kernel_spec(c).shape_param == 1.0);
    CHECK(reduce_strategy(c).kind == ReduceKind::hybrid_ring);
    CHECK(energy_meter(c).has_value());
    c.set("meter.kind", "none");
    CHECK_FALSE(energy_meter(c).has_value());
    CHECK_THROWS_AS(bench_plan(c), UsageError);
    c.set("meter.kind", "synthetic_model");
    c.set("bench.topologies", "1x1,2x1");
    c.set("bench.timing", "model");
    const BenchPlan p = bench_plan(c);
    CHECK(p.topologies.size() == 2);
    CHECK(p.timing == BenchTiming::model);
    c.set("gen.records", "0");
    CHECK_THROWS_WITH(synthetic_source(c), doctest::Contains("gen.records must be >= 1"));
    c.set("io.chunk_axis", "space");
    CHECK_THROWS_AS(pipeline_config(c), UsageError);
  }
}
