// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <sstream>

#include "doctest.h"
#include "wstack/comms.hpp"

using namespace wstack;

namespace {

std::vector<ComplexGridd> random_partials(const GridSpec& s, const SlabRange& slab, std::size_t n,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<ComplexGridd> out;
  for (std::size_t r = 0; r < n; ++r) {
    ComplexGridd g(s, slab);
    for (Eigen::Index i = 0; i < g.data().size(); ++i) g.data()[i] = {d(rng), d(rng)};
    out.push_back(std::move(g));
  }
  return out;
}

/// One complex value per rank.
std::vector<ComplexGridd> scalar_partials(const std::vector<double>& values) {
  GridSpec s;
  s.n_u = 1;
  s.n_v = 1;
  std::vector<ComplexGridd> out;
  for (double v : values) {
    ComplexGridd g(s, {0, 0, 1});
    g.data()[0] = v;
    out.push_back(std::move(g));
  }
  return out;
}

const ReduceKind kKinds[] = {ReduceKind::direct, ReduceKind::hybrid_ring, ReduceKind::ring_rdma_like};

}  // namespace

TEST_SUITE("comms") {
  TEST_CASE("topology parsing") {
    CHECK(parse_topology("2x4") == Topology{2, 4, 1});
    CHECK(parse_topology("1x2x8") == Topology{1, 2, 8});
    CHECK(to_string(Topology{3, 2, 1}) == "3x2x1");
    CHECK_THROWS_AS(parse_topology("2"), UsageError);
    CHECK_THROWS_AS(parse_topology("0x2"), UsageError);
    CHECK(parse_reduce_kind("ring_rdma_like") == ReduceKind::ring_rdma_like);
    CHECK_THROWS_AS(parse_reduce_kind("tree"), UsageError);
  }

  TEST_CASE("point to point is FIFO per pair and logged") {
    const MessageLog log = run_ranks({1, 2, 1}, [](Communicator& c) {
      if (c.rank() == 0) {
        const int a[] = {1, 2};
        const int b[] = {3};
        c.send<int>(1, a, "p");
        c.send<int>(1, b, "p");
      } else {
        CHECK(c.recv<int>(0) == std::vector<int>{1, 2});
        CHECK(c.recv<int>(0) == std::vector<int>{3});
      }
      c.barrier();
    });
    CHECK(log.count() == 2);
    CHECK(log.total_bytes("p") == 12);
    CHECK(log.inter_node_count() == 0);
  }

  TEST_CASE("a failing rank unblocks the others") {
    CHECK_THROWS_AS(run_ranks({1, 3, 1},
                              [](Communicator& c) {
                                if (c.rank() == 1) throw UsageError("boom");
                                c.recv<int>(1);
                              }),
                    UsageError);
  }

  TEST_CASE("ring_pass") {
    SUBCASE("P = 1") {
      const auto res = ring_pass({{cplx(1, 2), cplx(3, 4)}}, false);
      CHECK(res.log.count() == 0);
      CHECK(res.segments[0] == std::vector<cplx>{cplx(1, 2), cplx(3, 4)});
    }
    SUBCASE("P = 2") {
      const auto res = ring_pass({{1.0, 2.0}, {10.0, 20.0}}, false);
      CHECK(res.segments[0] == std::vector<cplx>{11.0});
      CHECK(res.segments[1] == std::vector<cplx>{22.0});
      CHECK(res.log.count() == 2);
    }
    SUBCASE("P = 4 random") {
      std::mt19937_64 rng(3);
      std::uniform_real_distribution<double> d(-1, 1);
      std::vector<std::vector<cplx>> arrays(4, std::vector<cplx>(10));
      for (auto& a : arrays) {
        for (auto& z : a) z = {d(rng), d(rng)};
      }
      for (bool det : {false, true}) {
        const auto res = ring_pass(arrays, det);
        for (std::size_t p = 0; p < 4; ++p) {
          for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t idx = p * 3 + k;
            cplx sum = 0.0;
            if (idx < 10) {
              for (const auto& a : arrays) sum += a[idx];
            }
            CHECK(std::abs(res.segments[p][k] - sum) < 1e-14);
          }
        }
        // Reduce-scatter moves P(P-1) segments; deterministic mode adds the P-1 hand-offs.
        CHECK(res.log.count() == (det ? 4 * 3 + 3 : 4 * 3));
      }
    }
  }

  TEST_CASE("reduce of scalars") {
    const auto parts = scalar_partials({1, 2, 3, 4});
    for (ReduceKind k : kKinds) {
      for (const auto& topo : {Topology{4, 1, 1}, Topology{2, 2, 1}, Topology{1, 4, 1}}) {
        for (std::size_t target = 0; target < 4; ++target) {
          const auto res = reduce_slabs({k, true}, parts, target, topo);
          CHECK(res.grid.data()[0] == cplx(10.0));
        }
      }
    }
    const auto h = hybrid_reduce(parts, 0, {2, 2, 1});
    CHECK(h.grid.data()[0] == cplx(10.0));
    CHECK(h.log.inter_node_count() == 1);
  }

  TEST_CASE("zero partials still communicate") {
    const auto parts = scalar_partials({0, 0, 0, 0});
    for (ReduceKind k : kKinds) {
      const auto res = reduce_slabs({k, true}, parts, 0, {2, 2, 1});
      CHECK(res.grid.data()[0] == cplx(0.0));
      CHECK(res.log.count() > 0);
    }
  }

  TEST_CASE("single node hybrid has no inter-node traffic") {
    GridSpec s;
    const SlabRange slab{0, 0, 64};
    const auto parts = random_partials(s, slab, 4, 8);
    const auto res = hybrid_reduce(parts, 0, {1, 4, 1});
    CHECK(res.log.inter_node_count() == 0);
    CHECK(res.log.count() == 4 * 3 + 3 + 3);
  }

  TEST_CASE("strategies agree") {
    GridSpec s;
    s.n_u = 16;
    s.n_v = 16;
    s.n_w = 2;
    const SlabRange slab = slab_of(s, 1, 4);
    const Topology topo{4, 4, 1};
    const auto parts = random_partials(s, slab, 16, 42);

    std::vector<ComplexGridd> det;
    for (ReduceKind k : kKinds) det.push_back(reduce_slabs({k, true}, parts, 5, topo).grid);
    CHECK(((det[0].data() - det[1].data()).abs() == 0.0).all());
    CHECK(((det[0].data() - det[2].data()).abs() == 0.0).all());

    ComplexGridd flat(s, slab);
    for (const auto& p : parts) flat.data() += p.data();
    for (ReduceKind k : kKinds) {
      const auto res = reduce_slabs({k, false}, parts, 5, topo);
      CHECK(max_abs_diff(res.grid, flat) <= 1e-12);
    }
  }

  TEST_CASE("hybrid shrinks the inter-node surface") {
    GridSpec s;
    s.n_u = 32;
    s.n_v = 32;
    const SlabRange slab = slab_of(s, 0, 4);
    const Topology topo{4, 8, 1};
    const auto parts = random_partials(s, slab, 32, 1);
    const auto direct = reduce_slabs({ReduceKind::direct, true}, parts, 0, topo);
    const auto hybrid = reduce_slabs({ReduceKind::hybrid_ring, true}, parts, 0, topo);
    CHECK(hybrid.log.inter_node_count() == topo.n_nodes - 1);
    CHECK(hybrid.log.inter_node_bytes() < direct.log.inter_node_bytes());
    CHECK(hybrid.log.inter_node_bytes() == 3 * slab.v_count * s.n_u * sizeof(cplx));
    CHECK(direct.log.inter_node_bytes() == 24 * slab.v_count * s.n_u * sizeof(cplx));
  }

  TEST_CASE("slab mismatch is rejected") {
    GridSpec s;
    auto parts = random_partials(s, slab_of(s, 0, 2), 2, 1);
    parts[1] = ComplexGridd(s, slab_of(s, 1, 2));
    CHECK_THROWS_WITH_AS(reduce_slabs({}, parts, 0, {2, 1, 1}), doctest::Contains("slab mismatch"),
                         UsageError);
  }

  TEST_CASE("message log csv and canonical order") {
    MessageLog log;
    log.add({"b", 1, 0, false, 8, 0});
    log.add({"a", 2, 0, true, 16, 0});
    log.sort_canonical();
    CHECK(log.messages()[0].phase == "a");
    std::ostringstream os;
    log.write_csv(os);
    CHECK(os.str() == "phase,src_rank,dst_rank,intra_node,bytes\na,2,0,1,16\nb,1,0,0,8\n");
  }
}
