// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <regex>

#include "doctest.h"
#include "test_util.hpp"

namespace {

struct Result {
  int code = -1;
  std::string out;
};

/// Runs the CLI with stderr folded into stdout.
Result wstack(const std::string& args) {
  const std::string cmd = std::string(WSTACK_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string hash_of(const std::string& out) {
  std::smatch m;
  const std::regex re("image hash ([0-9a-f]+)");
  return std::regex_search(out, m, re) ? m[1].str() : "";
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen") {
    testutil::TempDir dir;
    auto r = wstack("gen --sources 0,0,1 --records 1000 --seed 7 --out " + q(dir / "a.rvis"));
    CHECK(r.code == 0);
    r = wstack("gen --sources 0,0,1 --records 1000 --seed 7 --out " + q(dir / "b.rvis"));
    CHECK(r.code == 0);
    CHECK(testutil::read_bytes(dir / "a.rvis") == testutil::read_bytes(dir / "b.rvis"));
    CHECK(wstack("gen --records 0 --out " + q(dir / "c.rvis")).code == 2);
    CHECK(wstack("gen --set nope=1").code == 2);
  }

  TEST_CASE("image") {
    testutil::TempDir dir;
    REQUIRE(wstack("gen --sources '0.05,-0.03,1' --records 5000 --seed 3 --out " + q(dir / "d.rvis")).code == 0);
    const std::string common = "--dataset " + q(dir / "d.rvis") + " --set grid.n_u=128 --set grid.n_v=128 ";
    const auto a = wstack("image " + common + "--topo 1x1 --threads 1 --out " + q(dir / "a.f64"));
    REQUIRE(a.code == 0);
    CHECK(a.out.find("peak pixel (77, 56)") != std::string::npos);
    const auto b = wstack("image " + common + "--topo 2x2 --threads 2 --out " + q(dir / "b.f64"));
    REQUIRE(b.code == 0);
    CHECK_FALSE(hash_of(a.out).empty());
    CHECK(hash_of(a.out) == hash_of(b.out));
    CHECK(std::filesystem::exists(dir / "a.f64.json"));
    CHECK(std::filesystem::exists(dir / "a.f64.run.csv"));

    const auto missing = wstack("image --dataset " + q(dir / "none.rvis"));
    CHECK(missing.code == 2);
    CHECK(missing.out.find("dataset not found") != std::string::npos);
  }

  TEST_CASE("report") {
    testutil::TempDir dir;
    const auto trace = std::filesystem::path(WSTACK_SOURCE_DIR) / "data/traces/table2.csv";
    const auto r = wstack("report gp --trace " + q(trace) + " --out " + q(dir / "gp.csv"));
    CHECK(r.code == 0);
    CHECK(r.out.find("13.04") != std::string::npos);
    CHECK(r.out.find("24.59") != std::string::npos);
    const auto rows = testutil::read_csv(dir / "gp.csv");
    REQUIRE(rows.size() == 3);

    testutil::write_text(dir / "empty.csv", "");
    const auto e = wstack("report gp --trace " + q(dir / "empty.csv"));
    CHECK(e.code == 3);
    CHECK(e.out.find("no runs found") != std::string::npos);

    testutil::write_text(dir / "bad.csv", "label,n_nodes,freq_level,phase,seconds,joules\na,1,high,total,x,1\n");
    const auto bad = wstack("report gp --trace " + q(dir / "bad.csv"));
    CHECK(bad.code == 3);
    CHECK(bad.out.find("line 2") != std::string::npos);
    CHECK(wstack("report nope --trace " + q(trace)).code == 2);
  }

  TEST_CASE("verify") {
    CHECK(wstack("verify small").code == 0);
    CHECK(wstack("verify small --force-fail").code == 1);
    CHECK(wstack("verify enormous").code == 2);
  }

  TEST_CASE("bench and config") {
    testutil::TempDir dir;
    const auto r = wstack("bench --dataset '' --repeats 2 --timing model --set gen.records=200 --set grid.n_u=32 "
                          "--set grid.n_v=32 --set grid.n_w=2 --topologies 1x1,2x1 --out-dir " +
                          q(dir / "out"));
    CHECK(r.code == 0);
    CHECK(testutil::read_csv(dir / "out" / "runs.csv").size() == 4);
    CHECK(testutil::read_csv(dir / "out" / "aggregate.csv").size() == 2);

    testutil::write_text(dir / "c.cfg", "grid.n_u = 512\n");
    const auto c = wstack("config --config " + q(dir / "c.cfg") + " --set grid.n_v=64");
    CHECK(c.code == 0);
    CHECK(c.out.find("grid.n_u = 512") != std::string::npos);
    CHECK(c.out.find("grid.n_v = 64") != std::string::npos);
  }
}
