// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wstack/metrics.hpp"
#include "wstack/pipeline.hpp"

namespace wstack {

struct SyntheticSource {
  SkyModel sky{{{0.0, 0.0, 1.0}}};
  std::uint64_t n_records = 1000;
  std::uint32_t n_freq = 1;
  std::uint64_t seed = 1;
  SyntheticOptions opts;
};

/// wall: measured phase times. model: phase times from operation counts,
/// reproducible to the bit.
enum class BenchTiming { wall, model };

std::string_view to_string(BenchTiming t);
BenchTiming parse_bench_timing(std::string_view s);

struct BenchPlan {
  /// Empty: the synthetic source is generated once and shared by every cell.
  std::filesystem::path dataset;
  SyntheticSource synthetic;
  GridSpec grid;
  KernelSpec kernel;
  std::uint32_t n_chunks = 1;
  std::vector<Topology> topologies{{1, 1, 1}};
  std::vector<ReduceStrategy> strategies{{}};
  std::vector<FreqLevel> freq_levels{FreqLevel::high};
  std::size_t repeats = 4;
  EnergyMeter meter;
  BenchTiming timing = BenchTiming::wall;
  CostModel cost;
  std::string label = "bench";
  /// Empty: CSVs are not written.
  std::filesystem::path output_dir;
};

void validate(const BenchPlan& plan);

struct BenchRun {
  std::string config_id;
  std::size_t repeat = 0;
  RunRecord record;
  ReduceStrategy strategy;
  OperationCounts ops;
  std::uint64_t image_hash = 0;
  bool ok = false;
  std::string error;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) standard deviation; 0 for n = 1
};

MeanStd mean_stddev(std::span<const double> xs);

struct AggregateRow {
  std::string config_id;
  std::string label;
  Topology topology;
  ReduceStrategy strategy;
  FreqLevel freq = FreqLevel::high;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  /// Every successful repeat produced the same image hash.
  bool hash_consistent = true;
  std::map<Phase, MeanStd> seconds;
  MeanStd joules;
};

struct BenchResult {
  std::vector<BenchRun> runs;
  std::vector<AggregateRow> aggregates;
  bool all_ok() const;
};

/// Executes every (topology, strategy, frequency) cell `repeats` times, one
/// cell at a time. A failing repeat is recorded and the plan continues.
BenchResult run_plan(const BenchPlan& plan);

std::string config_id(const Topology& topo, const ReduceStrategy& s, FreqLevel f);

void write_raw_csv(std::ostream& os, const std::vector<BenchRun>& runs);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

/// Aggregates successful runs per config_id, in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<BenchRun>& runs);

// --- Verification suite -----------------------------------------------------

enum class VerifyScale { small, medium };

VerifyScale parse_verify_scale(std::string_view s);
std::string_view to_string(VerifyScale s);

struct VerifyOptions {
  VerifyScale scale = VerifyScale::small;
  /// Test hooks.
  bool force_fail = false;
  bool corrupt_dataset = false;
  std::filesystem::path scratch_dir;  // default: system temp directory
};

struct VerifyCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  double seconds = 0.0;
  bool passed() const;
  void print(std::ostream& os) const;
};

/// Runs the oracle checks; failures are reported, never thrown.
VerifyReport verify_pipeline(const VerifyOptions& opts);

}  // namespace wstack
