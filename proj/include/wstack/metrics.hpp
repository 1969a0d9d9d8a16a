// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wstack/comms.hpp"

namespace wstack {

enum class Phase { read, gridding, reduce, fft, wcorrect, write, total };

inline constexpr std::array<Phase, 7> kPhases = {Phase::read,     Phase::gridding, Phase::reduce,
                                                 Phase::fft,      Phase::wcorrect, Phase::write,
                                                 Phase::total};

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

/// CPU frequency setting; os_default is left to the governor ("default" in files).
enum class FreqLevel { os_default, high, medium, low };

std::string_view to_string(FreqLevel f);
FreqLevel parse_freq_level(std::string_view s);
/// 2.60 / 2.00 / 1.50 GHz; nullopt for os_default.
std::optional<double> nominal_ghz(FreqLevel f);

using PhaseSeconds = std::map<Phase, double>;
using PhaseJoules = std::map<Phase, double>;

struct RunRecord {
  std::string label;
  Topology topology;
  FreqLevel freq = FreqLevel::os_default;
  PhaseSeconds seconds;
  PhaseJoules joules;

  double total_seconds() const;
  double total_joules() const;
};

/// Non-negative values, totals present, total time >= sum of sub-phases - 1e-9.
void validate(const RunRecord& run);

/// GP = (T0 / TN) / (alpha * EN / E0).
double green_productivity(double t_ref, double e_ref, double t_test, double e_test, double alpha = 1.0);
double green_productivity(const RunRecord& ref, const RunRecord& test, double alpha = 1.0);

double reduce_fraction(const RunRecord& run);

/// 1 - E_other / E_base; base and other must share a topology.
double energy_saving(const RunRecord& base, const RunRecord& other);
/// T_other / T_base - 1.
double perf_degradation(const RunRecord& base, const RunRecord& other);

struct RatioRow {
  std::size_t n_nodes = 0;
  double energy_ratio = 0.0;  // E_cpu / E_gpu
  double time_ratio = 0.0;    // T_cpu / T_gpu
};

/// Pairs runs by node count. Every GPU node count needs a CPU run; CPU-only
/// node counts are skipped.
std::vector<RatioRow> ratio_report(const std::vector<RunRecord>& cpu_runs,
                                   const std::vector<RunRecord>& gpu_runs);

struct ScalingRow {
  std::size_t n_nodes = 0;
  double speedup = 0.0;       // T_first / T
  double energy_ratio = 0.0;  // E / E_first
  double gp = 0.0;
};

/// GP of each run against the first one; node counts must strictly increase.
std::vector<ScalingRow> scaling_gp_report(const std::vector<RunRecord>& runs, double alpha = 1.0);

// --- Traces -----------------------------------------------------------------

/// One row of a trace CSV: label,n_nodes,freq_level,phase,seconds,joules.
/// joules may be left empty for phases without an energy reading.
struct TraceRow {
  std::string label;
  std::size_t n_nodes = 1;
  FreqLevel freq = FreqLevel::os_default;
  Phase phase = Phase::total;
  double seconds = 0.0;
  std::optional<double> joules;
};

inline constexpr std::string_view kTraceHeader = "label,n_nodes,freq_level,phase,seconds,joules";

/// Parses a trace. Every schema problem is collected and reported with its
/// 1-based line number in one IoError.
std::vector<TraceRow> parse_trace(std::istream& is);
std::vector<TraceRow> read_trace(const std::filesystem::path& path);

/// Groups rows by (label, n_nodes, freq_level) in first-appearance order.
/// Throws "no runs found" when empty.
std::vector<RunRecord> runs_from_trace(const std::vector<TraceRow>& rows);

void write_trace(std::ostream& os, const std::vector<RunRecord>& runs);

// --- Energy meters ----------------------------------------------------------

enum class MeterKind { trace_injection, synthetic_model, platform_counters };

std::string_view to_string(MeterKind k);
MeterKind parse_meter_kind(std::string_view s);

struct EnergyMeter {
  MeterKind kind = MeterKind::synthetic_model;
  /// trace_injection
  std::vector<TraceRow> trace;
  /// synthetic_model: watts per level.
  std::map<FreqLevel, double> watts = {{FreqLevel::os_default, 102.0},
                                       {FreqLevel::high, 100.0},
                                       {FreqLevel::medium, 75.0},
                                       {FreqLevel::low, 70.0}};
  /// platform_counters: "file:<path>" holding cumulative joules, or "cmd:<command>".
  std::string counter_source;
  std::optional<double> counter_start;

  static EnergyMeter from_trace(std::vector<TraceRow> rows);
  static EnergyMeter synthetic(std::map<FreqLevel, double> watts);
  static EnergyMeter counters(std::string source);

  /// Reads the counter for platform_counters meters; no-op otherwise.
  void start();
};

void validate(const EnergyMeter& m);

/// Reads one cumulative joule value from a counter source.
double read_counter(const std::string& source);

struct MeasureKey {
  std::string label;
  std::optional<std::size_t> n_nodes;
  std::optional<FreqLevel> freq;
};

/// Joules per phase for a run with the given phase durations.
PhaseJoules measure(EnergyMeter& meter, const PhaseSeconds& seconds, FreqLevel freq,
                    const MeasureKey& key = {});

// --- Timing -----------------------------------------------------------------

/// Accumulating per-phase monotonic timer (nanosecond storage).
class PhaseTimer {
 public:
  using clock = std::chrono::steady_clock;

  void start(Phase p);
  void stop(Phase p);
  void add(Phase p, std::chrono::nanoseconds d) { ns_[p] += d.count(); }
  std::int64_t nanoseconds(Phase p) const;
  PhaseSeconds seconds() const;

 private:
  std::map<Phase, std::int64_t> ns_;
  std::map<Phase, clock::time_point> open_;
};

/// Per phase maximum over ranks.
PhaseSeconds merge_max(const std::vector<PhaseSeconds>& per_rank);

// --- Report tables ----------------------------------------------------------

struct ReportTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write_csv(std::ostream& os) const;
  /// Column-aligned plain text.
  void print(std::ostream& os) const;
};

std::string fmt_fixed(double v, int decimals);

enum class ReportKind { gp, reduce_fraction, freq, ratios, scaling_gp };

std::string_view to_string(ReportKind k);
ReportKind parse_report_kind(std::string_view s);

struct ReportOptions {
  double alpha = 1.0;
  /// gp: reference label (first run when empty).
  std::string ref_label;
  /// ratios: labels of the CPU and GPU run families.
  std::string cpu_label = "cpu";
  std::string gpu_label = "gpu";
};

/// Runs one report over trace runs.
ReportTable make_report(ReportKind kind, const std::vector<RunRecord>& runs,
                        const ReportOptions& opts = {});

}  // namespace wstack
