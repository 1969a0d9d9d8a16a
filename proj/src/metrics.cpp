// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace wstack {
namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw UsageError(std::string(what) + " must be positive and finite");
  }
}

double phase_or_throw(const std::map<Phase, double>& m, Phase p, const std::string& label) {
  auto it = m.find(p);
  if (it == m.end()) {
    throw UsageError("run '" + label + "' has no " + std::string(to_string(p)) + " value");
  }
  return it->second;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  const auto e = s.find_last_not_of(ws);
  s.erase(e == std::string::npos ? 0 : e + 1);
  return s;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

std::string node_str(const RunRecord& r) { return std::to_string(r.topology.n_nodes); }

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::read: return "read";
    case Phase::gridding: return "gridding";
    case Phase::reduce: return "reduce";
    case Phase::fft: return "fft";
    case Phase::wcorrect: return "wcorrect";
    case Phase::write: return "write";
    case Phase::total: return "total";
  }
  return "?";
}

Phase parse_phase(std::string_view s) {
  for (Phase p : kPhases) {
    if (to_string(p) == s) return p;
  }
  throw UsageError("unknown phase: " + std::string(s));
}

std::string_view to_string(FreqLevel f) {
  switch (f) {
    case FreqLevel::os_default: return "default";
    case FreqLevel::high: return "high";
    case FreqLevel::medium: return "medium";
    case FreqLevel::low: return "low";
  }
  return "?";
}

FreqLevel parse_freq_level(std::string_view s) {
  if (s == "default") return FreqLevel::os_default;
  if (s == "high") return FreqLevel::high;
  if (s == "medium") return FreqLevel::medium;
  if (s == "low") return FreqLevel::low;
  throw UsageError("unknown frequency level: " + std::string(s));
}

std::optional<double> nominal_ghz(FreqLevel f) {
  switch (f) {
    case FreqLevel::high: return 2.60;
    case FreqLevel::medium: return 2.00;
    case FreqLevel::low: return 1.50;
    case FreqLevel::os_default: break;
  }
  return std::nullopt;
}

double RunRecord::total_seconds() const { return phase_or_throw(seconds, Phase::total, label); }
double RunRecord::total_joules() const { return phase_or_throw(joules, Phase::total, label); }

void validate(const RunRecord& run) {
  double sub = 0.0;
  for (const auto& [p, s] : run.seconds) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw UsageError("negative or non-finite phase time");
    if (p != Phase::total) sub += s;
  }
  for (const auto& [p, j] : run.joules) {
    if (!(j >= 0.0) || !std::isfinite(j)) throw UsageError("negative or non-finite energy");
  }
  if (run.total_seconds() < sub - 1e-9) {
    throw UsageError("run '" + run.label + "': total time below the sum of its phases");
  }
  run.total_joules();
}

double green_productivity(double t_ref, double e_ref, double t_test, double e_test, double alpha) {
  require_positive(t_ref, "reference time");
  require_positive(e_ref, "reference energy");
  require_positive(t_test, "test time");
  require_positive(e_test, "test energy");
  require_positive(alpha, "alpha");
  return (t_ref / t_test) / (alpha * e_test / e_ref);
}

double green_productivity(const RunRecord& ref, const RunRecord& test, double alpha) {
  return green_productivity(ref.total_seconds(), ref.total_joules(), test.total_seconds(),
                            test.total_joules(), alpha);
}

double reduce_fraction(const RunRecord& run) {
  const double total = run.total_seconds();
  const double red = phase_or_throw(run.seconds, Phase::reduce, run.label);
  require_positive(total, "total time");
  return red / total;
}

double energy_saving(const RunRecord& base, const RunRecord& other) {
  if (!(base.topology == other.topology)) throw UsageError("energy_saving: topologies differ");
  require_positive(base.total_joules(), "baseline energy");
  return 1.0 - other.total_joules() / base.total_joules();
}

double perf_degradation(const RunRecord& base, const RunRecord& other) {
  if (!(base.topology == other.topology)) throw UsageError("perf_degradation: topologies differ");
  require_positive(base.total_seconds(), "baseline time");
  return other.total_seconds() / base.total_seconds() - 1.0;
}

std::vector<RatioRow> ratio_report(const std::vector<RunRecord>& cpu_runs,
                                   const std::vector<RunRecord>& gpu_runs) {
  if (gpu_runs.empty()) throw UsageError("ratio_report: no GPU runs");
  std::map<std::size_t, const RunRecord*> cpu;
  for (const RunRecord& r : cpu_runs) cpu.emplace(r.topology.n_nodes, &r);
  std::vector<RatioRow> out;
  for (const RunRecord& g : gpu_runs) {
    auto it = cpu.find(g.topology.n_nodes);
    if (it == cpu.end()) {
      throw UsageError("ratio_report: no CPU run with " + std::to_string(g.topology.n_nodes) +
                       " nodes");
    }
    require_positive(g.total_joules(), "GPU energy");
    require_positive(g.total_seconds(), "GPU time");
    out.push_back({g.topology.n_nodes, it->second->total_joules() / g.total_joules(),
                   it->second->total_seconds() / g.total_seconds()});
  }
  std::sort(out.begin(), out.end(),
            [](const RatioRow& a, const RatioRow& b) { return a.n_nodes < b.n_nodes; });
  return out;
}

std::vector<ScalingRow> scaling_gp_report(const std::vector<RunRecord>& runs, double alpha) {
  if (runs.empty()) throw UsageError("scaling_gp_report: no runs");
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].topology.n_nodes <= runs[i - 1].topology.n_nodes) {
      throw UsageError("scaling_gp_report: node counts must strictly increase");
    }
  }
  const RunRecord& ref = runs.front();
  std::vector<ScalingRow> out;
  for (const RunRecord& r : runs) {
    out.push_back({r.topology.n_nodes, ref.total_seconds() / r.total_seconds(),
                   r.total_joules() / ref.total_joules(), green_productivity(ref, r, alpha)});
  }
  return out;
}

// --- Traces -----------------------------------------------------------------

std::vector<TraceRow> parse_trace(std::istream& is) {
  std::vector<TraceRow> rows;
  std::vector<std::string> errors;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line != kTraceHeader) {
        errors.push_back("line " + std::to_string(lineno) + ": expected header '" +
                         std::string(kTraceHeader) + "'");
      }
      continue;
    }
    const auto cells = split_csv(line);
    auto err = [&](const std::string& what) {
      errors.push_back("line " + std::to_string(lineno) + ": " + what);
    };
    if (cells.size() != 6) {
      err("expected 6 columns, got " + std::to_string(cells.size()));
      continue;
    }
    TraceRow row;
    row.label = trim(cells[0]);
    if (row.label.empty()) err("empty label");
    double nodes = 0.0;
    if (!parse_double(trim(cells[1]), nodes) || nodes < 1.0 || nodes != std::floor(nodes)) {
      err("bad n_nodes '" + cells[1] + "'");
    } else {
      row.n_nodes = static_cast<std::size_t>(nodes);
    }
    try {
      row.freq = parse_freq_level(trim(cells[2]));
    } catch (const UsageError&) {
      err("bad freq_level '" + cells[2] + "'");
    }
    try {
      row.phase = parse_phase(trim(cells[3]));
    } catch (const UsageError&) {
      err("bad phase '" + cells[3] + "'");
    }
    if (!parse_double(trim(cells[4]), row.seconds) || row.seconds < 0.0) {
      err("bad seconds '" + cells[4] + "'");
    }
    const std::string j = trim(cells[5]);
    if (!j.empty()) {
      double v = 0.0;
      if (!parse_double(j, v) || v < 0.0) {
        err("bad joules '" + cells[5] + "'");
      } else {
        row.joules = v;
      }
    }
    rows.push_back(std::move(row));
  }
  if (!errors.empty()) {
    std::string msg = "trace schema errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw IoError(msg);
  }
  return rows;
}

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("trace not found: " + path.string());
  return parse_trace(in);
}

std::vector<RunRecord> runs_from_trace(const std::vector<TraceRow>& rows) {
  std::vector<RunRecord> runs;
  std::map<std::tuple<std::string, std::size_t, FreqLevel>, std::size_t> index;
  for (const TraceRow& r : rows) {
    const auto key = std::make_tuple(r.label, r.n_nodes, r.freq);
    auto [it, fresh] = index.emplace(key, runs.size());
    if (fresh) {
      RunRecord rec;
      rec.label = r.label;
      rec.topology = {r.n_nodes, 1, 1};
      rec.freq = r.freq;
      runs.push_back(std::move(rec));
    }
    RunRecord& rec = runs[it->second];
    if (rec.seconds.count(r.phase) != 0) {
      throw IoError("duplicate trace row for " + r.label + "/" + std::string(to_string(r.phase)));
    }
    rec.seconds[r.phase] = r.seconds;
    if (r.joules) rec.joules[r.phase] = *r.joules;
  }
  if (runs.empty()) throw IoError("no runs found");
  return runs;
}

void write_trace(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << kTraceHeader << '\n';
  for (const RunRecord& r : runs) {
    for (Phase p : kPhases) {
      auto s = r.seconds.find(p);
      if (s == r.seconds.end()) continue;
      os << r.label << ',' << r.topology.n_nodes << ',' << to_string(r.freq) << ','
         << to_string(p) << ',' << fmt_fixed(s->second, 9) << ',';
      auto j = r.joules.find(p);
      if (j != r.joules.end()) os << fmt_fixed(j->second, 6);
      os << '\n';
    }
  }
}

// --- Energy meters ----------------------------------------------------------

std::string_view to_string(MeterKind k) {
  switch (k) {
    case MeterKind::trace_injection: return "trace_injection";
    case MeterKind::synthetic_model: return "synthetic_model";
    case MeterKind::platform_counters: return "platform_counters";
  }
  return "?";
}

MeterKind parse_meter_kind(std::string_view s) {
  if (s == "trace_injection" || s == "trace") return MeterKind::trace_injection;
  if (s == "synthetic_model" || s == "synthetic") return MeterKind::synthetic_model;
  if (s == "platform_counters" || s == "counters") return MeterKind::platform_counters;
  throw UsageError("unknown meter kind: " + std::string(s));
}

EnergyMeter EnergyMeter::from_trace(std::vector<TraceRow> rows) {
  EnergyMeter m;
  m.kind = MeterKind::trace_injection;
  m.trace = std::move(rows);
  return m;
}

EnergyMeter EnergyMeter::synthetic(std::map<FreqLevel, double> watts) {
  EnergyMeter m;
  m.kind = MeterKind::synthetic_model;
  for (const auto& [f, w] : watts) m.watts[f] = w;
  validate(m);
  return m;
}

EnergyMeter EnergyMeter::counters(std::string source) {
  EnergyMeter m;
  m.kind = MeterKind::platform_counters;
  m.counter_source = std::move(source);
  return m;
}

void EnergyMeter::start() {
  if (kind == MeterKind::platform_counters) counter_start = read_counter(counter_source);
}

void validate(const EnergyMeter& m) {
  if (m.kind == MeterKind::synthetic_model) {
    for (const auto& [f, w] : m.watts) require_positive(w, "synthetic meter power");
  }
  if (m.kind == MeterKind::platform_counters && m.counter_source.empty()) {
    throw UsageError("platform_counters meter needs a counter source");
  }
}

double read_counter(const std::string& source) {
  std::string text;
  if (source.rfind("file:", 0) == 0) {
    std::ifstream in(source.substr(5));
    if (!in) throw IoError("counter source unavailable: " + source);
    std::getline(in, text);
  } else if (source.rfind("cmd:", 0) == 0) {
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(source.substr(4).c_str(), "r"), pclose);
    if (!pipe) throw IoError("counter source unavailable: " + source);
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe.get()) != nullptr) text += buf;
  } else {
    throw UsageError("counter source must start with file: or cmd:");
  }
  double v = 0.0;
  if (!parse_double(trim(text), v)) throw IoError("counter source gave no number: " + source);
  return v;
}

PhaseJoules measure(EnergyMeter& meter, const PhaseSeconds& seconds, FreqLevel freq,
                    const MeasureKey& key) {
  for (const auto& [p, s] : seconds) {
    if (!(s >= 0.0)) throw UsageError("measure: negative duration");
  }
  PhaseJoules out;
  switch (meter.kind) {
    case MeterKind::synthetic_model: {
      validate(meter);
      auto w = meter.watts.find(freq);
      if (w == meter.watts.end()) throw UsageError("synthetic meter has no power for this level");
      for (const auto& [p, s] : seconds) out[p] = w->second * s;
      break;
    }
    case MeterKind::trace_injection: {
      std::set<Phase> wanted;
      for (const auto& [p, s] : seconds) wanted.insert(p);
      wanted.insert(Phase::total);
      for (Phase p : wanted) {
        std::vector<const TraceRow*> hits;
        for (const TraceRow& r : meter.trace) {
          if (r.label != key.label || r.phase != p || !r.joules) continue;
          if (key.n_nodes && r.n_nodes != *key.n_nodes) continue;
          if (key.freq && r.freq != *key.freq) continue;
          hits.push_back(&r);
        }
        if (hits.empty()) {
          if (p == Phase::total) {
            throw UsageError("missing trace key: " + key.label + "/" + std::string(to_string(p)));
          }
          continue;
        }
        for (const TraceRow* h : hits) {
          if (*h->joules != *hits.front()->joules) {
            throw UsageError("ambiguous trace key: " + key.label + "/" +
                             std::string(to_string(p)));
          }
        }
        out[p] = *hits.front()->joules;
      }
      break;
    }
    case MeterKind::platform_counters: {
      if (!meter.counter_start) throw UsageError("platform_counters meter was not started");
      out[Phase::total] = read_counter(meter.counter_source) - *meter.counter_start;
      meter.counter_start.reset();
      break;
    }
  }
  return out;
}

// --- Timing -----------------------------------------------------------------

void PhaseTimer::start(Phase p) { open_[p] = clock::now(); }

void PhaseTimer::stop(Phase p) {
  auto it = open_.find(p);
  if (it == open_.end()) throw UsageError("PhaseTimer::stop without start");
  ns_[p] += std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - it->second).count();
  open_.erase(it);
}

std::int64_t PhaseTimer::nanoseconds(Phase p) const {
  auto it = ns_.find(p);
  return it == ns_.end() ? 0 : it->second;
}

PhaseSeconds PhaseTimer::seconds() const {
  PhaseSeconds out;
  for (const auto& [p, ns] : ns_) out[p] = static_cast<double>(ns) * 1e-9;
  return out;
}

PhaseSeconds merge_max(const std::vector<PhaseSeconds>& per_rank) {
  PhaseSeconds out;
  for (const PhaseSeconds& r : per_rank) {
    for (const auto& [p, s] : r) out[p] = std::max(out[p], s);
  }
  return out;
}

// --- Report tables ----------------------------------------------------------

std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void ReportTable::write_csv(std::ostream& os) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void ReportTable::print(std::ostream& os) const {
  std::vector<std::size_t> width(header.size(), 0);
  auto grow = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], cells[i].size());
    }
  };
  grow(header);
  for (const auto& r : rows) grow(r);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      os << (i ? "  " : "") << cells[i] << std::string(width[i] - cells[i].size(), ' ');
    }
    os << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
  for (const auto& r : rows) line(r);
}

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::gp: return "gp";
    case ReportKind::reduce_fraction: return "reduce_fraction";
    case ReportKind::freq: return "freq";
    case ReportKind::ratios: return "ratios";
    case ReportKind::scaling_gp: return "scaling_gp";
  }
  return "?";
}

ReportKind parse_report_kind(std::string_view s) {
  for (ReportKind k : {ReportKind::gp, ReportKind::reduce_fraction, ReportKind::freq,
                       ReportKind::ratios, ReportKind::scaling_gp}) {
    if (to_string(k) == s) return k;
  }
  throw UsageError("unknown report kind: " + std::string(s));
}

ReportTable make_report(ReportKind kind, const std::vector<RunRecord>& runs,
                        const ReportOptions& opts) {
  if (runs.empty()) throw IoError("no runs found");
  ReportTable t;
  switch (kind) {
    case ReportKind::gp: {
      const RunRecord* ref = &runs.front();
      if (!opts.ref_label.empty()) {
        auto it = std::find_if(runs.begin(), runs.end(),
                               [&](const RunRecord& r) { return r.label == opts.ref_label; });
        if (it == runs.end()) throw UsageError("reference run not found: " + opts.ref_label);
        ref = &*it;
      }
      t.header = {"label", "n_nodes", "freq_level", "seconds", "joules",
                  "speedup", "energy_gain", "gp"};
      for (const RunRecord& r : runs) {
        t.rows.push_back({r.label, node_str(r), std::string(to_string(r.freq)),
                          fmt_fixed(r.total_seconds(), 4), fmt_fixed(r.total_joules(), 4),
                          fmt_fixed(ref->total_seconds() / r.total_seconds(), 6),
                          fmt_fixed(ref->total_joules() / r.total_joules(), 6),
                          fmt_fixed(green_productivity(*ref, r, opts.alpha), 6)});
      }
      break;
    }
    case ReportKind::reduce_fraction: {
      t.header = {"label", "n_nodes", "freq_level", "reduce_seconds", "total_seconds",
                  "reduce_fraction"};
      for (const RunRecord& r : runs) {
        t.rows.push_back({r.label, node_str(r), std::string(to_string(r.freq)),
                          fmt_fixed(phase_or_throw(r.seconds, Phase::reduce, r.label), 4),
                          fmt_fixed(r.total_seconds(), 4), fmt_fixed(reduce_fraction(r), 6)});
      }
      break;
    }
    case ReportKind::freq: {
      t.header = {"label", "n_nodes", "freq_level", "ghz", "energy_saving", "perf_degradation"};
      for (const RunRecord& base : runs) {
        if (base.freq != FreqLevel::high) continue;
        for (const RunRecord& r : runs) {
          if (r.label != base.label || r.topology != base.topology || &r == &base) continue;
          const auto ghz = nominal_ghz(r.freq);
          t.rows.push_back({r.label, node_str(r), std::string(to_string(r.freq)),
                            ghz ? fmt_fixed(*ghz, 2) : "os", fmt_fixed(energy_saving(base, r), 6),
                            fmt_fixed(perf_degradation(base, r), 6)});
        }
      }
      if (t.rows.empty()) throw UsageError("freq report: no runs with a high-frequency baseline");
      break;
    }
    case ReportKind::ratios: {
      t.header = {"freq_level", "n_nodes", "energy_ratio", "time_ratio"};
      for (FreqLevel f : {FreqLevel::os_default, FreqLevel::high, FreqLevel::medium,
                          FreqLevel::low}) {
        std::vector<RunRecord> cpu;
        std::vector<RunRecord> gpu;
        for (const RunRecord& r : runs) {
          if (r.freq != f) continue;
          if (r.label == opts.cpu_label) cpu.push_back(r);
          if (r.label == opts.gpu_label) gpu.push_back(r);
        }
        if (gpu.empty()) continue;
        for (const RatioRow& row : ratio_report(cpu, gpu)) {
          t.rows.push_back({std::string(to_string(f)), std::to_string(row.n_nodes),
                            fmt_fixed(row.energy_ratio, 6), fmt_fixed(row.time_ratio, 6)});
        }
      }
      if (t.rows.empty()) {
        throw UsageError("ratios report: no runs labelled '" + opts.gpu_label + "'");
      }
      break;
    }
    case ReportKind::scaling_gp: {
      t.header = {"label", "freq_level", "n_nodes", "speedup", "energy_ratio", "gp"};
      std::vector<std::pair<std::string, FreqLevel>> families;
      for (const RunRecord& r : runs) {
        const auto fam = std::make_pair(r.label, r.freq);
        if (std::find(families.begin(), families.end(), fam) == families.end()) {
          families.push_back(fam);
        }
      }
      for (const auto& [label, f] : families) {
        std::vector<RunRecord> seq;
        for (const RunRecord& r : runs) {
          if (r.label == label && r.freq == f) seq.push_back(r);
        }
        std::sort(seq.begin(), seq.end(), [](const RunRecord& a, const RunRecord& b) {
          return a.topology.n_nodes < b.topology.n_nodes;
        });
        for (const ScalingRow& row : scaling_gp_report(seq, opts.alpha)) {
          t.rows.push_back({label, std::string(to_string(f)), std::to_string(row.n_nodes),
                            fmt_fixed(row.speedup, 6), fmt_fixed(row.energy_ratio, 6),
                            fmt_fixed(row.gp, 6)});
        }
      }
      break;
    }
  }
  return t;
}

}  // namespace wstack
