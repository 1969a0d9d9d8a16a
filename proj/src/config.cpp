// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/config.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace wstack {
namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    const std::string part = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!part.empty()) out.push_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw UsageError("config " + std::string(key) + ": not a number: '" + v + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"grid.n_u", "256", "mesh columns (power of two)"},
      {"grid.n_v", "256", "mesh rows (power of two)"},
      {"grid.n_w", "8", "number of w-planes"},
      {"grid.cell_size_lm", "0", "image cell in direction cosines; 0 derives it from the dataset"},
      {"kernel.kind", "gaussian", "gaussian | kaiser_bessel"},
      {"kernel.half_support", "3", "kernel half-width S in cells"},
      {"kernel.shape_param", "0", "sigma (gaussian) or beta (kaiser_bessel); 0 picks the default"},
      {"topo.n_nodes", "1", "virtual nodes"},
      {"topo.ranks_per_node", "1", "ranks per virtual node"},
      {"topo.threads_per_rank", "1", "gridding threads per rank"},
      {"reduce.kind", "hybrid_ring", "direct | hybrid_ring | ring_rdma_like"},
      {"reduce.deterministic", "true", "fixed summation order, bit-identical across topologies"},
      {"meter.kind", "synthetic_model", "none | trace_injection | synthetic_model | platform_counters"},
      {"meter.trace", "", "trace CSV for trace_injection"},
      {"meter.watts_default", "102", "synthetic power at the default level (W)"},
      {"meter.watts_high", "100", "synthetic power at 2.60 GHz (W)"},
      {"meter.watts_medium", "75", "synthetic power at 2.00 GHz (W)"},
      {"meter.watts_low", "70", "synthetic power at 1.50 GHz (W)"},
      {"meter.counter_source", "", "file:<path> or cmd:<command> giving cumulative joules"},
      {"run.label", "run", "label stored with run records"},
      {"run.freq_level", "high", "default | high | medium | low"},
      {"run.alpha", "1", "energy weight in green productivity"},
      {"run.seed", "1", "generator seed"},
      {"io.dataset", "data.rvis", "dataset path"},
      {"io.output", "image.f64", "image path (sidecar and preview are written next to it)"},
      {"io.pgm", "true", "write a PGM preview"},
      {"io.n_chunks", "1", "read the dataset in this many chunks"},
      {"io.chunk_axis", "frequency", "frequency | time"},
      {"gen.records", "1000", "records to generate"},
      {"gen.n_freq", "1", "frequency channels"},
      {"gen.n_corr", "1", "correlations per channel"},
      {"gen.n_time_slices", "8", "time slices"},
      {"gen.sources", "0,0,1", "point sources as l,m,flux;l,m,flux"},
      {"gen.uv_max", "128", "native uv half-extent (wavelengths)"},
      {"gen.w_min", "0", "native minimum w"},
      {"gen.w_max", "32", "native maximum w"},
      {"gen.uv_fill", "0.8", "sampled fraction of the uv box"},
      {"gen.hermitian", "false", "emit conjugate mirror pairs"},
      {"bench.repeats", "4", "repeats per configuration"},
      {"bench.topologies", "1x1", "comma-separated NxR[xT] list"},
      {"bench.strategies", "hybrid_ring", "comma-separated reduce kinds"},
      {"bench.freq_levels", "high", "comma-separated frequency levels"},
      {"bench.timing", "wall", "wall | model"},
      {"bench.output_dir", "bench_out", "directory for runs.csv and aggregate.csv"},
  };
  return keys;
}

Config::Config() {
  for (const ConfigKey& k : config_keys()) values_.emplace(k.name, k.default_value);
}

void Config::set(std::string_view key, std::string_view value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: " + std::string(key));
  it->second = trim(value);
}

const std::string& Config::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: " + std::string(key));
  return it->second;
}

std::size_t Config::get_size(std::string_view key) const {
  const double d = to_double(key, get(key));
  if (d < 0.0 || d != std::floor(d)) {
    throw UsageError("config " + std::string(key) + ": expected a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

double Config::get_double(std::string_view key) const { return to_double(key, get(key)); }

bool Config::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config " + std::string(key) + ": expected true or false");
}

void Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config file not found: " + path.string());
  parse(in, path.string());
}

void Config::parse(std::istream& is, std::string_view origin) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(std::string(origin) + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void Config::dump(std::ostream& os) const {
  for (const ConfigKey& k : config_keys()) os << k.name << " = " << get(k.name) << '\n';
}

SkyModel parse_sources(std::string_view s) {
  SkyModel sky;
  for (const std::string& src : split(s, ';')) {
    const auto f = split(src, ',');
    if (f.size() != 3) throw UsageError("source '" + src + "': expected l,m,flux");
    sky.sources.push_back({to_double("source", f[0]), to_double("source", f[1]),
                           to_double("source", f[2])});
  }
  if (sky.sources.empty()) throw UsageError("no sources given");
  return sky;
}

std::vector<Topology> parse_topology_list(std::string_view s) {
  std::vector<Topology> out;
  for (const std::string& t : split(s, ',')) out.push_back(parse_topology(t));
  return out;
}

std::vector<ReduceStrategy> parse_strategy_list(std::string_view s, bool deterministic) {
  std::vector<ReduceStrategy> out;
  for (const std::string& k : split(s, ',')) out.push_back({parse_reduce_kind(k), deterministic});
  return out;
}

std::vector<FreqLevel> parse_freq_list(std::string_view s) {
  std::vector<FreqLevel> out;
  for (const std::string& f : split(s, ',')) out.push_back(parse_freq_level(f));
  return out;
}

GridSpec grid_spec(const Config& c) {
  GridSpec g;
  g.n_u = c.get_size("grid.n_u");
  g.n_v = c.get_size("grid.n_v");
  g.n_w = c.get_size("grid.n_w");
  g.cell_size_lm = c.get_double("grid.cell_size_lm");
  return g;
}

KernelSpec kernel_spec(const Config& c) {
  const KernelKind kind = parse_kernel_kind(c.get("kernel.kind"));
  const int s = static_cast<int>(c.get_size("kernel.half_support"));
  const double shape = c.get_double("kernel.shape_param");
  KernelSpec k = kind == KernelKind::gaussian ? KernelSpec::gaussian(s) : KernelSpec::kaiser_bessel(s);
  if (shape != 0.0) k.shape_param = shape;
  validate(k);
  return k;
}

Topology topology(const Config& c) {
  Topology t{c.get_size("topo.n_nodes"), c.get_size("topo.ranks_per_node"),
             c.get_size("topo.threads_per_rank")};
  validate(t);
  return t;
}

ReduceStrategy reduce_strategy(const Config& c) {
  return {parse_reduce_kind(c.get("reduce.kind")), c.get_bool("reduce.deterministic")};
}

std::optional<EnergyMeter> energy_meter(const Config& c) {
  const std::string& kind = c.get("meter.kind");
  if (kind == "none") return std::nullopt;
  switch (parse_meter_kind(kind)) {
    case MeterKind::trace_injection:
      if (c.get("meter.trace").empty()) throw UsageError("meter.trace is required");
      return EnergyMeter::from_trace(read_trace(c.get("meter.trace")));
    case MeterKind::synthetic_model:
      return EnergyMeter::synthetic({{FreqLevel::os_default, c.get_double("meter.watts_default")},
                                     {FreqLevel::high, c.get_double("meter.watts_high")},
                                     {FreqLevel::medium, c.get_double("meter.watts_medium")},
                                     {FreqLevel::low, c.get_double("meter.watts_low")}});
    case MeterKind::platform_counters: {
      EnergyMeter m = EnergyMeter::counters(c.get("meter.counter_source"));
      validate(m);
      return m;
    }
  }
  return std::nullopt;
}

SyntheticSource synthetic_source(const Config& c) {
  SyntheticSource s;
  s.sky = parse_sources(c.get("gen.sources"));
  s.n_records = c.get_size("gen.records");
  if (s.n_records < 1) throw UsageError("gen.records must be >= 1");
  s.n_freq = static_cast<std::uint32_t>(c.get_size("gen.n_freq"));
  s.seed = c.get_size("run.seed");
  s.opts.n_corr = static_cast<std::uint32_t>(c.get_size("gen.n_corr"));
  s.opts.n_time_slices = static_cast<std::uint32_t>(c.get_size("gen.n_time_slices"));
  s.opts.uv_max = c.get_double("gen.uv_max");
  s.opts.w_min = c.get_double("gen.w_min");
  s.opts.w_max = c.get_double("gen.w_max");
  s.opts.uv_fill = c.get_double("gen.uv_fill");
  s.opts.hermitian = c.get_bool("gen.hermitian");
  return s;
}

PipelineConfig pipeline_config(const Config& c) {
  PipelineConfig p;
  p.dataset = c.get("io.dataset");
  p.grid = grid_spec(c);
  p.kernel = kernel_spec(c);
  p.topo = topology(c);
  p.reduce = reduce_strategy(c);
  const std::string& axis = c.get("io.chunk_axis");
  if (axis == "frequency") {
    p.chunk_axis = ChunkAxis::frequency;
  } else if (axis == "time") {
    p.chunk_axis = ChunkAxis::time;
  } else {
    throw UsageError("io.chunk_axis must be frequency or time");
  }
  p.n_chunks = static_cast<std::uint32_t>(c.get_size("io.n_chunks"));
  p.output = c.get("io.output");
  p.pgm_preview = c.get_bool("io.pgm");
  p.label = c.get("run.label");
  return p;
}

BenchPlan bench_plan(const Config& c) {
  BenchPlan b;
  const PipelineConfig p = pipeline_config(c);
  b.dataset = p.dataset;
  b.synthetic = synthetic_source(c);
  b.grid = p.grid;
  b.kernel = p.kernel;
  b.n_chunks = p.n_chunks;
  b.topologies = parse_topology_list(c.get("bench.topologies"));
  b.strategies = parse_strategy_list(c.get("bench.strategies"), c.get_bool("reduce.deterministic"));
  b.freq_levels = parse_freq_list(c.get("bench.freq_levels"));
  b.repeats = c.get_size("bench.repeats");
  b.timing = parse_bench_timing(c.get("bench.timing"));
  b.label = p.label;
  b.output_dir = c.get("bench.output_dir");
  const auto meter = energy_meter(c);
  if (!meter) throw UsageError("bench needs an energy meter (meter.kind != none)");
  b.meter = *meter;
  validate(b);
  return b;
}

}  // namespace wstack
