// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wstack/bench.hpp"

namespace wstack {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Flat `key = value` settings; `#` starts a comment. Unknown keys are rejected.
class Config {
 public:
  Config();

  void set(std::string_view key, std::string_view value);
  const std::string& get(std::string_view key) const;

  std::size_t get_size(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  /// Applies a file on top of the current values.
  void load(const std::filesystem::path& path);
  void parse(std::istream& is, std::string_view origin = "<config>");
  /// Writes every key in registry order; parse(dump()) reproduces the config.
  void dump(std::ostream& os) const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }
  friend bool operator==(const Config&, const Config&) = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// "l,m,flux;l,m,flux".
SkyModel parse_sources(std::string_view s);
std::vector<Topology> parse_topology_list(std::string_view s);
std::vector<ReduceStrategy> parse_strategy_list(std::string_view s, bool deterministic);
std::vector<FreqLevel> parse_freq_list(std::string_view s);

GridSpec grid_spec(const Config& c);
KernelSpec kernel_spec(const Config& c);
Topology topology(const Config& c);
ReduceStrategy reduce_strategy(const Config& c);
/// nullopt when meter.kind = none.
std::optional<EnergyMeter> energy_meter(const Config& c);
SyntheticSource synthetic_source(const Config& c);
PipelineConfig pipeline_config(const Config& c);
BenchPlan bench_plan(const Config& c);

}  // namespace wstack
