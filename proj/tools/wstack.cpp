// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wstack/bench.hpp"
#include "wstack/config.hpp"
#include "wstack/pipeline.hpp"

using namespace wstack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;  // shortcut flags, applied before --set
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key = value config file");
  cmd->add_option("--set", args.sets, "override one config key (key=value), repeatable");
}

/// Registers a shortcut flag that writes one config key.
void shortcut(CLI::App* cmd, CommonArgs& args, const std::string& flag, const std::string& key,
              const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&args, key](const std::string& v) { args.flags.emplace_back(key, v); }, help + " (" + key + ")");
}

Config build_config(const CommonArgs& args) {
  Config cfg;
  if (!args.config_file.empty()) cfg.load(args.config_file);
  for (const auto& [k, v] : args.flags) {
    if (k == "topo") {
      const Topology t = parse_topology(v);
      cfg.set("topo.n_nodes", std::to_string(t.n_nodes));
      cfg.set("topo.ranks_per_node", std::to_string(t.ranks_per_node));
      // NxR leaves the thread count to --threads.
      if (std::count(v.begin(), v.end(), 'x') == 2) {
        cfg.set("topo.threads_per_rank", std::to_string(t.threads_per_rank));
      }
    } else {
      cfg.set(k, v);
    }
  }
  for (const std::string& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

std::string key_listing() {
  std::ostringstream os;
  os << "Config keys (file: one `key = value` per line, # comments; flags override the file):\n";
  for (const ConfigKey& k : config_keys()) {
    os << "  " << k.name << std::string(k.name.size() < 24 ? 24 - k.name.size() : 1, ' ') << "["
       << k.default_value << "] " << k.help << '\n';
  }
  os << "\nExit codes: 0 ok, 1 verification or bench failure, 2 usage, 3 I/O.";
  return os.str();
}

int cmd_gen(const Config& cfg) {
  const SyntheticSource s = synthetic_source(cfg);
  const Dataset ds = generate_synthetic(s.sky, s.n_records, s.n_freq, s.seed, s.opts);
  const std::string path = cfg.get("io.dataset");
  write_dataset(ds.records, ds.header, path);
  std::cout << "wrote " << path << ": " << ds.header.n_records << " records, " << ds.header.n_freq
            << " channels, seed " << ds.header.seed << '\n';
  return kExitOk;
}

int cmd_image(const Config& cfg) {
  PipelineConfig pc = pipeline_config(cfg);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(pc.dataset, ec)) {
    throw UsageError("dataset not found: " + pc.dataset.string());
  }
  auto meter = energy_meter(cfg);
  const FreqLevel freq = parse_freq_level(cfg.get("run.freq_level"));
  if (meter) meter->start();
  const PipelineResult r = run_pipeline(pc);

  RunRecord rec;
  rec.label = pc.label;
  rec.topology = pc.topo;
  rec.freq = freq;
  rec.seconds = r.seconds;
  if (meter) rec.joules = measure(*meter, rec.seconds, freq, {pc.label, pc.topo.n_nodes, freq});
  const std::filesystem::path run_csv = pc.output.string() + ".run.csv";
  {
    std::ofstream os(run_csv, std::ios::trunc);
    if (!os) throw IoError("cannot write " + run_csv.string());
    write_trace(os, {rec});
  }

  std::cout << "image " << pc.output.string() << " (" << r.grid.n_u << "x" << r.grid.n_v << ", "
            << r.grid.n_w << " w-planes, cell " << r.grid.cell_size_lm << ")\n"
            << "peak pixel (" << r.peak.i << ", " << r.peak.j << ") l=" << r.peak.l
            << " m=" << r.peak.m << " value=" << r.peak.value << '\n'
            << "image hash " << hex64(r.image_hash) << '\n'
            << "imaginary residual ratio " << r.image.imag_residual_ratio() << '\n';
  ReportTable t;
  t.header = {"phase", "seconds", "joules"};
  for (Phase p : kPhases) {
    auto j = rec.joules.find(p);
    t.rows.push_back({std::string(to_string(p)), fmt_fixed(rec.seconds.at(p), 4),
                      j == rec.joules.end() ? "" : fmt_fixed(j->second, 4)});
  }
  t.print(std::cout);
  std::cout << "run record " << run_csv.string() << '\n';
  return kExitOk;
}

int cmd_bench(const Config& cfg) {
  const BenchPlan plan = bench_plan(cfg);
  if (!plan.dataset.empty()) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(plan.dataset, ec)) {
      throw UsageError("dataset not found: " + plan.dataset.string());
    }
  }
  const BenchResult res = run_plan(plan);
  ReportTable t;
  t.header = {"config", "ok", "failed", "total_s mean", "total_s sd", "joules mean", "joules sd",
              "hash"};
  for (const AggregateRow& a : res.aggregates) {
    t.rows.push_back({a.config_id, std::to_string(a.n_ok), std::to_string(a.n_failed),
                      fmt_fixed(a.seconds.at(Phase::total).mean, 4),
                      fmt_fixed(a.seconds.at(Phase::total).stddev, 4), fmt_fixed(a.joules.mean, 4),
                      fmt_fixed(a.joules.stddev, 4), a.hash_consistent ? "same" : "DIFFERS"});
  }
  t.print(std::cout);
  for (const BenchRun& r : res.runs) {
    if (!r.ok) std::cout << "failed: " << r.config_id << " #" << r.repeat << ": " << r.error << '\n';
  }
  std::cout << "wrote " << (plan.output_dir / "runs.csv").string() << " and "
            << (plan.output_dir / "aggregate.csv").string() << '\n';
  return res.all_ok() ? kExitOk : kExitFail;
}

struct ReportArgs {
  std::string kind;
  std::string trace;
  std::string out;
  ReportOptions opts;
};

int cmd_report(const Config& cfg, ReportArgs& a, bool alpha_given) {
  const ReportKind kind = parse_report_kind(a.kind);
  if (!alpha_given) a.opts.alpha = cfg.get_double("run.alpha");
  const std::vector<RunRecord> runs = runs_from_trace(read_trace(a.trace));
  const ReportTable t = make_report(kind, runs, a.opts);
  t.print(std::cout);
  const std::string out = a.out.empty() ? "report_" + std::string(to_string(kind)) + ".csv" : a.out;
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw IoError("cannot write " + out);
  t.write_csv(os);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wstack: distributed w-stacking imager with an energy benchmark harness"};
  app.footer(key_listing());
  app.require_subcommand(1);

  CommonArgs common;

  auto* gen = app.add_subcommand("gen", "generate a synthetic point-source dataset");
  add_common(gen, common);
  shortcut(gen, common, "--sources", "gen.sources", "l,m,flux;...");
  shortcut(gen, common, "--records", "gen.records", "record count");
  shortcut(gen, common, "--seed", "run.seed", "generator seed");
  shortcut(gen, common, "--n-freq", "gen.n_freq", "channels");
  shortcut(gen, common, "--out", "io.dataset", "output dataset");

  auto* image = app.add_subcommand("image", "grid, transform, correct and stack a dataset");
  add_common(image, common);
  shortcut(image, common, "--dataset", "io.dataset", "input dataset");
  shortcut(image, common, "--out", "io.output", "image path");
  shortcut(image, common, "--topo", "topo", "NxR[xT] virtual topology");
  shortcut(image, common, "--threads", "topo.threads_per_rank", "threads per rank");
  shortcut(image, common, "--reduce", "reduce.kind", "reduce strategy");
  shortcut(image, common, "--kernel", "kernel.kind", "gridding kernel");
  shortcut(image, common, "--freq", "run.freq_level", "frequency level label");
  shortcut(image, common, "--n-chunks", "io.n_chunks", "read chunks");

  auto* bench = app.add_subcommand("bench", "run a benchmark sweep with repeats");
  add_common(bench, common);
  shortcut(bench, common, "--dataset", "io.dataset", "input dataset (empty: synthetic from gen.*)");
  shortcut(bench, common, "--repeats", "bench.repeats", "repeats");
  shortcut(bench, common, "--topologies", "bench.topologies", "topology list");
  shortcut(bench, common, "--strategies", "bench.strategies", "reduce kinds");
  shortcut(bench, common, "--freq-levels", "bench.freq_levels", "frequency levels");
  shortcut(bench, common, "--timing", "bench.timing", "wall | model");
  shortcut(bench, common, "--out-dir", "bench.output_dir", "output directory");

  ReportArgs rargs;
  auto* report = app.add_subcommand("report", "green productivity and energy reports over a trace CSV");
  add_common(report, common);
  report->add_option("kind", rargs.kind, "gp | reduce_fraction | freq | ratios | scaling_gp")->required();
  report->add_option("--trace", rargs.trace, "trace CSV (label,n_nodes,freq_level,phase,seconds,joules)")
      ->required();
  auto* alpha_opt = report->add_option("--alpha", rargs.opts.alpha, "energy weight (run.alpha)");
  report->add_option("--ref", rargs.opts.ref_label, "gp: reference label (default: first run)");
  report->add_option("--cpu-label", rargs.opts.cpu_label, "ratios: CPU run label");
  report->add_option("--gpu-label", rargs.opts.gpu_label, "ratios: GPU run label");
  report->add_option("--out", rargs.out, "report CSV (default report_<kind>.csv)");

  std::string scale = "small";
  bool force_fail = false;
  bool corrupt = false;
  auto* verify = app.add_subcommand("verify", "run the oracle checks");
  verify->add_option("scale", scale, "small | medium");
  verify->add_flag("--force-fail", force_fail, "append a failing check (test hook)");
  verify->add_flag("--corrupt-dataset", corrupt, "corrupt the scratch dataset (test hook)");

  auto* config = app.add_subcommand("config", "print the effective configuration");
  add_common(config, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) {
      VerifyOptions vo;
      vo.scale = parse_verify_scale(scale);
      vo.force_fail = force_fail;
      vo.corrupt_dataset = corrupt;
      const VerifyReport rep = verify_pipeline(vo);
      rep.print(std::cout);
      return rep.passed() ? kExitOk : kExitFail;
    }
    const Config cfg = build_config(common);
    if (gen->parsed()) return cmd_gen(cfg);
    if (image->parsed()) return cmd_image(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
    if (report->parsed()) return cmd_report(cfg, rargs, alpha_opt->count() > 0);
    if (config->parsed()) {
      cfg.dump(std::cout);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
