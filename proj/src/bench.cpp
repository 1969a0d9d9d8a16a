// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>

#include <unistd.h>

#include "wstack/gridder.hpp"
#include "wstack/reference.hpp"

namespace wstack {
namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

RowMatrix<cplx> random_plane(std::size_t n_v, std::size_t n_u, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  RowMatrix<cplx> m(static_cast<Eigen::Index>(n_v), static_cast<Eigen::Index>(n_u));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = cplx(d(rng), d(rng));
  return m;
}

double max_abs(const RowMatrix<cplx>& a, const RowMatrix<cplx>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

std::string_view to_string(BenchTiming t) { return t == BenchTiming::wall ? "wall" : "model"; }

BenchTiming parse_bench_timing(std::string_view s) {
  if (s == "wall") return BenchTiming::wall;
  if (s == "model") return BenchTiming::model;
  throw UsageError("unknown bench timing: " + std::string(s));
}

void validate(const BenchPlan& plan) {
  if (plan.repeats < 1) throw UsageError("bench.repeats must be >= 1");
  if (plan.topologies.empty() || plan.strategies.empty() || plan.freq_levels.empty()) {
    throw UsageError("bench sweep lists must be non-empty");
  }
  for (const Topology& t : plan.topologies) validate(t);
  validate(plan.kernel);
  validate(plan.meter);
}

std::string config_id(const Topology& topo, const ReduceStrategy& s, FreqLevel f) {
  return to_string(topo) + "_" + std::string(to_string(s.kind)) + (s.deterministic ? "_det" : "_con") +
         "_" + std::string(to_string(f));
}

MeanStd mean_stddev(std::span<const double> xs) {
  MeanStd out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return out;
}

bool BenchResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const BenchRun& r) { return r.ok; });
}

std::vector<AggregateRow> aggregate(const std::vector<BenchRun>& runs) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<const BenchRun*>> members;
  for (const BenchRun& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const AggregateRow& a) { return a.config_id == r.config_id; });
    std::size_t idx = static_cast<std::size_t>(it - rows.begin());
    if (it == rows.end()) {
      AggregateRow a;
      a.config_id = r.config_id;
      a.label = r.record.label;
      a.topology = r.record.topology;
      a.strategy = r.strategy;
      a.freq = r.record.freq;
      rows.push_back(a);
      members.emplace_back();
    }
    if (r.ok) {
      members[idx].push_back(&r);
    } else {
      ++rows[idx].n_failed;
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    AggregateRow& a = rows[k];
    const auto& ms = members[k];
    a.n_ok = ms.size();
    for (const BenchRun* r : ms) {
      if (r->image_hash != ms.front()->image_hash) a.hash_consistent = false;
    }
    for (Phase p : kPhases) {
      std::vector<double> xs;
      for (const BenchRun* r : ms) xs.push_back(r->record.seconds.at(p));
      a.seconds[p] = mean_stddev(xs);
    }
    std::vector<double> js;
    for (const BenchRun* r : ms) js.push_back(r->record.total_joules());
    a.joules = mean_stddev(js);
  }
  return rows;
}

BenchResult run_plan(const BenchPlan& plan) {
  validate(plan);
  std::optional<Dataset> synthetic;
  if (plan.dataset.empty()) {
    const SyntheticSource& s = plan.synthetic;
    synthetic = generate_synthetic(s.sky, s.n_records, s.n_freq, s.seed, s.opts);
  }
  BenchResult res;
  for (const Topology& topo : plan.topologies) {
    for (const ReduceStrategy& strat : plan.strategies) {
      for (FreqLevel freq : plan.freq_levels) {
        const std::string id = config_id(topo, strat, freq);
        for (std::size_t rep = 0; rep < plan.repeats; ++rep) {
          BenchRun run;
          run.config_id = id;
          run.repeat = rep;
          run.strategy = strat;
          run.record.label = plan.label;
          run.record.topology = topo;
          run.record.freq = freq;
          try {
            PipelineConfig cfg;
            cfg.dataset = plan.dataset;
            cfg.grid = plan.grid;
            cfg.kernel = plan.kernel;
            cfg.topo = topo;
            cfg.reduce = strat;
            cfg.n_chunks = plan.n_chunks;
            cfg.label = plan.label;
            EnergyMeter meter = plan.meter;
            meter.start();
            const PipelineResult pr =
                run_pipeline(cfg, synthetic ? &*synthetic : nullptr, plan.cost);
            run.record.seconds = plan.timing == BenchTiming::model ? pr.model_seconds : pr.seconds;
            run.record.joules =
                measure(meter, run.record.seconds, freq, {plan.label, topo.n_nodes, freq});
            validate(run.record);
            run.ops = pr.ops;
            run.image_hash = pr.image_hash;
            run.ok = true;
          } catch (const std::exception& e) {
            run.ok = false;
            run.error = e.what();
          }
          res.runs.push_back(std::move(run));
        }
      }
    }
  }
  res.aggregates = aggregate(res.runs);

  if (!plan.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(plan.output_dir, ec);
    std::ofstream raw(plan.output_dir / "runs.csv", std::ios::trunc);
    std::ofstream agg(plan.output_dir / "aggregate.csv", std::ios::trunc);
    if (!raw || !agg) throw IoError("cannot write bench output in " + plan.output_dir.string());
    write_raw_csv(raw, res.runs);
    write_aggregate_csv(agg, res.aggregates);
  }
  return res;
}

void write_raw_csv(std::ostream& os, const std::vector<BenchRun>& runs) {
  os << "config_id,label,topology,reduce,deterministic,freq_level,repeat,status,error,image_hash,"
        "records,kernel_evaluations,fft_butterflies,messages,intra_node_bytes,inter_node_bytes";
  for (Phase p : kPhases) os << ',' << to_string(p) << "_s";
  for (Phase p : kPhases) os << ',' << to_string(p) << "_j";
  os << '\n';
  for (const BenchRun& r : runs) {
    os << r.config_id << ',' << r.record.label << ',' << to_string(r.record.topology) << ','
       << to_string(r.strategy.kind) << ',' << (r.strategy.deterministic ? 1 : 0) << ','
       << to_string(r.record.freq) << ',' << r.repeat << ',' << (r.ok ? "ok" : "failed") << ','
       << csv_safe(r.error) << ',' << (r.ok ? hex64(r.image_hash) : "") << ',' << r.ops.records
       << ',' << r.ops.kernel_evaluations << ',' << r.ops.fft_butterflies << ','
       << r.ops.messages << ',' << r.ops.intra_node_bytes << ',' << r.ops.inter_node_bytes;
    for (Phase p : kPhases) {
      auto it = r.record.seconds.find(p);
      os << ',' << (it == r.record.seconds.end() ? "" : g17(it->second));
    }
    for (Phase p : kPhases) {
      auto it = r.record.joules.find(p);
      os << ',' << (it == r.record.joules.end() ? "" : g17(it->second));
    }
    os << '\n';
  }
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "config_id,label,topology,reduce,deterministic,freq_level,n_ok,n_failed,hash_consistent";
  for (Phase p : kPhases) os << ',' << to_string(p) << "_s_mean," << to_string(p) << "_s_sd";
  os << ",total_j_mean,total_j_sd\n";
  for (const AggregateRow& a : rows) {
    os << a.config_id << ',' << a.label << ',' << to_string(a.topology) << ','
       << to_string(a.strategy.kind) << ',' << (a.strategy.deterministic ? 1 : 0) << ','
       << to_string(a.freq) << ',' << a.n_ok << ',' << a.n_failed << ','
       << (a.hash_consistent ? 1 : 0);
    for (Phase p : kPhases) {
      const MeanStd& m = a.seconds.at(p);
      os << ',' << g17(m.mean) << ',' << g17(m.stddev);
    }
    os << ',' << g17(a.joules.mean) << ',' << g17(a.joules.stddev) << '\n';
  }
}

// --- Verification suite -----------------------------------------------------

VerifyScale parse_verify_scale(std::string_view s) {
  if (s == "small") return VerifyScale::small;
  if (s == "medium") return VerifyScale::medium;
  throw UsageError("unknown verify scale: " + std::string(s));
}

std::string_view to_string(VerifyScale s) { return s == VerifyScale::small ? "small" : "medium"; }

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

void VerifyReport::print(std::ostream& os) const {
  ReportTable t;
  t.header = {"check", "measured", "tolerance", "result", "detail"};
  for (const VerifyCheck& c : checks) {
    char m[32];
    char tol[32];
    std::snprintf(m, sizeof m, "%.3e", c.measured);
    std::snprintf(tol, sizeof tol, "%.1e", c.tolerance);
    t.rows.push_back({c.name, m, tol, c.passed ? "PASS" : "FAIL", c.detail});
  }
  t.print(os);
  os << (passed() ? "verify: all checks passed" : "verify: FAILED") << " in "
     << fmt_fixed(seconds, 2) << " s\n";
}

VerifyReport verify_pipeline(const VerifyOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  VerifyReport rep;
  const bool small = opts.scale == VerifyScale::small;
  GridSpec spec;
  spec.n_u = spec.n_v = small ? 64 : 256;
  spec.n_w = small ? 4 : 8;
  spec.cell_size_lm = 0.0;
  const std::uint64_t n_records = small ? 1000 : 100000;
  const KernelSpec kernel = KernelSpec::gaussian(3, 1.0);

  auto check = [&](const std::string& name, double tol, auto&& body) {
    VerifyCheck c;
    c.name = name;
    c.tolerance = tol;
    try {
      body(c);
      c.passed = c.measured <= tol;
    } catch (const std::exception& e) {
      c.passed = false;
      c.measured = std::nan("");
      c.detail = e.what();
    }
    rep.checks.push_back(std::move(c));
  };

  SyntheticOptions so;
  so.uv_max = 128.0;
  const double cell = 1.0 / (2.0 * so.uv_max);
  const PointSource src{5.0 * cell, -3.0 * cell, 1.0};
  Dataset ds;
  GridSpec resolved;

  check("dataset write/read round trip", 0.0, [&](VerifyCheck& c) {
    ds = generate_synthetic({{src}}, n_records, 2, 20240601, so);
    resolved = resolve_grid(spec, ds.header);
    const auto dir = opts.scratch_dir.empty() ? std::filesystem::temp_directory_path()
                                              : opts.scratch_dir;
    const auto path = dir / ("wstack-verify-" + std::to_string(::getpid()) + ".rvis");
    write_dataset(ds.records, ds.header, path);
    if (opts.corrupt_dataset) {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.put('X');
    }
    struct Cleanup {
      std::filesystem::path p;
      ~Cleanup() {
        std::error_code ec;
        std::filesystem::remove(p, ec);
      }
    } cleanup{path};
    const Dataset back = read_dataset(path);
    c.measured = (back.header == ds.header && back.records == ds.records) ? 0.0 : 1.0;
    c.detail = std::to_string(back.records.size()) + " records";
  });
  if (ds.records.empty()) {
    ds = generate_synthetic({{src}}, n_records, 2, 20240601, so);
    resolved = resolve_grid(spec, ds.header);
  }

  const ComplexGridd direct = reference::grid_direct(ds.records, resolved, kernel);
  auto grid_with = [&](const Topology& topo, const ReduceStrategy& s) {
    const auto parts = partition_time_ordered(ds.records, topo.world_size(), ds.header.n_time_slices);
    return assemble(grid_all(parts, resolved, kernel, topo, s).slabs);
  };

  check("gridding vs direct convolution (2x2, deterministic)", 1e-12, [&](VerifyCheck& c) {
    c.measured = max_abs_diff(grid_with({2, 2, 1}, {ReduceKind::direct, true}), direct);
  });
  check("gridding bit-identical for 1, 2, 4 ranks", 0.0, [&](VerifyCheck& c) {
    const ComplexGridd one = grid_with({1, 1, 1}, {ReduceKind::direct, true});
    c.measured = std::max(max_abs_diff(grid_with({1, 2, 1}, {ReduceKind::direct, true}), one),
                          max_abs_diff(grid_with({2, 2, 2}, {ReduceKind::hybrid_ring, true}), one));
  });
  check("gridding vs direct convolution (2x2x2, concurrent ring)", 1e-10, [&](VerifyCheck& c) {
    c.measured = max_abs_diff(grid_with({2, 2, 2}, {ReduceKind::hybrid_ring, false}), direct);
  });

  for (std::size_t n : {8u, 16u}) {
    check("fft vs direct DFT " + std::to_string(n) + "x" + std::to_string(n) + " (4 ranks)", 1e-12,
          [&](VerifyCheck& c) {
            const RowMatrix<cplx> x = random_plane(n, n, 11 + n);
            c.measured = std::max(
                max_abs(fft2d_slab(x, 4, FftDirection::forward).plane,
                        reference::dft2d(x, FftDirection::forward)),
                max_abs(fft2d_slab(x, 4, FftDirection::inverse).plane,
                        reference::dft2d(x, FftDirection::inverse)));
          });
  }
  check("fft inverse(forward(x)) 64x64", 1e-12, [&](VerifyCheck& c) {
    const RowMatrix<cplx> x = random_plane(64, 64, 5);
    const RowMatrix<cplx> f = fft2d_slab(x, 2, FftDirection::forward).plane;
    c.measured = max_abs(fft2d_slab(f, 2, FftDirection::inverse).plane, x);
  });

  check("reduce strategies agree bit for bit (2x2)", 0.0, [&](VerifyCheck& c) {
    const Topology topo{2, 2, 1};
    GridSpec g = resolved;
    g.n_w = 2;
    std::vector<ComplexGridd> partials;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (std::size_t r = 0; r < topo.world_size(); ++r) {
      ComplexGridd p(g, slab_of(g, 1, topo.world_size()));
      for (Eigen::Index k = 0; k < p.data().size(); ++k) p.data()[k] = cplx(d(rng), d(rng));
      partials.push_back(std::move(p));
    }
    const ComplexGridd a = reduce_slabs({ReduceKind::direct, true}, partials, 1, topo).grid;
    const ComplexGridd b = reduce_slabs({ReduceKind::hybrid_ring, true}, partials, 1, topo).grid;
    const ComplexGridd e = reduce_slabs({ReduceKind::ring_rdma_like, true}, partials, 1, topo).grid;
    c.measured = std::max(max_abs_diff(a, b), max_abs_diff(a, e));
  });

  check("point source recovered at expected pixel", 1.0, [&](VerifyCheck& c) {
    PipelineConfig cfg;
    cfg.grid = spec;
    cfg.kernel = kernel;
    cfg.topo = {2, 2, 1};
    const PipelineResult pr = run_pipeline(cfg, &ds);
    const auto [ei, ej] = expected_pixel(pr.grid, src.l, src.m);
    c.measured = std::max(std::abs(static_cast<double>(pr.peak.i) - static_cast<double>(ei)),
                          std::abs(static_cast<double>(pr.peak.j) - static_cast<double>(ej)));
    c.detail = "peak (" + std::to_string(pr.peak.i) + "," + std::to_string(pr.peak.j) +
               "), expected (" + std::to_string(ei) + "," + std::to_string(ej) + ")";
  });

  check("w-correction preserves |pixel|", 1e-14, [&](VerifyCheck& c) {
    GridSpec g = resolved;
    ImagePlaned p{g, {0, 0, g.n_v}, random_plane(g.n_v, g.n_u, 3)};
    const RowMatrix<cplx> before = p.data;
    apply_w_correction(p, g.n_w - 1, {-40.0, 40.0});
    double worst = 0.0;
    for (Eigen::Index k = 0; k < before.size(); ++k) {
      const double a = std::abs(before.data()[k]);
      worst = std::max(worst, std::abs(std::abs(p.data.data()[k]) - a) / a);
    }
    c.measured = worst;
  });

  if (opts.force_fail) {
    check("forced failure (test hook)", 0.0, [](VerifyCheck& c) {
      c.measured = 1.0;
      c.detail = "requested";
    });
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace wstack
