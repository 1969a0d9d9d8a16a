// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/comms.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <ostream>
#include <thread>

namespace wstack {
namespace {

std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw UsageError("invalid " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

template <typename T>
void add_into(std::vector<T>& acc, std::span<const T> x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

std::size_t segment_length(std::size_t n, std::size_t parts) {
  return parts == 0 ? 0 : (n + parts - 1) / parts;
}

}  // namespace

void validate(const Topology& topo) {
  if (topo.n_nodes < 1 || topo.ranks_per_node < 1 || topo.threads_per_rank < 1) {
    throw UsageError("topology counts must all be >= 1");
  }
}

std::string to_string(const Topology& topo) {
  return std::to_string(topo.n_nodes) + "x" + std::to_string(topo.ranks_per_node) + "x" +
         std::to_string(topo.threads_per_rank);
}

Topology parse_topology(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t x = s.find('x', pos);
    parts.push_back(s.substr(pos, x == std::string_view::npos ? s.npos : x - pos));
    if (x == std::string_view::npos) break;
    pos = x + 1;
  }
  if (parts.size() < 2 || parts.size() > 3) {
    throw UsageError("topology must look like NODESxRANKS[xTHREADS], got '" + std::string(s) + "'");
  }
  Topology t;
  t.n_nodes = parse_count(parts[0], "node count");
  t.ranks_per_node = parse_count(parts[1], "ranks per node");
  if (parts.size() == 3) t.threads_per_rank = parse_count(parts[2], "threads per rank");
  validate(t);
  return t;
}

std::string_view to_string(ReduceKind kind) {
  switch (kind) {
    case ReduceKind::direct: return "direct";
    case ReduceKind::hybrid_ring: return "hybrid_ring";
    case ReduceKind::ring_rdma_like: return "ring_rdma_like";
  }
  return "?";
}

ReduceKind parse_reduce_kind(std::string_view s) {
  if (s == "direct") return ReduceKind::direct;
  if (s == "hybrid_ring") return ReduceKind::hybrid_ring;
  if (s == "ring_rdma_like") return ReduceKind::ring_rdma_like;
  throw UsageError("unknown reduce kind '" + std::string(s) + "'");
}

// --- MessageLog --------------------------------------------------------------

void MessageLog::append(const MessageLog& other) {
  messages_.insert(messages_.end(), other.messages_.begin(), other.messages_.end());
}

void MessageLog::sort_canonical() {
  std::stable_sort(messages_.begin(), messages_.end(), [](const Message& a, const Message& b) {
    if (a.phase != b.phase) return a.phase < b.phase;
    if (a.src_rank != b.src_rank) return a.src_rank < b.src_rank;
    return a.seq < b.seq;
  });
}

std::size_t MessageLog::count(std::string_view phase) const {
  return static_cast<std::size_t>(std::count_if(
      messages_.begin(), messages_.end(),
      [&](const Message& m) { return phase.empty() || m.phase == phase; }));
}

std::size_t MessageLog::inter_node_count(std::string_view phase) const {
  return static_cast<std::size_t>(std::count_if(
      messages_.begin(), messages_.end(), [&](const Message& m) {
        return !m.intra_node && (phase.empty() || m.phase == phase);
      }));
}

std::size_t MessageLog::total_bytes(std::string_view phase) const {
  std::size_t n = 0;
  for (const Message& m : messages_) {
    if (phase.empty() || m.phase == phase) n += m.bytes;
  }
  return n;
}

std::size_t MessageLog::inter_node_bytes(std::string_view phase) const {
  std::size_t n = 0;
  for (const Message& m : messages_) {
    if (!m.intra_node && (phase.empty() || m.phase == phase)) n += m.bytes;
  }
  return n;
}

std::size_t MessageLog::intra_node_bytes(std::string_view phase) const {
  return total_bytes(phase) - inter_node_bytes(phase);
}

void MessageLog::write_csv(std::ostream& os) const {
  os << "phase,src_rank,dst_rank,intra_node,bytes\n";
  for (const Message& m : messages_) {
    os << m.phase << ',' << m.src_rank << ',' << m.dst_rank << ',' << (m.intra_node ? 1 : 0)
       << ',' << m.bytes << '\n';
  }
}

// --- Fabric ------------------------------------------------------------------

Fabric::Fabric(const Topology& topo) : topo_(topo), send_seq_(topo.world_size(), 0) {
  validate(topo);
  boxes_.reserve(topo.world_size());
  for (std::size_t r = 0; r < topo.world_size(); ++r) boxes_.push_back(std::make_unique<Mailbox>());
}

void Fabric::post(std::size_t src, std::size_t dst, std::string_view phase,
                  std::vector<std::byte> bytes) {
  if (dst >= boxes_.size() || src >= boxes_.size()) throw UsageError("fabric: rank out of range");
  {
    std::lock_guard lk(log_mu_);
    log_.add({std::string(phase), src, dst, topo_.same_node(src, dst), bytes.size(),
              send_seq_[src]++});
  }
  Mailbox& box = *boxes_[dst];
  {
    std::lock_guard lk(box.mu);
    box.from[src].push_back(std::move(bytes));
  }
  box.cv.notify_all();
}

std::vector<std::byte> Fabric::take(std::size_t dst, std::size_t src) {
  Mailbox& box = *boxes_[dst];
  std::unique_lock lk(box.mu);
  box.cv.wait(lk, [&] {
    if (aborted_) return true;
    auto it = box.from.find(src);
    return it != box.from.end() && !it->second.empty();
  });
  if (aborted_) throw std::runtime_error("fabric aborted");
  auto& q = box.from[src];
  std::vector<std::byte> out = std::move(q.front());
  q.pop_front();
  return out;
}

void Fabric::barrier() {
  std::unique_lock lk(barrier_mu_);
  if (aborted_) throw std::runtime_error("fabric aborted");
  const std::size_t gen = barrier_generation_;
  if (++barrier_waiting_ == topo_.world_size()) {
    barrier_waiting_ = 0;
    ++barrier_generation_;
    barrier_cv_.notify_all();
    return;
  }
  barrier_cv_.wait(lk, [&] { return aborted_ || barrier_generation_ != gen; });
  if (aborted_ && barrier_generation_ == gen) throw std::runtime_error("fabric aborted");
}

void Fabric::abort() {
  {
    std::lock_guard lk(barrier_mu_);
    aborted_ = true;
  }
  barrier_cv_.notify_all();
  for (auto& box : boxes_) {
    { std::lock_guard lk(box->mu); }
    box->cv.notify_all();
  }
}

MessageLog Fabric::log() const {
  std::lock_guard lk(log_mu_);
  MessageLog copy = log_;
  copy.sort_canonical();
  return copy;
}

MessageLog run_ranks(const Topology& topo, const std::function<void(Communicator&)>& fn) {
  Fabric fabric(topo);
  std::mutex err_mu;
  std::exception_ptr first_error;
  {
    std::vector<std::jthread> workers;
    workers.reserve(topo.world_size());
    for (std::size_t r = 0; r < topo.world_size(); ++r) {
      workers.emplace_back([&, r] {
        Communicator comm(fabric, r);
        try {
          fn(comm);
        } catch (...) {
          {
            std::lock_guard lk(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
          fabric.abort();
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return fabric.log();
}

// --- Collectives ---------------------------------------------------------------

template <typename T>
std::vector<T> ring_reduce_scatter(Communicator& comm, std::span<const std::size_t> group,
                                   std::span<const T> local, bool deterministic,
                                   std::string_view phase) {
  const std::size_t P = group.size();
  const auto it = std::find(group.begin(), group.end(), comm.rank());
  if (it == group.end()) throw UsageError("ring_reduce_scatter: caller not in group");
  const std::size_t p = static_cast<std::size_t>(it - group.begin());
  const std::size_t seg = segment_length(local.size(), P);

  std::vector<T> padded(seg * P, T{});
  std::copy(local.begin(), local.end(), padded.begin());
  auto segment = [&](std::size_t j) { return std::span<const T>(padded).subspan(j * seg, seg); };

  if (P == 1) return padded;

  const std::size_t next = group[(p + 1) % P];
  const std::size_t prev = group[(p + P - 1) % P];

  if (!deterministic) {
    // Segment j starts at member j+1 and travels the ring, ending at member j.
    std::vector<T> carry(segment((p + P - 1) % P).begin(), segment((p + P - 1) % P).end());
    for (std::size_t s = 0; s + 1 < P; ++s) {
      comm.send<T>(next, carry, phase);
      std::vector<T> in = comm.recv<T>(prev);
      const std::size_t j = (p + 2 * P - s - 2) % P;
      add_into(in, segment(j));
      carry = std::move(in);
    }
    return carry;
  }

  // Pipelined chain 0 -> 1 -> ... -> P-1 per segment, then hand-off to owners.
  std::vector<T> mine;
  if (p == 0) {
    for (std::size_t j = 0; j < P; ++j) comm.send<T>(next, segment(j), phase);
  } else if (p + 1 < P) {
    for (std::size_t j = 0; j < P; ++j) {
      std::vector<T> in = comm.recv<T>(prev);
      add_into(in, segment(j));
      comm.send<T>(next, in, phase);
    }
  } else {
    for (std::size_t j = 0; j < P; ++j) {
      std::vector<T> in = comm.recv<T>(prev);
      add_into(in, segment(j));
      if (j == p) {
        mine = std::move(in);
      } else {
        comm.send<T>(group[j], in, phase);
      }
    }
    return mine;
  }
  return comm.recv<T>(group[P - 1]);
}

template <typename T>
std::vector<std::vector<T>> gather(Communicator& comm, std::span<const T> local, std::size_t root,
                                   std::string_view phase) {
  std::vector<std::vector<T>> out;
  if (comm.rank() != root) {
    comm.send<T>(root, local, phase);
    return out;
  }
  out.resize(comm.size());
  for (std::size_t r = 0; r < comm.size(); ++r) {
    out[r] = r == root ? std::vector<T>(local.begin(), local.end()) : comm.recv<T>(r);
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> reduce_direct(Communicator& comm, bool deterministic, std::span<const T> local,
                             std::size_t target, std::string_view phase) {
  if (comm.rank() != target) {
    comm.send<T>(target, local, phase);
    return {};
  }
  const Topology& topo = comm.topology();
  auto contribution = [&](std::size_t r) {
    return r == target ? std::vector<T>(local.begin(), local.end()) : comm.recv<T>(r);
  };
  if (!deterministic) {
    std::vector<T> acc = contribution(0);
    for (std::size_t r = 1; r < comm.size(); ++r) add_into(acc, std::span<const T>(contribution(r)));
    return acc;
  }
  std::vector<T> total;
  for (std::size_t n = 0; n < topo.n_nodes; ++n) {
    std::vector<T> node_acc = contribution(topo.rank_at(n, 0));
    for (std::size_t l = 1; l < topo.ranks_per_node; ++l) {
      add_into(node_acc, std::span<const T>(contribution(topo.rank_at(n, l))));
    }
    if (n == 0) {
      total = std::move(node_acc);
    } else {
      add_into(total, std::span<const T>(node_acc));
    }
  }
  return total;
}

std::vector<std::size_t> node_group(const Topology& topo, std::size_t node) {
  std::vector<std::size_t> g(topo.ranks_per_node);
  for (std::size_t l = 0; l < g.size(); ++l) g[l] = topo.rank_at(node, l);
  return g;
}

template <typename T>
std::vector<T> reduce_hybrid(Communicator& comm, bool deterministic, std::span<const T> local,
                             std::size_t target, std::string_view phase) {
  const Topology& topo = comm.topology();
  const std::size_t me = comm.rank();
  const std::size_t node = topo.node_of(me);
  const std::size_t master = topo.master_of(node);
  const std::string intra = std::string(phase) + "_intra";
  const std::string inter = std::string(phase) + "_inter";

  // Shared-window ring inside the node, then the master gathers the node partial.
  const auto group = node_group(topo, node);
  std::vector<T> seg = ring_reduce_scatter<T>(comm, group, local, deterministic, intra);
  std::vector<T> node_partial;
  if (me != master) {
    comm.send<T>(master, seg, intra);
  } else {
    node_partial.reserve(seg.size() * group.size());
    node_partial.insert(node_partial.end(), seg.begin(), seg.end());
    for (std::size_t l = 1; l < group.size(); ++l) {
      std::vector<T> part = comm.recv<T>(group[l]);
      node_partial.insert(node_partial.end(), part.begin(), part.end());
    }
    node_partial.resize(local.size());
  }

  // Masters only: reduce node partials onto the target node's master.
  const std::size_t target_node = topo.node_of(target);
  const std::size_t target_master = topo.master_of(target_node);
  std::vector<T> total;
  if (me == master) {
    if (node != target_node) {
      comm.send<T>(target_master, node_partial, inter);
    } else {
      for (std::size_t n = 0; n < topo.n_nodes; ++n) {
        std::vector<T> part = n == node ? node_partial : comm.recv<T>(topo.master_of(n));
        if (n == 0) {
          total = std::move(part);
        } else {
          add_into(total, std::span<const T>(part));
        }
      }
      if (target != master) {
        comm.send<T>(target, total, intra);
        total.clear();
      }
    }
  }
  if (me == target && me != target_master) total = comm.recv<T>(target_master);
  return me == target ? total : std::vector<T>{};
}

template <typename T>
std::vector<T> reduce_rdma_like(Communicator& comm, bool deterministic, std::span<const T> local,
                                std::size_t target, std::string_view phase) {
  const Topology& topo = comm.topology();
  const std::size_t me = comm.rank();
  const std::size_t node = topo.node_of(me);
  const std::size_t lrank = topo.local_of(me);
  const std::size_t P = topo.ranks_per_node;
  const std::string intra = std::string(phase) + "_intra";
  const std::string inter = std::string(phase) + "_inter";

  std::vector<T> seg =
      ring_reduce_scatter<T>(comm, node_group(topo, node), local, deterministic, intra);

  // Rail ring: equal local ranks of consecutive nodes chain segment `lrank`
  // across nodes without passing through a master.
  const std::size_t last = topo.n_nodes - 1;
  if (node > 0) {
    std::vector<T> in = comm.recv<T>(topo.rank_at(node - 1, lrank));
    add_into(in, std::span<const T>(seg));
    seg = std::move(in);
  }
  if (node < last) comm.send<T>(topo.rank_at(node + 1, lrank), seg, inter);

  if (node == last && me != target) {
    comm.send<T>(target, seg, topo.same_node(me, target) ? intra : inter);
  }
  if (me != target) return {};

  std::vector<T> total;
  total.reserve(seg.size() * P);
  for (std::size_t l = 0; l < P; ++l) {
    const std::size_t src = topo.rank_at(last, l);
    if (src == me) {
      total.insert(total.end(), seg.begin(), seg.end());
    } else {
      std::vector<T> part = comm.recv<T>(src);
      total.insert(total.end(), part.begin(), part.end());
    }
  }
  total.resize(local.size());
  return total;
}

}  // namespace

template <typename T>
std::vector<T> reduce(Communicator& comm, const ReduceStrategy& strategy, std::span<const T> local,
                      std::size_t target, std::string_view phase) {
  if (target >= comm.size()) throw UsageError("reduce: target rank out of range");
  switch (strategy.kind) {
    case ReduceKind::direct:
      return reduce_direct(comm, strategy.deterministic, local, target, phase);
    case ReduceKind::hybrid_ring:
      return reduce_hybrid(comm, strategy.deterministic, local, target, phase);
    case ReduceKind::ring_rdma_like:
      return reduce_rdma_like(comm, strategy.deterministic, local, target, phase);
  }
  throw UsageError("reduce: unknown strategy");
}

template std::vector<cplx> ring_reduce_scatter<cplx>(Communicator&, std::span<const std::size_t>,
                                                     std::span<const cplx>, bool, std::string_view);
template std::vector<double> ring_reduce_scatter<double>(Communicator&,
                                                         std::span<const std::size_t>,
                                                         std::span<const double>, bool,
                                                         std::string_view);
template std::vector<cplx> reduce<cplx>(Communicator&, const ReduceStrategy&,
                                        std::span<const cplx>, std::size_t, std::string_view);
template std::vector<double> reduce<double>(Communicator&, const ReduceStrategy&,
                                            std::span<const double>, std::size_t,
                                            std::string_view);
template std::vector<std::vector<cplx>> gather<cplx>(Communicator&, std::span<const cplx>,
                                                     std::size_t, std::string_view);
template std::vector<std::vector<double>> gather<double>(Communicator&, std::span<const double>,
                                                         std::size_t, std::string_view);

// --- Whole-topology views ------------------------------------------------------

RingPassResult ring_pass(const std::vector<std::vector<cplx>>& arrays, bool deterministic) {
  if (arrays.empty()) throw UsageError("ring_pass: empty group");
  for (const auto& a : arrays) {
    if (a.size() != arrays.front().size()) throw UsageError("ring_pass: arrays differ in length");
  }
  const Topology topo{1, arrays.size(), 1};
  std::vector<std::size_t> group(arrays.size());
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = i;
  RingPassResult res;
  res.segments.resize(arrays.size());
  res.log = run_ranks(topo, [&](Communicator& comm) {
    res.segments[comm.rank()] = ring_reduce_scatter<cplx>(
        comm, group, arrays[comm.rank()], deterministic, "ring");
  });
  return res;
}

ReduceResult reduce_slabs(const ReduceStrategy& strategy, const std::vector<ComplexGridd>& partials,
                          std::size_t target, const Topology& topo) {
  validate(topo);
  if (partials.size() != topo.world_size()) {
    throw UsageError("reduce_slabs: need one partial per rank");
  }
  for (const auto& p : partials) {
    if (!p.same_shape(partials.front())) throw UsageError("reduce_slabs: slab mismatch");
  }
  if (target >= topo.world_size()) throw UsageError("reduce_slabs: target out of range");

  ReduceResult res;
  res.grid = ComplexGridd(partials.front().spec(), partials.front().slab());
  res.log = run_ranks(topo, [&](Communicator& comm) {
    const auto& mine = partials[comm.rank()].data();
    std::vector<cplx> out = reduce<cplx>(comm, strategy, std::span<const cplx>(mine.data(), mine.size()), target);
    if (comm.rank() == target) {
      std::copy(out.begin(), out.end(), res.grid.data().data());
    }
  });
  return res;
}

ReduceResult hybrid_reduce(const std::vector<ComplexGridd>& partials, std::size_t target,
                           const Topology& topo, bool deterministic) {
  return reduce_slabs({ReduceKind::hybrid_ring, deterministic}, partials, target, topo);
}

SectorBatch exchange_to_space_order(Communicator& comm, const GridSpec& spec, int half_support,
                                    std::span<const GriddedSample> local) {
  const std::size_t R = comm.size();
  const std::size_t me = comm.rank();
  std::vector<SectorBatch> outgoing = bin_by_sector(local, spec, half_support, R);
  for (std::size_t dst = 0; dst < R; ++dst) {
    if (dst != me) comm.send<GriddedSample>(dst, outgoing[dst].samples, "exchange");
  }
  SectorBatch batch;
  batch.slab = slab_of(spec, me, R);
  for (std::size_t src = 0; src < R; ++src) {
    std::vector<GriddedSample> in =
        src == me ? std::move(outgoing[me].samples) : comm.recv<GriddedSample>(src);
    batch.samples.insert(batch.samples.end(), in.begin(), in.end());
  }
  std::stable_sort(batch.samples.begin(), batch.samples.end(),
                   [](const GriddedSample& a, const GriddedSample& b) {
                     if (a.time_index != b.time_index) return a.time_index < b.time_index;
                     return a.seq < b.seq;
                   });
  return batch;
}

ExchangeResult exchange_to_space_order(const std::vector<std::vector<VisRecord>>& records,
                                       const GridSpec& spec, const Topology& topo,
                                       int half_support) {
  validate(topo);
  if (records.size() != topo.world_size()) {
    throw UsageError("exchange_to_space_order: need one record set per rank");
  }
  std::vector<std::uint64_t> offsets(records.size() + 1, 0);
  for (std::size_t r = 0; r < records.size(); ++r) offsets[r + 1] = offsets[r] + records[r].size();

  ExchangeResult res;
  res.batches.resize(topo.world_size());
  res.log = run_ranks(topo, [&](Communicator& comm) {
    const auto samples = to_samples(records[comm.rank()], spec, offsets[comm.rank()]);
    res.batches[comm.rank()] = exchange_to_space_order(comm, spec, half_support, samples);
  });
  return res;
}

}  // namespace wstack
