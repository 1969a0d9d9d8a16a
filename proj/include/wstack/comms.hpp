// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstring>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "wstack/mesh.hpp"
#include "wstack/sample.hpp"

namespace wstack {

/// Virtual nodes x ranks per node; global rank = node * ranks_per_node + local.
struct Topology {
  std::size_t n_nodes = 1;
  std::size_t ranks_per_node = 1;
  std::size_t threads_per_rank = 1;

  std::size_t world_size() const { return n_nodes * ranks_per_node; }
  std::size_t node_of(std::size_t rank) const { return rank / ranks_per_node; }
  std::size_t local_of(std::size_t rank) const { return rank % ranks_per_node; }
  std::size_t rank_at(std::size_t node, std::size_t local) const {
    return node * ranks_per_node + local;
  }
  std::size_t master_of(std::size_t node) const { return rank_at(node, 0); }
  bool same_node(std::size_t a, std::size_t b) const { return node_of(a) == node_of(b); }
  friend bool operator==(const Topology&, const Topology&) = default;
};

void validate(const Topology& topo);
std::string to_string(const Topology& topo);
/// "NxR" or "NxRxT".
Topology parse_topology(std::string_view s);

enum class ReduceKind { direct, hybrid_ring, ring_rdma_like };

std::string_view to_string(ReduceKind kind);
ReduceKind parse_reduce_kind(std::string_view s);

/// Deterministic mode fixes the summation association: ranks ascending inside
/// each node, then node partials ascending. All kinds then agree bit for bit.
struct ReduceStrategy {
  ReduceKind kind = ReduceKind::direct;
  bool deterministic = true;
};

/// One logged transfer; payloads are not retained.
struct Message {
  std::string phase;
  std::size_t src_rank = 0;
  std::size_t dst_rank = 0;
  bool intra_node = true;
  std::size_t bytes = 0;
  std::size_t seq = 0;  // per-source send counter
};

class MessageLog {
 public:
  void add(Message m) { messages_.push_back(std::move(m)); }
  void append(const MessageLog& other);
  const std::vector<Message>& messages() const { return messages_; }

  /// Orders by (phase, src, seq), which is reproducible for a fixed algorithm.
  void sort_canonical();

  std::size_t count(std::string_view phase = {}) const;
  std::size_t inter_node_count(std::string_view phase = {}) const;
  std::size_t total_bytes(std::string_view phase = {}) const;
  std::size_t inter_node_bytes(std::string_view phase = {}) const;
  std::size_t intra_node_bytes(std::string_view phase = {}) const;

  /// CSV columns: phase,src_rank,dst_rank,intra_node,bytes
  void write_csv(std::ostream& os) const;

 private:
  std::vector<Message> messages_;
};

/// In-process message channels between the ranks of a virtual topology.
/// FIFO per (src, dst) pair; sends never block.
class Fabric {
 public:
  explicit Fabric(const Topology& topo);

  const Topology& topology() const { return topo_; }

  void post(std::size_t src, std::size_t dst, std::string_view phase, std::vector<std::byte> bytes);
  std::vector<std::byte> take(std::size_t dst, std::size_t src);
  void barrier();
  /// Wakes every blocked rank with an exception; used when one rank fails.
  void abort();

  MessageLog log() const;

 private:
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::size_t, std::deque<std::vector<std::byte>>> from;
  };

  Topology topo_;
  std::vector<std::unique_ptr<Mailbox>> boxes_;
  std::vector<std::size_t> send_seq_;
  mutable std::mutex log_mu_;
  MessageLog log_;

  std::mutex barrier_mu_;
  std::condition_variable barrier_cv_;
  std::size_t barrier_waiting_ = 0;
  std::size_t barrier_generation_ = 0;
  bool aborted_ = false;
};

/// One rank's view of the fabric.
class Communicator {
 public:
  Communicator(Fabric& fabric, std::size_t rank) : fabric_(&fabric), rank_(rank) {}

  std::size_t rank() const { return rank_; }
  std::size_t size() const { return fabric_->topology().world_size(); }
  const Topology& topology() const { return fabric_->topology(); }

  template <typename T>
  void send(std::size_t dst, std::span<const T> data, std::string_view phase) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<std::byte> bytes(data.size_bytes());
    if (!bytes.empty()) std::memcpy(bytes.data(), data.data(), bytes.size());
    fabric_->post(rank_, dst, phase, std::move(bytes));
  }

  template <typename T>
  std::vector<T> recv(std::size_t src) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<std::byte> bytes = fabric_->take(rank_, src);
    std::vector<T> out(bytes.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
    return out;
  }

  void barrier() { fabric_->barrier(); }

 private:
  Fabric* fabric_;
  std::size_t rank_;
};

/// Runs fn on every rank of topo in its own thread; rethrows the first failure.
MessageLog run_ranks(const Topology& topo, const std::function<void(Communicator&)>& fn);

// --- Collectives (SPMD: every rank of the group calls them) -----------------

/// Ring reduce over `group` (global ranks in ring order). Every member passes
/// an equally sized buffer; the buffer is cut into P zero-padded segments and
/// member p returns the full sum of segment p. Concurrent mode is the classic
/// P-1 step reduce-scatter; deterministic mode pipelines each segment along
/// 0 -> 1 -> ... -> P-1 and then hands segment p to member p.
template <typename T>
std::vector<T> ring_reduce_scatter(Communicator& comm, std::span<const std::size_t> group,
                                   std::span<const T> local, bool deterministic,
                                   std::string_view phase);

/// Sums every rank's buffer onto `target` with the given strategy. Returns the
/// sum on the target, an empty vector elsewhere.
template <typename T>
std::vector<T> reduce(Communicator& comm, const ReduceStrategy& strategy, std::span<const T> local,
                      std::size_t target, std::string_view phase = "reduce");

/// Ships `local` from every rank to `root` in rank order; empty except on root.
template <typename T>
std::vector<std::vector<T>> gather(Communicator& comm, std::span<const T> local, std::size_t root,
                                   std::string_view phase);

// --- Whole-topology views, convenient for tests and tools -------------------

struct RingPassResult {
  std::vector<std::vector<cplx>> segments;  // member p -> sum of segment p (padded)
  MessageLog log;
};
RingPassResult ring_pass(const std::vector<std::vector<cplx>>& arrays, bool deterministic);

struct ReduceResult {
  ComplexGridd grid;
  MessageLog log;
};
ReduceResult reduce_slabs(const ReduceStrategy& strategy, const std::vector<ComplexGridd>& partials,
                          std::size_t target, const Topology& topo);
ReduceResult hybrid_reduce(const std::vector<ComplexGridd>& partials, std::size_t target,
                           const Topology& topo, bool deterministic = true);

/// Moves samples from time order to space order: afterwards each rank holds
/// every sample whose footprint touches its slab, sorted by (time_index, seq).
SectorBatch exchange_to_space_order(Communicator& comm, const GridSpec& spec, int half_support,
                                    std::span<const GriddedSample> local);

struct ExchangeResult {
  std::vector<SectorBatch> batches;
  MessageLog log;
};
/// Records per rank are converted with to_samples, numbered globally in rank order.
ExchangeResult exchange_to_space_order(const std::vector<std::vector<VisRecord>>& records,
                                       const GridSpec& spec, const Topology& topo,
                                       int half_support);

}  // namespace wstack
