#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "dfp/ir.hpp"

namespace dfp {

// Timing parameters for the shared memory subsystem. Latencies are cycles,
// sizes bytes, burst_max elements.
struct MemConfig {
  int hit_latency = 2;
  int miss_latency = 80;
  int line_bytes = 64;
  int cache_bytes = 64 * 1024;
  int ways = 2;
  int max_outstanding = 8;
  int burst_max = 16;
  bool cache_enabled = true;

  static MemConfig acp();  // coherent port preset
  static MemConfig hp();   // high-throughput uncached-fabric preset

  // Returns a diagnostic for the first violated invariant, empty if valid.
  std::string check() const;
};

// One coalesced transaction. addr and len are in elements of one space.
struct MemRequest {
  int space = 0;
  int64_t addr = 0;
  int len = 1;
  bool is_store = false;

  bool operator==(const MemRequest& o) const {
    return space == o.space && addr == o.addr && len == o.len && is_store == o.is_store;
  }
};

// Folds maximal runs of consecutive same-kind same-space element accesses
// into bursts of at most burst_max. A kind change, a space change, a
// non-consecutive address, or a full burst closes the run.
std::vector<MemRequest> coalesce(const AccessTrace& trace, int burst_max);

// Set-associative LRU tag store. Presence only; values live in MemoryImage.
class LruCache {
 public:
  LruCache(int cache_bytes, int line_bytes, int ways);
  bool lookup(int64_t line);  // true on hit (refreshes LRU); no allocation
  void fill(int64_t line);    // allocates the line, evicting the LRU way
  bool access(int64_t line);  // lookup, filling on miss
  int sets() const { return static_cast<int>(tags_.size()); }

 private:
  int ways_;
  std::vector<std::vector<int64_t>> tags_;  // per set, most recent first
};

enum class PortPolicy {
  Cached,         // per-port LRU cache; one transaction per missing line
  UncachedBurst,  // no cache; consecutive accesses share one burst
};

struct PortStats {
  int64_t accesses = 0;
  int64_t hits = 0;      // cached ports only
  int64_t misses = 0;    // cached ports only
  int64_t requests = 0;  // transactions sent to the backing store
  int64_t stores = 0;
};

struct MemStats {
  int64_t accesses = 0;
  int64_t requests = 0;
  int64_t hits = 0;
  int64_t misses = 0;
  int64_t peak_in_flight = 0;
  int64_t credit_stalls = 0;  // accesses deferred because all slots were busy
};

// Cycle-approximate shared memory. Engines open one port per (stage, space);
// every backing-store transaction holds one of max_outstanding slots from
// issue to its last beat. access() returns the cycle the data is available,
// or nullopt when no slot is free (the caller retries later).
class MemSystem {
 public:
  MemSystem(const MemConfig& cfg, const Program& p);

  int open_port(int space, PortPolicy policy);
  int64_t in_flight(int64_t now);
  bool can_accept(int64_t now);
  std::optional<int64_t> access(int port, int64_t elem, bool is_store, int64_t now);

  const PortStats& port_stats(int port) const { return ports_[port].st; }
  int port_space(int port) const { return ports_[port].space; }
  const MemStats& stats() const { return st_; }

 private:
  struct Burst {
    bool open = false;
    bool store = false;
    int64_t next_elem = 0;
    int64_t ready0 = 0;  // first beat
    int len = 0;
  };
  struct Port {
    int space = 0;
    PortPolicy policy = PortPolicy::Cached;
    std::optional<LruCache> cache;
    Burst burst;
    PortStats st;
  };

  void retire(int64_t now);
  void close_burst(Port& p);

  MemConfig cfg_;
  std::vector<int> elem_bytes_;  // per space
  std::vector<Port> ports_;
  // Completion cycles of closed transactions still holding a slot.
  std::priority_queue<int64_t, std::vector<int64_t>, std::greater<int64_t>> closed_;
  MemStats st_;
};

}  // namespace dfp
