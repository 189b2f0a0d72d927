#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfp/cdfg.hpp"
#include "dfp/ir.hpp"
#include "dfp/memory.hpp"
#include "dfp/partition.hpp"

namespace dfp {

struct SimConfig {
  MemConfig mem;
  int fifo_depth = 64;
  int drain_cycles = 16;        // pipeline flush charged at ret
  int64_t max_cycles = 1ll << 33;
  bool trace = false;
  int64_t trace_limit = 100000;  // rows kept
};

struct StageReport {
  std::string name;
  int ii = 1;
  int64_t busy = 0;
  int64_t stall_mem = 0;
  int64_t stall_fifo_empty = 0;
  int64_t stall_fifo_full = 0;
  int64_t idle = 0;
  int64_t iterations = 0;  // loop-header entries
  int64_t total() const {
    return busy + stall_mem + stall_fifo_empty + stall_fifo_full + idle;
  }
};

struct FifoReport {
  int id = 0;
  int64_t pushes = 0;
  int64_t pops = 0;
  int64_t peak = 0;
};

struct PortReport {
  std::string stage;
  std::string space;
  bool burst = false;
  PortStats stats;
};

// One row per stage per cycle when tracing: B busy, M memory stall,
// E fifo-empty, F fifo-full, I idle.
struct TraceRow {
  int64_t cycle = 0;
  int stage = 0;
  char state = 'I';
};

struct SimReport {
  bool ok = false;
  bool deadlock = false;
  std::string error;
  int64_t cycles = 0;
  std::vector<StageReport> stages;
  std::vector<FifoReport> fifos;
  std::vector<PortReport> ports;
  MemStats mem;
  uint64_t digest = 0;
  bool has_ret = false;
  Scalar ret;
  std::vector<TraceRow> trace;
};

// Initiation interval of a stage: bounded below by the slowest dependence
// cycle resident in it.
int compute_ii(const std::vector<int>& comps, const SccSet& sccs);

// Models the conventional single-schedule engine: iterations issue every II
// cycles and the whole engine waits out any memory latency beyond the
// schedule's built-in hit slot.
SimReport simulate_monolithic(const Program& p, const SimConfig& cfg,
                              const LatencyTable& lat, MemoryImage& mem,
                              const std::vector<Scalar>& args);

// Models the decoupled pipeline: stages advance independently each cycle,
// exchanging tokens through bounded FIFOs over the shared memory system.
SimReport simulate_pipeline(const PipelinePlan& plan, const SimConfig& cfg,
                            const LatencyTable& lat, MemoryImage& mem,
                            const std::vector<Scalar>& args);

struct SpeedupSummary {
  double speedup = 0.0;  // cycles_a / cycles_b
  bool digests_match = false;
  int64_t cycles_a = 0;
  int64_t cycles_b = 0;
};
SpeedupSummary compare(const SimReport& a, const SimReport& b);

}  // namespace dfp
