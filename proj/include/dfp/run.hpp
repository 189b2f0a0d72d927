#pragma once
// run.hpp - end-to-end driver: resolve a run configuration, build and
// partition the kernel, simulate the requested engines, and write the
// artifact set (manifest, stage programs, reports, traces, comparison).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfp/ir.hpp"
#include "dfp/partition.hpp"
#include "dfp/sim.hpp"

namespace dfp {

struct RunConfig {
  std::string kernel;    // catalog name; exactly one of kernel / ir_file
  std::string ir_file;   // path to a func-mode IR file
  std::string scale = "desk";
  uint64_t seed = 1;
  std::string out_dir = "dfp-out";
  bool run_monolithic = true;
  bool run_pipeline = true;
  bool dump_cdfg = false;
  SimConfig sim;  // sim.trace gates the trace and gantt artifacts
  LatencyTable latency = LatencyTable::defaults();
  PartitionOptions part;
};

// Flat key=value text, one pair per line; '#' and ';' start comments.
// Unknown keys and unparsable values are rejected with the key named in the
// diagnostic. Later lines override earlier ones, so CLI overrides are
// applied by running a second text through the same parser.
bool apply_config_text(const std::string& text, RunConfig& cfg, std::string* err);
bool load_config_file(const std::string& path, RunConfig& cfg, std::string* err);

// Range checks over every numeric parameter. Returns false and names the
// offending key in err.
bool validate_config(const RunConfig& cfg, std::string* err);

// The resolved configuration as (key, value) pairs, every key present, in a
// fixed order. config_to_text renders the same pairs as config-file text;
// feeding that back through apply_config_text reproduces cfg.
std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& cfg);
std::string config_to_text(const RunConfig& cfg);

// One row per stage over cycles [from, to), built from rep.trace. Glyphs:
// B busy, M memory stall, E fifo empty, F fifo full, I idle. Cycles the
// trace does not cover render as spaces. An empty window yields the ruler
// line only.
std::string render_gantt(const SimReport& rep, int64_t from, int64_t to);

enum class RunStatus : int {
  Ok = 0,
  ConfigError = 2,   // bad key/value/range, unresolvable input, unstageable program
  Mismatch = 3,      // an engine failed functionally or the engines disagree
  Deadlock = 4,      // an engine reported a pipeline deadlock
};

// Runs the configured experiment and writes artifacts under cfg.out_dir.
// Rerunning the same config rewrites byte-identical files. A summary of the
// outcome (or the failure) is appended to *log when non-null.
RunStatus run(const RunConfig& cfg, std::string* log = nullptr);

}  // namespace dfp
