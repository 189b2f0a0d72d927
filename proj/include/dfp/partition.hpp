#pragma once
// partition.hpp - splits a kernel into pipeline stages along its memory and
// long-latency operations, then emits one runnable stage program per stage
// plus the FIFO channel table wiring them together.

#include <string>
#include <vector>

#include "dfp/cdfg.hpp"
#include "dfp/ir.hpp"

namespace dfp {

struct PartitionOptions {
  // Node budget for recomputing a cheap producer locally instead of
  // receiving it through a channel. 0 disables the pass.
  int max_dup_nodes = 8;
};

struct Stage {
  std::vector<int> comps;    // component ids in topological order
  std::vector<int> nodes;    // original node ids, ascending
  int closer = -1;           // component that closed the stage; -1 = trailing
  bool merged = false;       // built by a control-repair merge
  std::vector<int> replicas;  // nodes recomputed locally, ascending
};

struct StagePlan {
  std::vector<Stage> stages;
  std::vector<int> stage_of;  // node id -> owning stage
};

// The core walk: pop components in dependence order, accumulate into the
// current stage, and close the stage whenever the popped component touches
// memory or carries a multi-cycle operation. A non-empty tail becomes the
// final stage.
StagePlan partition_stages(const Cdfg& g, const SccSet& s, const CondensedDag& d);

struct Channel {
  int id = -1;
  std::string value;   // SSA name carried, one element per definition
  int def_node = -1;   // producing node in the source program
  int producer = -1;   // stage indices; always producer < consumer
  int consumer = -1;
  Ty ty = Ty::I32;
  bool control = false;  // consumed only by replayed branches
};

struct PipelinePlan {
  Program source;               // the validated input program
  StagePlan plan;               // final placement, after repair and reuse
  std::vector<Program> stages;  // stage-mode programs, index = stage
  std::vector<Channel> channels;
  int channels_removed = 0;  // by local recomputation
  int merges = 0;            // control-repair stage merges
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Full front half of the toolchain: graph build, staging, control repair,
// cheap-producer duplication, channel assignment, and program emission.
// Requirements diagnosed into errors: validated func program, reducible
// control flow, a single ret, and loop-closed value use (a value defined in
// a loop leaves it only through a phi in the loop's exit block).
PipelinePlan emit_pipeline(const Program& p, const LatencyTable& lat,
                           const PartitionOptions& opt = {});

}  // namespace dfp
