#pragma once
// emit_internal.hpp - shared between the stage planner and the stage program
// assembler. Not part of the public headers.

#include <map>
#include <string>
#include <vector>

#include "dfp/partition.hpp"

namespace dfp {
namespace detail {

inline const Instruction& instr_of(const Cdfg& g, int n) {
  return g.prog->blocks[g.nodes[n].block].instrs[g.nodes[n].index];
}

// SSA name -> defining node id (values defined by jmp/ret never exist).
std::map<std::string, int> def_map(const Cdfg& g);

// Everything the assembler needs to know about one stage: which blocks it
// keeps, which branches it replays, which nodes it computes locally, and
// which external values it consumes.
struct StageLayout {
  std::vector<char> kept;    // per block
  std::vector<char> needed;  // per block: its branch is replayed here
  std::vector<char> local;   // per node: computed in this stage
  // External value needs: defining node -> use mask.
  std::map<int, int> ext;
  static constexpr int kData = 1;     // consumed by a local instruction
  static constexpr int kControl = 2;  // consumed by a replayed branch
};

// Fixpoint over kept blocks, replayed branches and external needs.
// wants_ret: this stage returns the original program's value.
StageLayout compute_layout(const Cdfg& g, const std::map<std::string, int>& defs,
                           const std::vector<int>& local_nodes, bool wants_ret);

// Renders one stage as a runnable channel program. `channels` is the full
// table; the function selects rows touching stage `s`.
Program assemble_stage(const Cdfg& g, const StageLayout& L, int s,
                       const std::vector<Channel>& channels, bool is_last,
                       const std::string& name);

}  // namespace detail
}  // namespace dfp
