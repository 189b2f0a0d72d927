#pragma once
// cfg.hpp - block-level control flow analyses shared by validation, dataflow
// graph construction and stage emission: dominators, postdominators (with a
// virtual exit), natural loops, reducibility, control dependence.

#include <vector>

#include "dfp/ir.hpp"

namespace dfp {

struct NaturalLoop {
  int header = -1;
  int latch = -1;               // source of the back edge
  std::vector<int> body;        // block ids, header included, sorted
  bool contains(int b) const;
};

struct Cfg {
  const Program* prog = nullptr;
  int nblocks = 0;
  std::vector<std::vector<int>> succs;
  std::vector<std::vector<int>> preds;
  std::vector<int> rpo;         // reverse postorder from entry
  std::vector<int> rpo_index;   // block -> position in rpo, -1 if unreachable
  std::vector<int> idom;        // immediate dominator, entry -> itself
  // Postdominators over the CFG extended with a virtual exit node (id
  // nblocks); blocks with no successors attach to it.
  std::vector<int> ipdom;       // immediate postdominator, may be nblocks
  std::vector<std::pair<int, int>> back_edges;  // (src, dst) with dst dom src
  std::vector<NaturalLoop> loops;               // one per back edge target+latch
  bool reducible = true;        // every retreating edge is a back edge

  bool dominates(int a, int b) const;
  bool postdominates(int a, int b) const;  // a may be the virtual exit
  // Innermost loop containing block b, -1 if none.
  int innermost_loop(int b) const;
  // True when some loop contains both a and b.
  bool share_loop(int a, int b) const;
};

Cfg build_cfg(const Program& p);

// Control dependence, block granularity: cd[b] lists blocks whose branch
// decides whether b runs (classic postdominance-frontier formulation).
// Only blocks ending in a conditional branch appear.
std::vector<std::vector<int>> control_dependence(const Cfg& cfg);

}  // namespace dfp
