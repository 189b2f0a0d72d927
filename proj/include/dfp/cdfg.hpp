#pragma once
// cdfg.hpp - instruction-level control-dataflow graph with memory ordering
// edges, SCC analysis, and condensation to a topologically sorted DAG. This
// is the graph the stage partitioner consumes.

#include <optional>
#include <string>
#include <vector>

#include "dfp/cfg.hpp"
#include "dfp/ir.hpp"

namespace dfp {

enum class EdgeKind : uint8_t { Data, Control, MemOrd };
const char* edge_kind_name(EdgeKind k);

// One node per instruction, except jmp and ret which carry no dependence
// of their own (conditional branches are nodes).
struct CdfgNode {
  int block = -1;
  int index = -1;  // instruction index within the block
  Opcode op = Opcode::Jmp;
  bool is_mem = false;   // load or store
  bool is_long = false;  // latency > 1 under the build's latency table
};

struct CdfgEdge {
  int src = -1;
  int dst = -1;
  EdgeKind kind = EdgeKind::Data;
  bool loop_carried = false;
};

struct Cdfg {
  const Program* prog = nullptr;
  Cfg cfg;
  LatencyTable latencies;
  std::vector<CdfgNode> nodes;  // program order; node id = position here
  std::vector<CdfgEdge> edges;
  std::vector<std::vector<int>> succs, preds;    // deduped adjacency
  std::vector<std::vector<int>> node_at;         // [block][instr] -> node id or -1

  int node_of(int block, int index) const;
  // Cycles per execution of the node, 0 for control ops.
  int node_latency(int n) const;
  std::string dump() const;  // one edge per line: "src -> dst [kind, carried]"
};

// Fails on irreducible control flow or unreachable blocks; such programs
// cannot be staged.
struct CdfgBuildResult {
  std::optional<Cdfg> graph;
  std::vector<std::string> errors;
  bool ok() const { return graph.has_value(); }
};
CdfgBuildResult build_cdfg(const Program& p, const LatencyTable& lat);

struct SccComponent {
  std::vector<int> nodes;  // ascending node ids
  bool has_mem = false;
  bool has_long = false;
  bool cyclic = false;      // multi-node, or a self-loop
  // Max over the component's simple cycles of the summed member latencies;
  // exact up to kExactCycleCap nodes, a summed upper bound beyond that;
  // 0 for acyclic singletons.
  int cycle_latency = 0;
  int min_node() const { return nodes.front(); }
};

struct SccSet {
  std::vector<SccComponent> components;  // ordered by min member node id
  std::vector<int> comp_of;              // node id -> component index
};

inline constexpr int kExactCycleCap = 12;

SccSet find_sccs(const Cdfg& g);

struct CondensedDag {
  std::vector<std::vector<int>> succs, preds;  // component adjacency, deduped
  // Every component, topologically sorted; ties broken by smallest member
  // node id (= earliest program position).
  std::vector<int> topo;
};

// Aborts (logic_error) if the condensation is cyclic; that would mean the
// SCC partition was not maximal.
CondensedDag condense_and_sort(const Cdfg& g, const SccSet& s);

}  // namespace dfp
