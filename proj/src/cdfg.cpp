#include "dfp/cdfg.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace dfp {

const char* edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Data: return "data";
    case EdgeKind::Control: return "control";
    case EdgeKind::MemOrd: return "memord";
  }
  return "?";
}

int Cdfg::node_of(int block, int index) const {
  if (block < 0 || block >= static_cast<int>(node_at.size())) return -1;
  if (index < 0 || index >= static_cast<int>(node_at[block].size())) return -1;
  return node_at[block][index];
}

int Cdfg::node_latency(int n) const {
  const CdfgNode& nd = nodes[n];
  if (is_control(nd.op)) return 0;
  return opcode_latency(nd.op, latencies).latency;
}

std::string Cdfg::dump() const {
  std::ostringstream os;
  for (const CdfgEdge& e : edges) {
    os << "n" << e.src << " -> n" << e.dst << " [" << edge_kind_name(e.kind);
    if (e.loop_carried) os << ", carried";
    os << "]\n";
  }
  return os.str();
}

namespace {

// Iterative Tarjan over an arbitrary adjacency list.
std::vector<int> tarjan_components(const std::vector<std::vector<int>>& adj) {
  int n = static_cast<int>(adj.size());
  std::vector<int> comp(n, -1), low(n), disc(n, -1);
  std::vector<int> stk;
  std::vector<char> on_stack(n, 0);
  int timer = 0, ncomp = 0;

  struct Frame {
    int v;
    size_t ei;
  };
  for (int root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    disc[root] = low[root] = timer++;
    stk.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.ei < adj[f.v].size()) {
        int w = adj[f.v][f.ei++];
        if (disc[w] == -1) {
          disc[w] = low[w] = timer++;
          stk.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
      } else {
        int v = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
        if (low[v] == disc[v]) {
          while (true) {
            int w = stk.back();
            stk.pop_back();
            on_stack[w] = 0;
            comp[w] = ncomp;
            if (w == v) break;
          }
          ++ncomp;
        }
      }
    }
  }
  // Renumber so components are ordered by smallest member node id.
  std::vector<int> min_node(ncomp, n);
  for (int v = 0; v < n; ++v) min_node[comp[v]] = std::min(min_node[comp[v]], v);
  std::vector<int> order(ncomp);
  for (int c = 0; c < ncomp; ++c) order[c] = c;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return min_node[a] < min_node[b]; });
  std::vector<int> rank(ncomp);
  for (int i = 0; i < ncomp; ++i) rank[order[i]] = i;
  for (int v = 0; v < n; ++v) comp[v] = rank[comp[v]];
  return comp;
}

// reach[a] holds a bitset of components reachable from a (a excluded unless
// on a cycle, but the condensation is acyclic so never).
std::vector<std::vector<uint64_t>> condensed_reachability(
    int ncomp, const std::vector<std::pair<int, int>>& cedges) {
  size_t words = (static_cast<size_t>(ncomp) + 63) / 64;
  std::vector<std::vector<int>> adj(ncomp);
  std::vector<int> indeg(ncomp, 0);
  for (auto [a, b] : cedges) {
    adj[a].push_back(b);
    indeg[b]++;
  }
  // Process in reverse topological order so each node's set is the union of
  // its successors' sets plus the successors themselves.
  std::vector<int> topo;
  std::queue<int> q;
  for (int c = 0; c < ncomp; ++c)
    if (!indeg[c]) q.push(c);
  while (!q.empty()) {
    int c = q.front();
    q.pop();
    topo.push_back(c);
    for (int d : adj[c])
      if (--indeg[d] == 0) q.push(d);
  }
  std::vector<std::vector<uint64_t>> reach(ncomp, std::vector<uint64_t>(words, 0));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    int c = *it;
    for (int d : adj[c]) {
      reach[c][static_cast<size_t>(d) / 64] |= 1ull << (d % 64);
      for (size_t w = 0; w < words; ++w) reach[c][w] |= reach[d][w];
    }
  }
  return reach;
}

bool reach_test(const std::vector<std::vector<uint64_t>>& reach, int a, int b) {
  return (reach[a][static_cast<size_t>(b) / 64] >> (b % 64)) & 1;
}

}  // namespace

CdfgBuildResult build_cdfg(const Program& p, const LatencyTable& lat) {
  CdfgBuildResult r;
  Cdfg g;
  g.prog = &p;
  g.cfg = build_cfg(p);
  g.latencies = lat;
  if (!g.cfg.reducible) {
    r.errors.push_back("control flow is irreducible; staging requires reducible loops");
    return r;
  }
  for (int b = 0; b < g.cfg.nblocks; ++b)
    if (g.cfg.rpo_index[b] < 0)
      r.errors.push_back("block " + p.blocks[b].label + " is unreachable");
  if (!r.errors.empty()) return r;

  // Nodes: every instruction except jmp/ret.
  g.node_at.resize(p.blocks.size());
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    g.node_at[b].assign(p.blocks[b].instrs.size(), -1);
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      if (in.op == Opcode::Jmp || in.op == Opcode::Ret) continue;
      CdfgNode nd;
      nd.block = static_cast<int>(b);
      nd.index = static_cast<int>(i);
      nd.op = in.op;
      nd.is_mem = is_memory(in.op);
      nd.is_long = !is_control(in.op) && opcode_latency(in.op, lat).latency > 1;
      g.node_at[b][i] = static_cast<int>(g.nodes.size());
      g.nodes.push_back(nd);
    }
  }

  std::map<std::string, int> def_node;
  for (size_t n = 0; n < g.nodes.size(); ++n) {
    const Instruction& in = p.blocks[g.nodes[n].block].instrs[g.nodes[n].index];
    if (in.has_result()) def_node[in.result] = static_cast<int>(n);
  }

  auto add_edge = [&](int src, int dst, EdgeKind k, bool carried) {
    g.edges.push_back({src, dst, k, carried});
  };

  // Data edges: SSA def -> use. Phi incomings over a CFG back edge are the
  // loop-carried ones.
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      int dst = g.node_at[b][i];
      if (in.op == Opcode::Phi) {
        for (const PhiIncoming& inc : in.incoming) {
          if (!inc.value.is_value()) continue;
          auto it = def_node.find(inc.value.name);
          if (it == def_node.end()) continue;  // argument
          int pred = p.block_index(inc.pred);
          bool carried = false;
          for (auto [s, d] : g.cfg.back_edges)
            if (s == pred && d == static_cast<int>(b)) carried = true;
          add_edge(it->second, dst, EdgeKind::Data, carried);
        }
        continue;
      }
      for (const Operand& o : in.operands) {
        if (!o.is_value()) continue;
        auto it = def_node.find(o.name);
        if (it == def_node.end()) continue;  // argument
        if (dst < 0) {
          // jmp has no operands; ret consumes a value but is not a node.
          continue;
        }
        add_edge(it->second, dst, EdgeKind::Data, false);
      }
    }
  }

  // Memory ordering. For each space, every unordered pair of accesses with
  // at least one store is kept ordered. Unannotated spaces get edges in
  // both directions: a store/load pair must stay inside one stage, since
  // stages execute concurrently and FIFOs order values, not memory. The
  // no_loop_carried annotation waives the reverse direction, leaving only
  // same-iteration program order. The waiver speaks about iterations, so it
  // only applies to pairs that share a loop; an access outside the loop
  // (a priming store, a final reload) stays welded to the stores it follows.
  // Readonly spaces have no stores to order.
  {
    std::vector<std::vector<int>> by_space(p.spaces.size());
    for (size_t n = 0; n < g.nodes.size(); ++n)
      if (g.nodes[n].is_mem)
        by_space[p.blocks[g.nodes[n].block].instrs[g.nodes[n].index].space].push_back(
            static_cast<int>(n));
    for (size_t s = 0; s < p.spaces.size(); ++s) {
      if (p.spaces[s].readonly()) continue;
      const auto& ns = by_space[s];
      for (size_t i = 0; i < ns.size(); ++i) {
        for (size_t j = i + 1; j < ns.size(); ++j) {
          int a = ns[i], b = ns[j];  // a precedes b in program order
          bool store_a = g.nodes[a].op == Opcode::Store;
          bool store_b = g.nodes[b].op == Opcode::Store;
          if (!store_a && !store_b) continue;
          bool carried = g.cfg.share_loop(g.nodes[a].block, g.nodes[b].block);
          add_edge(a, b, EdgeKind::MemOrd, false);
          if (!p.spaces[s].no_loop_carried() || !carried)
            add_edge(b, a, EdgeKind::MemOrd, carried);
        }
      }
    }
  }

  // Control edges keep branch deciders sorted before the instructions they
  // gate. Classic control dependence would also tie every loop body to its
  // header branch in a cycle; that would fold whole loops into one SCC and
  // defeat the partitioning, so edges that would point into an ancestor of
  // the branch's own component (over data+memord) are dropped. The stage
  // emitter re-derives full control dependence when it routes branches.
  {
    std::vector<std::vector<int>> dm_adj(g.nodes.size());
    for (const CdfgEdge& e : g.edges) dm_adj[e.src].push_back(e.dst);
    std::vector<int> comp = tarjan_components(dm_adj);
    int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
    std::vector<std::pair<int, int>> cedges;
    for (const CdfgEdge& e : g.edges)
      if (comp[e.src] != comp[e.dst]) cedges.push_back({comp[e.src], comp[e.dst]});
    auto reach = condensed_reachability(ncomp, cedges);

    auto cd = control_dependence(g.cfg);
    for (int b = 0; b < g.cfg.nblocks; ++b) {
      for (int d : cd[b]) {
        if (d == b) continue;  // same-block order needs no edge
        int br = g.node_at[d].back();
        for (int n : g.node_at[b]) {
          if (n < 0) continue;
          if (comp[n] == comp[br]) continue;
          if (reach_test(reach, comp[n], comp[br])) continue;  // would close a cycle
          add_edge(br, n, EdgeKind::Control, false);
        }
      }
    }
  }

  // Deterministic edge order and deduped adjacency.
  std::sort(g.edges.begin(), g.edges.end(), [](const CdfgEdge& a, const CdfgEdge& b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  g.succs.assign(g.nodes.size(), {});
  g.preds.assign(g.nodes.size(), {});
  for (const CdfgEdge& e : g.edges) {
    if (g.succs[e.src].empty() || g.succs[e.src].back() != e.dst)
      g.succs[e.src].push_back(e.dst);
  }
  for (size_t n = 0; n < g.nodes.size(); ++n)
    for (int d : g.succs[n]) g.preds[d].push_back(static_cast<int>(n));

  r.graph = std::move(g);
  return r;
}

namespace {

// Exact max-latency simple cycle by path enumeration; local ids, callable
// only for small components.
int max_cycle_latency(const std::vector<std::vector<int>>& adj,
                      const std::vector<int>& lat) {
  int k = static_cast<int>(adj.size());
  int best = 0;
  std::vector<char> on_path(k, 0);
  // Enumerate cycles whose smallest node is `start`.
  for (int start = 0; start < k; ++start) {
    struct Frame {
      int v;
      size_t ei;
    };
    std::vector<Frame> stack{{start, 0}};
    on_path[start] = 1;
    int path_lat = lat[start];
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.ei < adj[f.v].size()) {
        int w = adj[f.v][f.ei++];
        if (w == start) {
          best = std::max(best, path_lat);
          continue;
        }
        if (w < start || on_path[w]) continue;
        on_path[w] = 1;
        path_lat += lat[w];
        stack.push_back({w, 0});
      } else {
        on_path[f.v] = 0;
        path_lat -= lat[f.v];
        stack.pop_back();
      }
    }
  }
  return best;
}

}  // namespace

SccSet find_sccs(const Cdfg& g) {
  SccSet s;
  s.comp_of = tarjan_components(g.succs);
  int ncomp = s.comp_of.empty() ? 0 : *std::max_element(s.comp_of.begin(), s.comp_of.end()) + 1;
  s.components.resize(ncomp);
  for (size_t n = 0; n < g.nodes.size(); ++n)
    s.components[s.comp_of[n]].nodes.push_back(static_cast<int>(n));

  for (SccComponent& c : s.components) {
    for (int n : c.nodes) {
      c.has_mem |= g.nodes[n].is_mem;
      c.has_long |= g.nodes[n].is_long;
    }
    bool self_loop = false;
    if (c.nodes.size() == 1) {
      for (int d : g.succs[c.nodes[0]]) self_loop |= d == c.nodes[0];
    }
    c.cyclic = c.nodes.size() > 1 || self_loop;
    if (!c.cyclic) {
      c.cycle_latency = 0;
      continue;
    }
    if (static_cast<int>(c.nodes.size()) > kExactCycleCap) {
      int sum = 0;
      for (int n : c.nodes) sum += g.node_latency(n);
      c.cycle_latency = sum;
      continue;
    }
    // Local adjacency restricted to the component.
    std::vector<int> local(g.nodes.size(), -1);
    for (size_t i = 0; i < c.nodes.size(); ++i) local[c.nodes[i]] = static_cast<int>(i);
    std::vector<std::vector<int>> adj(c.nodes.size());
    std::vector<int> lat(c.nodes.size());
    for (size_t i = 0; i < c.nodes.size(); ++i) {
      lat[i] = g.node_latency(c.nodes[i]);
      for (int d : g.succs[c.nodes[i]])
        if (local[d] >= 0) adj[i].push_back(local[d]);
    }
    c.cycle_latency = max_cycle_latency(adj, lat);
  }
  return s;
}

CondensedDag condense_and_sort(const Cdfg& g, const SccSet& s) {
  CondensedDag d;
  int ncomp = static_cast<int>(s.components.size());
  d.succs.assign(ncomp, {});
  d.preds.assign(ncomp, {});
  std::vector<std::pair<int, int>> ce;
  for (const CdfgEdge& e : g.edges) {
    int a = s.comp_of[e.src], b = s.comp_of[e.dst];
    if (a != b) ce.push_back({a, b});
  }
  std::sort(ce.begin(), ce.end());
  ce.erase(std::unique(ce.begin(), ce.end()), ce.end());
  std::vector<int> indeg(ncomp, 0);
  for (auto [a, b] : ce) {
    d.succs[a].push_back(b);
    d.preds[b].push_back(a);
    indeg[b]++;
  }
  // Kahn with the earliest-program-position tie break. Component ids are
  // already ordered by min member node, so the id is the key.
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int c = 0; c < ncomp; ++c)
    if (!indeg[c]) ready.push(c);
  while (!ready.empty()) {
    int c = ready.top();
    ready.pop();
    d.topo.push_back(c);
    for (int nxt : d.succs[c])
      if (--indeg[nxt] == 0) ready.push(nxt);
  }
  if (static_cast<int>(d.topo.size()) != ncomp)
    throw std::logic_error("condensed graph has a cycle; SCC partition broken");
  return d;
}

}  // namespace dfp
