#include "dfp/cfg.hpp"

#include <algorithm>
#include <stdexcept>

namespace dfp {

bool NaturalLoop::contains(int b) const {
  return std::binary_search(body.begin(), body.end(), b);
}

namespace {

// Cooper/Harvey/Kennedy iterative dominator construction over any graph
// given in reverse postorder. Returns idom indexed by node; unreachable
// nodes keep -1.
std::vector<int> compute_idom(int n, int entry,
                              const std::vector<std::vector<int>>& preds,
                              const std::vector<int>& order,
                              const std::vector<int>& order_index) {
  std::vector<int> idom(n, -1);
  idom[entry] = entry;
  bool changed = true;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (order_index[a] > order_index[b]) a = idom[a];
      while (order_index[b] > order_index[a]) b = idom[b];
    }
    return a;
  };
  while (changed) {
    changed = false;
    for (int node : order) {
      if (node == entry) continue;
      int new_idom = -1;
      for (int p : preds[node]) {
        if (idom[p] == -1) continue;
        new_idom = new_idom == -1 ? p : intersect(new_idom, p);
      }
      if (new_idom != -1 && idom[node] != new_idom) {
        idom[node] = new_idom;
        changed = true;
      }
    }
  }
  return idom;
}

std::vector<int> postorder(int n, int entry, const std::vector<std::vector<int>>& succs) {
  std::vector<int> out;
  std::vector<int> state(n, 0);  // 0 unseen, 1 on stack, 2 done
  std::vector<std::pair<int, size_t>> stack;
  stack.push_back({entry, 0});
  state[entry] = 1;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < succs[node].size()) {
      int nxt = succs[node][idx++];
      if (state[nxt] == 0) {
        state[nxt] = 1;
        stack.push_back({nxt, 0});
      }
    } else {
      state[node] = 2;
      out.push_back(node);
      stack.pop_back();
    }
  }
  return out;
}

}  // namespace

bool Cfg::dominates(int a, int b) const {
  if (rpo_index[b] < 0) return false;
  int x = b;
  while (true) {
    if (x == a) return true;
    if (idom[x] == x || idom[x] == -1) return false;
    x = idom[x];
  }
}

bool Cfg::postdominates(int a, int b) const {
  int x = b;
  while (true) {
    if (x == a) return true;
    if (ipdom[x] == x || ipdom[x] == -1) return false;
    x = ipdom[x];
  }
}

int Cfg::innermost_loop(int b) const {
  int best = -1;
  size_t best_size = 0;
  for (size_t i = 0; i < loops.size(); ++i) {
    if (!loops[i].contains(b)) continue;
    if (best == -1 || loops[i].body.size() < best_size) {
      best = static_cast<int>(i);
      best_size = loops[i].body.size();
    }
  }
  return best;
}

bool Cfg::share_loop(int a, int b) const {
  for (const auto& l : loops)
    if (l.contains(a) && l.contains(b)) return true;
  return false;
}

Cfg build_cfg(const Program& p) {
  Cfg g;
  g.prog = &p;
  g.nblocks = static_cast<int>(p.blocks.size());
  g.succs.assign(g.nblocks, {});
  g.preds.assign(g.nblocks, {});
  for (int b = 0; b < g.nblocks; ++b) {
    const Instruction& t = p.blocks[b].instrs.back();
    auto link = [&](const std::string& label) {
      int dst = p.block_index(label);
      if (dst < 0) throw std::runtime_error("cfg: unknown block " + label);
      g.succs[b].push_back(dst);
      g.preds[dst].push_back(b);
    };
    if (t.op == Opcode::Br) {
      link(t.target_t);
      if (t.target_f != t.target_t) link(t.target_f);
    } else if (t.op == Opcode::Jmp) {
      link(t.target_t);
    }
  }

  // Reverse postorder and dominators.
  std::vector<int> po = postorder(g.nblocks, 0, g.succs);
  g.rpo.assign(po.rbegin(), po.rend());
  g.rpo_index.assign(g.nblocks, -1);
  for (size_t i = 0; i < g.rpo.size(); ++i) g.rpo_index[g.rpo[i]] = static_cast<int>(i);
  g.idom = compute_idom(g.nblocks, 0, g.preds, g.rpo, g.rpo_index);

  // Postdominators over the reversed graph with a virtual exit.
  int vexit = g.nblocks;
  std::vector<std::vector<int>> rsuccs(g.nblocks + 1), rpreds(g.nblocks + 1);
  for (int b = 0; b < g.nblocks; ++b) {
    for (int s : g.succs[b]) {
      rsuccs[s].push_back(b);
      rpreds[b].push_back(s);
    }
    if (g.succs[b].empty()) {
      rsuccs[vexit].push_back(b);
      rpreds[b].push_back(vexit);
    }
  }
  std::vector<int> rpost = postorder(g.nblocks + 1, vexit, rsuccs);
  std::vector<int> rorder(rpost.rbegin(), rpost.rend());
  std::vector<int> rindex(g.nblocks + 1, -1);
  for (size_t i = 0; i < rorder.size(); ++i) rindex[rorder[i]] = static_cast<int>(i);
  g.ipdom = compute_idom(g.nblocks + 1, vexit, rpreds, rorder, rindex);

  // Back edges, loops, reducibility. A retreating edge in RPO that does not
  // target a dominator marks irreducible flow.
  for (int b = 0; b < g.nblocks; ++b) {
    if (g.rpo_index[b] < 0) continue;  // unreachable
    for (int s : g.succs[b]) {
      if (g.dominates(s, b)) {
        g.back_edges.push_back({b, s});
      } else if (g.rpo_index[s] >= 0 && g.rpo_index[s] <= g.rpo_index[b]) {
        g.reducible = false;
      }
    }
  }
  for (auto [latch, header] : g.back_edges) {
    NaturalLoop loop;
    loop.header = header;
    loop.latch = latch;
    std::vector<char> in(g.nblocks, 0);
    in[header] = 1;
    std::vector<int> work;
    if (!in[latch]) {
      in[latch] = 1;
      work.push_back(latch);
    }
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      for (int p2 : g.preds[b]) {
        if (!in[p2]) {
          in[p2] = 1;
          work.push_back(p2);
        }
      }
    }
    for (int b = 0; b < g.nblocks; ++b)
      if (in[b]) loop.body.push_back(b);
    g.loops.push_back(std::move(loop));
  }
  return g;
}

std::vector<std::vector<int>> control_dependence(const Cfg& cfg) {
  std::vector<std::vector<int>> cd(cfg.nblocks);
  int vexit = cfg.nblocks;
  for (int a = 0; a < cfg.nblocks; ++a) {
    const Instruction& t = cfg.prog->blocks[a].instrs.back();
    if (t.op != Opcode::Br || cfg.succs[a].size() < 2) continue;
    for (int b : cfg.succs[a]) {
      // Walk the postdominator tree from b up to (exclusive) ipdom(a);
      // every node passed is control-dependent on a's branch.
      int stop = cfg.ipdom[a];
      int x = b;
      while (x != stop && x != vexit) {
        cd[x].push_back(a);
        if (cfg.ipdom[x] == x) break;
        x = cfg.ipdom[x];
      }
    }
  }
  for (auto& v : cd) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return cd;
}

}  // namespace dfp
