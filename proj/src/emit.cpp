#include <algorithm>
#include <set>

#include "emit_internal.hpp"

namespace dfp {
namespace detail {

std::map<std::string, int> def_map(const Cdfg& g) {
  std::map<std::string, int> defs;
  for (size_t n = 0; n < g.nodes.size(); ++n) {
    const Instruction& in = instr_of(g, static_cast<int>(n));
    if (in.has_result()) defs[in.result] = static_cast<int>(n);
  }
  return defs;
}

StageLayout compute_layout(const Cdfg& g, const std::map<std::string, int>& defs,
                           const std::vector<int>& local_nodes, bool wants_ret) {
  const Program& p = *g.prog;
  const Cfg& cfg = g.cfg;
  int nb = cfg.nblocks;
  StageLayout L;
  L.kept.assign(nb, 0);
  L.needed.assign(nb, 0);
  L.local.assign(g.nodes.size(), 0);
  for (int n : local_nodes) L.local[n] = 1;

  auto cd = control_dependence(cfg);

  int ret_block = -1;
  for (int b = 0; b < nb; ++b)
    if (p.blocks[b].instrs.back().op == Opcode::Ret) ret_block = b;

  // Seeds: entry, the ret block, every local node's block, and for local
  // phis all their predecessor blocks (the branch picking the incoming
  // value must be replayed, which the dependence closure then enforces).
  L.kept[0] = 1;
  if (ret_block >= 0) L.kept[ret_block] = 1;
  for (int n : local_nodes) {
    L.kept[g.nodes[n].block] = 1;
    if (g.nodes[n].op == Opcode::Phi)
      for (int pr : cfg.preds[g.nodes[n].block]) L.kept[pr] = 1;
  }

  bool changed = true;
  auto need = [&](const Operand& o, int mask, bool* flag) {
    if (!o.is_value()) return;
    auto it = defs.find(o.name);
    if (it == defs.end()) return;  // function argument
    int dn = it->second;
    if (L.local[dn]) return;
    int& m = L.ext[dn];
    if ((m & mask) != mask) {
      m |= mask;
      *flag = true;
    }
    int db = g.nodes[dn].block;
    if (!L.kept[db]) {
      L.kept[db] = 1;
      *flag = true;
    }
  };

  while (changed) {
    changed = false;
    // Control closure: every kept block's deciders are kept and replayed.
    for (int b = 0; b < nb; ++b) {
      if (!L.kept[b]) continue;
      for (int d : cd[b]) {
        if (!L.kept[d]) {
          L.kept[d] = 1;
          changed = true;
        }
        if (!L.needed[d]) {
          L.needed[d] = 1;
          changed = true;
        }
      }
    }
    // Data inputs of local instructions.
    for (size_t n = 0; n < g.nodes.size(); ++n) {
      if (!L.local[n]) continue;
      const Instruction& in = instr_of(g, static_cast<int>(n));
      if (in.op == Opcode::Phi) {
        for (const PhiIncoming& inc : in.incoming) need(inc.value, StageLayout::kData, &changed);
      } else {
        for (const Operand& o : in.operands) need(o, StageLayout::kData, &changed);
      }
    }
    // Conditions of replayed branches.
    for (int b = 0; b < nb; ++b) {
      if (!L.needed[b]) continue;
      const Instruction& br = p.blocks[b].instrs.back();
      need(br.operands[0], StageLayout::kControl, &changed);
    }
    if (wants_ret && ret_block >= 0) {
      const Instruction& ri = p.blocks[ret_block].instrs.back();
      if (!ri.operands.empty()) need(ri.operands[0], StageLayout::kData, &changed);
    }
  }
  return L;
}

namespace {

// Parallel-copy semantics for the movs materializing phi values in a
// predecessor: all sources are read before any destination is written.
// Emitted as a sequence, breaking copy cycles with a saved temporary.
void sequence_copies(std::vector<std::pair<std::string, Operand>> copies,
                     std::vector<Instruction>& out) {
  int tmpn = 0;
  // Identity copies carry the value forward unchanged.
  copies.erase(std::remove_if(copies.begin(), copies.end(),
                              [](const auto& c) {
                                return c.second.is_value() && c.second.name == c.first;
                              }),
               copies.end());
  while (!copies.empty()) {
    bool emitted = false;
    for (size_t i = 0; i < copies.size(); ++i) {
      bool read_later = false;
      for (size_t j = 0; j < copies.size(); ++j) {
        if (j == i) continue;
        if (copies[j].second.is_value() && copies[j].second.name == copies[i].first)
          read_later = true;
      }
      if (read_later) continue;
      Instruction mi;
      mi.op = Opcode::Mov;
      mi.result = copies[i].first;
      mi.operands = {copies[i].second};
      out.push_back(mi);
      copies.erase(copies.begin() + static_cast<long>(i));
      emitted = true;
      break;
    }
    if (emitted) continue;
    // Every remaining destination is still read by another copy: a cycle.
    // Save the first destination and retarget its readers.
    std::string d = copies[0].first;
    std::string t = d + "__swap" + std::to_string(tmpn++);
    Instruction mi;
    mi.op = Opcode::Mov;
    mi.result = t;
    mi.operands = {Operand::value(d)};
    out.push_back(mi);
    for (auto& c : copies)
      if (c.second.is_value() && c.second.name == d) c.second = Operand::value(t);
  }
}

}  // namespace

Program assemble_stage(const Cdfg& g, const StageLayout& L, int s,
                       const std::vector<Channel>& channels, bool is_last,
                       const std::string& name) {
  const Program& p = *g.prog;
  const Cfg& cfg = g.cfg;
  Program out;
  out.name = name;
  out.args = p.args;
  out.spaces = p.spaces;
  out.channel_ops_allowed = true;

  // First kept block on the ipdom chain: where control continues once an
  // elided region is skipped. The kept ret block bounds the walk.
  auto K = [&](int b) {
    while (b >= 0 && b < cfg.nblocks && !L.kept[b]) b = cfg.ipdom[b];
    return b;
  };

  // Channel rows touching this stage, in id (= global) order.
  std::map<int, std::vector<const Channel*>> pops_at;    // def block -> rows
  std::map<int, std::vector<const Channel*>> pushes_of;  // def node -> rows
  for (const Channel& c : channels) {
    if (c.consumer == s) pops_at[g.nodes[c.def_node].block].push_back(&c);
    if (c.producer == s) pushes_of[c.def_node].push_back(&c);
  }

  // Movs realizing locally-owned phis, grouped by predecessor block.
  std::map<int, std::vector<std::pair<std::string, Operand>>> movs;
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    if (!L.kept[b]) continue;
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      if (in.op != Opcode::Phi) break;
      int n = g.node_at[b][i];
      if (n < 0 || !L.local[n]) continue;
      for (const PhiIncoming& inc : in.incoming)
        movs[p.block_index(inc.pred)].push_back({in.result, inc.value});
    }
  }

  for (size_t b = 0; b < p.blocks.size(); ++b) {
    if (!L.kept[b]) continue;
    Block nb;
    nb.label = p.blocks[b].label;

    // Pops first: each carried value arrives once per visit of its
    // defining block, mirroring the producer's push rate.
    auto pit = pops_at.find(static_cast<int>(b));
    if (pit != pops_at.end()) {
      for (const Channel* c : pit->second) {
        Instruction pi;
        pi.op = Opcode::Pop;
        pi.result = c->value;
        pi.channel = c->id;
        nb.instrs.push_back(pi);
      }
    }
    // Phi-defined values are complete at block top; publish them here.
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      if (in.op != Opcode::Phi) break;
      int n = g.node_at[b][i];
      auto fit = n < 0 ? pushes_of.end() : pushes_of.find(n);
      if (fit == pushes_of.end()) continue;
      for (const Channel* c : fit->second) {
        Instruction ps;
        ps.op = Opcode::Push;
        ps.channel = c->id;
        ps.operands = {Operand::value(in.result)};
        nb.instrs.push_back(ps);
      }
    }
    // Local straight-line work, publishing results as they appear.
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      if (is_terminator(in.op)) break;
      if (in.op == Opcode::Phi) continue;
      int n = g.node_at[b][i];
      if (n < 0 || !L.local[n]) continue;
      nb.instrs.push_back(in);
      auto fit = pushes_of.find(n);
      if (fit == pushes_of.end()) continue;
      for (const Channel* c : fit->second) {
        Instruction ps;
        ps.op = Opcode::Push;
        ps.channel = c->id;
        ps.operands = {Operand::value(in.result)};
        nb.instrs.push_back(ps);
      }
    }
    // Phi materialization on the outgoing edges.
    auto mit = movs.find(static_cast<int>(b));
    if (mit != movs.end()) sequence_copies(mit->second, nb.instrs);

    // Terminator, retargeted through elided regions.
    const Instruction& t = p.blocks[b].instrs.back();
    if (t.op == Opcode::Ret) {
      Instruction r;
      r.op = Opcode::Ret;
      r.operands = is_last ? t.operands
                           : std::vector<Operand>{Operand::lit(static_cast<int32_t>(0))};
      nb.instrs.push_back(r);
    } else if (t.op == Opcode::Jmp) {
      Instruction j;
      j.op = Opcode::Jmp;
      j.target_t = p.blocks[K(p.block_index(t.target_t))].label;
      nb.instrs.push_back(j);
    } else {  // Br
      int tt = K(p.block_index(t.target_t));
      int ff = K(p.block_index(t.target_f));
      if (L.needed[b] && tt != ff) {
        Instruction br;
        br.op = Opcode::Br;
        br.operands = t.operands;
        br.target_t = p.blocks[tt].label;
        br.target_f = p.blocks[ff].label;
        nb.instrs.push_back(br);
      } else {
        // The branch decides nothing this stage cares about; fall through
        // to where its arms reconverge.
        int nxt = L.needed[b] ? tt : K(cfg.ipdom[b]);
        Instruction j;
        j.op = Opcode::Jmp;
        j.target_t = p.blocks[nxt].label;
        nb.instrs.push_back(j);
      }
    }
    out.blocks.push_back(std::move(nb));
  }
  return out;
}

}  // namespace detail
}  // namespace dfp
