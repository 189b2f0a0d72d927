#include "dfp/partition.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "emit_internal.hpp"

namespace dfp {

StagePlan partition_stages(const Cdfg& g, const SccSet& s, const CondensedDag& d) {
  StagePlan plan;
  plan.stage_of.assign(g.nodes.size(), -1);
  Stage cur;
  for (int c : d.topo) {
    cur.comps.push_back(c);
    for (int n : s.components[c].nodes) cur.nodes.push_back(n);
    if (s.components[c].has_mem || s.components[c].has_long) {
      cur.closer = c;
      std::sort(cur.nodes.begin(), cur.nodes.end());
      plan.stages.push_back(std::move(cur));
      cur = Stage{};
    }
  }
  if (!cur.comps.empty()) {
    std::sort(cur.nodes.begin(), cur.nodes.end());
    plan.stages.push_back(std::move(cur));
  }
  for (size_t k = 0; k < plan.stages.size(); ++k)
    for (int n : plan.stages[k].nodes) plan.stage_of[n] = static_cast<int>(k);
  return plan;
}

namespace {

using detail::StageLayout;

// Nodes to add so a stage computes `start_comp`'s values itself instead of
// popping them. Follows data inputs through further cheap components until
// everything terminates at literals, arguments, or values the stage already
// computes. Rejects (empty result) on memory or long-latency members or
// when more than `budget` new nodes would be added.
std::vector<int> cheap_closure(const Cdfg& g, const SccSet& sccs,
                               const std::map<std::string, int>& defs,
                               const std::vector<char>& local, int start_comp,
                               int budget) {
  std::set<int> comps{start_comp};
  std::vector<int> work{start_comp};
  std::set<int> nodes;
  while (!work.empty()) {
    int c = work.back();
    work.pop_back();
    const SccComponent& comp = sccs.components[c];
    if (comp.has_mem || comp.has_long) return {};
    for (int n : comp.nodes)
      if (!local[n]) nodes.insert(n);
    if (static_cast<int>(nodes.size()) > budget) return {};
    for (int n : comp.nodes) {
      const Instruction& in = detail::instr_of(g, n);
      auto visit = [&](const Operand& o) {
        if (!o.is_value()) return;
        auto it = defs.find(o.name);
        if (it == defs.end()) return;  // argument, ambient everywhere
        int dn = it->second;
        if (local[dn]) return;
        int dc = sccs.comp_of[dn];
        if (comps.insert(dc).second) work.push_back(dc);
      };
      if (in.op == Opcode::Phi) {
        for (const PhiIncoming& inc : in.incoming) visit(inc.value);
      } else {
        for (const Operand& o : in.operands) visit(o);
      }
    }
  }
  return {nodes.begin(), nodes.end()};
}

std::vector<int> stage_local(const Stage& st) {
  std::vector<int> local = st.nodes;
  local.insert(local.end(), st.replicas.begin(), st.replicas.end());
  std::sort(local.begin(), local.end());
  return local;
}

std::vector<char> local_mask(size_t nnodes, const std::vector<int>& local) {
  std::vector<char> m(nnodes, 0);
  for (int n : local) m[n] = 1;
  return m;
}

void merge_stages(StagePlan& plan, int lo, int hi) {
  Stage m;
  m.merged = true;
  std::set<int> repl;
  for (int k = lo; k <= hi; ++k) {
    Stage& st = plan.stages[k];
    m.comps.insert(m.comps.end(), st.comps.begin(), st.comps.end());
    m.nodes.insert(m.nodes.end(), st.nodes.begin(), st.nodes.end());
    repl.insert(st.replicas.begin(), st.replicas.end());
    m.closer = st.closer;
  }
  std::sort(m.nodes.begin(), m.nodes.end());
  for (int n : m.nodes) repl.erase(n);  // now owned outright
  m.replicas.assign(repl.begin(), repl.end());
  plan.stages.erase(plan.stages.begin() + lo, plan.stages.begin() + hi + 1);
  plan.stages.insert(plan.stages.begin() + lo, std::move(m));
  for (size_t k = 0; k < plan.stages.size(); ++k)
    for (int n : plan.stages[k].nodes) plan.stage_of[n] = static_cast<int>(k);
}

// A value defined inside a loop may leave it only through a phi in the
// loop's exit: the exit phi runs once per completed loop, which is the rate
// downstream stages see. Phi uses count at the incoming edge's block.
void check_loop_closed(const Program& p, const Cfg& cfg,
                       std::vector<std::string>& errors) {
  std::map<std::string, int> def_block;
  for (size_t b = 0; b < p.blocks.size(); ++b)
    for (const Instruction& in : p.blocks[b].instrs)
      if (in.has_result()) def_block[in.result] = static_cast<int>(b);

  auto check_use = [&](const std::string& name, int use_block, int line) {
    auto it = def_block.find(name);
    if (it == def_block.end()) return;  // argument
    for (const NaturalLoop& L : cfg.loops) {
      if (!L.contains(it->second)) continue;
      if (L.contains(use_block)) continue;
      errors.push_back("line " + std::to_string(line) + ": %" + name +
                       " is defined in the loop at " + p.blocks[L.header].label +
                       " but used outside it; route it through a phi in the "
                       "loop exit block");
    }
  };
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    for (const Instruction& in : p.blocks[b].instrs) {
      if (in.op == Opcode::Phi) {
        for (const PhiIncoming& inc : in.incoming)
          if (inc.value.is_value())
            check_use(inc.value.name, p.block_index(inc.pred), in.line);
      } else {
        for (const Operand& o : in.operands)
          if (o.is_value()) check_use(o.name, static_cast<int>(b), in.line);
      }
    }
  }
}

}  // namespace

PipelinePlan emit_pipeline(const Program& p, const LatencyTable& lat,
                           const PartitionOptions& opt) {
  PipelinePlan out;
  out.source = p;
  if (p.channel_ops_allowed) {
    out.errors.push_back("expected a func program, not a stage");
    return out;
  }
  std::vector<std::string> verrs = validate(p);
  if (!verrs.empty()) {
    for (const std::string& e : verrs) out.errors.push_back("invalid program: " + e);
    return out;
  }
  int rets = 0;
  for (const Block& b : p.blocks)
    if (!b.instrs.empty() && b.instrs.back().op == Opcode::Ret) ++rets;
  if (rets != 1) {
    out.errors.push_back("stage splitting requires exactly one ret block, found " +
                         std::to_string(rets));
    return out;
  }

  CdfgBuildResult gb = build_cdfg(p, lat);
  if (!gb.ok()) {
    out.errors = gb.errors;
    return out;
  }
  const Cdfg& g = *gb.graph;
  check_loop_closed(p, g.cfg, out.errors);
  if (!out.errors.empty()) return out;

  SccSet sccs = find_sccs(g);
  CondensedDag dag = condense_and_sort(g, sccs);
  StagePlan plan = partition_stages(g, sccs, dag);
  std::map<std::string, int> defs = detail::def_map(g);

  auto layout_of = [&](size_t s) {
    return detail::compute_layout(g, defs, stage_local(plan.stages[s]),
                                  s + 1 == plan.stages.size());
  };

  // Control repair: a stage may only consume values from earlier stages.
  // Data inputs satisfy that by construction; a replayed branch whose
  // condition lives downstream does not. Recompute the condition locally
  // when it is cheap, otherwise merge the stages in between.
  int guard = 0;
  while (true) {
    if (++guard > 4 * static_cast<int>(g.nodes.size()) + 16) {
      out.errors.push_back("internal: control repair did not converge");
      return out;
    }
    bool violated = false;
    for (size_t s = 0; s < plan.stages.size() && !violated; ++s) {
      std::vector<int> local = stage_local(plan.stages[s]);
      StageLayout L = layout_of(s);
      for (const auto& [dn, mask] : L.ext) {
        int owner = plan.stage_of[dn];
        if (owner <= static_cast<int>(s)) continue;
        violated = true;
        std::vector<char> credit = local_mask(g.nodes.size(), local);
        std::vector<int> extra =
            cheap_closure(g, sccs, defs, credit, sccs.comp_of[dn],
                          static_cast<int>(g.nodes.size()));
        if (!extra.empty()) {
          Stage& st = plan.stages[s];
          st.replicas.insert(st.replicas.end(), extra.begin(), extra.end());
          std::sort(st.replicas.begin(), st.replicas.end());
          st.replicas.erase(std::unique(st.replicas.begin(), st.replicas.end()),
                            st.replicas.end());
        } else {
          merge_stages(plan, static_cast<int>(s), owner);
          ++out.merges;
        }
        break;
      }
    }
    if (!violated) break;
  }

  auto ext_total = [&]() {
    int n = 0;
    for (size_t s = 0; s < plan.stages.size(); ++s)
      n += static_cast<int>(layout_of(s).ext.size());
    return n;
  };

  // Channel thinning: recompute a cheap producer locally when the closure
  // fits the budget and strictly lowers this stage's input count.
  if (opt.max_dup_nodes > 0) {
    int before = ext_total();
    bool again = true;
    while (again) {
      again = false;
      for (size_t s = 0; s < plan.stages.size() && !again; ++s) {
        Stage& st = plan.stages[s];
        int budget = opt.max_dup_nodes - static_cast<int>(st.replicas.size());
        if (budget <= 0) continue;
        std::vector<int> local = stage_local(st);
        StageLayout L = layout_of(s);
        std::set<int> cands;
        for (const auto& [dn, mask] : L.ext)
          if (mask & StageLayout::kData) cands.insert(sccs.comp_of[dn]);
        for (int c : cands) {
          std::vector<char> credit = local_mask(g.nodes.size(), local);
          std::vector<int> extra = cheap_closure(g, sccs, defs, credit, c, budget);
          if (extra.empty()) continue;
          std::vector<int> local2 = local;
          local2.insert(local2.end(), extra.begin(), extra.end());
          std::sort(local2.begin(), local2.end());
          StageLayout L2 = detail::compute_layout(g, defs, local2,
                                                  s + 1 == plan.stages.size());
          bool backward = false;
          for (const auto& [dn2, m2] : L2.ext)
            if (plan.stage_of[dn2] > static_cast<int>(s)) backward = true;
          if (backward || L2.ext.size() >= L.ext.size()) continue;
          st.replicas.insert(st.replicas.end(), extra.begin(), extra.end());
          std::sort(st.replicas.begin(), st.replicas.end());
          again = true;
          break;
        }
      }
    }
    out.channels_removed = before - ext_total();
  }

  // Channel table: one per (value, consuming stage), globally numbered.
  std::vector<StageLayout> layouts;
  for (size_t s = 0; s < plan.stages.size(); ++s) layouts.push_back(layout_of(s));
  std::map<std::string, Ty> types = infer_types(p, nullptr);
  for (size_t s = 0; s < plan.stages.size(); ++s) {
    for (const auto& [dn, mask] : layouts[s].ext) {
      Channel c;
      c.def_node = dn;
      c.value = detail::instr_of(g, dn).result;
      c.producer = plan.stage_of[dn];
      c.consumer = static_cast<int>(s);
      c.control = mask == StageLayout::kControl;
      auto ti = types.find(c.value);
      c.ty = ti == types.end() ? Ty::I32 : ti->second;
      if (c.producer >= c.consumer)
        throw std::logic_error("channel is not forward after repair");
      out.channels.push_back(c);
    }
  }
  std::sort(out.channels.begin(), out.channels.end(),
            [](const Channel& a, const Channel& b) {
              if (a.producer != b.producer) return a.producer < b.producer;
              if (a.def_node != b.def_node) return a.def_node < b.def_node;
              return a.consumer < b.consumer;
            });
  for (size_t i = 0; i < out.channels.size(); ++i)
    out.channels[i].id = static_cast<int>(i);

  for (size_t s = 0; s < plan.stages.size(); ++s) {
    std::string name = p.name + "_s" + std::to_string(s);
    Program sp = detail::assemble_stage(g, layouts[s], static_cast<int>(s),
                                        out.channels,
                                        s + 1 == plan.stages.size(), name);
    std::vector<std::string> serrs = validate(sp);
    for (const std::string& e : serrs)
      out.errors.push_back("internal: emitted stage " + name + ": " + e);
    out.stages.push_back(std::move(sp));
  }
  out.plan = std::move(plan);
  return out;
}

}  // namespace dfp
