#include "dfp/sim.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>

#include "dfp/cfg.hpp"

namespace dfp {

namespace {

struct Token {
  Scalar v;
  int64_t ready = 0;
};

struct Fifo {
  int depth = 1;
  std::deque<Token> q;
  bool closed = false;
  int64_t pushes = 0;
  int64_t pops = 0;
  int64_t peak = 0;
};

enum class Bucket : uint8_t { Busy, Mem, FifoEmpty, FifoFull, Idle };

char bucket_glyph(Bucket b) {
  switch (b) {
    case Bucket::Busy: return 'B';
    case Bucket::Mem: return 'M';
    case Bucket::FifoEmpty: return 'E';
    case Bucket::FifoFull: return 'F';
    case Bucket::Idle: return 'I';
  }
  return '?';
}

// One initiation-interval engine over one program. Instructions are free
// except where time passes: II charged per loop-header entry, memory
// latency beyond the scheduled hit slot, FIFO waits, and the final drain.
class StageMachine {
 public:
  StageMachine(int id, const Program& p, int ii, bool monolithic,
               const SimConfig& cfg, MemSystem& mem, MemoryImage& image,
               std::vector<Fifo>& fifos, const std::vector<Channel>& channels,
               const std::vector<Scalar>& args)
      : id_(id),
        prog_(p),
        ii_(ii),
        mono_(monolithic),
        cfg_(cfg),
        mem_(mem),
        image_(image),
        fifos_(fifos),
        channels_(channels) {
    for (size_t a = 0; a < p.args.size() && a < args.size(); ++a)
      env_[p.args[a]] = args[a];
    Cfg flow = build_cfg(p);
    for (const NaturalLoop& l : flow.loops) headers_.insert(l.header);
    ports_.assign(p.spaces.size(), -1);
  }

  bool done() const { return done_; }
  bool failed() const { return !error_.empty(); }
  const std::string& error() const { return error_; }
  bool has_ret() const { return has_ret_; }
  Scalar ret() const { return ret_; }
  int64_t iterations() const { return iterations_; }
  const std::vector<int>& open_ports() const { return ports_; }  // space -> port or -1
  int64_t executed_this_tick() const { return executed_; }
  Bucket last_bucket() const { return last_; }

  Bucket tick(int64_t now) {
    executed_ = 0;
    last_ = run(now);
    return last_;
  }

 private:
  Bucket run(int64_t now) {
    if (done_) return Bucket::Idle;
    if (resume_at_ > now) return resume_reason_;
    if (draining_) {
      done_ = true;
      return Bucket::Idle;
    }
    // Execute until something costs time. Free work performed before a
    // block makes the whole cycle count as busy.
    for (int guard = 0; guard < 100000; ++guard) {
      const Instruction& in = prog_.blocks[block_].instrs[instr_];
      Step st = exec(in, now);
      if (st == Step::Advanced) {
        ++executed_;
        ++instr_;
        continue;
      }
      if (st == Step::Jumped) {
        ++executed_;
        continue;
      }
      if (st == Step::TimePassed) return Bucket::Busy;
      if (st == Step::Failed) {
        done_ = true;
        return Bucket::Idle;
      }
      // Blocked: the cycle is attributed to the blocking cause unless some
      // real work already landed in it.
      return executed_ > 0 ? Bucket::Busy : block_reason_;
    }
    error_ = "stage " + prog_.name + " made no time progress";
    done_ = true;
    return Bucket::Idle;
  }

  enum class Step { Advanced, Jumped, Blocked, TimePassed, Failed };

  Scalar ev(const Operand& o) {
    if (o.kind == Operand::Kind::IntLit) return Scalar::int32(o.ival);
    if (o.kind == Operand::Kind::FloatLit) return Scalar::f32(o.fval);
    return env_[o.name];
  }

  int64_t usable(const Operand& o) const {
    if (o.kind != Operand::Kind::Value) return 0;
    auto it = usable_at_.find(o.name);
    return it == usable_at_.end() ? 0 : it->second;
  }

  // Latest cycle an operand of `in` becomes usable, 0 if all are ready.
  int64_t operand_wait(const Instruction& in) const {
    int64_t w = 0;
    for (const Operand& o : in.operands) w = std::max(w, usable(o));
    return w;
  }

  bool wait_operands(const Instruction& in, int64_t now) {
    int64_t w = operand_wait(in);
    if (w <= now) return true;
    resume_at_ = w;
    resume_reason_ = Bucket::Mem;
    block_reason_ = Bucket::Mem;
    return false;
  }

  int port_for(int space) {
    int& p = ports_[static_cast<size_t>(space)];
    if (p < 0)
      p = mem_.open_port(space, prog_.spaces[static_cast<size_t>(space)].stream()
                                    ? PortPolicy::UncachedBurst
                                    : PortPolicy::Cached);
    return p;
  }

  Step jump_to(const std::string& label, int64_t now) {
    block_ = prog_.block_index(label);
    instr_ = 0;
    if (headers_.count(block_)) {
      ++iterations_;
      resume_at_ = now + ii_;
      resume_reason_ = Bucket::Busy;
      return Step::TimePassed;
    }
    return Step::Jumped;
  }

  Step fail(const std::string& m) {
    error_ = "stage " + prog_.name + ": " + m;
    return Step::Failed;
  }

  Step exec(const Instruction& in, int64_t now) {
    auto wrap = [](int64_t v) { return static_cast<int32_t>(static_cast<uint32_t>(v)); };
    auto set = [&](Scalar v, int64_t ready = 0) {
      env_[in.result] = v;
      if (ready > now)
        usable_at_[in.result] = ready;
      else
        usable_at_.erase(in.result);
    };
    switch (in.op) {
      case Opcode::IAdd:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(wrap(static_cast<int64_t>(ev(in.operands[0]).i) +
                               ev(in.operands[1]).i)));
        return Step::Advanced;
      case Opcode::ISub:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(wrap(static_cast<int64_t>(ev(in.operands[0]).i) -
                               ev(in.operands[1]).i)));
        return Step::Advanced;
      case Opcode::IMul:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(wrap(static_cast<int64_t>(ev(in.operands[0]).i) *
                               static_cast<int64_t>(ev(in.operands[1]).i))));
        return Step::Advanced;
      case Opcode::IAnd:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(ev(in.operands[0]).i & ev(in.operands[1]).i));
        return Step::Advanced;
      case Opcode::IOr:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(ev(in.operands[0]).i | ev(in.operands[1]).i));
        return Step::Advanced;
      case Opcode::IXor:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(ev(in.operands[0]).i ^ ev(in.operands[1]).i));
        return Step::Advanced;
      case Opcode::Shl:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(wrap(static_cast<int64_t>(
            static_cast<uint32_t>(ev(in.operands[0]).i) << (ev(in.operands[1]).i & 31)))));
        return Step::Advanced;
      case Opcode::Shr:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::int32(ev(in.operands[0]).i >> (ev(in.operands[1]).i & 31)));
        return Step::Advanced;
      case Opcode::FAdd:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::f32(ev(in.operands[0]).f + ev(in.operands[1]).f));
        return Step::Advanced;
      case Opcode::FMul:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(Scalar::f32(ev(in.operands[0]).f * ev(in.operands[1]).f));
        return Step::Advanced;
      case Opcode::FDiv: {
        if (!wait_operands(in, now)) return Step::Blocked;
        float d = ev(in.operands[1]).f;
        if (d == 0.0f) return fail("fdiv by zero");
        set(Scalar::f32(ev(in.operands[0]).f / d));
        return Step::Advanced;
      }
      case Opcode::ICmp: {
        if (!wait_operands(in, now)) return Step::Blocked;
        int32_t a = ev(in.operands[0]).i, b = ev(in.operands[1]).i;
        bool v = false;
        switch (in.cmp) {
          case CmpKind::Eq: v = a == b; break;
          case CmpKind::Ne: v = a != b; break;
          case CmpKind::Slt: v = a < b; break;
          case CmpKind::Sle: v = a <= b; break;
          case CmpKind::Sgt: v = a > b; break;
          case CmpKind::Sge: v = a >= b; break;
        }
        set(Scalar::int32(v ? 1 : 0));
        return Step::Advanced;
      }
      case Opcode::Select:
        if (!wait_operands(in, now)) return Step::Blocked;
        set(ev(in.operands[0]).i != 0 ? ev(in.operands[1]) : ev(in.operands[2]));
        return Step::Advanced;
      case Opcode::Mov:
      case Opcode::Const:
        // Copies carry their source's availability.
        env_[in.result] = ev(in.operands[0]);
        if (int64_t u = usable(in.operands[0]); u > now)
          usable_at_[in.result] = u;
        else
          usable_at_.erase(in.result);
        return Step::Advanced;
      case Opcode::Phi: {
        if (!mono_) return fail("phi survived emission");
        for (const PhiIncoming& inc : in.incoming)
          if (prog_.block_index(inc.pred) == prev_block_) {
            Scalar v = inc.value.kind == Operand::Kind::IntLit ? Scalar::int32(inc.value.ival)
                       : inc.value.kind == Operand::Kind::FloatLit
                           ? Scalar::f32(inc.value.fval)
                           : env_[inc.value.name];
            int64_t u = inc.value.kind == Operand::Kind::Value ? usable(inc.value) : 0;
            env_[in.result] = v;
            if (u > now)
              usable_at_[in.result] = u;
            else
              usable_at_.erase(in.result);
            return Step::Advanced;
          }
        return fail("phi has no incoming for predecessor");
      }
      case Opcode::Load: {
        if (!wait_operands(in, now)) return Step::Blocked;
        int64_t a = ev(in.operands[0]).i;
        if (a < 0 || a >= prog_.spaces[static_cast<size_t>(in.space)].extent)
          return fail("load out of bounds");
        auto r = mem_.access(port_for(in.space), a, false, now);
        if (!r) {
          block_reason_ = Bucket::Mem;
          return Step::Blocked;  // all outstanding slots busy; retry
        }
        // The static schedule already slots hit_latency between a load and
        // its first use; only latency beyond that stalls anyone.
        set(image_.read(in.space, a), *r - cfg_.mem.hit_latency);
        return Step::Advanced;
      }
      case Opcode::Store: {
        if (!wait_operands(in, now)) return Step::Blocked;
        int64_t a = ev(in.operands[0]).i;
        if (a < 0 || a >= prog_.spaces[static_cast<size_t>(in.space)].extent)
          return fail("store out of bounds");
        auto r = mem_.access(port_for(in.space), a, true, now);
        if (!r) {
          block_reason_ = Bucket::Mem;
          return Step::Blocked;
        }
        image_.write(in.space, a, ev(in.operands[1]));  // fire and forget
        return Step::Advanced;
      }
      case Opcode::Push: {
        Fifo& f = fifos_[static_cast<size_t>(in.channel)];
        if (static_cast<int>(f.q.size()) >= f.depth) {
          block_reason_ = Bucket::FifoFull;
          return Step::Blocked;
        }
        // The slot is taken now; the data lands when the value is ready.
        f.q.push_back(Token{ev(in.operands[0]),
                            std::max(now + 1, usable(in.operands[0]) + 1)});
        ++f.pushes;
        f.peak = std::max(f.peak, static_cast<int64_t>(f.q.size()));
        return Step::Advanced;
      }
      case Opcode::Pop: {
        Fifo& f = fifos_[static_cast<size_t>(in.channel)];
        if (f.q.empty()) {
          if (f.closed) return fail("pop on channel ch" + std::to_string(in.channel) +
                                    " after end of stream");
          block_reason_ = Bucket::FifoEmpty;
          return Step::Blocked;
        }
        if (f.q.front().ready > now) {
          block_reason_ = Bucket::FifoEmpty;
          return Step::Blocked;
        }
        set(f.q.front().v);
        f.q.pop_front();
        ++f.pops;
        return Step::Advanced;
      }
      case Opcode::Br: {
        if (!wait_operands(in, now)) return Step::Blocked;
        prev_block_ = block_;
        return jump_to(ev(in.operands[0]).i != 0 ? in.target_t : in.target_f, now);
      }
      case Opcode::Jmp:
        prev_block_ = block_;
        return jump_to(in.target_t, now);
      case Opcode::Ret: {
        if (!wait_operands(in, now)) return Step::Blocked;
        if (!in.operands.empty()) {
          ret_ = ev(in.operands[0]);
          has_ret_ = true;
        }
        for (size_t c = 0; c < channels_.size(); ++c)
          if (channels_[c].producer == id_) fifos_[c].closed = true;
        draining_ = true;
        resume_at_ = now + cfg_.drain_cycles;
        resume_reason_ = Bucket::Busy;
        return Step::TimePassed;
      }
    }
    return fail("unhandled opcode");
  }

  int id_;
  const Program& prog_;
  int ii_;
  bool mono_;
  const SimConfig& cfg_;
  MemSystem& mem_;
  MemoryImage& image_;
  std::vector<Fifo>& fifos_;
  const std::vector<Channel>& channels_;

  std::map<std::string, Scalar> env_;
  std::map<std::string, int64_t> usable_at_;
  std::set<int> headers_;
  std::vector<int> ports_;
  int block_ = 0;
  int instr_ = 0;
  int prev_block_ = -1;
  int64_t resume_at_ = 0;
  Bucket resume_reason_ = Bucket::Busy;
  Bucket block_reason_ = Bucket::Busy;
  Bucket last_ = Bucket::Idle;
  int64_t executed_ = 0;
  int64_t iterations_ = 0;
  bool draining_ = false;
  bool done_ = false;
  bool has_ret_ = false;
  Scalar ret_;
  std::string error_;
};

void account(StageReport& sr, Bucket b) {
  switch (b) {
    case Bucket::Busy: ++sr.busy; break;
    case Bucket::Mem: ++sr.stall_mem; break;
    case Bucket::FifoEmpty: ++sr.stall_fifo_empty; break;
    case Bucket::FifoFull: ++sr.stall_fifo_full; break;
    case Bucket::Idle: ++sr.idle; break;
  }
}

SimReport run_machines(std::vector<StageMachine>& machines,
                       std::vector<Fifo>& fifos, MemSystem& mem,
                       MemoryImage& image, const SimConfig& cfg,
                       std::vector<StageReport> stages) {
  SimReport rep;
  rep.stages = std::move(stages);
  int64_t idle_streak = 0;
  int64_t deadlock_after =
      static_cast<int64_t>(fifos.size()) * cfg.fifo_depth + 64;
  int64_t now = 0;
  for (;; ++now) {
    bool all_done = true;
    for (const StageMachine& m : machines)
      if (!m.done()) all_done = false;
    if (all_done) break;
    if (now >= cfg.max_cycles) {
      rep.error = "cycle limit exceeded";
      return rep;
    }
    bool progress = false;
    for (size_t s = 0; s < machines.size(); ++s) {
      Bucket b = machines[s].tick(now);
      account(rep.stages[s], b);
      if (machines[s].failed()) {
        rep.error = machines[s].error();
        return rep;
      }
      if (b == Bucket::Busy || machines[s].executed_this_tick() > 0) progress = true;
      if (cfg.trace && static_cast<int64_t>(rep.trace.size()) < cfg.trace_limit)
        rep.trace.push_back(TraceRow{now, static_cast<int>(s), bucket_glyph(b)});
    }
    if (mem.in_flight(now) > 0) progress = true;
    idle_streak = progress ? 0 : idle_streak + 1;
    if (idle_streak > deadlock_after) {
      std::string who;
      for (size_t s = 0; s < machines.size(); ++s)
        if (!machines[s].done()) {
          if (!who.empty()) who += ", ";
          who += rep.stages[s].name;
          switch (machines[s].last_bucket()) {
            case Bucket::Mem: who += " (memory)"; break;
            case Bucket::FifoEmpty: who += " (fifo empty)"; break;
            case Bucket::FifoFull: who += " (fifo full)"; break;
            default: who += " (blocked)"; break;
          }
        }
      rep.deadlock = true;
      rep.error = "pipeline deadlock; blocked: " + who;
      return rep;
    }
  }
  rep.cycles = now;
  for (size_t s = 0; s < machines.size(); ++s) {
    rep.stages[s].iterations = machines[s].iterations();
    if (machines[s].has_ret()) {
      rep.has_ret = true;
      rep.ret = machines[s].ret();
    }
  }
  for (size_t f = 0; f < fifos.size(); ++f)
    rep.fifos.push_back(
        FifoReport{static_cast<int>(f), fifos[f].pushes, fifos[f].pops, fifos[f].peak});
  rep.mem = mem.stats();
  rep.digest = image.digest();
  rep.ok = true;
  return rep;
}

void collect_ports(SimReport& rep, const std::vector<StageMachine>& machines,
                   const MemSystem& ms, const Program& src) {
  for (size_t s = 0; s < machines.size(); ++s) {
    const std::vector<int>& pp = machines[s].open_ports();
    for (size_t sp = 0; sp < pp.size(); ++sp) {
      if (pp[sp] < 0) continue;
      PortReport pr;
      pr.stage = rep.stages[s].name;
      pr.space = src.spaces[sp].name;
      pr.burst = src.spaces[sp].stream();
      pr.stats = ms.port_stats(pp[sp]);
      rep.ports.push_back(pr);
    }
  }
}

}  // namespace

int compute_ii(const std::vector<int>& comps, const SccSet& sccs) {
  int ii = 1;
  for (int c : comps)
    ii = std::max(ii, sccs.components[static_cast<size_t>(c)].cycle_latency);
  return ii;
}

SimReport simulate_monolithic(const Program& p, const SimConfig& cfg,
                              const LatencyTable& lat, MemoryImage& mem,
                              const std::vector<Scalar>& args) {
  SimReport bad;
  CdfgBuildResult gb = build_cdfg(p, lat);
  if (!gb.ok()) {
    bad.error = gb.errors[0];
    return bad;
  }
  SccSet sccs = find_sccs(*gb.graph);
  std::vector<int> all(sccs.components.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  int ii = compute_ii(all, sccs);

  MemSystem ms(cfg.mem, p);
  std::vector<Fifo> fifos;
  std::vector<Channel> channels;
  std::vector<StageMachine> machines;
  machines.emplace_back(0, p, ii, /*monolithic=*/true, cfg, ms, mem, fifos,
                        channels, args);
  std::vector<StageReport> stages(1);
  stages[0].name = p.name;
  stages[0].ii = ii;
  SimReport rep = run_machines(machines, fifos, ms, mem, cfg, std::move(stages));
  collect_ports(rep, machines, ms, p);
  return rep;
}

SimReport simulate_pipeline(const PipelinePlan& plan, const SimConfig& cfg,
                            const LatencyTable& lat, MemoryImage& mem,
                            const std::vector<Scalar>& args) {
  SimReport bad;
  CdfgBuildResult gb = build_cdfg(plan.source, lat);
  if (!gb.ok()) {
    bad.error = gb.errors[0];
    return bad;
  }
  SccSet sccs = find_sccs(*gb.graph);

  MemSystem ms(cfg.mem, plan.source);
  std::vector<Fifo> fifos(plan.channels.size());
  for (Fifo& f : fifos) f.depth = cfg.fifo_depth;

  std::vector<StageMachine> machines;
  std::vector<StageReport> stages(plan.stages.size());
  machines.reserve(plan.stages.size());
  for (size_t s = 0; s < plan.stages.size(); ++s) {
    std::set<int> resident;
    for (int c : plan.plan.stages[s].comps) resident.insert(c);
    for (int n : plan.plan.stages[s].replicas)
      resident.insert(sccs.comp_of[static_cast<size_t>(n)]);
    int ii = compute_ii(std::vector<int>(resident.begin(), resident.end()), sccs);
    machines.emplace_back(static_cast<int>(s), plan.stages[s], ii,
                          /*monolithic=*/false, cfg, ms, mem, fifos,
                          plan.channels, args);
    stages[s].name = plan.stages[s].name;
    stages[s].ii = ii;
  }
  SimReport rep = run_machines(machines, fifos, ms, mem, cfg, std::move(stages));
  collect_ports(rep, machines, ms, plan.source);
  return rep;
}

SpeedupSummary compare(const SimReport& a, const SimReport& b) {
  SpeedupSummary s;
  s.cycles_a = a.cycles;
  s.cycles_b = b.cycles;
  s.speedup = b.cycles > 0 ? static_cast<double>(a.cycles) / static_cast<double>(b.cycles)
                           : 0.0;
  s.digests_match = a.digest == b.digest;
  return s;
}

}  // namespace dfp
