#include <set>
#include <string>
#include <vector>

#include "dfp/partition.hpp"
#include "doctest.h"
#include "support/pipe_ref.hpp"

using namespace dfp;

namespace {

// Vector scale: the canonical three-way split (load / multiply / store).
const char* kScale = R"(
func scale(n) {
  space A elem=4 extent=256 float readonly stream
  space B elem=4 extent=256 float stream
  block entry:
    jmp head
  block head:
    %i = phi [entry: 0, body: %i1]
    %c = icmp.slt %i, %n
    br %c, body, done
  block body:
    %v = load A[%i]
    %w = fmul %v, 2.5
    store B[%i], %w
    %i1 = iadd %i, 1
    jmp head
  block done:
    ret 0
}
)";

// Reduction with a loop-closed exit phi carrying the sum out.
const char* kAccum = R"(
func accum(n) {
  space A elem=4 extent=256 float readonly
  block entry:
    jmp head
  block head:
    %i = phi [entry: 0, body: %i1]
    %acc = phi [entry: 0.0, body: %acc1]
    %c = icmp.slt %i, %n
    br %c, body, done
  block body:
    %v = load A[%i]
    %acc1 = fadd %acc, %v
    %i1 = iadd %i, 1
    jmp head
  block done:
    %accout = phi [head: %acc]
    ret %accout
}
)";

// Linear search: the loop branch depends on the loaded value, so the exit
// test must be recomputed beside the load.
const char* kFind = R"(
func find(n, key) {
  space A elem=4 extent=256 readonly
  block entry:
    jmp head
  block head:
    %i = phi [entry: 0, body: %i1]
    %v = load A[%i]
    %c = icmp.eq %v, %key
    br %c, done, body
  block body:
    %i1 = iadd %i, 1
    jmp head
  block done:
    %iout = phi [head: %i]
    ret %iout
}
)";

// Store feeding a later load through the loop condition: undecouplable,
// must collapse into a single stage.
const char* kChase = R"(
func chase(n) {
  space P elem=4 extent=256 readonly
  space B elem=4 extent=256
  block entry:
    jmp head
  block head:
    %i = phi [entry: 0, body: %i1]
    store B[%i], %i
    %v = load P[%i]
    %c = icmp.slt %v, %n
    br %c, body, done
  block body:
    %i1 = iadd %i, 1
    jmp head
  block done:
    ret 0
}
)";

// Same-iteration read-modify-write on an iteration-private space.
const char* kRelax = R"(
func relax(n) {
  space D elem=4 extent=64 no_loop_carried
  block entry:
    jmp head
  block head:
    %i = phi [entry: 0, body: %i1]
    %c = icmp.slt %i, %n
    br %c, body, done
  block body:
    %a = load D[%i]
    %b = iadd %a, 1
    store D[%i], %b
    %i1 = iadd %i, 1
    jmp head
  block done:
    ret 0
}
)";

// In-place stack loop: load and store share a space and a stage.
const char* kStack = R"(
func stackloop(n) {
  space S elem=4 extent=64
  block entry:
    jmp head
  block head:
    %sp = phi [entry: 8, body: %sp1]
    %c = icmp.sgt %sp, 0
    br %c, body, done
  block body:
    %a = isub %sp, 1
    %t = load S[%a]
    %m = iand %t, 63
    store S[%m], %sp
    %sp1 = isub %sp, 1
    jmp head
  block done:
    ret 0
}
)";

Program parse_func(const std::string& text) {
  ParseResult r = parse_ir(text);
  REQUIRE(r.ok());
  REQUIRE(validate(*r.program).empty());
  return *r.program;
}

PipelinePlan plan_of(const std::string& text, PartitionOptions opt = {},
                     const LatencyTable& lat = LatencyTable::defaults()) {
  Program p = parse_func(text);
  PipelinePlan pp = emit_pipeline(p, lat, opt);
  for (const std::string& e : pp.errors) MESSAGE(e);
  REQUIRE(pp.ok());
  return pp;
}

void seed_image(MemoryImage& mem, const Program& p, uint32_t seed) {
  for (size_t s = 0; s < p.spaces.size(); ++s) {
    for (int64_t i = 0; i < p.spaces[s].extent; ++i) {
      uint32_t h = static_cast<uint32_t>(i) * 2654435761u + seed * 97u + 13u;
      if (p.spaces[s].elem_ty == Ty::F32)
        mem.write(static_cast<int>(s), i, Scalar::f32(static_cast<float>(h % 997) / 32.0f));
      else
        mem.write(static_cast<int>(s), i, Scalar::int32(static_cast<int32_t>(h % 911)));
    }
  }
}

// Runs the original program and the staged pipeline on identically seeded
// memories; they must agree on every cell and on the returned value.
void check_equivalence(const std::string& text, const std::vector<Scalar>& args,
                       PartitionOptions opt = {},
                       const LatencyTable& lat = LatencyTable::defaults(),
                       uint32_t seed = 1) {
  Program p = parse_func(text);
  PipelinePlan pp = emit_pipeline(p, lat, opt);
  for (const std::string& e : pp.errors) MESSAGE(e);
  REQUIRE(pp.ok());

  MemoryImage ma = MemoryImage::for_program(p);
  seed_image(ma, p, seed);
  InterpResult ra = interpret(p, ma, args, 1 << 22);
  REQUIRE(ra.ok());

  MemoryImage mb = MemoryImage::for_program(p);
  seed_image(mb, p, seed);
  dfp_test::PipeRefResult rb = dfp_test::run_pipeline_reference(pp, mb, args, 1 << 22);
  if (!rb.ok) MESSAGE(rb.error);
  REQUIRE(rb.ok);

  CHECK(ma.digest() == mb.digest());
  CHECK(rb.channels_drained);
  if (ra.has_ret) CHECK(ra.ret == rb.ret);
}

// Invariant pack: components never straddle stages, channels only flow
// forward, and each non-final stage is closed by exactly one memory or
// long-latency component sitting at its end.
void check_plan_invariants(const PipelinePlan& pp, const LatencyTable& lat) {
  CdfgBuildResult gb = build_cdfg(pp.source, lat);
  REQUIRE(gb.ok());
  SccSet sccs = find_sccs(*gb.graph);
  for (const SccComponent& c : sccs.components) {
    int s0 = pp.plan.stage_of[c.nodes[0]];
    for (int n : c.nodes) CHECK(pp.plan.stage_of[n] == s0);
  }
  for (const Channel& c : pp.channels) CHECK(c.producer < c.consumer);
  for (size_t s = 0; s < pp.plan.stages.size(); ++s) {
    const Stage& st = pp.plan.stages[s];
    if (st.merged) continue;
    int heavy = 0;
    for (int c : st.comps)
      if (sccs.components[c].has_mem || sccs.components[c].has_long) ++heavy;
    if (s + 1 < pp.plan.stages.size()) {
      CHECK(heavy == 1);
      CHECK(st.closer == st.comps.back());
      CHECK((sccs.components[st.closer].has_mem || sccs.components[st.closer].has_long));
    } else {
      CHECK(heavy <= 1);
    }
  }
  // Stage programs are structurally clean: pops lead their blocks.
  for (const Program& sp : pp.stages) {
    for (const Block& b : sp.blocks) {
      bool body_seen = false;
      for (const Instruction& in : b.instrs) {
        if (in.op == Opcode::Pop) CHECK(!body_seen);
        else body_seen = true;
      }
    }
  }
}

}  // namespace

TEST_CASE("vector scale splits into load, compute, and store stages") {
  PipelinePlan pp = plan_of(kScale);
  REQUIRE(pp.plan.stages.size() == 3);
  CHECK(pp.merges == 0);
  check_plan_invariants(pp, LatencyTable::defaults());

  // The middle stage is pure compute: pop, multiply, push, no memory ops.
  const Program& s1 = pp.stages[1];
  int fmuls = 0, mems = 0, pops = 0, pushes = 0;
  for (const Block& b : s1.blocks)
    for (const Instruction& in : b.instrs) {
      fmuls += in.op == Opcode::FMul;
      mems += is_memory(in.op);
      pops += in.op == Opcode::Pop;
      pushes += in.op == Opcode::Push;
    }
  CHECK(fmuls == 1);
  CHECK(mems == 0);
  CHECK(pops == 2);  // loop condition + element
  CHECK(pushes == 1);

  // The counter is recomputed in the store stage rather than channeled.
  CHECK(pp.channels_removed == 1);
  CHECK(pp.channels.size() == 4);
  CHECK(!pp.plan.stages[2].replicas.empty());
  for (const Channel& c : pp.channels)
    if (c.value == "v" || c.value == "w") CHECK(c.ty == Ty::F32);

  PipelinePlan flat = plan_of(kScale, PartitionOptions{0});
  CHECK(flat.channels.size() == 5);
  CHECK(flat.channels_removed == 0);
}

TEST_CASE("staged scale computes the original answer") {
  check_equivalence(kScale, {Scalar::int32(200)});
  check_equivalence(kScale, {Scalar::int32(0)});
  check_equivalence(kScale, {Scalar::int32(256)});
  check_equivalence(kScale, {Scalar::int32(7)}, PartitionOptions{0});
}

TEST_CASE("reduction isolates the accumulator recurrence in its own stage") {
  PipelinePlan pp = plan_of(kAccum);
  REQUIRE(pp.plan.stages.size() == 3);
  check_plan_invariants(pp, LatencyTable::defaults());
  // Stage 1 is the floating accumulator loop.
  int fadds = 0;
  for (const Block& b : pp.stages[1].blocks)
    for (const Instruction& in : b.instrs) fadds += in.op == Opcode::FAdd;
  CHECK(fadds == 1);
  check_equivalence(kAccum, {Scalar::int32(256)});
  check_equivalence(kAccum, {Scalar::int32(3)});
}

TEST_CASE("a load-dependent exit test is recomputed beside the load") {
  PipelinePlan pp = plan_of(kFind);
  CHECK(pp.merges == 0);
  REQUIRE(pp.plan.stages.size() == 2);
  CHECK(!pp.plan.stages[0].replicas.empty());  // the comparison, duplicated
  check_plan_invariants(pp, LatencyTable::defaults());
  // Only the loaded element crosses; the counter is rebuilt downstream.
  CHECK(pp.channels.size() == 1);
  CHECK(pp.channels[0].value == "v");

  // Place the key somewhere specific and look for it.
  Program p = parse_func(kFind);
  MemoryImage ma = MemoryImage::for_program(p);
  seed_image(ma, p, 5);
  Scalar key = ma.read(0, 37);
  // Ensure no earlier cell collides with the key.
  bool unique = true;
  for (int64_t i = 0; i < 37; ++i)
    if (ma.read(0, i) == key) unique = false;
  REQUIRE(unique);
  InterpResult ra = interpret(p, ma, {Scalar::int32(256), key}, 1 << 20);
  REQUIRE(ra.ok());
  CHECK(ra.ret.i == 37);

  PipelinePlan pp2 = plan_of(kFind);
  MemoryImage mb = MemoryImage::for_program(p);
  seed_image(mb, p, 5);
  dfp_test::PipeRefResult rb =
      dfp_test::run_pipeline_reference(pp2, mb, {Scalar::int32(256), key}, 1 << 20);
  REQUIRE(rb.ok);
  CHECK(rb.ret.i == 37);
  CHECK(ma.digest() == mb.digest());
}

TEST_CASE("a memory-fed loop condition collapses the pipeline") {
  PipelinePlan pp = plan_of(kChase);
  CHECK(pp.merges >= 1);
  REQUIRE(pp.plan.stages.size() == 1);
  CHECK(pp.plan.stages[0].merged);
  CHECK(pp.channels.empty());
  check_equivalence(kChase, {Scalar::int32(120)});
}

TEST_CASE("iteration-private read-modify-write may cross stages") {
  PipelinePlan pp = plan_of(kRelax);
  CHECK(pp.plan.stages.size() >= 2);
  check_plan_invariants(pp, LatencyTable::defaults());
  check_equivalence(kRelax, {Scalar::int32(64)});
}

TEST_CASE("a mutable stack stays within one stage") {
  PipelinePlan pp = plan_of(kStack);
  check_plan_invariants(pp, LatencyTable::defaults());
  // Its load and store live in the same stage.
  CdfgBuildResult gb = build_cdfg(pp.source, LatencyTable::defaults());
  int sl = -1, ss = -1;
  for (size_t n = 0; n < gb.graph->nodes.size(); ++n) {
    if (gb.graph->nodes[n].op == Opcode::Load) sl = pp.plan.stage_of[n];
    if (gb.graph->nodes[n].op == Opcode::Store) ss = pp.plan.stage_of[n];
  }
  CHECK(sl == ss);
  check_equivalence(kStack, {Scalar::int32(0)});
}

TEST_CASE("custom latencies shift the stage boundaries") {
  LatencyTable lt = LatencyTable::defaults();
  lt.entries[Opcode::IMul] = OpTiming{6, true};
  const char* squares =
      "func squares(n) {\n"
      "  space B elem=4 extent=256\n"
      "  block entry:\n"
      "    jmp head\n"
      "  block head:\n"
      "    %i = phi [entry: 0, body: %i1]\n"
      "    %sq = imul %i, %i\n"
      "    %c = icmp.slt %sq, %n\n"
      "    br %c, body, done\n"
      "  block body:\n"
      "    store B[%i], %sq\n"
      "    %i1 = iadd %i, 1\n"
      "    jmp head\n"
      "  block done:\n"
      "    ret 0\n"
      "}\n";
  PipelinePlan slow = plan_of(squares, {}, lt);
  PipelinePlan fast = plan_of(squares);
  CHECK(slow.plan.stages.size() > fast.plan.stages.size());
  check_plan_invariants(slow, lt);
  check_equivalence(squares, {Scalar::int32(400)}, {}, lt);
  check_equivalence(squares, {Scalar::int32(400)});
}

TEST_CASE("values escaping a loop without an exit phi are diagnosed") {
  const char* leaky =
      "func leaky(n) {\n"
      "  block entry:\n"
      "    jmp head\n"
      "  block head:\n"
      "    %i = phi [entry: 0, body: %i1]\n"
      "    %c = icmp.slt %i, %n\n"
      "    br %c, body, done\n"
      "  block body:\n"
      "    %i1 = iadd %i, 1\n"
      "    jmp head\n"
      "  block done:\n"
      "    ret %i\n"
      "}\n";
  Program p = parse_func(leaky);
  PipelinePlan pp = emit_pipeline(p, LatencyTable::defaults(), {});
  REQUIRE(!pp.ok());
  CHECK(pp.errors[0].find("outside") != std::string::npos);
}

TEST_CASE("multiple rets are rejected") {
  const char* multi =
      "func multi(c) {\n"
      "  block entry:\n"
      "    br %c, a, b\n"
      "  block a:\n"
      "    ret 1\n"
      "  block b:\n"
      "    ret 2\n"
      "}\n";
  Program p = parse_func(multi);
  PipelinePlan pp = emit_pipeline(p, LatencyTable::defaults(), {});
  REQUIRE(!pp.ok());
  CHECK(pp.errors[0].find("ret") != std::string::npos);
}

TEST_CASE("emission is deterministic") {
  PipelinePlan a = plan_of(kAccum);
  PipelinePlan b = plan_of(kAccum);
  REQUIRE(a.stages.size() == b.stages.size());
  for (size_t s = 0; s < a.stages.size(); ++s)
    CHECK(print_ir(a.stages[s]) == print_ir(b.stages[s]));
  REQUIRE(a.channels.size() == b.channels.size());
  for (size_t c = 0; c < a.channels.size(); ++c) {
    CHECK(a.channels[c].value == b.channels[c].value);
    CHECK(a.channels[c].producer == b.channels[c].producer);
    CHECK(a.channels[c].consumer == b.channels[c].consumer);
  }
}

TEST_CASE("stage programs round-trip through the parser") {
  PipelinePlan pp = plan_of(kScale);
  for (const Program& sp : pp.stages) {
    std::string text = print_ir(sp);
    ParseResult r = parse_stage_ir(text);
    REQUIRE(r.ok());
    CHECK(print_ir(*r.program) == text);
    CHECK(validate(*r.program).empty());
  }
}
