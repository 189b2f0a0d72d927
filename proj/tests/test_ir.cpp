#include <cmath>
#include <string>
#include <vector>

#include "dfp/ir.hpp"
#include "doctest.h"

using namespace dfp;

namespace {

const char* kScaleLoop = R"(
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
    ret %i
}
)";

Program parse_ok(const std::string& text) {
  ParseResult r = parse_ir(text);
  for (const Diagnostic& d : r.diagnostics)
    MESSAGE("line ", d.line, ": ", d.message);
  REQUIRE(r.ok());
  return *r.program;
}

std::vector<std::string> validate_text(const std::string& text) {
  ParseResult r = parse_ir(text);
  REQUIRE(r.ok());
  return validate(*r.program);
}

}  // namespace

TEST_CASE("parse and print reach a fixpoint") {
  Program p = parse_ok(kScaleLoop);
  std::string once = print_ir(p);
  ParseResult again = parse_ir(once);
  REQUIRE(again.ok());
  CHECK(print_ir(*again.program) == once);
  CHECK(validate(p).empty());
}

TEST_CASE("parser reports line numbers and recovers") {
  ParseResult r = parse_ir(
      "func f() {\n"
      "  block entry:\n"
      "    %a = bogus 1, 2\n"
      "    %b = iadd 1 2\n"
      "    ret %b\n"
      "}\n");
  REQUIRE(!r.ok());
  REQUIRE(r.diagnostics.size() == 2);
  CHECK(r.diagnostics[0].line == 3);
  CHECK(r.diagnostics[1].line == 4);
}

TEST_CASE("space attributes round-trip") {
  Program p = parse_ok(
      "func f() {\n"
      "  space W elem=4 extent=10 readonly no_loop_carried\n"
      "  space S elem=4 extent=64 float stream\n"
      "  space R elem=4 extent=8 random\n"
      "  block entry:\n"
      "    ret 0\n"
      "}\n");
  CHECK(p.spaces[0].readonly());
  CHECK(p.spaces[0].no_loop_carried());
  CHECK(!p.spaces[0].stream());
  CHECK(p.spaces[1].stream());
  CHECK(p.spaces[1].elem_ty == Ty::F32);
  CHECK(p.spaces[2].random());
  Program q = parse_ok(print_ir(p));
  CHECK(print_ir(q) == print_ir(p));
}

TEST_CASE("validation rejects malformed programs") {
  SUBCASE("missing terminator") {
    auto v = validate_text("func f() { block entry: %a = const 1 }");
    REQUIRE(!v.empty());
    CHECK(v[0].find("terminator") != std::string::npos);
  }
  SUBCASE("double definition") {
    auto v = validate_text(
        "func f() { block entry: %a = const 1\n %a = const 2\n ret %a }");
    REQUIRE(!v.empty());
    CHECK(v[0].find("SSA") != std::string::npos);
  }
  SUBCASE("use before definition across blocks") {
    auto v = validate_text(
        "func f(n) {\n"
        "  block entry:\n    br %n, a, b\n"
        "  block a:\n    %x = const 1\n    jmp b\n"
        "  block b:\n    %y = iadd %x, 1\n    ret %y\n"
        "}\n");
    REQUIRE(!v.empty());
    CHECK(v[0].find("dominance") != std::string::npos);
  }
  SUBCASE("phi incoming must match predecessors") {
    auto v = validate_text(
        "func f(n) {\n"
        "  block entry:\n    jmp head\n"
        "  block head:\n    %i = phi [entry: 0]\n    %c = icmp.slt %i, %n\n"
        "    br %c, head, done\n"
        "  block done:\n    ret %i\n"
        "}\n");
    REQUIRE(!v.empty());
    CHECK(v[0].find("phi") != std::string::npos);
  }
  SUBCASE("store to readonly space") {
    auto v = validate_text(
        "func f() {\n  space A elem=4 extent=4 readonly\n"
        "  block entry:\n    store A[0], 1\n    ret 0\n}\n");
    REQUIRE(!v.empty());
    CHECK(v[0].find("readonly") != std::string::npos);
  }
  SUBCASE("channel ops only in stage programs") {
    auto v = validate_text("func f() { block entry: push ch0, 1\n ret 0 }");
    REQUIRE(!v.empty());
    CHECK(v[0].find("stage") != std::string::npos);
    ParseResult r = parse_stage_ir("stage s() { block entry: push ch0, 1\n ret 0 }");
    REQUIRE(r.ok());
    CHECK(validate(*r.program).empty());
  }
  SUBCASE("phi not allowed in stage programs") {
    ParseResult r = parse_stage_ir(
        "stage s() {\n  block entry:\n    jmp head\n"
        "  block head:\n    %i = phi [entry: 0, head: %i]\n"
        "    br %i, head, done\n"
        "  block done:\n    ret 0\n}\n");
    REQUIRE(r.ok());
    auto v = validate(*r.program);
    REQUIRE(!v.empty());
    CHECK(v[0].find("phi") != std::string::npos);
  }
  SUBCASE("float space needs 4-byte elements") {
    auto v = validate_text(
        "func f() {\n  space A elem=2 extent=4 float\n"
        "  block entry:\n    ret 0\n}\n");
    REQUIRE(!v.empty());
  }
}

TEST_CASE("stage mode uses definite assignment, not SSA") {
  // %t is written by mov on both sides of a diamond, then read after the
  // join: legal in a stage program, a double definition in a func.
  const char* body =
      "(n) {\n"
      "  block entry:\n    br %n, a, b\n"
      "  block a:\n    %t = mov 1\n    jmp join\n"
      "  block b:\n    %t = mov 2\n    jmp join\n"
      "  block join:\n    %r = iadd %t, 0\n    ret %r\n"
      "}\n";
  ParseResult stage = parse_stage_ir(std::string("stage s") + body);
  REQUIRE(stage.ok());
  CHECK(validate(*stage.program).empty());
  ParseResult func = parse_ir(std::string("func f") + body);
  REQUIRE(func.ok());
  CHECK(!validate(*func.program).empty());

  // One-sided assignment is rejected at the join.
  ParseResult bad = parse_stage_ir(
      "stage s(n) {\n"
      "  block entry:\n    br %n, a, join\n"
      "  block a:\n    %t = mov 1\n    jmp join\n"
      "  block join:\n    %r = iadd %t, 0\n    ret %r\n"
      "}\n");
  REQUIRE(bad.ok());
  auto v = validate(*bad.program);
  REQUIRE(!v.empty());
  CHECK(v[0].find("unassigned") != std::string::npos);
}

TEST_CASE("type inference separates int and float values") {
  ParseResult r = parse_ir(
      "func f() {\n"
      "  space A elem=4 extent=4 float\n"
      "  block entry:\n"
      "    %v = load A[0]\n"
      "    %x = iadd %v, 1\n"
      "    ret %x\n"
      "}\n");
  REQUIRE(r.ok());
  auto v = validate(*r.program);
  REQUIRE(!v.empty());

  Program p = parse_ok(kScaleLoop);
  std::vector<std::string> violations;
  auto types = infer_types(p, &violations);
  CHECK(violations.empty());
  CHECK(types.at("v") == Ty::F32);
  CHECK(types.at("w") == Ty::F32);
  CHECK(types.at("i") == Ty::I32);
  CHECK(types.at("c") == Ty::I32);
}

TEST_CASE("interpreter runs a float scaling loop") {
  Program p = parse_ok(kScaleLoop);
  MemoryImage mem = MemoryImage::for_program(p);
  int n = 100;
  std::vector<float> expect(n);
  for (int i = 0; i < n; ++i) {
    float x = 0.5f * static_cast<float>(i) - 7.0f;
    mem.write(0, i, Scalar::f32(x));
    expect[i] = x * 2.5f;
  }
  InterpResult r = interpret(p, mem, {Scalar::int32(n)}, 1u << 20, true);
  REQUIRE(r.ok());
  CHECK(r.has_ret);
  CHECK(r.ret.i == n);
  for (int i = 0; i < n; ++i) CHECK(mem.read(1, i).f == doctest::Approx(expect[i]));
  // Trace covers one load and one store per iteration, in program order.
  REQUIRE(r.trace.size() == static_cast<size_t>(2 * n));
  CHECK(r.trace[0].space == 0);
  CHECK(!r.trace[0].is_store);
  CHECK(r.trace[1].space == 1);
  CHECK(r.trace[1].is_store);
}

TEST_CASE("interpreter computes an integer dot product") {
  const char* src =
      "func dot(n) {\n"
      "  space X elem=4 extent=64 readonly\n"
      "  space Y elem=4 extent=64 readonly\n"
      "  block entry:\n    jmp head\n"
      "  block head:\n"
      "    %i = phi [entry: 0, body: %i1]\n"
      "    %s = phi [entry: 0, body: %s1]\n"
      "    %c = icmp.slt %i, %n\n"
      "    br %c, body, done\n"
      "  block body:\n"
      "    %x = load X[%i]\n"
      "    %y = load Y[%i]\n"
      "    %m = imul %x, %y\n"
      "    %s1 = iadd %s, %m\n"
      "    %i1 = iadd %i, 1\n"
      "    jmp head\n"
      "  block done:\n    ret %s\n"
      "}\n";
  Program p = parse_ok(src);
  REQUIRE(validate(p).empty());
  MemoryImage mem = MemoryImage::for_program(p);
  int n = 40;
  int64_t want = 0;
  for (int i = 0; i < n; ++i) {
    int x = 3 * i - 17, y = i * i - 5;
    mem.write(0, i, Scalar::int32(x));
    mem.write(1, i, Scalar::int32(y));
    want += static_cast<int64_t>(x) * y;
  }
  InterpResult r = interpret(p, mem, {Scalar::int32(n)}, 1u << 20);
  REQUIRE(r.ok());
  CHECK(r.ret.i == static_cast<int32_t>(want));
}

TEST_CASE("interpreter traps") {
  Program p = parse_ok(kScaleLoop);
  MemoryImage mem = MemoryImage::for_program(p);
  SUBCASE("out of bounds") {
    InterpResult r = interpret(p, mem, {Scalar::int32(300)}, 1u << 20);
    CHECK(r.trap == Trap::OutOfBounds);
    CHECK(!r.message.empty());
  }
  SUBCASE("fuel exhaustion") {
    InterpResult r = interpret(p, mem, {Scalar::int32(100)}, 50);
    CHECK(r.trap == Trap::FuelExhausted);
    CHECK(r.steps == 50);
  }
  SUBCASE("fdiv by zero") {
    Program q = parse_ok(
        "func f() { block entry: %a = fdiv 1.0, 0.0\n ret 0 }");
    MemoryImage m2 = MemoryImage::for_program(q);
    InterpResult r = interpret(q, m2, {}, 100);
    CHECK(r.trap == Trap::DivByZero);
  }
  SUBCASE("channel op refuses sequential execution") {
    ParseResult s = parse_stage_ir("stage s() { block entry: %a = pop ch0\n ret %a }");
    REQUIRE(s.ok());
    MemoryImage m3 = MemoryImage::for_program(*s.program);
    InterpResult r = interpret(*s.program, m3, {}, 100);
    CHECK(r.trap == Trap::BadProgram);
  }
}

TEST_CASE("integer arithmetic wraps and shifts behave as configured") {
  Program p = parse_ok(
      "func f(a, b) {\n"
      "  block entry:\n"
      "    %s = iadd %a, %b\n"
      "    %d = isub %a, %b\n"
      "    %m = imul %a, %b\n"
      "    %l = shl %a, 4\n"
      "    %r = shr %a, 2\n"
      "    %x = ixor %l, %r\n"
      "    ret %x\n"
      "}\n");
  MemoryImage mem = MemoryImage::for_program(p);
  int32_t a = -1000, b = 2147480000;
  InterpResult r = interpret(p, mem, {Scalar::int32(a), Scalar::int32(b)}, 100);
  REQUIRE(r.ok());
  int32_t l = static_cast<int32_t>(static_cast<uint32_t>(a) << 4);
  int32_t sh = a >> 2;
  CHECK(r.ret.i == (l ^ sh));
}

TEST_CASE("memory digest tracks content") {
  Program p = parse_ok(kScaleLoop);
  MemoryImage a = MemoryImage::for_program(p);
  MemoryImage b = MemoryImage::for_program(p);
  CHECK(a.digest() == b.digest());
  b.write(1, 3, Scalar::int32(1));
  CHECK(a.digest() != b.digest());
  // FNV-1a 64 reference vectors.
  CHECK(fnv1a64("", 0) == 14695981039346656037ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("latency table defaults") {
  LatencyTable t = LatencyTable::defaults();
  CHECK(opcode_latency(Opcode::IAdd, t).latency == 1);
  CHECK(opcode_latency(Opcode::Phi, t).latency == 1);
  CHECK(opcode_latency(Opcode::FAdd, t).latency == 4);
  CHECK(opcode_latency(Opcode::FMul, t).latency == 4);
  CHECK(opcode_latency(Opcode::FDiv, t).latency == 16);
  CHECK(!opcode_latency(Opcode::FDiv, t).pipelined);
  CHECK(opcode_latency(Opcode::Load, t).pipelined);
}
