#pragma once
// ir.hpp - loop-nest kernel IR: programs over explicit basic blocks and
// named memory spaces, plus parsing, printing, validation and sequential
// interpretation. Everything downstream (dataflow graph construction,
// partitioning, simulation) consumes these types.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dfp {

enum class Opcode : uint8_t {
  IAdd, ISub, IMul, ICmp, IAnd, IOr, IXor, Shl, Shr,
  FAdd, FMul, FDiv,
  Select, Phi, Mov, Const,
  Load, Store,
  Push, Pop,
  Br, Jmp, Ret,
};

enum class CmpKind : uint8_t { Eq, Ne, Slt, Sle, Sgt, Sge };

const char* opcode_name(Opcode op);
const char* cmp_kind_name(CmpKind k);
bool is_terminator(Opcode op);         // br/jmp/ret
bool is_control(Opcode op);            // terminators; excluded from latency tables
bool is_memory(Opcode op);             // load/store

enum class Ty : uint8_t { I32, F32 };

// Runtime scalar. Integer arithmetic wraps mod 2^32; floats are binary32.
struct Scalar {
  Ty ty = Ty::I32;
  union {
    int32_t i;
    float f;
  };
  Scalar() : ty(Ty::I32), i(0) {}
  static Scalar int32(int32_t v) {
    Scalar s;
    s.ty = Ty::I32;
    s.i = v;
    return s;
  }
  static Scalar f32(float v) {
    Scalar s;
    s.ty = Ty::F32;
    s.f = v;
    return s;
  }
  uint32_t bits() const;
  bool operator==(const Scalar& o) const { return ty == o.ty && bits() == o.bits(); }
};

// Instruction operand: an SSA value name or an immediate.
struct Operand {
  enum class Kind : uint8_t { Value, IntLit, FloatLit };
  Kind kind = Kind::IntLit;
  std::string name;   // Kind::Value
  int32_t ival = 0;   // Kind::IntLit
  float fval = 0.0f;  // Kind::FloatLit

  static Operand value(std::string n) {
    Operand o;
    o.kind = Kind::Value;
    o.name = std::move(n);
    return o;
  }
  static Operand lit(int32_t v) {
    Operand o;
    o.kind = Kind::IntLit;
    o.ival = v;
    return o;
  }
  static Operand lit(float v) {
    Operand o;
    o.kind = Kind::FloatLit;
    o.fval = v;
    return o;
  }
  bool is_value() const { return kind == Kind::Value; }
  bool operator==(const Operand& o) const;
};

// Memory space annotations. readonly admits no stores; no_loop_carried is a
// user promise that cross-iteration ordering need not be enforced; stream and
// random are access-pattern hints that pick the port policy.
enum SpaceAnnot : uint8_t {
  kReadonly = 1,
  kNoLoopCarried = 2,
  kStream = 4,
  kRandom = 8,
};

struct MemSpace {
  std::string name;
  int element_width = 4;  // bytes
  int64_t extent = 0;     // elements
  Ty elem_ty = Ty::I32;
  uint8_t annotations = 0;

  bool readonly() const { return annotations & kReadonly; }
  bool no_loop_carried() const { return annotations & kNoLoopCarried; }
  bool stream() const { return annotations & kStream; }
  bool random() const { return annotations & kRandom; }
};

struct PhiIncoming {
  std::string pred;  // predecessor block label
  Operand value;
};

struct Instruction {
  Opcode op = Opcode::Ret;
  std::string result;              // empty when none
  CmpKind cmp = CmpKind::Eq;       // icmp only
  std::vector<Operand> operands;   // see arity table in validate()
  int space = -1;                  // load/store: index into Program::spaces
  int channel = -1;                // push/pop
  std::vector<PhiIncoming> incoming;  // phi only
  std::string target_t;            // br taken target; jmp target
  std::string target_f;            // br not-taken target
  int line = 0;                    // source line when parsed, else 0

  bool has_result() const { return !result.empty(); }
};

struct Block {
  std::string label;
  std::vector<Instruction> instrs;  // terminator last
};

struct Program {
  std::string name;
  std::vector<std::string> args;   // referenced as %name
  std::vector<MemSpace> spaces;
  std::vector<Block> blocks;       // blocks[0] is the entry
  // Stage programs emitted by the partitioner may contain push/pop and
  // reassign mov destinations; plain input programs may not.
  bool channel_ops_allowed = false;

  int space_index(const std::string& n) const;
  int block_index(const std::string& label) const;
  const std::string& entry() const { return blocks.front().label; }
};

// --- timing -----------------------------------------------------------

struct OpTiming {
  int latency = 1;
  bool pipelined = true;
};

// Per-opcode issue timing. Control opcodes (br/jmp/ret) have no entry.
struct LatencyTable {
  std::map<Opcode, OpTiming> entries;
  static LatencyTable defaults();
  bool has(Opcode op) const { return entries.count(op) != 0; }
};

// Latency of one non-control opcode. Throws std::out_of_range when the
// table has no entry.
OpTiming opcode_latency(Opcode op, const LatencyTable& table);

// --- text form --------------------------------------------------------

struct Diagnostic {
  int line = 0;
  std::string message;
};

struct ParseResult {
  std::optional<Program> program;  // engaged only when diagnostics is empty
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return program.has_value(); }
};

// Parse then validate; never yields a partially-formed program.
ParseResult parse_ir(const std::string& text);
// Same grammar plus push/pop; validation runs in stage-program mode.
ParseResult parse_stage_ir(const std::string& text);

std::string print_ir(const Program& p);

// Returns violations ("block.instr: rule"); empty means valid.
std::vector<std::string> validate(const Program& p);

// Value/argument types established by validation. Values absent from the
// map were unconstrained and default to I32.
std::map<std::string, Ty> infer_types(const Program& p, std::vector<std::string>* violations);

// --- memory image and interpretation ----------------------------------

struct SpaceData {
  Ty ty = Ty::I32;
  std::vector<uint32_t> cells;  // raw 32-bit cells (int value or float bits)
};

struct MemoryImage {
  std::vector<SpaceData> spaces;  // aligned with Program::spaces
  static MemoryImage for_program(const Program& p);
  Scalar read(int space, int64_t addr) const;
  void write(int space, int64_t addr, Scalar v);
  uint64_t digest() const;  // FNV-1a over extents and cells
};

struct Access {
  int space = 0;
  int64_t addr = 0;
  bool is_store = false;
};
using AccessTrace = std::vector<Access>;

enum class Trap : uint8_t {
  None,
  OutOfBounds,
  DivByZero,
  FuelExhausted,
  BadProgram,  // dynamic type/shape violation; unreachable after validate
};

struct InterpResult {
  Trap trap = Trap::None;
  std::string message;
  bool has_ret = false;
  Scalar ret;
  int64_t steps = 0;
  AccessTrace trace;
  bool ok() const { return trap == Trap::None; }
};

// Executes p sequentially against mem (mutated in place). fuel bounds the
// number of instruction executions. Requires a program that validate()
// accepts; stage programs additionally need channel contents supplied, so
// plain interpret rejects push/pop.
InterpResult interpret(const Program& p, MemoryImage& mem,
                       const std::vector<Scalar>& args, int64_t fuel,
                       bool record_trace = false);

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 14695981039346656037ull);

}  // namespace dfp
