#include <cmath>
#include <map>
#include <string>

#include "dfp/ir.hpp"

namespace dfp {

namespace {

int32_t wrap_add(int32_t a, int32_t b) {
  return static_cast<int32_t>(static_cast<uint32_t>(a) + static_cast<uint32_t>(b));
}
int32_t wrap_sub(int32_t a, int32_t b) {
  return static_cast<int32_t>(static_cast<uint32_t>(a) - static_cast<uint32_t>(b));
}
int32_t wrap_mul(int32_t a, int32_t b) {
  return static_cast<int32_t>(static_cast<uint32_t>(a) * static_cast<uint32_t>(b));
}

}  // namespace

InterpResult interpret(const Program& p, MemoryImage& mem, const std::vector<Scalar>& args,
                       int64_t fuel, bool record_trace) {
  InterpResult r;
  auto trap = [&](Trap t, const std::string& m) {
    r.trap = t;
    r.message = m;
    return r;
  };
  if (p.blocks.empty()) return trap(Trap::BadProgram, "no blocks");
  if (args.size() != p.args.size())
    return trap(Trap::BadProgram, "argument count mismatch");
  if (mem.spaces.size() != p.spaces.size())
    return trap(Trap::BadProgram, "memory image shape mismatch");

  std::map<std::string, Scalar> env;
  for (size_t i = 0; i < p.args.size(); ++i) env[p.args[i]] = args[i];

  auto eval = [&](const Operand& o, Scalar* out) -> bool {
    switch (o.kind) {
      case Operand::Kind::Value: {
        auto it = env.find(o.name);
        if (it == env.end()) return false;
        *out = it->second;
        return true;
      }
      case Operand::Kind::IntLit:
        *out = Scalar::int32(static_cast<int32_t>(o.ival));
        return true;
      case Operand::Kind::FloatLit:
        *out = Scalar::f32(o.fval);
        return true;
    }
    return false;
  };

  int block = 0;
  int prev_block = -1;
  while (true) {
    const Block& blk = p.blocks[block];

    // Phis evaluate in parallel against the edge just taken.
    size_t first_nonphi = 0;
    {
      std::vector<std::pair<std::string, Scalar>> staged;
      while (first_nonphi < blk.instrs.size() &&
             blk.instrs[first_nonphi].op == Opcode::Phi) {
        const Instruction& in = blk.instrs[first_nonphi];
        if (prev_block < 0)
          return trap(Trap::BadProgram, "phi in entry block " + blk.label);
        const std::string& pred = p.blocks[prev_block].label;
        bool found = false;
        for (const PhiIncoming& inc : in.incoming) {
          if (inc.pred != pred) continue;
          Scalar val;
          if (!eval(inc.value, &val))
            return trap(Trap::BadProgram, "phi %" + in.result + " reads undefined value");
          staged.emplace_back(in.result, val);
          found = true;
          break;
        }
        if (!found)
          return trap(Trap::BadProgram,
                      "phi %" + in.result + " has no incoming for " + pred);
        if (r.steps >= fuel) return trap(Trap::FuelExhausted, "fuel exhausted");
        ++r.steps;
        ++first_nonphi;
      }
      for (auto& [name, val] : staged) env[name] = val;
    }

    for (size_t i = first_nonphi; i < blk.instrs.size(); ++i) {
      const Instruction& in = blk.instrs[i];
      if (in.op == Opcode::Phi)
        return trap(Trap::BadProgram, "phi after non-phi in block " + blk.label);
      if (r.steps >= fuel) return trap(Trap::FuelExhausted, "fuel exhausted");
      ++r.steps;
      Scalar a, b, c;
      switch (in.op) {
        case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::IAnd:
        case Opcode::IOr: case Opcode::IXor: case Opcode::Shl: case Opcode::Shr: {
          if (!eval(in.operands[0], &a) || !eval(in.operands[1], &b))
            return trap(Trap::BadProgram, "undefined operand at %" + in.result);
          int32_t x = a.i, y = b.i, z = 0;
          switch (in.op) {
            case Opcode::IAdd: z = wrap_add(x, y); break;
            case Opcode::ISub: z = wrap_sub(x, y); break;
            case Opcode::IMul: z = wrap_mul(x, y); break;
            case Opcode::IAnd: z = x & y; break;
            case Opcode::IOr: z = x | y; break;
            case Opcode::IXor: z = x ^ y; break;
            case Opcode::Shl:
              z = static_cast<int32_t>(static_cast<uint32_t>(x) << (y & 31));
              break;
            case Opcode::Shr: z = x >> (y & 31); break;
            default: break;
          }
          env[in.result] = Scalar::int32(z);
          break;
        }
        case Opcode::ICmp: {
          if (!eval(in.operands[0], &a) || !eval(in.operands[1], &b))
            return trap(Trap::BadProgram, "undefined operand at %" + in.result);
          bool t = false;
          switch (in.cmp) {
            case CmpKind::Eq: t = a.i == b.i; break;
            case CmpKind::Ne: t = a.i != b.i; break;
            case CmpKind::Slt: t = a.i < b.i; break;
            case CmpKind::Sle: t = a.i <= b.i; break;
            case CmpKind::Sgt: t = a.i > b.i; break;
            case CmpKind::Sge: t = a.i >= b.i; break;
          }
          env[in.result] = Scalar::int32(t ? 1 : 0);
          break;
        }
        case Opcode::FAdd: case Opcode::FMul: case Opcode::FDiv: {
          if (!eval(in.operands[0], &a) || !eval(in.operands[1], &b))
            return trap(Trap::BadProgram, "undefined operand at %" + in.result);
          float x = a.f, y = b.f, z = 0;
          if (in.op == Opcode::FAdd) z = x + y;
          else if (in.op == Opcode::FMul) z = x * y;
          else {
            if (y == 0.0f) return trap(Trap::DivByZero, "fdiv by zero at %" + in.result);
            z = x / y;
          }
          env[in.result] = Scalar::f32(z);
          break;
        }
        case Opcode::Select: {
          if (!eval(in.operands[0], &a) || !eval(in.operands[1], &b) ||
              !eval(in.operands[2], &c))
            return trap(Trap::BadProgram, "undefined operand at %" + in.result);
          env[in.result] = a.i != 0 ? b : c;
          break;
        }
        case Opcode::Mov: case Opcode::Const: {
          if (!eval(in.operands[0], &a))
            return trap(Trap::BadProgram, "undefined operand at %" + in.result);
          env[in.result] = a;
          break;
        }
        case Opcode::Load: {
          if (!eval(in.operands[0], &a))
            return trap(Trap::BadProgram, "undefined address at %" + in.result);
          const MemSpace& sp = p.spaces[in.space];
          if (a.i < 0 || a.i >= sp.extent)
            return trap(Trap::OutOfBounds, "load " + sp.name + "[" + std::to_string(a.i) +
                                               "] outside extent " + std::to_string(sp.extent));
          if (record_trace) r.trace.push_back({in.space, a.i, false});
          env[in.result] = mem.read(in.space, a.i);
          break;
        }
        case Opcode::Store: {
          if (!eval(in.operands[0], &a) || !eval(in.operands[1], &b))
            return trap(Trap::BadProgram, "undefined operand in store");
          const MemSpace& sp = p.spaces[in.space];
          if (a.i < 0 || a.i >= sp.extent)
            return trap(Trap::OutOfBounds, "store " + sp.name + "[" + std::to_string(a.i) +
                                               "] outside extent " + std::to_string(sp.extent));
          if (record_trace) r.trace.push_back({in.space, a.i, true});
          mem.write(in.space, a.i, b);
          break;
        }
        case Opcode::Push: case Opcode::Pop:
          return trap(Trap::BadProgram, "channel op in sequential execution");
        case Opcode::Br: {
          if (!eval(in.operands[0], &a))
            return trap(Trap::BadProgram, "undefined branch condition");
          int next = p.block_index(a.i != 0 ? in.target_t : in.target_f);
          if (next < 0) return trap(Trap::BadProgram, "branch to unknown block");
          prev_block = block;
          block = next;
          goto next_block;
        }
        case Opcode::Jmp: {
          int next = p.block_index(in.target_t);
          if (next < 0) return trap(Trap::BadProgram, "jump to unknown block");
          prev_block = block;
          block = next;
          goto next_block;
        }
        case Opcode::Ret: {
          if (!eval(in.operands[0], &a))
            return trap(Trap::BadProgram, "undefined return value");
          r.has_ret = true;
          r.ret = a;
          return r;
        }
        case Opcode::Phi:
          break;  // handled above
      }
    }
    return trap(Trap::BadProgram, "block " + blk.label + " fell through");
  next_block:;
  }
}

}  // namespace dfp
