#include "dfp/ir.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "dfp/cfg.hpp"

namespace dfp {

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::IAdd: return "iadd";
    case Opcode::ISub: return "isub";
    case Opcode::IMul: return "imul";
    case Opcode::ICmp: return "icmp";
    case Opcode::IAnd: return "iand";
    case Opcode::IOr: return "ior";
    case Opcode::IXor: return "ixor";
    case Opcode::Shl: return "shl";
    case Opcode::Shr: return "shr";
    case Opcode::FAdd: return "fadd";
    case Opcode::FMul: return "fmul";
    case Opcode::FDiv: return "fdiv";
    case Opcode::Select: return "select";
    case Opcode::Phi: return "phi";
    case Opcode::Mov: return "mov";
    case Opcode::Const: return "const";
    case Opcode::Load: return "load";
    case Opcode::Store: return "store";
    case Opcode::Push: return "push";
    case Opcode::Pop: return "pop";
    case Opcode::Br: return "br";
    case Opcode::Jmp: return "jmp";
    case Opcode::Ret: return "ret";
  }
  return "?";
}

const char* cmp_kind_name(CmpKind k) {
  switch (k) {
    case CmpKind::Eq: return "eq";
    case CmpKind::Ne: return "ne";
    case CmpKind::Slt: return "slt";
    case CmpKind::Sle: return "sle";
    case CmpKind::Sgt: return "sgt";
    case CmpKind::Sge: return "sge";
  }
  return "?";
}

bool is_terminator(Opcode op) {
  return op == Opcode::Br || op == Opcode::Jmp || op == Opcode::Ret;
}
bool is_control(Opcode op) { return is_terminator(op); }
bool is_memory(Opcode op) { return op == Opcode::Load || op == Opcode::Store; }

uint32_t Scalar::bits() const {
  uint32_t b;
  std::memcpy(&b, &i, 4);
  return b;
}

bool Operand::operator==(const Operand& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Value: return name == o.name;
    case Kind::IntLit: return ival == o.ival;
    case Kind::FloatLit: {
      uint32_t a, b;
      std::memcpy(&a, &fval, 4);
      std::memcpy(&b, &o.fval, 4);
      return a == b;
    }
  }
  return false;
}

int Program::space_index(const std::string& n) const {
  for (size_t i = 0; i < spaces.size(); ++i)
    if (spaces[i].name == n) return static_cast<int>(i);
  return -1;
}

int Program::block_index(const std::string& label) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == label) return static_cast<int>(i);
  return -1;
}

LatencyTable LatencyTable::defaults() {
  LatencyTable t;
  for (Opcode op : {Opcode::IAdd, Opcode::ISub, Opcode::IMul, Opcode::ICmp,
                    Opcode::IAnd, Opcode::IOr, Opcode::IXor, Opcode::Shl,
                    Opcode::Shr, Opcode::Select, Opcode::Phi, Opcode::Mov,
                    Opcode::Const, Opcode::Load, Opcode::Store, Opcode::Push,
                    Opcode::Pop})
    t.entries[op] = {1, true};
  t.entries[Opcode::FAdd] = {4, true};
  t.entries[Opcode::FMul] = {4, true};
  t.entries[Opcode::FDiv] = {16, false};
  return t;
}

OpTiming opcode_latency(Opcode op, const LatencyTable& table) {
  auto it = table.entries.find(op);
  if (it == table.entries.end())
    throw std::out_of_range(std::string("no latency entry for ") + opcode_name(op));
  return it->second;
}

// --- printing ----------------------------------------------------------

namespace {

std::string float_text(float f) {
  // Shortest round-trip form, with a forced decimal point so the parser
  // keeps the literal a float.
  char buf[64];
  snprintf(buf, sizeof buf, "%.9g", static_cast<double>(f));
  std::string s(buf);
  if (s.find_first_of(".eEnN") == std::string::npos) s += ".0";
  return s;
}

std::string operand_text(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Value: return "%" + o.name;
    case Operand::Kind::IntLit: return std::to_string(o.ival);
    case Operand::Kind::FloatLit: return float_text(o.fval);
  }
  return "?";
}

void print_instr(std::ostream& os, const Program& p, const Instruction& in) {
  switch (in.op) {
    case Opcode::Load:
      os << "%" << in.result << " = load " << p.spaces[in.space].name << "["
         << operand_text(in.operands[0]) << "]";
      return;
    case Opcode::Store:
      os << "store " << p.spaces[in.space].name << "[" << operand_text(in.operands[0])
         << "], " << operand_text(in.operands[1]);
      return;
    case Opcode::Phi: {
      os << "%" << in.result << " = phi [";
      for (size_t i = 0; i < in.incoming.size(); ++i) {
        if (i) os << ", ";
        os << in.incoming[i].pred << ": " << operand_text(in.incoming[i].value);
      }
      os << "]";
      return;
    }
    case Opcode::Push:
      os << "push ch" << in.channel << ", " << operand_text(in.operands[0]);
      return;
    case Opcode::Pop:
      os << "%" << in.result << " = pop ch" << in.channel;
      return;
    case Opcode::Br:
      os << "br " << operand_text(in.operands[0]) << ", " << in.target_t << ", "
         << in.target_f;
      return;
    case Opcode::Jmp:
      os << "jmp " << in.target_t;
      return;
    case Opcode::Ret:
      os << "ret " << operand_text(in.operands[0]);
      return;
    case Opcode::ICmp:
      os << "%" << in.result << " = icmp." << cmp_kind_name(in.cmp) << " "
         << operand_text(in.operands[0]) << ", " << operand_text(in.operands[1]);
      return;
    default: {
      os << "%" << in.result << " = " << opcode_name(in.op);
      for (size_t i = 0; i < in.operands.size(); ++i)
        os << (i ? ", " : " ") << operand_text(in.operands[i]);
      return;
    }
  }
}

}  // namespace

std::string print_ir(const Program& p) {
  std::ostringstream os;
  os << (p.channel_ops_allowed ? "stage " : "func ") << p.name << "(";
  for (size_t i = 0; i < p.args.size(); ++i) os << (i ? ", " : "") << p.args[i];
  os << ") {\n";
  for (const MemSpace& s : p.spaces) {
    os << "  space " << s.name << " elem=" << s.element_width << " extent=" << s.extent;
    if (s.elem_ty == Ty::F32) os << " float";
    if (s.readonly()) os << " readonly";
    if (s.no_loop_carried()) os << " no_loop_carried";
    if (s.stream()) os << " stream";
    if (s.random()) os << " random";
    os << "\n";
  }
  for (const Block& b : p.blocks) {
    os << "  block " << b.label << ":\n";
    for (const Instruction& in : b.instrs) {
      os << "    ";
      print_instr(os, p, in);
      os << "\n";
    }
  }
  os << "}\n";
  return os.str();
}

// --- validation --------------------------------------------------------

namespace {

struct TypeVar {
  int parent;
  int ty;  // -1 unknown, else Ty
};

class TypeSolver {
 public:
  int var_of(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(vars_.size());
    vars_.push_back({id, -1});
    index_[name] = id;
    return id;
  }
  int find(int v) {
    while (vars_[v].parent != v) v = vars_[v].parent = vars_[vars_[v].parent].parent;
    return v;
  }
  bool bind(int v, Ty t) {
    v = find(v);
    if (vars_[v].ty == -1) {
      vars_[v].ty = static_cast<int>(t);
      return true;
    }
    return vars_[v].ty == static_cast<int>(t);
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return true;
    if (vars_[a].ty != -1 && vars_[b].ty != -1 && vars_[a].ty != vars_[b].ty) return false;
    if (vars_[a].ty == -1) std::swap(a, b);
    vars_[b].parent = a;
    return true;
  }
  Ty resolved(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) return Ty::I32;
    int v = find(it->second);
    return vars_[v].ty == -1 ? Ty::I32 : static_cast<Ty>(vars_[v].ty);
  }
  const std::map<std::string, int>& names() const { return index_; }

 private:
  std::vector<TypeVar> vars_;
  std::map<std::string, int> index_;
};

struct Arity {
  int noperands;
  bool has_result;
};

bool opcode_arity(Opcode op, Arity* a) {
  switch (op) {
    case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::IAnd:
    case Opcode::IOr: case Opcode::IXor: case Opcode::Shl: case Opcode::Shr:
    case Opcode::FAdd: case Opcode::FMul: case Opcode::FDiv: case Opcode::ICmp:
      *a = {2, true}; return true;
    case Opcode::Select: *a = {3, true}; return true;
    case Opcode::Mov: *a = {1, true}; return true;
    case Opcode::Const: *a = {1, true}; return true;
    case Opcode::Load: *a = {1, true}; return true;
    case Opcode::Store: *a = {2, false}; return true;
    case Opcode::Phi: *a = {0, true}; return true;
    case Opcode::Push: *a = {1, false}; return true;
    case Opcode::Pop: *a = {0, true}; return true;
    case Opcode::Br: *a = {1, false}; return true;
    case Opcode::Jmp: *a = {0, false}; return true;
    case Opcode::Ret: *a = {1, false}; return true;
  }
  return false;
}

std::string instr_ref(const Program& p, int b, int i) {
  const Instruction& in = p.blocks[b].instrs[i];
  std::string where = p.blocks[b].label + "." + std::to_string(i);
  if (in.has_result()) where += " (%" + in.result + ")";
  else where += " (" + std::string(opcode_name(in.op)) + ")";
  return where;
}

}  // namespace

std::map<std::string, Ty> infer_types(const Program& p, std::vector<std::string>* violations) {
  TypeSolver solver;
  auto fail = [&](const std::string& m) {
    if (violations) violations->push_back(m);
  };
  for (const std::string& a : p.args) solver.var_of(a);

  auto constrain_operand = [&](const Operand& o, int want_var, const std::string& where) {
    // want_var < 0 encodes a concrete type: -1 I32, -2 F32, -3 unconstrained.
    if (o.is_value()) {
      int v = solver.var_of(o.name);
      if (want_var == -1) {
        if (!solver.bind(v, Ty::I32)) fail(where + ": %" + o.name + " used as integer elsewhere float");
      } else if (want_var == -2) {
        if (!solver.bind(v, Ty::F32)) fail(where + ": %" + o.name + " used as float elsewhere integer");
      } else if (want_var >= 0) {
        if (!solver.unite(v, want_var)) fail(where + ": type mismatch on %" + o.name);
      }
    } else if (o.kind == Operand::Kind::IntLit) {
      if (want_var == -2) fail(where + ": integer literal where float expected");
      if (want_var >= 0 && !solver.bind(want_var, Ty::I32)) fail(where + ": integer literal where float expected");
    } else {
      if (want_var == -1) fail(where + ": float literal where integer expected");
      if (want_var >= 0 && !solver.bind(want_var, Ty::F32)) fail(where + ": float literal where integer expected");
    }
  };

  for (size_t b = 0; b < p.blocks.size(); ++b) {
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      std::string where = instr_ref(p, static_cast<int>(b), static_cast<int>(i));
      int res = in.has_result() ? solver.var_of(in.result) : -3;
      switch (in.op) {
        case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::IAnd:
        case Opcode::IOr: case Opcode::IXor: case Opcode::Shl: case Opcode::Shr:
          solver.bind(res, Ty::I32);
          constrain_operand(in.operands[0], -1, where);
          constrain_operand(in.operands[1], -1, where);
          break;
        case Opcode::ICmp:
          solver.bind(res, Ty::I32);
          constrain_operand(in.operands[0], -1, where);
          constrain_operand(in.operands[1], -1, where);
          break;
        case Opcode::FAdd: case Opcode::FMul: case Opcode::FDiv:
          solver.bind(res, Ty::F32);
          constrain_operand(in.operands[0], -2, where);
          constrain_operand(in.operands[1], -2, where);
          break;
        case Opcode::Select:
          constrain_operand(in.operands[0], -1, where);
          constrain_operand(in.operands[1], res, where);
          constrain_operand(in.operands[2], res, where);
          break;
        case Opcode::Mov:
          constrain_operand(in.operands[0], res, where);
          break;
        case Opcode::Const:
          constrain_operand(in.operands[0], res, where);
          break;
        case Opcode::Phi:
          for (const PhiIncoming& inc : in.incoming) constrain_operand(inc.value, res, where);
          break;
        case Opcode::Load:
          if (in.space >= 0) {
            if (!solver.bind(res, p.spaces[in.space].elem_ty))
              fail(where + ": load result type conflicts with space " + p.spaces[in.space].name);
            constrain_operand(in.operands[0], -1, where);
          }
          break;
        case Opcode::Store:
          if (in.space >= 0) {
            constrain_operand(in.operands[0], -1, where);
            constrain_operand(in.operands[1],
                              p.spaces[in.space].elem_ty == Ty::F32 ? -2 : -1, where);
          }
          break;
        case Opcode::Push:
          constrain_operand(in.operands[0], -3, where);
          break;
        case Opcode::Pop:
          break;  // constrained by uses
        case Opcode::Br:
          constrain_operand(in.operands[0], -1, where);
          break;
        case Opcode::Jmp:
          break;
        case Opcode::Ret:
          constrain_operand(in.operands[0], -3, where);
          break;
      }
    }
  }
  std::map<std::string, Ty> out;
  for (const auto& [name, var] : solver.names()) out[name] = solver.resolved(name);
  return out;
}

std::vector<std::string> validate(const Program& p) {
  std::vector<std::string> v;
  if (p.blocks.empty()) {
    v.push_back("program has no blocks");
    return v;
  }
  if (p.name.empty()) v.push_back("program has no name");

  // Spaces.
  for (size_t i = 0; i < p.spaces.size(); ++i) {
    const MemSpace& s = p.spaces[i];
    for (size_t j = 0; j < i; ++j)
      if (p.spaces[j].name == s.name) v.push_back("space " + s.name + ": duplicate name");
    if (s.extent <= 0) v.push_back("space " + s.name + ": extent must be positive");
    if (s.element_width != 1 && s.element_width != 2 && s.element_width != 4 &&
        s.element_width != 8)
      v.push_back("space " + s.name + ": element width must be 1, 2, 4 or 8 bytes");
    if (s.elem_ty == Ty::F32 && s.element_width != 4)
      v.push_back("space " + s.name + ": float spaces use 4-byte elements");
    if (s.stream() && s.random())
      v.push_back("space " + s.name + ": stream and random are exclusive");
  }

  // Block labels unique and nonempty; terminator placement.
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    const Block& blk = p.blocks[b];
    for (size_t j = 0; j < b; ++j)
      if (p.blocks[j].label == blk.label) v.push_back("block " + blk.label + ": duplicate label");
    if (blk.instrs.empty()) {
      v.push_back("block " + blk.label + ": empty block");
      continue;
    }
    for (size_t i = 0; i < blk.instrs.size(); ++i) {
      bool last = i + 1 == blk.instrs.size();
      if (is_terminator(blk.instrs[i].op) != last)
        v.push_back(instr_ref(p, b, i) + (last ? ": block must end with a terminator"
                                               : ": terminator before end of block"));
    }
  }
  if (!v.empty()) return v;  // structural problems make later checks misfire

  // Arity, targets, opcode-specific shape.
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    bool nonphi_seen = false;
    bool saw_phi_after_nonphi = false;
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      std::string where = instr_ref(p, b, i);
      Arity a;
      if (!opcode_arity(in.op, &a)) {
        v.push_back(where + ": unknown opcode");
        continue;
      }
      if (in.op == Opcode::Phi) {
        if (nonphi_seen && !saw_phi_after_nonphi) {
          v.push_back(where + ": phi must lead its block");
          saw_phi_after_nonphi = true;
        }
      } else {
        nonphi_seen = true;
      }
      if (static_cast<int>(in.operands.size()) != a.noperands)
        v.push_back(where + ": wrong operand count for " + opcode_name(in.op));
      if (a.has_result != in.has_result())
        v.push_back(where + ": " + (a.has_result ? "missing result" : "unexpected result"));
      if (is_memory(in.op)) {
        if (in.space < 0 || in.space >= static_cast<int>(p.spaces.size())) {
          v.push_back(where + ": references undeclared space");
        } else if (in.op == Opcode::Store && p.spaces[in.space].readonly()) {
          v.push_back(where + ": store to readonly space " + p.spaces[in.space].name);
        }
      }
      if ((in.op == Opcode::Push || in.op == Opcode::Pop)) {
        if (!p.channel_ops_allowed)
          v.push_back(where + ": channel op outside a stage program");
        if (in.channel < 0) v.push_back(where + ": bad channel id");
      }
      if (p.channel_ops_allowed && in.op == Opcode::Phi)
        v.push_back(where + ": phi in a stage program");
      if (in.op == Opcode::Br || in.op == Opcode::Jmp) {
        if (p.block_index(in.target_t) < 0)
          v.push_back(where + ": branch target " + in.target_t + " not a block");
        if (in.op == Opcode::Br && p.block_index(in.target_f) < 0)
          v.push_back(where + ": branch target " + in.target_f + " not a block");
      }
    }
  }
  if (!v.empty()) return v;

  Cfg cfg = build_cfg(p);

  // Definitions: names defined once (SSA), except stage-program movs and
  // args never redefined. Record def sites.
  std::map<std::string, std::pair<int, int>> def_site;  // first def
  std::map<std::string, int> def_count;
  std::map<std::string, bool> only_mov_defs;
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction& in = p.blocks[b].instrs[i];
      if (!in.has_result()) continue;
      std::string where = instr_ref(p, b, i);
      if (std::find(p.args.begin(), p.args.end(), in.result) != p.args.end())
        v.push_back(where + ": redefines argument %" + in.result);
      auto [it, fresh] = def_site.insert({in.result, {static_cast<int>(b), static_cast<int>(i)}});
      (void)it;
      def_count[in.result]++;
      auto& flag = only_mov_defs.emplace(in.result, true).first->second;
      if (in.op != Opcode::Mov) flag = false;
      if (!fresh && !p.channel_ops_allowed)
        v.push_back(where + ": SSA violation, %" + in.result + " defined more than once");
    }
  }
  if (p.channel_ops_allowed) {
    for (const auto& [name, n] : def_count)
      if (n > 1 && !only_mov_defs[name])
        v.push_back("%" + name + ": multiple definitions not all mov");
  }

  auto is_arg = [&](const std::string& n) {
    return std::find(p.args.begin(), p.args.end(), n) != p.args.end();
  };

  if (!p.channel_ops_allowed) {
    // SSA dominance: each use dominated by its definition; phi incomings
    // checked against the named predecessor block.
    auto check_use = [&](const std::string& name, int use_block, int use_idx,
                         const std::string& where, bool at_block_end) {
      if (is_arg(name)) return;
      auto it = def_site.find(name);
      if (it == def_site.end()) {
        v.push_back(where + ": use of undefined value %" + name);
        return;
      }
      auto [db, di] = it->second;
      bool ok;
      if (db == use_block)
        ok = at_block_end || di < use_idx;
      else
        ok = cfg.dominates(db, use_block);
      if (!ok) v.push_back(where + ": SSA dominance violation on %" + name);
    };
    for (size_t b = 0; b < p.blocks.size(); ++b) {
      for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
        const Instruction& in = p.blocks[b].instrs[i];
        std::string where = instr_ref(p, b, i);
        if (in.op == Opcode::Phi) {
          std::vector<int> preds = cfg.preds[b];
          if (in.incoming.size() != preds.size())
            v.push_back(where + ": phi incoming count differs from predecessor count");
          std::vector<char> seen(p.blocks.size(), 0);
          for (const PhiIncoming& inc : in.incoming) {
            int pb = p.block_index(inc.pred);
            if (pb < 0 || std::find(preds.begin(), preds.end(), pb) == preds.end()) {
              v.push_back(where + ": phi incoming block " + inc.pred + " is not a predecessor");
              continue;
            }
            if (seen[pb]) v.push_back(where + ": duplicate phi incoming for " + inc.pred);
            seen[pb] = 1;
            if (inc.value.is_value()) check_use(inc.value.name, pb, 0, where, true);
          }
          for (int pb : preds)
            if (pb >= 0 && !seen[pb])
              v.push_back(where + ": phi missing incoming for predecessor " + p.blocks[pb].label);
        } else {
          for (const Operand& o : in.operands)
            if (o.is_value()) check_use(o.name, static_cast<int>(b), static_cast<int>(i), where, false);
        }
      }
    }
  } else {
    // Stage programs: definite assignment. in[b] = intersection over preds
    // of out[p]; a use is legal when the name is assigned on every path.
    size_t nb = p.blocks.size();
    std::vector<std::vector<std::string>> gen(nb);
    for (size_t b = 0; b < nb; ++b)
      for (const Instruction& in : p.blocks[b].instrs)
        if (in.has_result()) gen[b].push_back(in.result);
    std::vector<std::map<std::string, char>> out(nb);
    std::vector<char> known(nb, 0);
    bool changed = true;
    auto intersect_preds = [&](size_t b, std::map<std::string, char>& acc) -> bool {
      bool any = false;
      bool first = true;
      for (int pb : cfg.preds[b]) {
        if (!known[pb]) continue;
        any = true;
        if (first) {
          acc = out[pb];
          first = false;
        } else {
          for (auto it = acc.begin(); it != acc.end();)
            it = out[pb].count(it->first) ? std::next(it) : acc.erase(it);
        }
      }
      return any;
    };
    while (changed) {
      changed = false;
      for (size_t b = 0; b < nb; ++b) {
        std::map<std::string, char> in_set;
        if (b != 0 && !intersect_preds(b, in_set) && !known[b]) continue;
        std::map<std::string, char> o = in_set;
        for (const std::string& g : gen[b]) o[g] = 1;
        if (!known[b] || o != out[b]) {
          out[b] = std::move(o);
          known[b] = 1;
          changed = true;
        }
      }
    }
    for (size_t b = 0; b < nb; ++b) {
      std::map<std::string, char> live;
      if (b != 0) intersect_preds(b, live);
      for (size_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
        const Instruction& in = p.blocks[b].instrs[i];
        std::string where = instr_ref(p, b, i);
        for (const Operand& o : in.operands) {
          if (!o.is_value() || is_arg(o.name)) continue;
          if (!def_count.count(o.name))
            v.push_back(where + ": use of undefined value %" + o.name);
          else if (!live.count(o.name))
            v.push_back(where + ": %" + o.name + " may be unassigned here");
        }
        if (in.has_result()) live[in.result] = 1;
      }
    }
  }

  infer_types(p, &v);
  return v;
}

// --- memory image ------------------------------------------------------

MemoryImage MemoryImage::for_program(const Program& p) {
  MemoryImage m;
  m.spaces.reserve(p.spaces.size());
  for (const MemSpace& s : p.spaces) {
    SpaceData d;
    d.ty = s.elem_ty;
    d.cells.assign(static_cast<size_t>(s.extent), 0);
    m.spaces.push_back(std::move(d));
  }
  return m;
}

Scalar MemoryImage::read(int space, int64_t addr) const {
  const SpaceData& d = spaces[space];
  uint32_t bits = d.cells[static_cast<size_t>(addr)];
  Scalar s;
  s.ty = d.ty;
  std::memcpy(&s.i, &bits, 4);
  return s;
}

void MemoryImage::write(int space, int64_t addr, Scalar v) {
  spaces[space].cells[static_cast<size_t>(addr)] = v.bits();
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
  const unsigned char* b = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t MemoryImage::digest() const {
  uint64_t h = 14695981039346656037ull;
  for (const SpaceData& d : spaces) {
    uint64_t ext = d.cells.size();
    h = fnv1a64(&ext, sizeof ext, h);
    if (!d.cells.empty()) h = fnv1a64(d.cells.data(), d.cells.size() * 4, h);
  }
  return h;
}

}  // namespace dfp
