#include <cctype>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "dfp/ir.hpp"

namespace dfp {

namespace {

enum class Tok { Ident, Value, Int, Float, Punct, End };

struct Token {
  Tok kind;
  std::string text;  // ident/value name or punct char
  int64_t ival = 0;
  float fval = 0;
  int line = 0;
};

class Lexer {
 public:
  Lexer(const std::string& src, std::vector<Diagnostic>* diags) : src_(src), diags_(diags) {
    tokenize();
  }
  const Token& peek(int ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Token next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Tok::End; }

 private:
  void tokenize() {
    int line = 1;
    size_t i = 0, n = src_.size();
    while (i < n) {
      char c = src_[i];
      if (c == '\n') { ++line; ++i; continue; }
      if (isspace(static_cast<unsigned char>(c))) { ++i; continue; }
      if (c == ';' || c == '#') {  // comment to end of line
        while (i < n && src_[i] != '\n') ++i;
        continue;
      }
      if (c == '%') {
        size_t j = i + 1;
        while (j < n && (isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) ++j;
        if (j == i + 1) {
          diags_->push_back({line, "stray '%'"});
          ++i;
          continue;
        }
        toks_.push_back({Tok::Value, src_.substr(i + 1, j - i - 1), 0, 0, line});
        i = j;
        continue;
      }
      if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t j = i;
        while (j < n && (isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) ++j;
        toks_.push_back({Tok::Ident, src_.substr(i, j - i), 0, 0, line});
        i = j;
        continue;
      }
      if (isdigit(static_cast<unsigned char>(c)) ||
          (c == '-' && i + 1 < n && isdigit(static_cast<unsigned char>(src_[i + 1])))) {
        size_t j = i + 1;
        bool is_float = false;
        while (j < n) {
          char d = src_[j];
          if (isdigit(static_cast<unsigned char>(d))) { ++j; continue; }
          if (d == '.' && j + 1 < n && isdigit(static_cast<unsigned char>(src_[j + 1]))) {
            is_float = true; ++j; continue;
          }
          if ((d == 'e' || d == 'E') && j + 1 < n &&
              (isdigit(static_cast<unsigned char>(src_[j + 1])) ||
               ((src_[j + 1] == '+' || src_[j + 1] == '-') && j + 2 < n &&
                isdigit(static_cast<unsigned char>(src_[j + 2]))))) {
            is_float = true;
            j += (src_[j + 1] == '+' || src_[j + 1] == '-') ? 2 : 1;
            continue;
          }
          break;
        }
        std::string text = src_.substr(i, j - i);
        Token t;
        t.line = line;
        if (is_float) {
          t.kind = Tok::Float;
          t.fval = std::strtof(text.c_str(), nullptr);
        } else {
          t.kind = Tok::Int;
          t.ival = std::strtoll(text.c_str(), nullptr, 10);
        }
        toks_.push_back(t);
        i = j;
        continue;
      }
      if (std::string("(){}[],:=.").find(c) != std::string::npos) {
        toks_.push_back({Tok::Punct, std::string(1, c), 0, 0, line});
        ++i;
        continue;
      }
      diags_->push_back({line, std::string("unexpected character '") + c + "'"});
      ++i;
    }
    toks_.push_back({Tok::End, "", 0, 0, line});
  }

  const std::string& src_;
  std::vector<Diagnostic>* diags_;
  std::vector<Token> toks_;
  size_t pos_ = 0;
};

const std::map<std::string, Opcode>& simple_ops() {
  static const std::map<std::string, Opcode> m = {
      {"iadd", Opcode::IAdd}, {"isub", Opcode::ISub}, {"imul", Opcode::IMul},
      {"iand", Opcode::IAnd}, {"ior", Opcode::IOr},   {"ixor", Opcode::IXor},
      {"shl", Opcode::Shl},   {"shr", Opcode::Shr},   {"fadd", Opcode::FAdd},
      {"fmul", Opcode::FMul}, {"fdiv", Opcode::FDiv}, {"select", Opcode::Select},
      {"mov", Opcode::Mov},   {"const", Opcode::Const}};
  return m;
}

class Parser {
 public:
  Parser(const std::string& src, std::vector<Diagnostic>* diags)
      : diags_(diags), lex_(src, diags) {}

  std::optional<Program> run() {
    Program p;
    Token kw = lex_.next();
    if (kw.kind != Tok::Ident || (kw.text != "func" && kw.text != "stage")) {
      error(kw.line, "expected 'func' or 'stage'");
      return std::nullopt;
    }
    p.channel_ops_allowed = (kw.text == "stage");
    Token name = lex_.next();
    if (name.kind != Tok::Ident) {
      error(name.line, "expected program name");
      return std::nullopt;
    }
    p.name = name.text;
    if (!expect_punct("(")) return std::nullopt;
    if (!is_punct(")")) {
      while (true) {
        Token a = lex_.next();
        if (a.kind != Tok::Ident) {
          error(a.line, "expected argument name");
          return std::nullopt;
        }
        p.args.push_back(a.text);
        if (is_punct(",")) { lex_.next(); continue; }
        break;
      }
    }
    if (!expect_punct(")")) return std::nullopt;
    if (!expect_punct("{")) return std::nullopt;

    while (lex_.peek().kind == Tok::Ident && lex_.peek().text == "space") parse_space(p);

    while (lex_.peek().kind == Tok::Ident && lex_.peek().text == "block") {
      if (!parse_block(p)) return std::nullopt;
    }
    if (!expect_punct("}")) return std::nullopt;
    if (!lex_.at_end()) error(lex_.peek().line, "trailing text after '}'");
    return diags_->empty() ? std::optional<Program>(std::move(p)) : std::nullopt;
  }

 private:
  void error(int line, const std::string& m) { diags_->push_back({line, m}); }

  bool is_punct(const char* c) const {
    return lex_.peek().kind == Tok::Punct && lex_.peek().text == c;
  }
  bool expect_punct(const char* c) {
    if (is_punct(c)) { lex_.next(); return true; }
    error(lex_.peek().line, std::string("expected '") + c + "'");
    return false;
  }
  // Resync after a bad instruction: skip to the next source line.
  void skip_line(int line) {
    while (!lex_.at_end() && lex_.peek().line == line) lex_.next();
  }

  void parse_space(Program& p) {
    lex_.next();  // 'space'
    Token name = lex_.next();
    if (name.kind != Tok::Ident) {
      error(name.line, "expected space name");
      skip_line(name.line);
      return;
    }
    MemSpace s;
    s.name = name.text;
    bool have_extent = false;
    while (lex_.peek().kind == Tok::Ident) {
      std::string attr = lex_.peek().text;
      if (attr == "elem" || attr == "extent") {
        lex_.next();
        if (!expect_punct("=")) { skip_line(name.line); return; }
        Token n = lex_.next();
        if (n.kind != Tok::Int) {
          error(n.line, "expected integer after " + attr + "=");
          skip_line(name.line);
          return;
        }
        if (attr == "elem") s.element_width = static_cast<int>(n.ival);
        else { s.extent = n.ival; have_extent = true; }
      } else if (attr == "float") {
        lex_.next();
        s.elem_ty = Ty::F32;
      } else if (attr == "readonly") {
        lex_.next();
        s.annotations |= SpaceAnnot::kReadonly;
      } else if (attr == "no_loop_carried") {
        lex_.next();
        s.annotations |= SpaceAnnot::kNoLoopCarried;
      } else if (attr == "stream") {
        lex_.next();
        s.annotations |= SpaceAnnot::kStream;
      } else if (attr == "random") {
        lex_.next();
        s.annotations |= SpaceAnnot::kRandom;
      } else {
        break;  // next declaration
      }
    }
    if (!have_extent) error(name.line, "space " + s.name + " missing extent=");
    p.spaces.push_back(std::move(s));
  }

  bool parse_block(Program& p) {
    lex_.next();  // 'block'
    Token name = lex_.next();
    if (name.kind != Tok::Ident) {
      error(name.line, "expected block label");
      return false;
    }
    if (!expect_punct(":")) return false;
    Block b;
    b.label = name.text;
    while (true) {
      const Token& t = lex_.peek();
      if (t.kind == Tok::Punct && t.text == "}") break;
      if (t.kind == Tok::Ident && (t.text == "block" || t.text == "space")) break;
      if (t.kind == Tok::End) break;
      Instruction in;
      if (parse_instr(p, in)) b.instrs.push_back(std::move(in));
      else skip_line(t.line);
    }
    p.blocks.push_back(std::move(b));
    return true;
  }

  bool parse_operand(Operand& o) {
    Token t = lex_.next();
    switch (t.kind) {
      case Tok::Value: o = Operand::value(t.text); return true;
      case Tok::Int: o = Operand::lit(static_cast<int32_t>(t.ival)); return true;
      case Tok::Float: o = Operand::lit(t.fval); return true;
      default:
        error(t.line, "expected operand");
        return false;
    }
  }

  bool parse_channel(int& ch) {
    Token t = lex_.next();
    if (t.kind == Tok::Ident && t.text.size() > 2 && t.text.compare(0, 2, "ch") == 0 &&
        t.text.find_first_not_of("0123456789", 2) == std::string::npos) {
      ch = std::atoi(t.text.c_str() + 2);
      return true;
    }
    error(t.line, "expected channel (chN)");
    return false;
  }

  bool parse_instr(Program& p, Instruction& in) {
    Token first = lex_.next();
    in.line = first.line;
    if (first.kind == Tok::Value) {
      in.result = first.text;
      if (!expect_punct("=")) return false;
      Token op = lex_.next();
      if (op.kind != Tok::Ident) {
        error(op.line, "expected opcode");
        return false;
      }
      if (auto it = simple_ops().find(op.text); it != simple_ops().end()) {
        in.op = it->second;
        int arity = in.op == Opcode::Select ? 3
                    : (in.op == Opcode::Mov || in.op == Opcode::Const) ? 1 : 2;
        for (int i = 0; i < arity; ++i) {
          if (i && !expect_punct(",")) return false;
          Operand o;
          if (!parse_operand(o)) return false;
          in.operands.push_back(o);
        }
        return true;
      }
      if (op.text == "icmp") {
        in.op = Opcode::ICmp;
        if (!expect_punct(".")) return false;
        Token k = lex_.next();
        if (k.text == "eq") in.cmp = CmpKind::Eq;
        else if (k.text == "ne") in.cmp = CmpKind::Ne;
        else if (k.text == "slt") in.cmp = CmpKind::Slt;
        else if (k.text == "sle") in.cmp = CmpKind::Sle;
        else if (k.text == "sgt") in.cmp = CmpKind::Sgt;
        else if (k.text == "sge") in.cmp = CmpKind::Sge;
        else { error(k.line, "unknown compare kind"); return false; }
        Operand a, b;
        if (!parse_operand(a) || !expect_punct(",") || !parse_operand(b)) return false;
        in.operands = {a, b};
        return true;
      }
      if (op.text == "phi") {
        in.op = Opcode::Phi;
        if (!expect_punct("[")) return false;
        if (!is_punct("]")) {
          while (true) {
            Token pred = lex_.next();
            if (pred.kind != Tok::Ident) { error(pred.line, "expected predecessor label"); return false; }
            if (!expect_punct(":")) return false;
            Operand v;
            if (!parse_operand(v)) return false;
            in.incoming.push_back({pred.text, v});
            if (is_punct(",")) { lex_.next(); continue; }
            break;
          }
        }
        return expect_punct("]");
      }
      if (op.text == "load") {
        in.op = Opcode::Load;
        Token sp = lex_.next();
        if (sp.kind != Tok::Ident) { error(sp.line, "expected space name"); return false; }
        in.space = p.space_index(sp.text);
        if (in.space < 0) error(sp.line, "undeclared space " + sp.text);
        if (!expect_punct("[")) return false;
        Operand a;
        if (!parse_operand(a)) return false;
        in.operands.push_back(a);
        return expect_punct("]");
      }
      if (op.text == "pop") {
        in.op = Opcode::Pop;
        return parse_channel(in.channel);
      }
      error(op.line, "unknown opcode " + op.text);
      return false;
    }

    if (first.kind != Tok::Ident) {
      error(first.line, "expected instruction");
      return false;
    }
    if (first.text == "store") {
      in.op = Opcode::Store;
      Token sp = lex_.next();
      if (sp.kind != Tok::Ident) { error(sp.line, "expected space name"); return false; }
      in.space = p.space_index(sp.text);
      if (in.space < 0) error(sp.line, "undeclared space " + sp.text);
      if (!expect_punct("[")) return false;
      Operand a;
      if (!parse_operand(a)) return false;
      if (!expect_punct("]") || !expect_punct(",")) return false;
      Operand v;
      if (!parse_operand(v)) return false;
      in.operands = {a, v};
      return true;
    }
    if (first.text == "push") {
      in.op = Opcode::Push;
      if (!parse_channel(in.channel)) return false;
      if (!expect_punct(",")) return false;
      Operand v;
      if (!parse_operand(v)) return false;
      in.operands = {v};
      return true;
    }
    if (first.text == "br") {
      in.op = Opcode::Br;
      Operand c;
      if (!parse_operand(c)) return false;
      in.operands = {c};
      if (!expect_punct(",")) return false;
      Token t = lex_.next();
      if (t.kind != Tok::Ident) { error(t.line, "expected branch target"); return false; }
      in.target_t = t.text;
      if (!expect_punct(",")) return false;
      Token f = lex_.next();
      if (f.kind != Tok::Ident) { error(f.line, "expected branch target"); return false; }
      in.target_f = f.text;
      return true;
    }
    if (first.text == "jmp") {
      in.op = Opcode::Jmp;
      Token t = lex_.next();
      if (t.kind != Tok::Ident) { error(t.line, "expected jump target"); return false; }
      in.target_t = t.text;
      return true;
    }
    if (first.text == "ret") {
      in.op = Opcode::Ret;
      Operand v;
      if (!parse_operand(v)) return false;
      in.operands = {v};
      return true;
    }
    error(first.line, "unknown instruction " + first.text);
    return false;
  }

  std::vector<Diagnostic>* diags_;
  Lexer lex_;
};

}  // namespace

ParseResult parse_ir(const std::string& text) {
  ParseResult r;
  Parser parser(text, &r.diagnostics);
  r.program = parser.run();
  return r;
}

ParseResult parse_stage_ir(const std::string& text) {
  ParseResult r = parse_ir(text);
  if (r.program) r.program->channel_ops_allowed = true;
  return r;
}

}  // namespace dfp
