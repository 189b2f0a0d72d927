// config.cpp - flat key=value run configuration: parsing, validation, and
// the canonical resolved-text form embedded in every report.

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "dfp/run.hpp"

namespace dfp {
namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_i64(const std::string& v, int64_t& out) {
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && p == last && !v.empty();
}

bool parse_u64(const std::string& v, uint64_t& out) {
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && p == last && !v.empty();
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0") {
    out = false;
    return true;
  }
  return false;
}

struct Key {
  std::string name;
  std::function<bool(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Key str_key(const char* name, std::string RunConfig::* field) {
  return {name,
          [field](RunConfig& c, const std::string& v) {
            c.*field = v;
            return true;
          },
          [field](const RunConfig& c) { return c.*field; }};
}

Key bool_key(const char* name, bool RunConfig::* field) {
  return {name,
          [field](RunConfig& c, const std::string& v) { return parse_bool(v, c.*field); },
          [field](const RunConfig& c) { return c.*field ? "true" : "false"; }};
}

// Integer field reached through an accessor, so one helper covers plain,
// nested (sim.*, mem.*) and differently-typed fields.
template <typename T>
Key int_key(const char* name, std::function<T&(RunConfig&)> ref) {
  return {name,
          [ref](RunConfig& c, const std::string& v) {
            int64_t x = 0;
            if (!parse_i64(v, x)) return false;
            ref(c) = static_cast<T>(x);
            return ref(c) == x;  // reject out-of-range narrowing
          },
          // The accessor only reads on this path.
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

// Opcodes with latency table entries, in the order entries are reported.
const std::vector<Opcode>& timed_opcodes() {
  static const std::vector<Opcode> ops = {
      Opcode::IAdd, Opcode::ISub, Opcode::IMul, Opcode::ICmp, Opcode::IAnd,
      Opcode::IOr,  Opcode::IXor, Opcode::Shl,  Opcode::Shr,  Opcode::FAdd,
      Opcode::FMul, Opcode::FDiv, Opcode::Select, Opcode::Phi, Opcode::Mov,
      Opcode::Const, Opcode::Load, Opcode::Store, Opcode::Push, Opcode::Pop};
  return ops;
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> t;
    t.push_back(str_key("kernel", &RunConfig::kernel));
    t.push_back(str_key("ir_file", &RunConfig::ir_file));
    t.push_back(str_key("scale", &RunConfig::scale));
    t.push_back({"seed",
                 [](RunConfig& c, const std::string& v) { return parse_u64(v, c.seed); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.push_back(str_key("out", &RunConfig::out_dir));
    t.push_back({"engines",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "monolithic") {
                     c.run_monolithic = true;
                     c.run_pipeline = false;
                   } else if (v == "pipeline") {
                     c.run_monolithic = false;
                     c.run_pipeline = true;
                   } else if (v == "both") {
                     c.run_monolithic = true;
                     c.run_pipeline = true;
                   } else {
                     return false;
                   }
                   return true;
                 },
                 [](const RunConfig& c) -> std::string {
                   if (c.run_monolithic && c.run_pipeline) return "both";
                   if (c.run_monolithic) return "monolithic";
                   if (c.run_pipeline) return "pipeline";
                   return "none";
                 }});
    t.push_back({"trace",
                 [](RunConfig& c, const std::string& v) { return parse_bool(v, c.sim.trace); },
                 [](const RunConfig& c) { return c.sim.trace ? "true" : "false"; }});
    t.push_back(bool_key("dump_cdfg", &RunConfig::dump_cdfg));
    t.push_back(int_key<int>("fifo_depth", [](RunConfig& c) -> int& { return c.sim.fifo_depth; }));
    t.push_back(int_key<int>("drain_cycles", [](RunConfig& c) -> int& { return c.sim.drain_cycles; }));
    t.push_back(int_key<int64_t>("max_cycles", [](RunConfig& c) -> int64_t& { return c.sim.max_cycles; }));
    t.push_back(int_key<int64_t>("trace_limit", [](RunConfig& c) -> int64_t& { return c.sim.trace_limit; }));
    t.push_back(int_key<int>("max_dup_nodes", [](RunConfig& c) -> int& { return c.part.max_dup_nodes; }));
    t.push_back(int_key<int>("mem.hit_latency", [](RunConfig& c) -> int& { return c.sim.mem.hit_latency; }));
    t.push_back(int_key<int>("mem.miss_latency", [](RunConfig& c) -> int& { return c.sim.mem.miss_latency; }));
    t.push_back(int_key<int>("mem.line_bytes", [](RunConfig& c) -> int& { return c.sim.mem.line_bytes; }));
    t.push_back(int_key<int>("mem.cache_bytes", [](RunConfig& c) -> int& { return c.sim.mem.cache_bytes; }));
    t.push_back(int_key<int>("mem.ways", [](RunConfig& c) -> int& { return c.sim.mem.ways; }));
    t.push_back(int_key<int>("mem.max_outstanding",
                             [](RunConfig& c) -> int& { return c.sim.mem.max_outstanding; }));
    t.push_back(int_key<int>("mem.burst_max", [](RunConfig& c) -> int& { return c.sim.mem.burst_max; }));
    t.push_back({"mem.cache_enabled",
                 [](RunConfig& c, const std::string& v) { return parse_bool(v, c.sim.mem.cache_enabled); },
                 [](const RunConfig& c) { return c.sim.mem.cache_enabled ? "true" : "false"; }});
    for (Opcode op : timed_opcodes()) {
      std::string base = std::string("latency.") + opcode_name(op);
      t.push_back({base,
                   [op](RunConfig& c, const std::string& v) {
                     int64_t x = 0;
                     if (!parse_i64(v, x) || x < 1 || x > (1 << 20)) return false;
                     c.latency.entries[op].latency = static_cast<int>(x);
                     return true;
                   },
                   [op](const RunConfig& c) {
                     return std::to_string(c.latency.entries.at(op).latency);
                   }});
      t.push_back({base + ".pipelined",
                   [op](RunConfig& c, const std::string& v) {
                     return parse_bool(v, c.latency.entries[op].pipelined);
                   },
                   [op](const RunConfig& c) {
                     return c.latency.entries.at(op).pipelined ? "true" : "false";
                   }});
    }
    return t;
  }();
  return keys;
}

const Key* find_key(const std::string& name) {
  for (const Key& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

bool apply_config_text(const std::string& text, RunConfig& cfg, std::string* err) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos) {
      if (err) *err = "config line " + std::to_string(lineno) + ": expected key=value, got '" + s + "'";
      return false;
    }
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) {
      if (err) *err = "config key '" + key + "' is not recognized";
      return false;
    }
    if (!k->set(cfg, val)) {
      if (err) *err = "config key '" + key + "': bad value '" + val + "'";
      return false;
    }
  }
  return true;
}

bool load_config_file(const std::string& path, RunConfig& cfg, std::string* err) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    if (err) *err = "config file '" + path + "': cannot read";
    return false;
  }
  std::ostringstream buf;
  buf << f.rdbuf();
  return apply_config_text(buf.str(), cfg, err);
}

bool validate_config(const RunConfig& cfg, std::string* err) {
  auto fail = [err](const std::string& m) {
    if (err) *err = m;
    return false;
  };
  if (!cfg.kernel.empty() && !cfg.ir_file.empty())
    return fail("kernel and ir_file are mutually exclusive");
  if (cfg.kernel.empty() && cfg.ir_file.empty())
    return fail("one of kernel or ir_file is required");
  if (!cfg.run_monolithic && !cfg.run_pipeline) return fail("engines: none selected");
  if (cfg.out_dir.empty()) return fail("out: empty output directory");
  if (cfg.sim.fifo_depth < 1) return fail("fifo_depth: must be >= 1");
  if (cfg.sim.drain_cycles < 0) return fail("drain_cycles: must be >= 0");
  if (cfg.sim.max_cycles < 1) return fail("max_cycles: must be >= 1");
  if (cfg.sim.trace_limit < 0) return fail("trace_limit: must be >= 0");
  if (cfg.part.max_dup_nodes < 0) return fail("max_dup_nodes: must be >= 0");
  std::string mem = cfg.sim.mem.check();
  if (!mem.empty()) return fail("mem: " + mem);
  for (const auto& [op, timing] : cfg.latency.entries)
    if (timing.latency < 1)
      return fail(std::string("latency.") + opcode_name(op) + ": must be >= 1");
  return true;
}

std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(key_table().size());
  for (const Key& k : key_table()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [name, value] : config_items(cfg)) os << name << " = " << value << "\n";
  return os.str();
}

}  // namespace dfp
