// run.cpp - experiment driver: resolve the input program, partition it,
// simulate the requested engines, and write the artifact set. Every file
// written here is a pure function of the resolved config, so a rerun
// reproduces each artifact byte for byte.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "dfp/bench.hpp"
#include "dfp/cdfg.hpp"
#include "dfp/run.hpp"
#include "json.hpp"

namespace dfp {
namespace {

using Json = nlohmann::ordered_json;

std::string hex64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

bool write_file(const std::filesystem::path& p, const std::string& content, std::string* err) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << content;
  f.flush();
  if (!f) {
    if (err) *err = "cannot write '" + p.string() + "'";
    return false;
  }
  return true;
}

Json scalar_json(const Scalar& s) {
  Json j;
  j["ty"] = s.ty == Ty::F32 ? "f32" : "i32";
  if (s.ty == Ty::F32)
    j["value"] = s.f;
  else
    j["value"] = s.i;
  return j;
}

Json report_json(const SimReport& rep, const RunConfig& cfg, const std::string& engine) {
  Json j;
  j["engine"] = engine;
  j["ok"] = rep.ok;
  j["deadlock"] = rep.deadlock;
  j["error"] = rep.error;
  j["cycles"] = rep.cycles;
  j["digest"] = hex64(rep.digest);
  j["has_ret"] = rep.has_ret;
  j["ret"] = rep.has_ret ? scalar_json(rep.ret) : Json(nullptr);
  Json stages = Json::array();
  for (const StageReport& s : rep.stages) {
    Json e;
    e["name"] = s.name;
    e["ii"] = s.ii;
    e["busy"] = s.busy;
    e["stall_mem"] = s.stall_mem;
    e["stall_fifo_empty"] = s.stall_fifo_empty;
    e["stall_fifo_full"] = s.stall_fifo_full;
    e["idle"] = s.idle;
    e["iterations"] = s.iterations;
    e["total"] = s.total();
    stages.push_back(std::move(e));
  }
  j["stages"] = std::move(stages);
  Json fifos = Json::array();
  for (const FifoReport& f : rep.fifos) {
    Json e;
    e["id"] = f.id;
    e["pushes"] = f.pushes;
    e["pops"] = f.pops;
    e["peak"] = f.peak;
    fifos.push_back(std::move(e));
  }
  j["fifos"] = std::move(fifos);
  Json ports = Json::array();
  for (const PortReport& p : rep.ports) {
    Json e;
    e["stage"] = p.stage;
    e["space"] = p.space;
    e["burst"] = p.burst;
    e["accesses"] = p.stats.accesses;
    e["hits"] = p.stats.hits;
    e["misses"] = p.stats.misses;
    e["requests"] = p.stats.requests;
    e["stores"] = p.stats.stores;
    ports.push_back(std::move(e));
  }
  j["ports"] = std::move(ports);
  Json mem;
  mem["accesses"] = rep.mem.accesses;
  mem["requests"] = rep.mem.requests;
  mem["hits"] = rep.mem.hits;
  mem["misses"] = rep.mem.misses;
  mem["peak_in_flight"] = rep.mem.peak_in_flight;
  mem["credit_stalls"] = rep.mem.credit_stalls;
  j["mem"] = std::move(mem);
  Json cj;
  for (const auto& [k, v] : config_items(cfg)) cj[k] = v;
  j["config"] = std::move(cj);
  return j;
}

std::string trace_csv(const SimReport& rep) {
  std::ostringstream os;
  os << "cycle,stage,state\n";
  for (const TraceRow& r : rep.trace)
    os << r.cycle << "," << rep.stages[r.stage].name << "," << r.state << "\n";
  return os.str();
}

std::string manifest_text(const RunConfig& cfg, const Program& prog, uint64_t image_digest,
                          const PipelinePlan* plan) {
  std::ostringstream os;
  os << "run manifest\n";
  if (!cfg.kernel.empty())
    os << "input: kernel " << cfg.kernel << " (scale " << cfg.scale << ", seed " << cfg.seed
       << ")\n";
  else
    os << "input: ir file " << cfg.ir_file << "\n";
  os << "program: " << prog.name << "\n";
  os << "initial image digest: " << hex64(image_digest) << "\n";
  os << "\n[config]\n" << config_to_text(cfg);
  os << "\n[partition]\n";
  if (!plan) {
    os << "pipeline engine not requested; no stage artifacts\n";
    return os.str();
  }
  os << "stages: " << plan->stages.size() << "\n";
  os << "channels: " << plan->channels.size() << "\n";
  os << "channels removed by duplication: " << plan->channels_removed << "\n";
  os << "control-repair merges: " << plan->merges << "\n";
  for (size_t s = 0; s < plan->plan.stages.size(); ++s) {
    const Stage& st = plan->plan.stages[s];
    os << "stage " << plan->stages[s].name << ": " << st.nodes.size() << " nodes (";
    for (size_t i = 0; i < st.nodes.size(); ++i) os << (i ? " " : "") << st.nodes[i];
    os << ")";
    if (st.closer >= 0) os << ", closed by component " << st.closer;
    if (st.merged) os << ", merged";
    if (!st.replicas.empty()) {
      os << ", replicas (";
      for (size_t i = 0; i < st.replicas.size(); ++i) os << (i ? " " : "") << st.replicas[i];
      os << ")";
    }
    os << "\n";
  }
  for (const Channel& c : plan->channels)
    os << "channel ch" << c.id << ": %" << c.value << " " << plan->stages[c.producer].name
       << " -> " << plan->stages[c.consumer].name << " " << (c.ty == Ty::F32 ? "f32" : "i32")
       << (c.control ? " control" : "") << "\n";
  return os.str();
}

std::string cdfg_text(const Program& prog, const LatencyTable& lat) {
  std::ostringstream os;
  CdfgBuildResult b = build_cdfg(prog, lat);
  if (!b.ok()) {
    for (const std::string& e : b.errors) os << "error: " << e << "\n";
    return os.str();
  }
  const Cdfg& g = *b.graph;
  os << "; control-dataflow graph for " << prog.name << "\n";
  for (size_t n = 0; n < g.nodes.size(); ++n) {
    const CdfgNode& nd = g.nodes[n];
    os << "node " << n << ": " << prog.blocks[nd.block].label << "." << nd.index << " "
       << opcode_name(nd.op);
    if (nd.is_mem) os << " [mem]";
    if (nd.is_long) os << " [long]";
    os << "\n";
  }
  os << g.dump();
  return os.str();
}

std::string comparison_csv(const RunConfig& cfg, const SimReport* mono, const SimReport* pipe) {
  std::ostringstream os;
  os << "kernel,scale,seed,hit_latency,miss_latency,max_outstanding,fifo_depth,"
        "monolithic_cycles,pipeline_cycles,monolithic_digest,pipeline_digest,"
        "digests_match,speedup\n";
  os << (!cfg.kernel.empty() ? cfg.kernel : cfg.ir_file) << "," << cfg.scale << "," << cfg.seed
     << "," << cfg.sim.mem.hit_latency << "," << cfg.sim.mem.miss_latency << ","
     << cfg.sim.mem.max_outstanding << "," << cfg.sim.fifo_depth << ",";
  if (mono)
    os << mono->cycles;
  else
    os << "skipped";
  os << ",";
  if (pipe)
    os << pipe->cycles;
  else
    os << "skipped";
  os << ",";
  os << (mono ? hex64(mono->digest) : "skipped") << ","
     << (pipe ? hex64(pipe->digest) : "skipped") << ",";
  if (mono && pipe) {
    SpeedupSummary s = compare(*mono, *pipe);
    os << (s.digests_match ? "true" : "false") << "," << fixed6(s.speedup);
  } else {
    os << "skipped,";
  }
  os << "\n";
  return os.str();
}

}  // namespace

std::string render_gantt(const SimReport& rep, int64_t from, int64_t to) {
  if (from < 0) from = 0;
  if (to < from) to = from;
  size_t cols = static_cast<size_t>(to - from);
  size_t namew = 5;  // "cycle"
  for (const StageReport& s : rep.stages) namew = std::max(namew, s.name.size());
  namew += 1;
  std::vector<std::string> grid(rep.stages.size(), std::string(cols, ' '));
  for (const TraceRow& r : rep.trace) {
    if (r.cycle < from || r.cycle >= to) continue;
    if (r.stage < 0 || static_cast<size_t>(r.stage) >= grid.size()) continue;
    grid[r.stage][static_cast<size_t>(r.cycle - from)] = r.state;
  }
  std::ostringstream os;
  std::string ruler(cols, ' ');
  for (size_t c = 0; c < cols; ++c) {
    int64_t cyc = from + static_cast<int64_t>(c);
    if (cyc % 10 != 0) continue;
    std::string num = std::to_string(cyc);
    for (size_t i = 0; i < num.size() && c + i < cols; ++i) ruler[c + i] = num[i];
  }
  os << "cycle" << std::string(namew - 5, ' ') << "|" << ruler << "\n";
  for (size_t s = 0; s < rep.stages.size(); ++s)
    os << rep.stages[s].name << std::string(namew - rep.stages[s].name.size(), ' ') << "|"
       << grid[s] << "\n";
  return os.str();
}

RunStatus run(const RunConfig& cfg, std::string* log) {
  namespace fs = std::filesystem;
  auto note = [log](const std::string& s) {
    if (log) {
      *log += s;
      *log += '\n';
    }
  };
  std::string err;
  if (!validate_config(cfg, &err)) {
    note("config error: " + err);
    return RunStatus::ConfigError;
  }

  Program prog;
  MemoryImage image;
  std::vector<Scalar> args;
  if (!cfg.kernel.empty()) {
    std::optional<BenchKernel> k = make_kernel(cfg.kernel, cfg.scale, cfg.seed, &err);
    if (!k) {
      note("config error: " + err);
      return RunStatus::ConfigError;
    }
    prog = std::move(k->program);
    image = std::move(k->image);
    args = std::move(k->args);
  } else {
    std::ifstream f(cfg.ir_file, std::ios::binary);
    if (!f) {
      note("config error: ir file '" + cfg.ir_file + "' cannot be read");
      return RunStatus::ConfigError;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    ParseResult pr = parse_ir(buf.str());
    if (!pr.ok()) {
      const Diagnostic& d = pr.diagnostics.front();
      note("config error: " + cfg.ir_file + ":" + std::to_string(d.line) + ": " + d.message);
      return RunStatus::ConfigError;
    }
    prog = std::move(*pr.program);
    image = MemoryImage::for_program(prog);
    // File inputs run with zero-valued arguments of the inferred type.
    std::map<std::string, Ty> types = infer_types(prog, nullptr);
    for (const std::string& a : prog.args) {
      auto it = types.find(a);
      args.push_back(it != types.end() && it->second == Ty::F32 ? Scalar::f32(0.0f)
                                                                : Scalar::int32(0));
    }
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    note("config error: cannot create output directory '" + cfg.out_dir + "'");
    return RunStatus::ConfigError;
  }
  fs::path out(cfg.out_dir);

  PipelinePlan plan;
  if (cfg.run_pipeline) {
    plan = emit_pipeline(prog, cfg.latency, cfg.part);
    if (!plan.ok()) {
      note("config error: program cannot be staged: " + plan.errors.front());
      return RunStatus::ConfigError;
    }
  }

  std::optional<SimReport> mono, pipe;
  if (cfg.run_monolithic) {
    MemoryImage m = image;
    mono = simulate_monolithic(prog, cfg.sim, cfg.latency, m, args);
  }
  if (cfg.run_pipeline) {
    MemoryImage m = image;
    pipe = simulate_pipeline(plan, cfg.sim, cfg.latency, m, args);
  }

  auto emit = [&](const fs::path& p, const std::string& content) {
    if (write_file(p, content, &err)) return true;
    note("config error: " + err);
    return false;
  };
  if (!emit(out / "manifest.txt",
            manifest_text(cfg, prog, image.digest(), cfg.run_pipeline ? &plan : nullptr)))
    return RunStatus::ConfigError;
  if (cfg.run_pipeline)
    for (size_t s = 0; s < plan.stages.size(); ++s)
      if (!emit(out / ("stage" + std::to_string(s) + ".ir"), print_ir(plan.stages[s])))
        return RunStatus::ConfigError;
  if (cfg.dump_cdfg)
    if (!emit(out / "cdfg.txt", cdfg_text(prog, cfg.latency))) return RunStatus::ConfigError;
  auto emit_engine = [&](const SimReport& rep, const std::string& engine) {
    if (!emit(out / ("report_" + engine + ".json"), report_json(rep, cfg, engine).dump(2) + "\n"))
      return false;
    if (cfg.sim.trace) {
      if (!emit(out / ("trace_" + engine + ".csv"), trace_csv(rep))) return false;
      int64_t window = std::min<int64_t>(rep.cycles, 160);
      if (!emit(out / ("gantt_" + engine + ".txt"), render_gantt(rep, 0, window))) return false;
    }
    return true;
  };
  if (mono && !emit_engine(*mono, "monolithic")) return RunStatus::ConfigError;
  if (pipe && !emit_engine(*pipe, "pipeline")) return RunStatus::ConfigError;
  if (!emit(out / "comparison.csv",
            comparison_csv(cfg, mono ? &*mono : nullptr, pipe ? &*pipe : nullptr)))
    return RunStatus::ConfigError;

  if (mono)
    note("monolithic: " + std::to_string(mono->cycles) + " cycles, digest " +
         hex64(mono->digest));
  if (pipe)
    note("pipeline: " + std::to_string(pipe->cycles) + " cycles over " +
         std::to_string(pipe->stages.size()) + " stages, digest " + hex64(pipe->digest));

  if (mono && mono->deadlock) {
    note("monolithic deadlock: " + mono->error);
    return RunStatus::Deadlock;
  }
  if (pipe && pipe->deadlock) {
    note("pipeline deadlock: " + pipe->error);
    return RunStatus::Deadlock;
  }
  if (mono && !mono->ok) {
    note("monolithic failed: " + mono->error);
    return RunStatus::Mismatch;
  }
  if (pipe && !pipe->ok) {
    note("pipeline failed: " + pipe->error);
    return RunStatus::Mismatch;
  }
  if (mono && pipe) {
    SpeedupSummary s = compare(*mono, *pipe);
    note("speedup " + fixed6(s.speedup) + ", digests " +
         (s.digests_match ? "match" : "MISMATCH"));
    if (!s.digests_match) return RunStatus::Mismatch;
  }
  return RunStatus::Ok;
}

}  // namespace dfp
