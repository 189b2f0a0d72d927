#include <set>
#include <string>

#include "dfp/bench.hpp"
#include "dfp/partition.hpp"
#include "dfp/sim.hpp"
#include "doctest.h"

using namespace dfp;

namespace {

InterpResult run_interp(BenchKernel& k, MemoryImage& img) {
  img = k.image;  // keep the pristine image; engines get fresh copies
  return interpret(k.program, img, k.args, 1ll << 26);
}

void check_cells(const BenchKernel& k, const MemoryImage& img) {
  REQUIRE(k.check_space >= 0);
  REQUIRE(static_cast<int64_t>(k.expected.size()) ==
          k.program.spaces[static_cast<size_t>(k.check_space)].extent);
  for (size_t i = 0; i < k.expected.size(); ++i) {
    if (!(img.read(k.check_space, static_cast<int64_t>(i)) == k.expected[i])) {
      CAPTURE(i);
      CHECK(img.read(k.check_space, static_cast<int64_t>(i)) == k.expected[i]);
      return;
    }
  }
  CHECK(true);
}

}  // namespace

TEST_CASE("kernels replay their host oracles") {
  for (uint64_t seed : {1ull, 2ull, 7ull}) {
    for (const char* name : {"spmv", "knapsack", "fw", "dfs"}) {
      CAPTURE(name);
      CAPTURE(seed);
      std::string err;
      auto k = make_kernel(name, "desk", seed, &err);
      REQUIRE_MESSAGE(k.has_value(), err);
      REQUIRE(validate(k->program).empty());

      MemoryImage img;
      InterpResult r = run_interp(*k, img);
      REQUIRE_MESSAGE(r.ok(), r.message);
      check_cells(*k, img);
      REQUIRE(k->has_expected_ret);
      REQUIRE(r.has_ret);
      CHECK(r.ret == k->expected_ret);
    }
  }
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  for (const char* name : {"spmv", "knapsack", "fw", "dfs"}) {
    CAPTURE(name);
    auto a = make_kernel(name, "desk", 3);
    auto b = make_kernel(name, "desk", 3);
    auto c = make_kernel(name, "desk", 4);
    REQUIRE(a);
    REQUIRE(b);
    REQUIRE(c);
    CHECK(a->image.digest() == b->image.digest());
    CHECK(print_ir(a->program) == print_ir(b->program));
    CHECK(a->image.digest() != c->image.digest());
  }
}

TEST_CASE("partition shapes match kernel structure") {
  LatencyTable lat = LatencyTable::defaults();

  auto spmv = make_kernel("spmv", "desk", 1);
  REQUIRE(spmv);
  PipelinePlan ps = emit_pipeline(spmv->program, lat);
  for (const std::string& e : ps.errors) MESSAGE(e);
  REQUIRE(ps.ok());
  CHECK(ps.stages.size() >= 4);

  auto knap = make_kernel("knapsack", "desk", 1);
  REQUIRE(knap);
  PipelinePlan pk = emit_pipeline(knap->program, lat);
  REQUIRE(pk.ok());
  CHECK(pk.stages.size() >= 3);

  // The in-place matrix welds all its accesses (and the compute between
  // them) into one stage; only address generation and the exit decouple.
  auto fw = make_kernel("fw", "desk", 1);
  REQUIRE(fw);
  PipelinePlan pf = emit_pipeline(fw->program, lat);
  REQUIRE(pf.ok());
  CHECK(pf.stages.size() >= 1);
  std::set<size_t> stages_touching_dist;
  for (size_t s = 0; s < pf.stages.size(); ++s)
    for (const Block& b : pf.stages[s].blocks)
      for (const Instruction& in : b.instrs)
        if (in.op == Opcode::Load || in.op == Opcode::Store)
          stages_touching_dist.insert(s);
  CHECK(stages_touching_dist.size() == 1);

  // The stack recurrence must weld every stack access into one stage.
  auto dfs = make_kernel("dfs", "desk", 1);
  REQUIRE(dfs);
  PipelinePlan pd = emit_pipeline(dfs->program, lat);
  REQUIRE(pd.ok());
  int stk_space = -1;
  for (size_t s = 0; s < dfs->program.spaces.size(); ++s)
    if (dfs->program.spaces[s].name == "stk") stk_space = static_cast<int>(s);
  REQUIRE(stk_space >= 0);
  std::set<size_t> stages_touching_stk;
  for (size_t s = 0; s < pd.stages.size(); ++s)
    for (const Block& b : pd.stages[s].blocks)
      for (const Instruction& in : b.instrs)
        if ((in.op == Opcode::Load || in.op == Opcode::Store) && in.space == stk_space)
          stages_touching_stk.insert(s);
  CHECK(stages_touching_stk.size() == 1);
  CHECK(pd.stages.size() <= 2);
}

TEST_CASE("small-scale pipelines agree with the interpreter") {
  LatencyTable lat = LatencyTable::defaults();
  struct Mini {
    const char* name;
    BenchKernel k;
  };
  std::vector<Mini> minis;
  minis.push_back({"spmv", make_spmv(64, 0.25, 5)});
  minis.push_back({"knapsack", make_knapsack(64, 8, 5)});
  minis.push_back({"fw", make_fw(16, 5)});
  minis.push_back({"dfs", make_dfs(60, 4, 5)});

  for (Mini& m : minis) {
    CAPTURE(std::string(m.name));
    MemoryImage mi = m.k.image;
    InterpResult ri = interpret(m.k.program, mi, m.k.args, 1ll << 26);
    REQUIRE_MESSAGE(ri.ok(), ri.message);

    SimConfig cfg;
    MemoryImage mm = m.k.image;
    SimReport rm = simulate_monolithic(m.k.program, cfg, lat, mm, m.k.args);
    if (!rm.ok) MESSAGE(rm.error);
    REQUIRE(rm.ok);
    CHECK(mi.digest() == mm.digest());

    PipelinePlan plan = emit_pipeline(m.k.program, lat);
    for (const std::string& e : plan.errors) MESSAGE(e);
    REQUIRE(plan.ok());
    MemoryImage mp = m.k.image;
    SimReport rp = simulate_pipeline(plan, cfg, lat, mp, m.k.args);
    if (!rp.ok) MESSAGE(rp.error);
    REQUIRE(rp.ok);
    CHECK(mi.digest() == mp.digest());
    if (ri.has_ret) {
      REQUIRE(rp.has_ret);
      CHECK(ri.ret == rp.ret);
    }
  }
}

TEST_CASE("catalog names resolve and junk is rejected") {
  std::vector<CatalogEntry> cat = kernel_catalog();
  REQUIRE(cat.size() == 4);
  std::set<std::string> names;
  for (const CatalogEntry& e : cat) {
    names.insert(e.name);
    CHECK(!e.summary.empty());
    std::string err;
    CHECK(make_kernel(e.name, "desk", 1, &err).has_value());
  }
  CHECK(names.size() == 4);

  std::string err;
  CHECK(!make_kernel("sort", "desk", 1, &err).has_value());
  CHECK(err.find("sort") != std::string::npos);
  err.clear();
  CHECK(!make_kernel("spmv", "huge", 1, &err).has_value());
  CHECK(err.find("huge") != std::string::npos);
}
