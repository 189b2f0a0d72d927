#include <algorithm>
#include <set>

#include "dfp/cfg.hpp"
#include "dfp/ir.hpp"
#include "doctest.h"

using namespace dfp;

namespace {

Program parse_ok(const std::string& text) {
  ParseResult r = parse_ir(text);
  REQUIRE(r.ok());
  return *r.program;
}

int blk(const Program& p, const char* label) {
  int i = p.block_index(label);
  REQUIRE(i >= 0);
  return i;
}

// Oracle: a dominates b iff removing a disconnects b from entry.
bool dominates_by_reachability(const Cfg& cfg, int a, int b) {
  if (a == b) return true;
  std::vector<char> seen(cfg.nblocks, 0);
  std::vector<int> stack{0};
  if (a == 0) return true;  // entry dominates everything reachable
  seen[0] = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    if (u == b) return false;
    for (int v : cfg.succs[u]) {
      if (v == a || seen[v]) continue;
      seen[v] = 1;
      stack.push_back(v);
    }
  }
  return true;
}

}  // namespace

TEST_CASE("dominators on a diamond") {
  Program p = parse_ok(
      "func f(c) {\n"
      "  block entry:\n    br %c, a, b\n"
      "  block a:\n    jmp join\n"
      "  block b:\n    jmp join\n"
      "  block join:\n    ret 0\n"
      "}\n");
  Cfg g = build_cfg(p);
  int e = blk(p, "entry"), a = blk(p, "a"), b = blk(p, "b"), j = blk(p, "join");
  CHECK(g.idom[a] == e);
  CHECK(g.idom[b] == e);
  CHECK(g.idom[j] == e);
  CHECK(g.dominates(e, j));
  CHECK(!g.dominates(a, j));
  CHECK(g.ipdom[e] == j);
  CHECK(g.postdominates(j, e));
  CHECK(!g.postdominates(a, e));
  CHECK(g.reducible);
  CHECK(g.loops.empty());

  auto cd = control_dependence(g);
  CHECK(cd[a] == std::vector<int>{e});
  CHECK(cd[b] == std::vector<int>{e});
  CHECK(cd[j].empty());
  CHECK(cd[e].empty());
}

TEST_CASE("natural loop discovery") {
  Program p = parse_ok(
      "func f(n) {\n"
      "  block entry:\n    jmp head\n"
      "  block head:\n    %i = phi [entry: 0, latch: %i1]\n"
      "    %c = icmp.slt %i, %n\n    br %c, body, done\n"
      "  block body:\n    %i1 = iadd %i, 1\n    jmp latch\n"
      "  block latch:\n    jmp head\n"
      "  block done:\n    ret %i\n"
      "}\n");
  Cfg g = build_cfg(p);
  int h = blk(p, "head"), bd = blk(p, "body"), lt = blk(p, "latch");
  REQUIRE(g.back_edges.size() == 1);
  CHECK(g.back_edges[0] == std::pair<int, int>(lt, h));
  REQUIRE(g.loops.size() == 1);
  const NaturalLoop& L = g.loops[0];
  CHECK(L.header == h);
  CHECK(L.latch == lt);
  CHECK(L.contains(h));
  CHECK(L.contains(bd));
  CHECK(L.contains(lt));
  CHECK(!L.contains(blk(p, "entry")));
  CHECK(!L.contains(blk(p, "done")));
  CHECK(g.reducible);

  // The loop header's branch controls body, latch and itself (repetition).
  auto cd = control_dependence(g);
  CHECK(cd[bd] == std::vector<int>{h});
  CHECK(cd[lt] == std::vector<int>{h});
  CHECK(cd[h] == std::vector<int>{h});
}

TEST_CASE("nested loops and share_loop") {
  Program p = parse_ok(
      "func f(n) {\n"
      "  block entry:\n    jmp oh\n"
      "  block oh:\n    %i = phi [entry: 0, olatch: %i1]\n"
      "    %ci = icmp.slt %i, %n\n    br %ci, ih, odone\n"
      "  block ih:\n    %j = phi [oh: 0, ibody: %j1]\n"
      "    %cj = icmp.slt %j, %n\n    br %cj, ibody, olatch\n"
      "  block ibody:\n    %j1 = iadd %j, 1\n    jmp ih\n"
      "  block olatch:\n    %i1 = iadd %i, 1\n    jmp oh\n"
      "  block odone:\n    ret %i\n"
      "}\n");
  Cfg g = build_cfg(p);
  int oh = blk(p, "oh"), ih = blk(p, "ih"), ib = blk(p, "ibody"), ol = blk(p, "olatch");
  REQUIRE(g.loops.size() == 2);
  CHECK(g.share_loop(ih, ib));
  CHECK(g.share_loop(oh, ol));
  CHECK(g.share_loop(oh, ib));  // outer loop contains the inner blocks
  CHECK(!g.share_loop(oh, blk(p, "odone")));
  int inner = g.innermost_loop(ib);
  REQUIRE(inner >= 0);
  CHECK(g.loops[inner].header == ih);
  CHECK(g.innermost_loop(blk(p, "entry")) == -1);

  // Inner loop membership is strictly smaller than outer.
  const NaturalLoop* li = nullptr;
  const NaturalLoop* lo = nullptr;
  for (const NaturalLoop& L : g.loops) (L.header == ih ? li : lo) = &L;
  REQUIRE(li);
  REQUIRE(lo);
  CHECK(li->body.size() < lo->body.size());
  for (int b : li->body) CHECK(lo->contains(b));
}

TEST_CASE("irreducible graphs are flagged") {
  Program p = parse_ok(
      "func f(c) {\n"
      "  block entry:\n    br %c, a, b\n"
      "  block a:\n    br %c, b, done\n"
      "  block b:\n    br %c, a, done\n"
      "  block done:\n    ret 0\n"
      "}\n");
  Cfg g = build_cfg(p);
  CHECK(!g.reducible);
}

TEST_CASE("dominators agree with a reachability oracle") {
  // A few shapes with branches, loops and early exits.
  const char* srcs[] = {
      "func f(c) {\n"
      "  block entry:\n    br %c, a, b\n"
      "  block a:\n    br %c, c1, join\n"
      "  block b:\n    jmp join\n"
      "  block c1:\n    jmp join\n"
      "  block join:\n    ret 0\n"
      "}\n",
      "func f(n) {\n"
      "  block entry:\n    jmp h\n"
      "  block h:\n    %i = phi [entry: 0, l: %i1]\n"
      "    %c = icmp.slt %i, %n\n    br %c, m, x\n"
      "  block m:\n    %c2 = icmp.eq %i, 3\n    br %c2, x, l\n"
      "  block l:\n    %i1 = iadd %i, 1\n    jmp h\n"
      "  block x:\n    ret %i\n"
      "}\n",
  };
  for (const char* src : srcs) {
    Program p = parse_ok(src);
    Cfg g = build_cfg(p);
    for (int a = 0; a < g.nblocks; ++a)
      for (int b = 0; b < g.nblocks; ++b)
        CHECK(g.dominates(a, b) == dominates_by_reachability(g, a, b));
  }
}
