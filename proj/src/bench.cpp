#include "dfp/bench.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dfp {

uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

// Inputs live in [-8, 8) at 1/256 steps so long reductions stay well inside
// float range and the host oracle can match the engines bit for bit.
float gen_f32(uint64_t& s) {
  return static_cast<float>(splitmix64(s) % 4096) / 256.0f - 8.0f;
}

Program must_parse(const std::string& text, const char* who) {
  ParseResult r = parse_ir(text);
  if (!r.ok())
    throw std::logic_error(std::string(who) + " template failed to parse: " +
                           (r.diagnostics.empty() ? "?" : r.diagnostics[0].message));
  return *r.program;
}

int log2_exact(int n) {
  int s = 0;
  while ((1 << s) < n) ++s;
  if ((1 << s) != n) throw std::invalid_argument("size must be a power of two");
  return s;
}

}  // namespace

BenchKernel make_spmv(int n, double density, uint64_t seed) {
  uint64_t s = seed * 0x9e3779b97f4a7c15ull + 1;
  int avg = static_cast<int>(density * n);
  if (avg < 1) avg = 1;

  std::vector<int> rowptr(static_cast<size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) {
    int len = static_cast<int>(splitmix64(s) % static_cast<uint64_t>(2 * avg + 1));
    rowptr[static_cast<size_t>(i) + 1] = rowptr[static_cast<size_t>(i)] + len;
  }
  int64_t nnz = rowptr[static_cast<size_t>(n)];
  if (nnz == 0) nnz = 1;

  std::vector<int> col(static_cast<size_t>(nnz), 0);
  std::vector<float> val(static_cast<size_t>(nnz), 0.0f);
  for (int64_t k = 0; k < nnz; ++k) {
    col[static_cast<size_t>(k)] = static_cast<int>(splitmix64(s) % static_cast<uint64_t>(n));
    val[static_cast<size_t>(k)] = gen_f32(s);
  }
  std::vector<float> x(static_cast<size_t>(n), 0.0f);
  for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = gen_f32(s);

  std::string text;
  text += "func spmv(n) {\n";
  text += "  space rowptr elem=4 extent=" + std::to_string(n + 1) + " readonly stream\n";
  text += "  space col elem=4 extent=" + std::to_string(nnz) + " readonly stream\n";
  text += "  space val elem=4 extent=" + std::to_string(nnz) + " float readonly stream\n";
  text += "  space x elem=4 extent=" + std::to_string(n) + " float readonly random\n";
  text += "  space y elem=4 extent=" + std::to_string(n) + " float stream\n";
  text += R"(
  block entry:
    %r0 = load rowptr[0]
    jmp ohead
  block ohead:
    %i = phi [entry: 0, ilatch: %i1]
    %rs = phi [entry: %r0, ilatch: %re]
    %oc = icmp.slt %i, %n
    br %oc, obody, done
  block obody:
    %i1 = iadd %i, 1
    %re = load rowptr[%i1]
    jmp ihead
  block ihead:
    %k = phi [obody: %rs, ibody: %k1]
    %acc = phi [obody: 0.0, ibody: %acc1]
    %ic = icmp.slt %k, %re
    br %ic, ibody, ilatch
  block ibody:
    %cj = load col[%k]
    %vv = load val[%k]
    %xv = load x[%cj]
    %m = fmul %vv, %xv
    %acc1 = fadd %acc, %m
    %k1 = iadd %k, 1
    jmp ihead
  block ilatch:
    %accx = phi [ihead: %acc]
    store y[%i], %accx
    jmp ohead
  block done:
    ret 0
}
)";

  BenchKernel k;
  k.name = "spmv";
  k.program = must_parse(text, "spmv");
  k.image = MemoryImage::for_program(k.program);
  for (int i = 0; i <= n; ++i) k.image.write(0, i, Scalar::int32(rowptr[static_cast<size_t>(i)]));
  for (int64_t e = 0; e < nnz; ++e) {
    k.image.write(1, e, Scalar::int32(col[static_cast<size_t>(e)]));
    k.image.write(2, e, Scalar::f32(val[static_cast<size_t>(e)]));
  }
  for (int i = 0; i < n; ++i) k.image.write(3, i, Scalar::f32(x[static_cast<size_t>(i)]));
  k.args = {Scalar::int32(n)};

  k.check_space = 4;
  k.expected.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    float acc = 0.0f;
    for (int p = rowptr[static_cast<size_t>(i)]; p < rowptr[static_cast<size_t>(i) + 1]; ++p)
      acc = acc + val[static_cast<size_t>(p)] * x[static_cast<size_t>(col[static_cast<size_t>(p)])];
    k.expected.push_back(Scalar::f32(acc));
  }
  k.has_expected_ret = true;
  k.expected_ret = Scalar::int32(0);
  return k;
}

BenchKernel make_knapsack(int cap, int items, uint64_t seed) {
  uint64_t s = seed * 0x9e3779b97f4a7c15ull + 2;
  std::vector<int> w(static_cast<size_t>(items), 0), p(static_cast<size_t>(items), 0);
  for (int i = 0; i < items; ++i) {
    // Weights stay small against the capacity so every downward sweep is
    // much longer than any run-ahead the pipeline can build up.
    w[static_cast<size_t>(i)] = 1 + static_cast<int>(splitmix64(s) % 32);
    p[static_cast<size_t>(i)] = static_cast<int>(splitmix64(s) % 256);
  }

  std::string text;
  text += "func knapsack(items, cap) {\n";
  text += "  space w elem=4 extent=" + std::to_string(items) + " readonly\n";
  text += "  space p elem=4 extent=" + std::to_string(items) + " readonly\n";
  text += "  space dp elem=4 extent=" + std::to_string(cap + 1) + " no_loop_carried\n";
  text += R"(
  block entry:
    jmp ohead
  block ohead:
    %it = phi [entry: 0, olatch: %it1]
    %oc = icmp.slt %it, %items
    br %oc, obody, done
  block obody:
    %wv = load w[%it]
    %pv = load p[%it]
    jmp ihead
  block ihead:
    %c = phi [obody: %cap, ibody: %c1]
    %ic = icmp.sge %c, %wv
    br %ic, ibody, olatch
  block ibody:
    %cw = isub %c, %wv
    %old = load dp[%c]
    %src = load dp[%cw]
    %cand = iadd %src, %pv
    %cc = icmp.sgt %cand, %old
    %new = select %cc, %cand, %old
    store dp[%c], %new
    %c1 = isub %c, 1
    jmp ihead
  block olatch:
    %it1 = iadd %it, 1
    jmp ohead
  block done:
    %best = load dp[%cap]
    ret %best
}
)";

  BenchKernel k;
  k.name = "knapsack";
  k.program = must_parse(text, "knapsack");
  k.image = MemoryImage::for_program(k.program);
  for (int i = 0; i < items; ++i) {
    k.image.write(0, i, Scalar::int32(w[static_cast<size_t>(i)]));
    k.image.write(1, i, Scalar::int32(p[static_cast<size_t>(i)]));
  }
  k.args = {Scalar::int32(items), Scalar::int32(cap)};

  std::vector<int> dp(static_cast<size_t>(cap) + 1, 0);
  for (int it = 0; it < items; ++it)
    for (int c = cap; c >= w[static_cast<size_t>(it)]; --c) {
      int cand = dp[static_cast<size_t>(c - w[static_cast<size_t>(it)])] + p[static_cast<size_t>(it)];
      if (cand > dp[static_cast<size_t>(c)]) dp[static_cast<size_t>(c)] = cand;
    }
  k.check_space = 2;
  for (int c = 0; c <= cap; ++c) k.expected.push_back(Scalar::int32(dp[static_cast<size_t>(c)]));
  k.has_expected_ret = true;
  k.expected_ret = Scalar::int32(dp[static_cast<size_t>(cap)]);
  return k;
}

BenchKernel make_fw(int n, uint64_t seed) {
  uint64_t s = seed * 0x9e3779b97f4a7c15ull + 3;
  int shift = log2_exact(n);
  int64_t cells = static_cast<int64_t>(n) * n;

  std::vector<int> dist(static_cast<size_t>(cells), 0);
  for (int64_t i = 0; i < cells; ++i)
    dist[static_cast<size_t>(i)] = static_cast<int>(splitmix64(s) % 255);

  // dist is deliberately unannotated: the k-sweep rereads cells written at
  // the end of the previous sweep only n iterations earlier, well inside the
  // pipeline's run-ahead window, so its accesses must stay ordered (they
  // weld into a single stage). Contrast knapsack, whose sweeps are longer
  // than any window the FIFOs can build.
  std::string text;
  text += "func fw(n) {\n";
  text += "  space dist elem=4 extent=" + std::to_string(cells) + "\n";
  text += "  block entry:\n    jmp khead\n";
  text += R"(
  block khead:
    %k = phi [entry: 0, klatch: %k1]
    %kc = icmp.slt %k, %n
    br %kc, kbody, done
  block kbody:
)";
  text += "    %krow = shl %k, " + std::to_string(shift) + "\n";
  text += R"(    jmp ihead
  block ihead:
    %i = phi [kbody: 0, ilatch: %i1]
    %ic = icmp.slt %i, %n
    br %ic, ibody, klatch
  block ibody:
)";
  text += "    %irow = shl %i, " + std::to_string(shift) + "\n";
  text += R"(    %ika = iadd %irow, %k
    %dik = load dist[%ika]
    jmp jhead
  block jhead:
    %j = phi [ibody: 0, jbody: %j1]
    %jc = icmp.slt %j, %n
    br %jc, jbody, ilatch
  block jbody:
    %kja = iadd %krow, %j
    %dkj = load dist[%kja]
    %cand = iadd %dik, %dkj
    %ija = iadd %irow, %j
    %dij = load dist[%ija]
    %cc = icmp.slt %cand, %dij
    %new = select %cc, %cand, %dij
    store dist[%ija], %new
    %j1 = iadd %j, 1
    jmp jhead
  block ilatch:
    %i1 = iadd %i, 1
    jmp ihead
  block klatch:
    %k1 = iadd %k, 1
    jmp khead
  block done:
    ret 0
}
)";

  BenchKernel k;
  k.name = "fw";
  k.program = must_parse(text, "fw");
  k.image = MemoryImage::for_program(k.program);
  for (int64_t i = 0; i < cells; ++i)
    k.image.write(0, i, Scalar::int32(dist[static_cast<size_t>(i)]));
  k.args = {Scalar::int32(n)};

  for (int kk = 0; kk < n; ++kk)
    for (int i = 0; i < n; ++i) {
      int dik = dist[static_cast<size_t>(i * n + kk)];
      for (int j = 0; j < n; ++j) {
        int cand = dik + dist[static_cast<size_t>(kk * n + j)];
        int& dij = dist[static_cast<size_t>(i * n + j)];
        if (cand < dij) dij = cand;
      }
    }
  k.check_space = 0;
  for (int64_t i = 0; i < cells; ++i)
    k.expected.push_back(Scalar::int32(dist[static_cast<size_t>(i)]));
  k.has_expected_ret = true;
  k.expected_ret = Scalar::int32(0);
  return k;
}

BenchKernel make_dfs(int nodes, int degree, uint64_t seed) {
  uint64_t s = seed * 0x9e3779b97f4a7c15ull + 4;
  int64_t edges = static_cast<int64_t>(nodes) * degree;

  std::vector<int> adj(static_cast<size_t>(edges), 0);
  for (int64_t e = 0; e < edges; ++e)
    adj[static_cast<size_t>(e)] = static_cast<int>(splitmix64(s) % static_cast<uint64_t>(nodes));

  std::string text;
  text += "func dfs(root) {\n";
  text += "  space adjptr elem=4 extent=" + std::to_string(nodes + 1) + " readonly\n";
  text += "  space adj elem=4 extent=" + std::to_string(edges) + " readonly\n";
  text += "  space visited elem=4 extent=" + std::to_string(nodes) + "\n";
  text += "  space stk elem=4 extent=" + std::to_string(nodes + 1) + "\n";
  text += R"(
  block entry:
    store stk[0], %root
    store visited[%root], 1
    jmp ohead
  block ohead:
    %sp = phi [entry: 1, ojoin: %spx]
    %cnt = phi [entry: 1, ojoin: %cntx]
    %oc = icmp.sgt %sp, 0
    br %oc, obody, done
  block obody:
    %sp1 = isub %sp, 1
    %u = load stk[%sp1]
    %pb = load adjptr[%u]
    %u1 = iadd %u, 1
    %pe = load adjptr[%u1]
    jmp ihead
  block ihead:
    %k = phi [obody: %pb, ijoin: %k1]
    %sp2 = phi [obody: %sp1, ijoin: %sp3]
    %cnt2 = phi [obody: %cnt, ijoin: %cnt3]
    %icn = icmp.slt %k, %pe
    br %icn, ibody, ojoin
  block ibody:
    %v = load adj[%k]
    %vis = load visited[%v]
    %nz = icmp.eq %vis, 0
    br %nz, grow, ijoin
  block grow:
    store visited[%v], 1
    store stk[%sp2], %v
    %sp2a = iadd %sp2, 1
    %cnt2a = iadd %cnt2, 1
    jmp ijoin
  block ijoin:
    %sp3 = phi [ibody: %sp2, grow: %sp2a]
    %cnt3 = phi [ibody: %cnt2, grow: %cnt2a]
    %k1 = iadd %k, 1
    jmp ihead
  block ojoin:
    %spx = phi [ihead: %sp2]
    %cntx = phi [ihead: %cnt2]
    jmp ohead
  block done:
    %out = phi [ohead: %cnt]
    ret %out
}
)";

  BenchKernel k;
  k.name = "dfs";
  k.program = must_parse(text, "dfs");
  k.image = MemoryImage::for_program(k.program);
  for (int i = 0; i <= nodes; ++i)
    k.image.write(0, i, Scalar::int32(i * degree));
  for (int64_t e = 0; e < edges; ++e)
    k.image.write(1, e, Scalar::int32(adj[static_cast<size_t>(e)]));
  k.args = {Scalar::int32(0)};

  // Oracle replays the exact traversal: pop the top, scan neighbors in
  // order, push first visits.
  std::vector<int> visited(static_cast<size_t>(nodes), 0);
  std::vector<int> stk(static_cast<size_t>(nodes) + 1, 0);
  int sp = 1, cnt = 1;
  stk[0] = 0;
  visited[0] = 1;
  while (sp > 0) {
    int u = stk[static_cast<size_t>(--sp)];
    for (int e = u * degree; e < (u + 1) * degree; ++e) {
      int v = adj[static_cast<size_t>(e)];
      if (!visited[static_cast<size_t>(v)]) {
        visited[static_cast<size_t>(v)] = 1;
        stk[static_cast<size_t>(sp++)] = v;
        ++cnt;
      }
    }
  }
  k.check_space = 2;
  for (int i = 0; i < nodes; ++i) k.expected.push_back(Scalar::int32(visited[static_cast<size_t>(i)]));
  k.has_expected_ret = true;
  k.expected_ret = Scalar::int32(cnt);
  return k;
}

std::vector<CatalogEntry> kernel_catalog() {
  return {
      {"spmv", "CSR sparse matrix-vector product; irregular rows, gathered x"},
      {"knapsack", "0/1 knapsack; table revisited across items, swept downward"},
      {"fw", "all-pairs shortest paths; three nested loops over one matrix"},
      {"dfs", "stack-driven reachability; the stack recurrence defeats decoupling"},
  };
}

std::optional<BenchKernel> make_kernel(const std::string& name,
                                       const std::string& scale, uint64_t seed,
                                       std::string* err) {
  bool desk = scale == "desk";
  if (!desk && scale != "full") {
    if (err) *err = "unknown scale '" + scale + "' (expected desk or full)";
    return std::nullopt;
  }
  if (name == "spmv") return make_spmv(desk ? 256 : 4096, 0.25, seed);
  if (name == "knapsack")
    return desk ? make_knapsack(256, 32, seed) : make_knapsack(3200, 200, seed);
  if (name == "fw") return make_fw(desk ? 64 : 256, seed);
  if (name == "dfs") return desk ? make_dfs(500, 20, seed) : make_dfs(5000, 20, seed);
  if (err) *err = "unknown kernel '" + name + "'";
  return std::nullopt;
}

}  // namespace dfp
