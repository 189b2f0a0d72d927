#pragma once
// bench.hpp - loop-nest kernels with seeded inputs and host oracles. Each
// kernel arrives as a parsed program, a filled memory image, arguments, and
// the values a correct run must produce.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfp/ir.hpp"

namespace dfp {

struct BenchKernel {
  std::string name;
  Program program;
  MemoryImage image;  // inputs seeded, outputs zeroed
  std::vector<Scalar> args;
  int check_space = -1;          // space holding the primary result, -1 none
  std::vector<Scalar> expected;  // host-computed cells of check_space
  bool has_expected_ret = false;
  Scalar expected_ret;
};

// Deterministic 64-bit stream used for every generated input.
uint64_t splitmix64(uint64_t& state);

// Sparse matrix-vector product over CSR with an irregular row profile.
BenchKernel make_spmv(int n, double density, uint64_t seed);
// 0/1 knapsack sweeping capacities downward; the table is revisited across
// items but never within one sweep.
BenchKernel make_knapsack(int cap, int items, uint64_t seed);
// All-pairs shortest paths over an n x n matrix, n a power of two.
BenchKernel make_fw(int n, uint64_t seed);
// Iterative depth-first reachability count with an explicit stack.
BenchKernel make_dfs(int nodes, int degree, uint64_t seed);

struct CatalogEntry {
  std::string name;
  std::string summary;
};
std::vector<CatalogEntry> kernel_catalog();

// Scale is "desk" (seconds) or "full" (minutes). Unknown names or scales
// yield nullopt and a message in *err.
std::optional<BenchKernel> make_kernel(const std::string& name,
                                       const std::string& scale, uint64_t seed,
                                       std::string* err = nullptr);

}  // namespace dfp
