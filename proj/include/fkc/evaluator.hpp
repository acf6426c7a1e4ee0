#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fkc/ir.hpp"
#include "fkc/kernel.hpp"

namespace fkc {

struct LoopProgram;

// Dense result of evaluating an expression: one leading axis per unbound
// free index (token creation order) followed by the expression shape.
struct Tensor {
  IndexList free;
  Shape shape;
  std::vector<double> data;

  std::vector<int64_t> extents() const;
};

struct Environment {
  std::unordered_map<std::string, std::vector<double>> bindings;
  // Free indices pinned to a value instead of producing an output axis.
  std::vector<std::pair<Index, int64_t>> fixed;

  void bind(const std::string& name, std::vector<double> data) { bindings[name] = std::move(data); }
  void fix(const Index& i, int64_t v) { fixed.emplace_back(i, v); }
};

Tensor eval_expr(const Expr& e, const Environment& env);

using KernelInputs = std::map<std::string, std::vector<double>>;

// Evaluate every assignment with eval_expr and accumulate into a cleared
// return buffer.
std::vector<double> eval_kernel(const Kernel& k, const KernelInputs& inputs);

struct RunResult {
  std::vector<double> output;
  int64_t flops = 0;
};

// Execute a scheduled program. With `count` set, one flop is tallied per
// executed arithmetic operation.
RunResult run_kernel(const LoopProgram& p, const KernelInputs& inputs, bool count = false);

}  // namespace fkc
