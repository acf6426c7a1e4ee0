#include "fkc/cost.hpp"

#include <unordered_set>

namespace fkc {

int64_t node_cost(const Expr& e) {
  switch (e->op) {
    case Op::Sum:
    case Op::Product:
    case Op::Division:
    case Op::Power:
    case Op::MinValue:
    case Op::MaxValue:
    case Op::MathFunction:
    case Op::Comparison:
      return extent_product(e->free);
    case Op::IndexSum:
      return extent_product(e->children[0]->free);
    default:
      return 0;
  }
}

int64_t dag_flops(const std::vector<Expr>& roots) {
  // Structurally equal nodes are computed once, as in the scheduler.
  int64_t total = 0;
  std::unordered_set<Expr, ExprIdHash, ExprIdEq> seen;
  for (const auto& n : post_order(roots))
    if (seen.insert(n).second) total += node_cost(n);
  return total;
}

}  // namespace fkc
