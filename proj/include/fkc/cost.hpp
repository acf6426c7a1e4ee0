#pragma once

#include <cstdint>
#include <vector>

#include "fkc/ir.hpp"

namespace fkc {

// Flops to compute one node over its own free-index set: arithmetic nodes
// and math functions cost one per point, IndexSum one add per body point.
// Leaves, copies, Delta and Conditional selection are free.
int64_t node_cost(const Expr& e);

// Total over the unique nodes reachable from the roots.
int64_t dag_flops(const std::vector<Expr>& roots);

}  // namespace fkc
