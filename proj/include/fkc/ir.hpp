#pragma once

// Tensor-algebra expression IR.
//
// Nodes are immutable and shared through Expr handles. Every node caches its
// shape, its free indices (sorted by token) and two hashes: `hash` ignores the
// identity of free-index tokens, `id_hash` does not.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fkc/error.hpp"

namespace fkc {

using Shape = std::vector<int64_t>;

int64_t shape_size(const Shape& s);

// What a free index ranges over. Only used for scheduling order, small-sum
// expansion and pass bookkeeping; it never changes semantics.
enum class IndexRole : uint8_t { Generic, Argument, Coefficient, Quadrature, Value };

struct Index {
  enum class Kind : uint8_t { Fixed, Free, RuntimeFixed };

  Kind kind = Kind::Fixed;
  int64_t value = 0;   // Fixed
  uint64_t id = 0;     // Free token
  int64_t extent = 0;  // Free
  IndexRole role = IndexRole::Generic;
  std::string symbol;  // RuntimeFixed

  static Index fixed(int64_t v);
  static Index fresh(int64_t extent, IndexRole role = IndexRole::Generic);
  static Index runtime(std::string symbol);

  bool is_free() const { return kind == Kind::Free; }
  bool is_fixed() const { return kind == Kind::Fixed; }

  friend bool operator==(const Index& a, const Index& b);
  friend bool operator!=(const Index& a, const Index& b) { return !(a == b); }
};

// Ordering used for free-index sets: by token creation order.
inline bool index_less(const Index& a, const Index& b) { return a.id < b.id; }

using IndexList = std::vector<Index>;

IndexList index_union(const IndexList& a, const IndexList& b);
IndexList index_difference(const IndexList& a, const IndexList& b);
IndexList index_intersection(const IndexList& a, const IndexList& b);
bool index_contains(const IndexList& set, const Index& i);
IndexList sorted_free(const IndexList& any);
int64_t extent_product(const IndexList& free);

enum class Op : uint8_t {
  Literal,
  Zero,
  Identity,
  Variable,
  Sum,
  Product,
  Division,
  Power,
  MinValue,
  MaxValue,
  MathFunction,
  Comparison,
  LogicalAnd,
  LogicalOr,
  LogicalNot,
  Conditional,
  Indexed,
  FlexiblyIndexed,
  ComponentTensor,
  IndexSum,
  ListTensor,
  Delta,
  Concatenate,
};

const char* op_name(Op op);

struct FlexTerm {
  Index index;
  int64_t stride = 0;
};

// One dimension of a FlexiblyIndexed access: offset + sum(stride * index).
struct FlexDim {
  int64_t offset = 0;
  std::vector<FlexTerm> terms;
};

class Node;
using Expr = std::shared_ptr<const Node>;

class Node {
 public:
  Op op;
  std::vector<Expr> children;
  IndexList indices;            // Indexed, ComponentTensor, IndexSum, Delta
  std::vector<FlexDim> flex;    // FlexiblyIndexed
  std::string name;             // Variable, MathFunction, Comparison
  std::shared_ptr<const std::vector<double>> values;  // Literal (row-major)

  Shape shape;
  IndexList free;  // sorted by token
  uint64_t hash = 0;
  uint64_t id_hash = 0;

  bool is_scalar() const { return shape.empty(); }
};

// ---------------------------------------------------------------------------
// Constructors. They check well-formedness (throwing IllFormed) and apply a
// small set of exact simplifications (zero propagation, unit products,
// Indexed/ComponentTensor cancellation, fixed Delta evaluation).

Expr literal(std::vector<double> values, Shape shape);
Expr scalar(double v);
Expr zero(Shape shape = {});
Expr identity(int64_t n);
Expr variable(std::string name, Shape shape);
Expr sum(Expr a, Expr b);
Expr product(Expr a, Expr b);
Expr division(Expr a, Expr b);
Expr power(Expr a, Expr b);
Expr min_value(Expr a, Expr b);
Expr max_value(Expr a, Expr b);
Expr math_function(std::string fn, Expr a);
Expr comparison(std::string op, Expr a, Expr b);
Expr logical_and(Expr a, Expr b);
Expr logical_or(Expr a, Expr b);
Expr logical_not(Expr a);
Expr conditional(Expr c, Expr t, Expr f);
Expr indexed(Expr base, IndexList idx);
Expr flexibly_indexed(Expr var, std::vector<FlexDim> dims);
Expr component_tensor(Expr e, IndexList alpha);
Expr index_sum(Expr e, IndexList idx);
Expr list_tensor(std::vector<Expr> entries, Shape shape);
Expr delta(Index i, Index j);
Expr concatenate(std::vector<Expr> operands);

Expr negate(Expr a);
Expr subtract(Expr a, Expr b);

bool is_zero(const Expr& e);
bool is_one(const Expr& e);

// Rebuild a node of the same kind from new children (through the
// simplifying constructors).
Expr rebuild(const Node& n, std::vector<Expr> children);

// (shape, free index set) of a node.
std::pair<Shape, IndexList> infer_shape_free_indices(const Expr& e);

Expr make_component_tensor(Expr e, IndexList alpha);

// Replace free occurrences of mapping keys. Replacement Free indices must
// keep the extent; Fixed replacements must be in range.
using IndexMap = std::vector<std::pair<Index, Index>>;
Expr substitute_indices(const Expr& e, const IndexMap& mapping);

uint64_t structural_hash(const Expr& e);

// Equality including free-index token identity.
bool expr_equal(const Expr& a, const Expr& b);

struct ExprIdHash {
  size_t operator()(const Expr& e) const { return static_cast<size_t>(e->id_hash); }
};
struct ExprIdEq {
  bool operator()(const Expr& a, const Expr& b) const { return expr_equal(a, b); }
};
template <class T>
using ExprMap = std::unordered_map<Expr, T, ExprIdHash, ExprIdEq>;

// Unique nodes reachable from the roots, children before parents.
std::vector<Expr> post_order(const std::vector<Expr>& roots);

// Memoised bottom-up rewrite. `fn` receives the node with rewritten children
// already applied and returns the replacement.
Expr map_expr(const Expr& root, const std::function<Expr(const Expr&)>& fn);

// Flatten nested binary Sum / Product nodes into operand lists.
std::vector<Expr> sum_terms(const Expr& e);
std::vector<Expr> product_factors(const Expr& e);

// Deterministic S-expression rendering. Free indices are named by role letter
// and first-appearance order, so the text does not depend on token values.
std::string to_sexpr(const Expr& e);

std::string index_role_letter(IndexRole r);

}  // namespace fkc
