#include "fkc/ir.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace fkc {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::IllFormed: return "IllFormed";
    case ErrorKind::ExtentMismatch: return "ExtentMismatch";
    case ErrorKind::InvalidArity: return "InvalidArity";
    case ErrorKind::InvalidDegree: return "InvalidDegree";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::ValueShapeMismatch: return "ValueShapeMismatch";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::UnsupportedCell: return "UnsupportedCell";
    case ErrorKind::NonlinearArgument: return "NonlinearArgument";
    case ErrorKind::TooManyIndices: return "TooManyIndices";
    case ErrorKind::UnsplittableConcatenate: return "UnsplittableConcatenate";
    case ErrorKind::UnloweredNode: return "UnloweredNode";
    case ErrorKind::UnsupportedFunction: return "UnsupportedFunction";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::Usage: return "Usage";
  }
  return "Error";
}

bool is_usage_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage:
    case ErrorKind::UnsupportedCell:
    case ErrorKind::InvalidDegree:
    case ErrorKind::InvalidArity:
    case ErrorKind::ArityMismatch:
    case ErrorKind::ExtentMismatch:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ValueShapeMismatch:
    case ErrorKind::Unsupported:
      return true;
    default:
      return false;
  }
}

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

//------------------------------------------------------------------------------
// Index

namespace {
std::atomic<uint64_t> g_next_token{1};
}

Index Index::fixed(int64_t v) {
  if (v < 0) throw Error(ErrorKind::IllFormed, "negative fixed index");
  Index i;
  i.kind = Kind::Fixed;
  i.value = v;
  return i;
}

Index Index::fresh(int64_t extent, IndexRole role) {
  if (extent <= 0) throw Error(ErrorKind::IllFormed, "free index extent must be positive");
  Index i;
  i.kind = Kind::Free;
  i.id = g_next_token.fetch_add(1, std::memory_order_relaxed);
  i.extent = extent;
  i.role = role;
  return i;
}

Index Index::runtime(std::string symbol) {
  Index i;
  i.kind = Kind::RuntimeFixed;
  i.symbol = std::move(symbol);
  return i;
}

bool operator==(const Index& a, const Index& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Index::Kind::Fixed: return a.value == b.value;
    case Index::Kind::Free: return a.id == b.id;
    case Index::Kind::RuntimeFixed: return a.symbol == b.symbol;
  }
  return false;
}

IndexList index_union(const IndexList& a, const IndexList& b) {
  IndexList out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out), index_less);
  return out;
}

IndexList index_difference(const IndexList& a, const IndexList& b) {
  IndexList out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out), index_less);
  return out;
}

IndexList index_intersection(const IndexList& a, const IndexList& b) {
  IndexList out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
                        index_less);
  return out;
}

bool index_contains(const IndexList& set, const Index& i) {
  if (!i.is_free()) return false;
  return std::binary_search(set.begin(), set.end(), i, index_less);
}

IndexList sorted_free(const IndexList& any) {
  IndexList out;
  for (const auto& i : any)
    if (i.is_free()) out.push_back(i);
  std::sort(out.begin(), out.end(), index_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int64_t extent_product(const IndexList& free) {
  int64_t n = 1;
  for (const auto& i : free) n *= i.extent;
  return n;
}

std::string index_role_letter(IndexRole r) {
  switch (r) {
    case IndexRole::Argument: return "i";
    case IndexRole::Coefficient: return "r";
    case IndexRole::Quadrature: return "q";
    case IndexRole::Value: return "k";
    case IndexRole::Generic: return "x";
  }
  return "x";
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Literal: return "Literal";
    case Op::Zero: return "Zero";
    case Op::Identity: return "Identity";
    case Op::Variable: return "Variable";
    case Op::Sum: return "Sum";
    case Op::Product: return "Product";
    case Op::Division: return "Division";
    case Op::Power: return "Power";
    case Op::MinValue: return "MinValue";
    case Op::MaxValue: return "MaxValue";
    case Op::MathFunction: return "MathFunction";
    case Op::Comparison: return "Comparison";
    case Op::LogicalAnd: return "LogicalAnd";
    case Op::LogicalOr: return "LogicalOr";
    case Op::LogicalNot: return "LogicalNot";
    case Op::Conditional: return "Conditional";
    case Op::Indexed: return "Indexed";
    case Op::FlexiblyIndexed: return "FlexiblyIndexed";
    case Op::ComponentTensor: return "ComponentTensor";
    case Op::IndexSum: return "IndexSum";
    case Op::ListTensor: return "ListTensor";
    case Op::Delta: return "Delta";
    case Op::Concatenate: return "Concatenate";
  }
  return "?";
}

//------------------------------------------------------------------------------
// Hashing

namespace {

inline uint64_t mix(uint64_t h, uint64_t v) {
  v += 0x9e3779b97f4a7c15ULL;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  v ^= v >> 31;
  return (h ^ v) * 0x100000001b3ULL + 0x7f4a7c15ULL;
}

uint64_t hash_string(uint64_t h, const std::string& s) {
  h = mix(h, s.size());
  for (unsigned char c : s) h = mix(h, c);
  return h;
}

uint64_t hash_index(uint64_t h, const Index& i, bool with_id) {
  h = mix(h, static_cast<uint64_t>(i.kind));
  switch (i.kind) {
    case Index::Kind::Fixed: return mix(h, static_cast<uint64_t>(i.value));
    case Index::Kind::Free:
      h = mix(h, static_cast<uint64_t>(i.role));
      h = mix(h, static_cast<uint64_t>(i.extent));
      return with_id ? mix(h, i.id) : h;
    case Index::Kind::RuntimeFixed: return hash_string(h, i.symbol);
  }
  return h;
}

uint64_t hash_node(const Node& n, bool with_id) {
  uint64_t h = mix(0xcbf29ce484222325ULL, static_cast<uint64_t>(n.op));
  h = mix(h, n.shape.size());
  for (auto s : n.shape) h = mix(h, static_cast<uint64_t>(s));
  if (!n.name.empty()) h = hash_string(h, n.name);
  if (n.values) {
    h = mix(h, n.values->size());
    for (double v : *n.values) {
      uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = mix(h, bits);
    }
  }
  h = mix(h, n.indices.size());
  for (const auto& i : n.indices) h = hash_index(h, i, with_id);
  h = mix(h, n.flex.size());
  for (const auto& d : n.flex) {
    h = mix(h, static_cast<uint64_t>(d.offset));
    h = mix(h, d.terms.size());
    for (const auto& t : d.terms) {
      h = hash_index(h, t.index, with_id);
      h = mix(h, static_cast<uint64_t>(t.stride));
    }
  }
  h = mix(h, n.children.size());
  for (const auto& c : n.children) h = mix(h, with_id ? c->id_hash : c->hash);
  return h;
}

[[noreturn]] void ill(const std::string& what) { throw Error(ErrorKind::IllFormed, what); }

void require_scalar(const Expr& e, const char* ctx) {
  if (!e) ill(std::string(ctx) + ": null operand");
  if (!e->is_scalar()) ill(std::string(ctx) + ": operand must be scalar");
}

Expr finish(Node n) {
  n.hash = hash_node(n, false);
  n.id_hash = hash_node(n, true);
  return std::make_shared<const Node>(std::move(n));
}

Node base_node(Op op, std::vector<Expr> children) {
  Node n;
  n.op = op;
  n.children = std::move(children);
  return n;
}

Expr binary(Op op, Expr a, Expr b, const char* ctx) {
  require_scalar(a, ctx);
  require_scalar(b, ctx);
  Node n = base_node(op, {a, b});
  n.free = index_union(a->free, b->free);
  return finish(std::move(n));
}

bool literal_scalar(const Expr& e, double* v) {
  if (e->op == Op::Literal && e->is_scalar()) {
    *v = (*e->values)[0];
    return true;
  }
  return false;
}

}  // namespace

//------------------------------------------------------------------------------
// Constructors

Expr literal(std::vector<double> values, Shape shape) {
  if (static_cast<int64_t>(values.size()) != shape_size(shape))
    ill("literal value count does not match shape");
  for (auto s : shape)
    if (s <= 0) ill("literal extents must be positive");
  if (shape.empty()) {
    uint64_t bits;
    std::memcpy(&bits, &values[0], sizeof bits);
    if (bits == 0) return zero();
  }
  Node n = base_node(Op::Literal, {});
  n.values = std::make_shared<const std::vector<double>>(std::move(values));
  n.shape = std::move(shape);
  return finish(std::move(n));
}

Expr scalar(double v) { return literal({v}, {}); }

Expr zero(Shape shape) {
  Node n = base_node(Op::Zero, {});
  n.shape = std::move(shape);
  return finish(std::move(n));
}

Expr identity(int64_t n_) {
  if (n_ <= 0) ill("identity size must be positive");
  Node n = base_node(Op::Identity, {});
  n.shape = {n_, n_};
  return finish(std::move(n));
}

Expr variable(std::string name, Shape shape) {
  Node n = base_node(Op::Variable, {});
  n.name = std::move(name);
  n.shape = std::move(shape);
  return finish(std::move(n));
}

bool is_zero(const Expr& e) { return e->op == Op::Zero; }

bool is_one(const Expr& e) {
  double v;
  return literal_scalar(e, &v) && v == 1.0;
}

Expr sum(Expr a, Expr b) {
  require_scalar(a, "Sum");
  require_scalar(b, "Sum");
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  double x, y;
  if (literal_scalar(a, &x) && literal_scalar(b, &y)) return scalar(x + y);
  return binary(Op::Sum, std::move(a), std::move(b), "Sum");
}

Expr product(Expr a, Expr b) {
  require_scalar(a, "Product");
  require_scalar(b, "Product");
  if (is_zero(a) || is_zero(b)) return zero();
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  double x, y;
  if (literal_scalar(a, &x) && literal_scalar(b, &y)) return scalar(x * y);
  return binary(Op::Product, std::move(a), std::move(b), "Product");
}

Expr division(Expr a, Expr b) { return binary(Op::Division, std::move(a), std::move(b), "Division"); }
Expr power(Expr a, Expr b) { return binary(Op::Power, std::move(a), std::move(b), "Power"); }
Expr min_value(Expr a, Expr b) { return binary(Op::MinValue, std::move(a), std::move(b), "MinValue"); }
Expr max_value(Expr a, Expr b) { return binary(Op::MaxValue, std::move(a), std::move(b), "MaxValue"); }

Expr math_function(std::string fn, Expr a) {
  require_scalar(a, "MathFunction");
  Node n = base_node(Op::MathFunction, {a});
  n.name = std::move(fn);
  n.free = a->free;
  return finish(std::move(n));
}

Expr comparison(std::string op, Expr a, Expr b) {
  static const char* ops[] = {"<", "<=", ">", ">=", "==", "!="};
  if (std::find(std::begin(ops), std::end(ops), op) == std::end(ops))
    ill("unknown comparison operator " + op);
  Expr e = binary(Op::Comparison, std::move(a), std::move(b), "Comparison");
  Node n = *e;
  n.name = std::move(op);
  return finish(std::move(n));
}

Expr logical_and(Expr a, Expr b) { return binary(Op::LogicalAnd, std::move(a), std::move(b), "LogicalAnd"); }
Expr logical_or(Expr a, Expr b) { return binary(Op::LogicalOr, std::move(a), std::move(b), "LogicalOr"); }

Expr logical_not(Expr a) {
  require_scalar(a, "LogicalNot");
  Node n = base_node(Op::LogicalNot, {a});
  n.free = a->free;
  return finish(std::move(n));
}

Expr conditional(Expr c, Expr t, Expr f) {
  require_scalar(c, "Conditional");
  require_scalar(t, "Conditional");
  require_scalar(f, "Conditional");
  Node n = base_node(Op::Conditional, {c, t, f});
  n.free = index_union(index_union(c->free, t->free), f->free);
  return finish(std::move(n));
}

Expr negate(Expr a) { return product(scalar(-1.0), std::move(a)); }
Expr subtract(Expr a, Expr b) { return sum(std::move(a), negate(std::move(b))); }

Expr delta(Index i, Index j) {
  if (i.is_free() && j.is_free() && i.extent != j.extent)
    throw Error(ErrorKind::ExtentMismatch, "Delta indices have different extents");
  if (i.is_fixed() && j.is_fixed()) return i.value == j.value ? scalar(1.0) : zero();
  if (i.is_free() && j.is_fixed() && j.value >= i.extent) return zero();
  if (j.is_free() && i.is_fixed() && i.value >= j.extent) return zero();
  if (i == j) return scalar(1.0);
  Node n = base_node(Op::Delta, {});
  n.indices = {i, j};
  n.free = sorted_free(n.indices);
  return finish(std::move(n));
}

Expr indexed(Expr base, IndexList idx) {
  if (!base) ill("Indexed: null base");
  if (idx.size() != base->shape.size())
    ill("Indexed: index count " + std::to_string(idx.size()) + " does not match rank " +
        std::to_string(base->shape.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    const auto& i = idx[k];
    if (i.is_fixed() && i.value >= base->shape[k]) ill("Indexed: fixed index out of range");
    if (i.is_free() && i.extent != base->shape[k])
      throw Error(ErrorKind::ExtentMismatch, "Indexed: free index extent does not match dimension");
  }
  if (idx.empty()) return base;
  bool all_fixed = std::all_of(idx.begin(), idx.end(), [](const Index& i) { return i.is_fixed(); });
  switch (base->op) {
    case Op::Zero: return zero();
    case Op::Identity: return delta(idx[0], idx[1]);
    case Op::ComponentTensor: {
      IndexMap m;
      for (size_t k = 0; k < idx.size(); ++k) m.emplace_back(base->indices[k], idx[k]);
      return substitute_indices(base->children[0], m);
    }
    case Op::ListTensor:
      if (all_fixed) {
        int64_t off = 0;
        for (size_t k = 0; k < idx.size(); ++k) off = off * base->shape[k] + idx[k].value;
        return base->children[static_cast<size_t>(off)];
      }
      break;
    case Op::Literal:
      if (all_fixed) {
        int64_t off = 0;
        for (size_t k = 0; k < idx.size(); ++k) off = off * base->shape[k] + idx[k].value;
        return scalar((*base->values)[static_cast<size_t>(off)]);
      }
      break;
    default: break;
  }
  Node n = base_node(Op::Indexed, {base});
  n.indices = std::move(idx);
  n.free = index_union(base->free, sorted_free(n.indices));
  return finish(std::move(n));
}

Expr flexibly_indexed(Expr var, std::vector<FlexDim> dims) {
  if (!var || var->op != Op::Variable) ill("FlexiblyIndexed: base must be a Variable");
  if (dims.size() != var->shape.size()) ill("FlexiblyIndexed: dimension count mismatch");
  IndexList idx;
  for (size_t k = 0; k < dims.size(); ++k) {
    auto& d = dims[k];
    std::vector<FlexTerm> terms;
    for (const auto& t : d.terms) {
      if (t.index.is_fixed()) {
        d.offset += t.stride * t.index.value;
        continue;
      }
      auto it = std::find_if(terms.begin(), terms.end(),
                             [&](const FlexTerm& u) { return u.index == t.index; });
      if (it != terms.end())
        it->stride += t.stride;
      else
        terms.push_back(t);
    }
    int64_t lo = d.offset, hi = d.offset;
    for (const auto& t : terms) {
      if (!t.index.is_free()) ill("FlexiblyIndexed: runtime indices unsupported");
      idx.push_back(t.index);
      int64_t span = t.stride * (t.index.extent - 1);
      if (span >= 0)
        hi += span;
      else
        lo += span;
    }
    if (lo < 0 || hi >= var->shape[k]) ill("FlexiblyIndexed: layout exceeds variable extent");
    d.terms = std::move(terms);
  }
  Node n = base_node(Op::FlexiblyIndexed, {var});
  n.flex = std::move(dims);
  n.free = sorted_free(idx);
  return finish(std::move(n));
}

Expr component_tensor(Expr e, IndexList alpha) {
  require_scalar(e, "ComponentTensor");
  Shape shape;
  for (const auto& a : alpha) {
    if (!a.is_free()) ill("ComponentTensor: bound indices must be free");
    shape.push_back(a.extent);
  }
  if (alpha.empty()) return e;
  if (is_zero(e)) return zero(shape);
  if (e->op == Op::Indexed && e->indices.size() == alpha.size()) {
    bool same = true;
    for (size_t k = 0; k < alpha.size(); ++k) same = same && e->indices[k] == alpha[k];
    if (same && sorted_free(alpha).size() == alpha.size() &&
        index_intersection(e->children[0]->free, sorted_free(alpha)).empty())
      return e->children[0];
  }
  for (const auto& a : alpha)
    if (!index_contains(e->free, a)) ill("ComponentTensor: index is not free in the operand");
  if (sorted_free(alpha).size() != alpha.size()) ill("ComponentTensor: repeated index");
  Node n = base_node(Op::ComponentTensor, {e});
  n.indices = std::move(alpha);
  n.shape = std::move(shape);
  n.free = index_difference(e->free, sorted_free(n.indices));
  return finish(std::move(n));
}

Expr make_component_tensor(Expr e, IndexList alpha) { return component_tensor(std::move(e), std::move(alpha)); }

Expr index_sum(Expr e, IndexList idx) {
  require_scalar(e, "IndexSum");
  if (is_zero(e)) return e;
  IndexList kept;
  double scale = 1.0;
  for (const auto& i : idx) {
    if (!i.is_free()) ill("IndexSum: summed indices must be free");
    if (index_contains(e->free, i))
      kept.push_back(i);
    else
      scale *= static_cast<double>(i.extent);
  }
  if (sorted_free(kept).size() != kept.size()) ill("IndexSum: repeated index");
  Expr body = e;
  if (!kept.empty()) {
    Node n = base_node(Op::IndexSum, {e});
    n.indices = kept;
    n.free = index_difference(e->free, sorted_free(kept));
    body = finish(std::move(n));
  }
  return scale == 1.0 ? body : product(scalar(scale), body);
}

Expr list_tensor(std::vector<Expr> entries, Shape shape) {
  if (static_cast<int64_t>(entries.size()) != shape_size(shape) || shape.empty())
    ill("ListTensor: entry count does not match shape");
  IndexList free;
  bool all_zero = true;
  for (const auto& e : entries) {
    require_scalar(e, "ListTensor");
    free = index_union(free, e->free);
    all_zero = all_zero && is_zero(e);
  }
  if (all_zero) return zero(shape);
  Node n = base_node(Op::ListTensor, std::move(entries));
  n.shape = std::move(shape);
  n.free = std::move(free);
  return finish(std::move(n));
}

Expr concatenate(std::vector<Expr> operands) {
  if (operands.empty()) ill("Concatenate: no operands");
  int64_t total = 0;
  IndexList free;
  for (const auto& o : operands) {
    total += shape_size(o->shape);
    free = index_union(free, o->free);
  }
  Node n = base_node(Op::Concatenate, std::move(operands));
  n.shape = {total};
  n.free = std::move(free);
  return finish(std::move(n));
}

Expr rebuild(const Node& n, std::vector<Expr> c) {
  switch (n.op) {
    case Op::Literal:
    case Op::Zero:
    case Op::Identity:
    case Op::Variable:
    case Op::Delta: {
      Node m = n;
      return finish(std::move(m));
    }
    case Op::Sum: return sum(c[0], c[1]);
    case Op::Product: return product(c[0], c[1]);
    case Op::Division: return division(c[0], c[1]);
    case Op::Power: return power(c[0], c[1]);
    case Op::MinValue: return min_value(c[0], c[1]);
    case Op::MaxValue: return max_value(c[0], c[1]);
    case Op::MathFunction: return math_function(n.name, c[0]);
    case Op::Comparison: return comparison(n.name, c[0], c[1]);
    case Op::LogicalAnd: return logical_and(c[0], c[1]);
    case Op::LogicalOr: return logical_or(c[0], c[1]);
    case Op::LogicalNot: return logical_not(c[0]);
    case Op::Conditional: return conditional(c[0], c[1], c[2]);
    case Op::Indexed: return indexed(c[0], n.indices);
    case Op::FlexiblyIndexed: return flexibly_indexed(c[0], n.flex);
    case Op::ComponentTensor: return component_tensor(c[0], n.indices);
    case Op::IndexSum: return index_sum(c[0], n.indices);
    case Op::ListTensor: return list_tensor(std::move(c), n.shape);
    case Op::Concatenate: return concatenate(std::move(c));
  }
  ill("rebuild: unknown node");
}

std::pair<Shape, IndexList> infer_shape_free_indices(const Expr& e) { return {e->shape, e->free}; }

//------------------------------------------------------------------------------
// Substitution

namespace {

class Substituter {
 public:
  explicit Substituter(IndexMap m) : map_(std::move(m)) {
    for (const auto& [from, to] : map_) {
      if (!from.is_free()) ill("substitute_indices: mapping keys must be free indices");
      if (to.is_free() && to.extent != from.extent)
        throw Error(ErrorKind::ExtentMismatch, "substitute_indices: replacement extent differs");
      if (to.is_fixed() && to.value >= from.extent)
        throw Error(ErrorKind::IndexOutOfRange, "substitute_indices: fixed value out of range");
    }
    std::sort(map_.begin(), map_.end(),
              [](const auto& a, const auto& b) { return index_less(a.first, b.first); });
    for (const auto& kv : map_) keys_.push_back(kv.first);
  }

  Index map(const Index& i) const {
    if (!i.is_free()) return i;
    auto it = std::lower_bound(map_.begin(), map_.end(), i,
                               [](const auto& kv, const Index& x) { return index_less(kv.first, x); });
    if (it != map_.end() && it->first == i) return it->second;
    return i;
  }

  Expr apply(const Expr& e) {
    if (index_intersection(e->free, keys_).empty()) return e;
    auto found = memo_.find(e.get());
    if (found != memo_.end()) return found->second;
    Expr out = apply_uncached(e);
    memo_.emplace(e.get(), out);
    return out;
  }

 private:
  Expr apply_uncached(const Expr& e) {
    const Node& n = *e;
    switch (n.op) {
      case Op::Delta: return delta(map(n.indices[0]), map(n.indices[1]));
      case Op::Indexed: {
        IndexList idx;
        for (const auto& i : n.indices) idx.push_back(map(i));
        return indexed(apply(n.children[0]), std::move(idx));
      }
      case Op::FlexiblyIndexed: {
        auto dims = n.flex;
        for (auto& d : dims)
          for (auto& t : d.terms) t.index = map(t.index);
        return flexibly_indexed(n.children[0], std::move(dims));
      }
      case Op::ComponentTensor:
      case Op::IndexSum: {
        // Bound indices shadow the mapping inside the body.
        IndexMap inner;
        for (const auto& kv : map_)
          if (std::find(n.indices.begin(), n.indices.end(), kv.first) == n.indices.end())
            inner.push_back(kv);
        Substituter sub(std::move(inner));
        Expr body = sub.apply(n.children[0]);
        return n.op == Op::IndexSum ? index_sum(body, n.indices) : component_tensor(body, n.indices);
      }
      default: {
        std::vector<Expr> c;
        c.reserve(n.children.size());
        for (const auto& ch : n.children) c.push_back(apply(ch));
        return rebuild(n, std::move(c));
      }
    }
  }

  IndexMap map_;
  IndexList keys_;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr substitute_indices(const Expr& e, const IndexMap& mapping) {
  IndexMap m;
  for (const auto& kv : mapping)
    if (!(kv.first == kv.second)) m.push_back(kv);
  if (m.empty()) return e;
  Substituter s(std::move(m));
  return s.apply(e);
}

//------------------------------------------------------------------------------
// Structural utilities

uint64_t structural_hash(const Expr& e) { return e->hash; }

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.get() == b.get()) return true;
  if (a->id_hash != b->id_hash || a->op != b->op) return false;
  const Node& x = *a;
  const Node& y = *b;
  if (x.shape != y.shape || x.name != y.name || x.children.size() != y.children.size() ||
      x.indices != y.indices || x.flex.size() != y.flex.size())
    return false;
  if (x.values || y.values) {
    if (!x.values || !y.values) return false;
    if (x.values != y.values &&
        std::memcmp(x.values->data(), y.values->data(), x.values->size() * sizeof(double)) != 0)
      return false;
  }
  for (size_t k = 0; k < x.flex.size(); ++k) {
    if (x.flex[k].offset != y.flex[k].offset || x.flex[k].terms.size() != y.flex[k].terms.size())
      return false;
    for (size_t t = 0; t < x.flex[k].terms.size(); ++t)
      if (!(x.flex[k].terms[t].index == y.flex[k].terms[t].index) ||
          x.flex[k].terms[t].stride != y.flex[k].terms[t].stride)
        return false;
  }
  for (size_t k = 0; k < x.children.size(); ++k)
    if (!expr_equal(x.children[k], y.children[k])) return false;
  return true;
}

std::vector<Expr> post_order(const std::vector<Expr>& roots) {
  std::vector<Expr> out;
  std::unordered_set<const Node*> seen;
  std::vector<std::pair<Expr, size_t>> stack;
  for (const auto& r : roots) {
    if (!r || seen.count(r.get())) continue;
    stack.emplace_back(r, 0);
    seen.insert(r.get());
    while (!stack.empty()) {
      auto& [e, k] = stack.back();
      if (k < e->children.size()) {
        const Expr& c = e->children[k++];
        if (!seen.count(c.get())) {
          seen.insert(c.get());
          stack.emplace_back(c, 0);
        }
      } else {
        out.push_back(e);
        stack.pop_back();
      }
    }
  }
  return out;
}

Expr map_expr(const Expr& root, const std::function<Expr(const Expr&)>& fn) {
  std::unordered_map<const Node*, Expr> done;
  for (const auto& e : post_order({root})) {
    bool changed = false;
    std::vector<Expr> c;
    c.reserve(e->children.size());
    for (const auto& ch : e->children) {
      const Expr& r = done.at(ch.get());
      changed = changed || r.get() != ch.get();
      c.push_back(r);
    }
    Expr cur = changed ? rebuild(*e, std::move(c)) : e;
    done.emplace(e.get(), fn(cur));
  }
  return done.at(root.get());
}

std::vector<Expr> sum_terms(const Expr& e) {
  if (e->op != Op::Sum) return {e};
  auto a = sum_terms(e->children[0]);
  auto b = sum_terms(e->children[1]);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Expr> product_factors(const Expr& e) {
  if (e->op != Op::Product) return {e};
  auto a = product_factors(e->children[0]);
  auto b = product_factors(e->children[1]);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

//------------------------------------------------------------------------------
// Printer

namespace {

class Printer {
 public:
  std::string run(const Expr& e) {
    print(e);
    return out_.str();
  }

 private:
  std::string name(const Index& i) {
    switch (i.kind) {
      case Index::Kind::Fixed: return std::to_string(i.value);
      case Index::Kind::RuntimeFixed: return "$" + i.symbol;
      case Index::Kind::Free: {
        auto it = names_.find(i.id);
        if (it != names_.end()) return it->second;
        std::string s = index_role_letter(i.role) + std::to_string(names_.size());
        names_.emplace(i.id, s);
        return s;
      }
    }
    return "?";
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  void shape(const Shape& s) {
    out_ << "[";
    for (size_t k = 0; k < s.size(); ++k) out_ << (k ? " " : "") << s[k];
    out_ << "]";
  }

  void print(const Expr& e) {
    const Node& n = *e;
    out_ << "(" << op_name(n.op);
    switch (n.op) {
      case Op::Literal:
        out_ << " ";
        shape(n.shape);
        if (n.values->size() <= 16) {
          for (double v : *n.values) out_ << " " << num(v);
        } else {
          char buf[24];
          std::snprintf(buf, sizeof buf, " #%016llx", static_cast<unsigned long long>(n.hash));
          out_ << buf;
        }
        break;
      case Op::Zero:
      case Op::Identity:
        out_ << " ";
        shape(n.shape);
        break;
      case Op::Variable:
        out_ << " " << n.name << " ";
        shape(n.shape);
        break;
      case Op::MathFunction:
      case Op::Comparison: out_ << " " << n.name; break;
      case Op::FlexiblyIndexed:
        out_ << " " << n.children[0]->name;
        for (const auto& d : n.flex) {
          out_ << " (" << d.offset;
          for (const auto& t : d.terms) out_ << " " << t.stride << "*" << name(t.index);
          out_ << ")";
        }
        out_ << ")";
        return;
      case Op::ListTensor:
        out_ << " ";
        shape(n.shape);
        break;
      default: break;
    }
    if (n.op == Op::ComponentTensor || n.op == Op::IndexSum) {
      out_ << " (";
      for (size_t k = 0; k < n.indices.size(); ++k) out_ << (k ? " " : "") << name(n.indices[k]);
      out_ << ")";
    }
    for (const auto& c : n.children) {
      out_ << " ";
      print(c);
    }
    if (n.op == Op::Indexed || n.op == Op::Delta)
      for (const auto& i : n.indices) out_ << " " << name(i);
    out_ << ")";
  }

  std::ostringstream out_;
  std::unordered_map<uint64_t, std::string> names_;
};

}  // namespace

std::string to_sexpr(const Expr& e) { return Printer().run(e); }

}  // namespace fkc
