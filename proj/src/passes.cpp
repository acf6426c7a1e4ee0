#include "fkc/passes.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "fkc/cost.hpp"

namespace fkc {

Mode parse_mode(const std::string& s) {
  if (s == "spectral") return Mode::Spectral;
  if (s == "coffee") return Mode::Coffee;
  if (s == "vanilla") return Mode::Vanilla;
  throw Error(ErrorKind::Usage, "unknown mode '" + s + "'");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Spectral: return "spectral";
    case Mode::Coffee: return "coffee";
    case Mode::Vanilla: return "vanilla";
  }
  return "?";
}

namespace {

Expr sum_all(const std::vector<Expr>& terms) {
  Expr acc = zero();
  for (const auto& t : terms) acc = sum(acc, t);
  return acc;
}

bool same_index_set(const IndexList& a, const IndexList& b) {
  return sorted_free(a).size() == sorted_free(b).size() && index_difference(sorted_free(a), sorted_free(b)).empty() &&
         index_difference(sorted_free(b), sorted_free(a)).empty();
}

bool contains_expr(const std::vector<Expr>& v, const Expr& e) {
  return std::any_of(v.begin(), v.end(), [&](const Expr& x) { return expr_equal(x, e); });
}

// Multiset equality of factor lists.
bool same_factors(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  if (a.size() != b.size()) return false;
  std::vector<bool> used(b.size(), false);
  for (const auto& x : a) {
    bool found = false;
    for (size_t k = 0; k < b.size() && !found; ++k)
      if (!used[k] && expr_equal(x, b[k])) used[k] = found = true;
    if (!found) return false;
  }
  return true;
}

Index fresh_like(const Index& i) { return Index::fresh(i.extent, i.role); }

}  // namespace

//------------------------------------------------------------------------------
// Monomials

Expr Monomial::reassemble() const {
  std::vector<Expr> f = atomics;
  f.push_back(rest);
  return index_sum(make_product(f), sum_indices);
}

Expr MonomialSum::reassemble() const {
  std::vector<Expr> terms;
  for (const auto& m : monomials) terms.push_back(m.reassemble());
  return sum_all(terms);
}

//------------------------------------------------------------------------------
// Concatenate splitting

namespace {

struct ConcatInfo {
  std::vector<Shape> shapes;
  std::vector<int64_t> offsets;
};

using ConcatTable = std::vector<std::pair<Index, ConcatInfo>>;

const ConcatInfo* find_concat(const ConcatTable& t, const Index& i) {
  for (const auto& [k, v] : t)
    if (k == i) return &v;
  return nullptr;
}

ConcatTable collect_concatenates(const Expr& root) {
  ConcatTable table;
  for (const auto& n : post_order({root})) {
    for (const auto& c : n->children) {
      if (c->op != Op::Concatenate) continue;
      if (n->op != Op::Indexed || n->indices.size() != 1 || !n->indices[0].is_free())
        throw Error(ErrorKind::UnsplittableConcatenate, "Concatenate is not selected by a single flat index");
      ConcatInfo info;
      int64_t off = 0;
      for (const auto& o : c->children) {
        info.shapes.push_back(o->shape);
        info.offsets.push_back(off);
        off += shape_size(o->shape);
      }
      const Index& i = n->indices[0];
      if (const ConcatInfo* prev = find_concat(table, i)) {
        if (prev->shapes != info.shapes)
          throw Error(ErrorKind::UnsplittableConcatenate, "inconsistent Concatenate layouts on one index");
      } else {
        table.emplace_back(i, info);
      }
    }
  }
  return table;
}

// Replace the flat index `flat` by operand `k`, whose own multi-index is `beta`.
class OperandSplitter {
 public:
  OperandSplitter(Index flat, int64_t offset, IndexList beta)
      : flat_(std::move(flat)), offset_(offset), beta_(std::move(beta)) {
    int64_t s = 1;
    strides_.resize(beta_.size());
    for (size_t m = beta_.size(); m-- > 0;) {
      strides_[m] = s;
      s *= beta_[m].extent;
    }
  }

  Expr apply(const Expr& e) {
    if (!index_contains(e->free, flat_)) return e;
    auto it = memo_.find(e.get());
    if (it != memo_.end()) return it->second;
    Expr out = apply_uncached(e);
    memo_.emplace(e.get(), out);
    return out;
  }

  // Affine replacement inside a FlexiblyIndexed dimension or a view.
  template <class Term>
  void replace_terms(int64_t* offset, std::vector<Term>* terms) const {
    std::vector<Term> out;
    for (const auto& t : *terms) {
      if (!(t.index == flat_)) {
        out.push_back(t);
        continue;
      }
      *offset += t.stride * offset_;
      for (size_t m = 0; m < beta_.size(); ++m) out.push_back(Term{beta_[m], t.stride * strides_[m]});
    }
    *terms = std::move(out);
  }

 private:
  Expr apply_uncached(const Expr& e) {
    const Node& n = *e;
    switch (n.op) {
      case Op::Indexed:
        if (n.children[0]->op == Op::Concatenate) {
          if (n.indices.size() == 1 && n.indices[0] == flat_) return indexed(operand(n.children[0]), beta_);
          throw Error(ErrorKind::UnsplittableConcatenate, "Concatenate selected by another index");
        }
        if (std::find(n.indices.begin(), n.indices.end(), flat_) != n.indices.end())
          throw Error(ErrorKind::UnsplittableConcatenate, "flat basis index used outside its Concatenate");
        return indexed(apply(n.children[0]), n.indices);
      case Op::FlexiblyIndexed: {
        auto dims = n.flex;
        for (auto& d : dims) replace_terms(&d.offset, &d.terms);
        return flexibly_indexed(n.children[0], dims);
      }
      case Op::Delta:
      case Op::Concatenate:
        throw Error(ErrorKind::UnsplittableConcatenate, "flat basis index used outside its Concatenate");
      default: {
        std::vector<Expr> c;
        for (const auto& ch : n.children) c.push_back(apply(ch));
        return rebuild(n, std::move(c));
      }
    }
  }

  Expr operand(const Expr& concat) const {
    int64_t off = 0;
    for (const auto& o : concat->children) {
      if (off == offset_) return o;
      off += shape_size(o->shape);
    }
    throw Error(ErrorKind::UnsplittableConcatenate, "operand offset mismatch");
  }

  Index flat_;
  int64_t offset_;
  IndexList beta_;
  std::vector<int64_t> strides_;
  std::unordered_map<const Node*, Expr> memo_;
};

IndexList fresh_operand_indices(const Shape& s, IndexRole role) {
  IndexList out;
  for (auto e : s) out.push_back(Index::fresh(e, role));
  return out;
}

// Split IndexSums over flat concatenation indices into per-operand sums.
Expr split_summed(const Expr& root, const ConcatTable& table) {
  std::function<Expr(const Expr&)> fn = [&](const Expr& n) -> Expr {
    if (n->op != Op::IndexSum) return n;
    for (const auto& i : n->indices) {
      const ConcatInfo* info = find_concat(table, i);
      if (!info) continue;
      IndexList others;
      for (const auto& j : n->indices)
        if (!(j == i)) others.push_back(j);
      std::vector<Expr> parts;
      for (size_t k = 0; k < info->shapes.size(); ++k) {
        IndexList beta = fresh_operand_indices(info->shapes[k], i.role);
        OperandSplitter sp(i, info->offsets[k], beta);
        IndexList idx = others;
        idx.insert(idx.end(), beta.begin(), beta.end());
        parts.push_back(fn(index_sum(sp.apply(n->children[0]), idx)));
      }
      return sum_all(parts);
    }
    return n;
  };
  return map_expr(root, fn);
}

}  // namespace

Kernel split_concatenate(const Kernel& k) {
  Kernel out = k;
  out.assignments.clear();
  for (const auto& a : k.assignments) {
    ConcatTable table = collect_concatenates(a.expr);
    std::vector<Assignment> work = {a};
    work[0].expr = split_summed(a.expr, table);
    for (const auto& [flat, info] : table) {
      if (!index_contains(work[0].expr->free, flat) &&
          std::none_of(work.begin(), work.end(), [&](const Assignment& w) { return index_contains(w.view.indices(), flat); }))
        continue;
      std::vector<Assignment> next;
      for (const auto& w : work) {
        for (size_t kk = 0; kk < info.shapes.size(); ++kk) {
          IndexList beta = fresh_operand_indices(info.shapes[kk], flat.role);
          OperandSplitter sp(flat, info.offsets[kk], beta);
          Assignment s = w;
          s.expr = sp.apply(w.expr);
          sp.replace_terms(&s.view.offset, &s.view.terms);
          s.view = normalize_view(s.view);
          for (auto& arg : s.arguments) {
            IndexList r;
            for (const auto& i : arg) {
              if (i == flat)
                r.insert(r.end(), beta.begin(), beta.end());
              else
                r.push_back(i);
            }
            arg = r;
          }
          next.push_back(std::move(s));
        }
      }
      work = std::move(next);
    }
    for (auto& w : work) {
      for (const auto& n : post_order({w.expr}))
        if (n->op == Op::Concatenate)
          throw Error(ErrorKind::UnsplittableConcatenate, "Concatenate survived splitting");
      if (!is_zero(w.expr)) out.assignments.push_back(std::move(w));
    }
  }
  return out;
}

//------------------------------------------------------------------------------
// Small sums

Expr expand_small_sums(const Expr& e, int64_t max_extent) {
  return map_expr(e, [&](const Expr& n) -> Expr {
    if (n->op != Op::IndexSum) return n;
    IndexList unroll, keep;
    for (const auto& i : n->indices) {
      if (i.role == IndexRole::Value && i.extent <= max_extent)
        unroll.push_back(i);
      else
        keep.push_back(i);
    }
    if (unroll.empty()) return n;
    std::vector<Expr> terms;
    std::vector<int64_t> pos(unroll.size(), 0);
    const int64_t total = extent_product(unroll);
    for (int64_t lin = 0; lin < total; ++lin) {
      int64_t rem = lin;
      IndexMap m;
      for (size_t k = unroll.size(); k-- > 0;) {
        m.emplace_back(unroll[k], Index::fixed(rem % unroll[k].extent));
        rem /= unroll[k].extent;
      }
      terms.push_back(substitute_indices(n->children[0], m));
    }
    return index_sum(sum_all(terms), keep);
  });
}

//------------------------------------------------------------------------------
// Argument factorisation

namespace {

class Factoriser {
 public:
  explicit Factoriser(const std::vector<IndexList>& arguments) {
    for (size_t a = 0; a < arguments.size(); ++a)
      for (const auto& i : arguments[a])
        if (i.is_free()) owner_.emplace_back(i, static_cast<int>(a));
  }

  int arguments_of(const Expr& e) const {
    int mask = 0;
    for (const auto& i : e->free)
      for (const auto& [j, a] : owner_)
        if (i == j) mask |= 1 << a;
    return mask;
  }

  std::vector<Monomial> run(const Expr& e) {
    if (is_zero(e)) return {};
    const int mask = arguments_of(e);
    if (mask == 0) return {Monomial{{}, {}, e}};
    const Node& n = *e;
    switch (n.op) {
      case Op::Sum: {
        auto a = run(n.children[0]);
        auto b = run(n.children[1]);
        a.insert(a.end(), b.begin(), b.end());
        return a;
      }
      case Op::Product: {
        auto a = run(n.children[0]);
        auto b = run(n.children[1]);
        std::vector<Monomial> out;
        for (const auto& x : a)
          for (auto y : b) {
            // Bound indices of the two operands must stay distinct.
            IndexMap ren;
            for (const auto& i : y.sum_indices) {
              bool clash = index_contains(x.sum_indices, i) || index_contains(x.rest->free, i) ||
                           std::any_of(x.atomics.begin(), x.atomics.end(),
                                       [&](const Expr& f) { return index_contains(f->free, i); });
              if (clash) ren.emplace_back(i, fresh_like(i));
            }
            if (!ren.empty()) {
              for (auto& f : y.atomics) f = substitute_indices(f, ren);
              y.rest = substitute_indices(y.rest, ren);
              for (auto& i : y.sum_indices)
                for (const auto& [from, to] : ren)
                  if (i == from) i = to;
            }
            Monomial m;
            m.sum_indices = x.sum_indices;
            m.sum_indices.insert(m.sum_indices.end(), y.sum_indices.begin(), y.sum_indices.end());
            m.atomics = x.atomics;
            m.atomics.insert(m.atomics.end(), y.atomics.begin(), y.atomics.end());
            m.rest = product(x.rest, y.rest);
            out.push_back(std::move(m));
          }
        return out;
      }
      case Op::Division: {
        if (arguments_of(n.children[1]) != 0)
          throw Error(ErrorKind::NonlinearArgument, "argument in a denominator");
        auto a = run(n.children[0]);
        for (auto& m : a) m.rest = division(m.rest, n.children[1]);
        return a;
      }
      case Op::IndexSum: {
        auto body = run(n.children[0]);
        for (auto& m : body) {
          for (const auto& i : n.indices) {
            bool in_atomics = std::any_of(m.atomics.begin(), m.atomics.end(),
                                          [&](const Expr& f) { return index_contains(f->free, i); });
            if (in_atomics)
              m.sum_indices.push_back(i);
            else
              m.rest = index_sum(m.rest, {i});
          }
        }
        return body;
      }
      case Op::Power:
      case Op::MathFunction:
      case Op::Conditional:
      case Op::Comparison:
      case Op::MinValue:
      case Op::MaxValue:
      case Op::LogicalAnd:
      case Op::LogicalOr:
      case Op::LogicalNot:
        throw Error(ErrorKind::NonlinearArgument, std::string("argument inside ") + op_name(n.op));
      default:
        if (n.op != Op::Delta && (mask & (mask - 1)) != 0)
          throw Error(ErrorKind::NonlinearArgument, "factor depends on two arguments");
        return {Monomial{{}, {e}, scalar(1.0)}};
    }
  }

 private:
  std::vector<std::pair<Index, int>> owner_;
};

std::vector<Monomial> merge_monomials(const std::vector<Monomial>& in) {
  std::vector<Monomial> out;
  for (const auto& m : in) {
    if (is_zero(m.rest)) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const Monomial& o) {
      return same_index_set(o.sum_indices, m.sum_indices) && same_factors(o.atomics, m.atomics);
    });
    if (it == out.end()) {
      out.push_back(m);
    } else {
      it->rest = sum(it->rest, m.rest);
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Monomial& m) { return is_zero(m.rest); }), out.end());
  return out;
}

// Constant atomics (folded Deltas, literals) move into the rest.
void normalise(Monomial* m) {
  std::vector<Expr> keep;
  for (const auto& f : m->atomics) {
    if (f->free.empty() && f->op == Op::Literal) {
      m->rest = product(m->rest, f);
    } else if (is_zero(f)) {
      m->rest = zero();
    } else {
      keep.push_back(f);
    }
  }
  m->atomics = std::move(keep);
  IndexList used;
  for (const auto& i : m->sum_indices) {
    bool present = std::any_of(m->atomics.begin(), m->atomics.end(),
                               [&](const Expr& f) { return index_contains(f->free, i); });
    if (present)
      used.push_back(i);
    else
      m->rest = index_sum(m->rest, {i});
  }
  m->sum_indices = used;
}

}  // namespace

MonomialSum argument_factorise(const Expr& e, const std::vector<IndexList>& arguments) {
  Factoriser f(arguments);
  auto ms = f.run(e);
  for (auto& m : ms) normalise(&m);
  return MonomialSum{merge_monomials(ms)};
}

//------------------------------------------------------------------------------
// Delta cancellation

namespace {

void substitute_monomial(Monomial* m, const IndexMap& map) {
  for (auto& f : m->atomics) f = substitute_indices(f, map);
  m->rest = substitute_indices(m->rest, map);
}

}  // namespace

Monomial cancel_contraction_deltas(Monomial m) {
  for (bool changed = true; changed;) {
    changed = false;
    for (size_t k = 0; k < m.atomics.size() && !changed; ++k) {
      const Expr& f = m.atomics[k];
      if (f->op != Op::Delta) continue;
      Index a = f->indices[0], b = f->indices[1];
      if (!index_contains(m.sum_indices, a)) std::swap(a, b);
      if (!index_contains(m.sum_indices, a)) continue;
      m.atomics.erase(m.atomics.begin() + static_cast<long>(k));
      m.sum_indices.erase(std::find(m.sum_indices.begin(), m.sum_indices.end(), a));
      substitute_monomial(&m, {{a, b}});
      normalise(&m);
      changed = true;
    }
  }
  return m;
}

std::vector<std::pair<View, MonomialSum>> cancel_assignment_deltas(const View& view, const MonomialSum& ms) {
  std::vector<std::pair<View, MonomialSum>> groups;
  auto position = [](const View& v, const Index& i) {
    for (size_t k = 0; k < v.terms.size(); ++k)
      if (v.terms[k].index == i) return static_cast<int>(k);
    return -1;
  };
  for (Monomial m : ms.monomials) {
    View v = view;
    for (bool changed = true; changed;) {
      changed = false;
      for (size_t k = 0; k < m.atomics.size() && !changed; ++k) {
        const Expr& f = m.atomics[k];
        if (f->op != Op::Delta) continue;
        Index a = f->indices[0], b = f->indices[1];
        int pa = position(v, a), pb = position(v, b);
        if (pa < 0 && pb < 0) continue;
        // Eliminate the view index; between two view indices the later one.
        if (pa < 0 || (pb >= 0 && pb > pa)) {
          std::swap(a, b);
          std::swap(pa, pb);
        }
        // Contraction partners are left to contraction cancellation.
        if (!b.is_fixed() && pb < 0) continue;
        m.atomics.erase(m.atomics.begin() + static_cast<long>(k));
        substitute_monomial(&m, {{a, b}});
        v = v.substitute({{a, b}});
        normalise(&m);
        changed = true;
      }
    }
    if (is_zero(m.rest)) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == v; });
    if (it == groups.end())
      groups.push_back({v, MonomialSum{{m}}});
    else
      it->second.monomials.push_back(m);
  }
  for (auto& g : groups) g.second.monomials = merge_monomials(g.second.monomials);
  return groups;
}

//------------------------------------------------------------------------------
// Cheapest contraction order

Expr make_product(std::vector<Expr> factors, int64_t* flops) {
  std::stable_sort(factors.begin(), factors.end(), [](const Expr& a, const Expr& b) {
    if (a->free.size() != b->free.size()) return a->free.size() < b->free.size();
    return a->hash < b->hash;
  });
  Expr acc = scalar(1.0);
  for (const auto& f : factors) {
    Expr p = product(acc, f);
    if (flops && p->op == Op::Product && p != acc && p != f) *flops += extent_product(p->free);
    acc = p;
  }
  return acc;
}

TensorProductResult make_tensor_product_ordered(const std::vector<Expr>& factors, const IndexList& ordering) {
  TensorProductResult r;
  std::vector<Expr> F;
  for (const auto& f : factors)
    if (!is_one(f)) F.push_back(f);
  for (const auto& idx : ordering) {
    std::vector<Expr> contract, deferred;
    for (const auto& f : F) (index_contains(f->free, idx) ? contract : deferred).push_back(f);
    if (contract.empty()) continue;
    Expr p = make_product(contract, &r.flops);
    Expr s = index_sum(p, {idx});
    if (s->op == Op::IndexSum) r.flops += extent_product(p->free);
    deferred.push_back(s);
    F = std::move(deferred);
    r.ordering.push_back(idx);
  }
  r.expr = make_product(F, &r.flops);
  return r;
}

namespace {

IndexList greedy_ordering(IndexList idx) {
  std::stable_sort(idx.begin(), idx.end(), [](const Index& a, const Index& b) {
    if (a.extent != b.extent) return a.extent < b.extent;
    return index_less(a, b);
  });
  return idx;
}

IndexList restrict_to(const IndexList& ordering, const IndexList& present) {
  IndexList out;
  for (const auto& i : ordering)
    if (index_contains(present, i)) out.push_back(i);
  return out;
}

std::vector<Expr> monomial_factors(const Monomial& m) {
  std::vector<Expr> f = m.atomics;
  if (!is_one(m.rest)) f.push_back(m.rest);
  return f;
}

}  // namespace

TensorProductResult make_tensor_product(const std::vector<Expr>& factors, const IndexList& indices) {
  IndexList idx = sorted_free(indices);
  if (idx.size() > kPermutationLimit) return make_tensor_product_ordered(factors, greedy_ordering(idx));
  TensorProductResult best;
  bool have = false;
  do {
    auto r = make_tensor_product_ordered(factors, idx);
    if (!have || r.flops < best.flops) {
      best = r;
      have = true;
    }
  } while (std::next_permutation(idx.begin(), idx.end(), index_less));
  return best;
}

IndexList choose_shared_ordering(const std::vector<Monomial>& monomials) {
  IndexList all;
  for (const auto& m : monomials) all = index_union(all, sorted_free(m.sum_indices));
  if (all.size() > kPermutationLimit) return greedy_ordering(all);
  IndexList best;
  int64_t best_flops = 0;
  bool have = false;
  do {
    int64_t total = 0;
    for (const auto& m : monomials)
      total += make_tensor_product_ordered(monomial_factors(m), restrict_to(all, m.sum_indices)).flops;
    if (!have || total < best_flops) {
      best = all;
      best_flops = total;
      have = true;
    }
  } while (std::next_permutation(all.begin(), all.end(), index_less));
  return best;
}

//------------------------------------------------------------------------------
// Distributive refactorisation

namespace {

class Refactorer {
 public:
  explicit Refactorer(IndexList args) : args_(std::move(args)) {}

  Expr run(const Expr& e) {
    auto it = memo_.find(e.get());
    if (it != memo_.end()) return it->second.second;
    Expr out;
    switch (e->op) {
      case Op::Sum: out = refactor_sum(sum_terms(e)); break;
      case Op::IndexSum: out = index_sum(run(e->children[0]), e->indices); break;
      case Op::Product: out = product(run(e->children[0]), run(e->children[1])); break;
      default: out = e;
    }
    memo_.emplace(e.get(), std::make_pair(e, out));
    return out;
  }

 private:
  bool argument_dependent(const Expr& f) const { return !index_intersection(f->free, args_).empty(); }

  Expr refactor_sum(std::vector<Expr> terms) {
    for (auto& t : terms) t = run(t);
    // Merge sums over the same indices.
    std::vector<Expr> merged;
    std::vector<std::vector<Expr>> bodies;
    std::vector<IndexList> sums;
    for (const auto& t : terms) {
      if (t->op == Op::IndexSum) {
        auto it = std::find_if(sums.begin(), sums.end(), [&](const IndexList& s) { return same_index_set(s, t->indices); });
        if (it != sums.end()) {
          auto& b = bodies[static_cast<size_t>(it - sums.begin())];
          for (const auto& x : sum_terms(t->children[0])) b.push_back(x);
          continue;
        }
        sums.push_back(t->indices);
        bodies.push_back({});
        for (const auto& x : sum_terms(t->children[0])) bodies.back().push_back(x);
        merged.push_back(nullptr);
        continue;
      }
      merged.push_back(t);
    }
    std::vector<Expr> out;
    size_t s = 0;
    for (const auto& t : merged) {
      if (t) {
        out.push_back(t);
        continue;
      }
      const auto& b = bodies[s];
      Expr body = b.size() == 1 ? b[0] : hoist(b);
      out.push_back(index_sum(body, sums[s]));
      ++s;
    }
    return hoist(out);
  }

  Expr hoist(const std::vector<Expr>& terms) {
    if (terms.size() < 2) return sum_all(terms);
    std::vector<std::vector<Expr>> factors;
    for (const auto& t : terms) factors.push_back(product_factors(t));
    // Most frequent argument-dependent factor; ties keep first appearance.
    Expr best;
    size_t best_count = 1;
    std::vector<Expr> seen;
    for (const auto& fl : factors)
      for (const auto& f : fl) {
        if (!argument_dependent(f) || contains_expr(seen, f)) continue;
        seen.push_back(f);
        size_t c = 0;
        for (const auto& gl : factors) c += contains_expr(gl, f) ? 1 : 0;
        if (c > best_count) {
          best = f;
          best_count = c;
        }
      }
    if (!best) return sum_all(terms);
    std::vector<Expr> with, without;
    for (size_t k = 0; k < terms.size(); ++k) {
      auto fl = factors[k];
      auto it = std::find_if(fl.begin(), fl.end(), [&](const Expr& f) { return expr_equal(f, best); });
      if (it == fl.end()) {
        without.push_back(terms[k]);
        continue;
      }
      fl.erase(it);
      with.push_back(make_product(fl));
    }
    Expr inner = refactor_sum(with);
    Expr hoisted = product(best, inner);
    return without.empty() ? hoisted : sum(hoisted, hoist(without));
  }

  IndexList args_;
  // Keys are kept alive so a freed temporary's address is never reused.
  std::unordered_map<const Node*, std::pair<Expr, Expr>> memo_;
};

}  // namespace

Expr distributive_refactor(const Expr& e, const IndexList& argument_indices) {
  Refactorer r(sorted_free(argument_indices));
  Expr out = r.run(e);
  return dag_flops({out}) <= dag_flops({e}) ? out : e;
}

//------------------------------------------------------------------------------
// Coefficient evaluation

namespace {

Expr factorise_coefficient_sum(const Expr& n) {
  IndexList coef, other;
  for (const auto& i : n->indices) (i.role == IndexRole::Coefficient ? coef : other).push_back(i);
  if (coef.empty()) return n;
  // Factorise the body with the coefficient indices in the argument role,
  // then contract them again.
  auto ms = argument_factorise(n->children[0], {coef});
  std::vector<Expr> terms;
  for (auto m : ms.monomials) {
    for (const auto& i : coef) {
      const bool used = std::any_of(m.atomics.begin(), m.atomics.end(),
                                    [&](const Expr& a) { return index_contains(a->free, i); });
      if (used)
        m.sum_indices.push_back(i);
      else
        m.rest = product(m.rest, scalar(static_cast<double>(i.extent)));
    }
    m = cancel_contraction_deltas(m);
    if (is_zero(m.rest)) continue;
    terms.push_back(make_tensor_product(monomial_factors(m), m.sum_indices).expr);
  }
  return index_sum(sum_all(terms), other);
}

}  // namespace

Kernel optimise_coefficients(const Kernel& k) {
  Kernel out = k;
  for (auto& a : out.assignments)
    a.expr = map_expr(a.expr, [](const Expr& n) { return n->op == Op::IndexSum ? factorise_coefficient_sum(n) : n; });
  return out;
}

//------------------------------------------------------------------------------
// Pipeline

namespace {

IndexList flat_arguments(const Assignment& a) {
  IndexList out;
  for (const auto& arg : a.arguments) out = index_union(out, sorted_free(arg));
  return out;
}

// Update argument index lists after view substitution.
std::vector<IndexList> remap_arguments(const std::vector<IndexList>& args, const View& v) {
  IndexList present = v.indices();
  std::vector<IndexList> out;
  for (const auto& arg : args) {
    IndexList r;
    for (const auto& i : arg)
      if (index_contains(present, i)) r.push_back(i);
    out.push_back(r);
  }
  return out;
}

Expr coffee_product(const Monomial& m, const std::vector<IndexList>& arguments) {
  // Atomics of one argument are multiplied together first.
  std::vector<Expr> groups;
  std::vector<Expr> left = m.atomics;
  for (const auto& arg : arguments) {
    std::vector<Expr> mine, others;
    for (const auto& f : left) (!index_intersection(f->free, sorted_free(arg)).empty() ? mine : others).push_back(f);
    if (!mine.empty()) groups.push_back(make_product(mine));
    left = std::move(others);
  }
  groups.insert(groups.end(), left.begin(), left.end());
  groups.push_back(m.rest);
  return index_sum(make_product(groups), m.sum_indices);
}

enum class Stage { Expand, Factorise, Deltas, SumFactorise, Full };

// Tag errors escaping a pass with its name.
template <class F>
auto in_pass(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.pass().empty()) throw;
    throw Error(e.kind(), e.detail(), name);
  }
}

Kernel transform(const Kernel& k, Mode mode, Stage stage) {
  Kernel out = k;
  out.assignments.clear();
  for (const auto& a : k.assignments) {
    Expr e = in_pass("expand_small_sums", [&] { return expand_small_sums(a.expr); });
    if (stage == Stage::Expand) {
      out.assignments.push_back({a.view, e, a.arguments});
      continue;
    }
    MonomialSum ms = in_pass("argument_factorise", [&] { return argument_factorise(e, a.arguments); });
    const IndexList args = flat_arguments(a);
    if (stage == Stage::Factorise) {
      out.assignments.push_back({a.view, ms.reassemble(), a.arguments});
      continue;
    }
    if (mode == Mode::Coffee) {
      std::vector<Expr> terms;
      for (const auto& m : ms.monomials) terms.push_back(coffee_product(m, a.arguments));
      Expr expr = in_pass("distributive_refactor", [&] { return distributive_refactor(sum_all(terms), args); });
      out.assignments.push_back({a.view, expr, a.arguments});
      continue;
    }
    for (auto& m : ms.monomials) m = in_pass("cancel_contraction_deltas", [&] { return cancel_contraction_deltas(m); });
    ms.monomials = merge_monomials(ms.monomials);
    auto groups = in_pass("cancel_assignment_deltas", [&] { return cancel_assignment_deltas(a.view, ms); });
    for (auto& [view, group] : groups) {
      auto arguments = remap_arguments(a.arguments, view);
      if (stage == Stage::Deltas) {
        out.assignments.push_back({view, group.reassemble(), arguments});
        continue;
      }
      Expr expr = in_pass("sum_factorise", [&] {
        IndexList order = choose_shared_ordering(group.monomials);
        std::vector<Expr> terms;
        for (const auto& m : group.monomials)
          terms.push_back(make_tensor_product_ordered(monomial_factors(m), restrict_to(order, m.sum_indices)).expr);
        return sum_all(terms);
      });
      if (stage == Stage::Full) expr = in_pass("distributive_refactor", [&] { return distributive_refactor(expr, args); });
      out.assignments.push_back({view, expr, arguments});
    }
  }
  return out;
}

}  // namespace

Kernel expand_small_sums_pass(const Kernel& k) { return transform(k, Mode::Spectral, Stage::Expand); }
Kernel argument_factorise_pass(const Kernel& k) { return transform(k, Mode::Spectral, Stage::Factorise); }
Kernel delta_cancellation_pass(const Kernel& k) { return transform(k, Mode::Spectral, Stage::Deltas); }
Kernel sum_factorise_pass(const Kernel& k) { return transform(k, Mode::Spectral, Stage::SumFactorise); }

Kernel run_pipeline(const Kernel& k, Mode mode) {
  Kernel out = in_pass("split_concatenate", [&] { return split_concatenate(k); });
  if (mode == Mode::Vanilla) return out;
  out = in_pass("optimise_coefficients", [&] { return optimise_coefficients(out); });
  return transform(out, mode, Stage::Full);
}

}  // namespace fkc
