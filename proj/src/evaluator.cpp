#include "fkc/evaluator.hpp"

#include <array>
#include <cmath>
#include <unordered_map>

namespace fkc {

std::vector<int64_t> Tensor::extents() const {
  std::vector<int64_t> e;
  for (const auto& i : free) e.push_back(i.extent);
  e.insert(e.end(), shape.begin(), shape.end());
  return e;
}

namespace {

constexpr int64_t kVectorisedSumLimit = 1 << 15;

std::vector<int64_t> row_major_strides(const std::vector<int64_t>& ext) {
  std::vector<int64_t> s(ext.size(), 1);
  for (int k = static_cast<int>(ext.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * ext[k + 1];
  return s;
}

// Visit every position of `ext` in row-major order. `f(out, offs)` receives
// the linear output position and, per input, base + sum(stride * pos).
template <size_t N, class F>
void iterate(const std::vector<int64_t>& ext, const std::array<std::vector<int64_t>, N>& strides,
             const std::array<int64_t, N>& base, F&& f) {
  const size_t r = ext.size();
  for (auto e : ext)
    if (e == 0) return;
  std::vector<int64_t> pos(r, 0);
  std::array<int64_t, N> off = base;
  int64_t out = 0;
  while (true) {
    f(out, off);
    ++out;
    size_t k = r;
    while (k > 0) {
      --k;
      ++pos[k];
      for (size_t n = 0; n < N; ++n) off[n] += strides[n][k];
      if (pos[k] < ext[k]) break;
      for (size_t n = 0; n < N; ++n) off[n] -= strides[n][k] * ext[k];
      pos[k] = 0;
      if (k == 0) return;
    }
    if (r == 0) return;
  }
}

class Evaluator {
 public:
  explicit Evaluator(const Environment& env) : env_(env) {
    for (const auto& [i, v] : env.fixed) {
      if (!i.is_free()) continue;
      if (v < 0 || v >= i.extent) throw Error(ErrorKind::IndexOutOfRange, "fixed index value out of range");
      bound_[i.id] = v;
    }
  }

  Tensor eval(const Expr& e) {
    std::vector<int64_t> key;
    key.reserve(e->free.size());
    for (const auto& i : e->free) {
      auto it = bound_.find(i.id);
      key.push_back(it == bound_.end() ? -1 : it->second);
    }
    auto found = cache_.find(e.get());
    if (found != cache_.end() && found->second.first == key) return found->second.second;
    Tensor t = compute(e);
    cache_[e.get()] = {std::move(key), t};
    return t;
  }

 private:
  IndexList unbound(const IndexList& free) const {
    IndexList out;
    for (const auto& i : free)
      if (!bound_.count(i.id)) out.push_back(i);
    return out;
  }

  // Strides of `t` along each of `axes` (0 where t lacks the index).
  static std::vector<int64_t> free_strides(const IndexList& axes, const Tensor& t) {
    auto st = row_major_strides(t.extents());
    std::vector<int64_t> s(axes.size(), 0);
    for (size_t a = 0; a < axes.size(); ++a)
      for (size_t k = 0; k < t.free.size(); ++k)
        if (t.free[k] == axes[a]) s[a] = st[k];
    return s;
  }

  int64_t index_value(const Index& i) const {
    if (i.is_fixed()) return i.value;
    if (i.kind == Index::Kind::RuntimeFixed)
      throw Error(ErrorKind::Unsupported, "runtime indices are not evaluable");
    auto it = bound_.find(i.id);
    return it == bound_.end() ? -1 : it->second;
  }

  Tensor blank(const Expr& e) {
    Tensor t;
    t.free = unbound(e->free);
    t.shape = e->shape;
    t.data.assign(static_cast<size_t>(shape_size(t.extents())), 0.0);
    return t;
  }

  const std::vector<double>& binding(const Node& var) {
    auto it = env_.bindings.find(var.name);
    if (it == env_.bindings.end()) throw Error(ErrorKind::UnboundVariable, var.name);
    if (static_cast<int64_t>(it->second.size()) < shape_size(var.shape))
      throw Error(ErrorKind::IndexOutOfRange, "binding for " + var.name + " is too small");
    return it->second;
  }

  static double apply_fn(const std::string& fn, double x) {
    if (fn == "sqrt") return std::sqrt(x);
    if (fn == "sin") return std::sin(x);
    if (fn == "cos") return std::cos(x);
    if (fn == "exp") return std::exp(x);
    if (fn == "ln") return std::log(x);
    if (fn == "abs") return std::abs(x);
    throw Error(ErrorKind::UnsupportedFunction, fn);
  }

  static double apply_cmp(const std::string& op, double a, double b) {
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "==") return a == b;
    return a != b;
  }

  static double apply_binary(const Node& n, double a, double b) {
    switch (n.op) {
      case Op::Sum: return a + b;
      case Op::Product: return a * b;
      case Op::Division: return a / b;
      case Op::Power: return std::pow(a, b);
      case Op::MinValue: return std::min(a, b);
      case Op::MaxValue: return std::max(a, b);
      case Op::Comparison: return apply_cmp(n.name, a, b);
      case Op::LogicalAnd: return (a != 0.0 && b != 0.0) ? 1.0 : 0.0;
      case Op::LogicalOr: return (a != 0.0 || b != 0.0) ? 1.0 : 0.0;
      default: break;
    }
    throw Error(ErrorKind::IllFormed, "not a binary node");
  }

  Tensor compute(const Expr& e) {
    const Node& n = *e;
    switch (n.op) {
      case Op::Literal: {
        Tensor t;
        t.shape = n.shape;
        t.data = *n.values;
        return t;
      }
      case Op::Zero: return blank(e);
      case Op::Identity: {
        Tensor t = blank(e);
        for (int64_t k = 0; k < n.shape[0]; ++k) t.data[static_cast<size_t>(k * n.shape[0] + k)] = 1.0;
        return t;
      }
      case Op::Variable: {
        Tensor t;
        t.shape = n.shape;
        const auto& b = binding(n);
        t.data.assign(b.begin(), b.begin() + shape_size(n.shape));
        return t;
      }
      case Op::Sum:
      case Op::Product:
      case Op::Division:
      case Op::Power:
      case Op::MinValue:
      case Op::MaxValue:
      case Op::Comparison:
      case Op::LogicalAnd:
      case Op::LogicalOr: {
        Tensor a = eval(n.children[0]);
        Tensor b = eval(n.children[1]);
        Tensor t = blank(e);
        std::array<std::vector<int64_t>, 2> st = {free_strides(t.free, a), free_strides(t.free, b)};
        iterate<2>(t.extents(), st, {0, 0}, [&](int64_t o, const std::array<int64_t, 2>& off) {
          t.data[static_cast<size_t>(o)] = apply_binary(n, a.data[static_cast<size_t>(off[0])],
                                                        b.data[static_cast<size_t>(off[1])]);
        });
        return t;
      }
      case Op::MathFunction:
      case Op::LogicalNot: {
        Tensor a = eval(n.children[0]);
        Tensor t = blank(e);
        for (size_t k = 0; k < t.data.size(); ++k)
          t.data[k] = n.op == Op::LogicalNot ? (a.data[k] == 0.0 ? 1.0 : 0.0) : apply_fn(n.name, a.data[k]);
        return t;
      }
      case Op::Conditional: {
        Tensor c = eval(n.children[0]);
        Tensor a = eval(n.children[1]);
        Tensor b = eval(n.children[2]);
        Tensor t = blank(e);
        std::array<std::vector<int64_t>, 3> st = {free_strides(t.free, c), free_strides(t.free, a),
                                                  free_strides(t.free, b)};
        iterate<3>(t.extents(), st, {0, 0, 0}, [&](int64_t o, const std::array<int64_t, 3>& off) {
          t.data[static_cast<size_t>(o)] = c.data[static_cast<size_t>(off[0])] != 0.0
                                               ? a.data[static_cast<size_t>(off[1])]
                                               : b.data[static_cast<size_t>(off[2])];
        });
        return t;
      }
      case Op::Delta: {
        Tensor t = blank(e);
        const Index& i = n.indices[0];
        const Index& j = n.indices[1];
        int64_t vi = index_value(i), vj = index_value(j);
        auto ext = t.extents();
        // Walk the output and compare the two index values.
        std::vector<int64_t> pos(ext.size(), 0);
        int ai = -1, aj = -1;
        for (size_t k = 0; k < t.free.size(); ++k) {
          if (i.is_free() && t.free[k] == i) ai = static_cast<int>(k);
          if (j.is_free() && t.free[k] == j) aj = static_cast<int>(k);
        }
        std::array<std::vector<int64_t>, 1> st = {std::vector<int64_t>(ext.size(), 0)};
        auto strides = row_major_strides(ext);
        iterate<1>(ext, st, {0}, [&](int64_t o, const std::array<int64_t, 1>&) {
          int64_t a = ai >= 0 ? (o / strides[ai]) % ext[ai] : vi;
          int64_t b = aj >= 0 ? (o / strides[aj]) % ext[aj] : vj;
          t.data[static_cast<size_t>(o)] = a == b ? 1.0 : 0.0;
        });
        return t;
      }
      case Op::Indexed: {
        Tensor b = eval(n.children[0]);
        Tensor t = blank(e);
        auto bext = b.extents();
        auto bst = row_major_strides(bext);
        std::vector<int64_t> st = free_strides(t.free, b);
        int64_t base = 0;
        const size_t nf = b.free.size();
        for (size_t k = 0; k < n.indices.size(); ++k) {
          const Index& i = n.indices[k];
          int64_t v = index_value(i);
          if (v >= 0) {
            if (v >= b.shape[k]) throw Error(ErrorKind::IndexOutOfRange, "Indexed value out of range");
            base += v * bst[nf + k];
          } else {
            for (size_t a = 0; a < t.free.size(); ++a)
              if (t.free[a] == i) st[a] += bst[nf + k];
          }
        }
        std::array<std::vector<int64_t>, 1> sts = {st};
        iterate<1>(t.extents(), sts, {base}, [&](int64_t o, const std::array<int64_t, 1>& off) {
          t.data[static_cast<size_t>(o)] = b.data[static_cast<size_t>(off[0])];
        });
        return t;
      }
      case Op::FlexiblyIndexed: {
        const Node& var = *n.children[0];
        const auto& data = binding(var);
        Tensor t = blank(e);
        auto vst = row_major_strides(var.shape);
        std::vector<int64_t> st(t.free.size(), 0);
        int64_t base = 0;
        for (size_t d = 0; d < n.flex.size(); ++d) {
          base += n.flex[d].offset * vst[d];
          for (const auto& term : n.flex[d].terms) {
            int64_t v = index_value(term.index);
            if (v >= 0) {
              base += v * term.stride * vst[d];
            } else {
              for (size_t a = 0; a < t.free.size(); ++a)
                if (t.free[a] == term.index) st[a] += term.stride * vst[d];
            }
          }
        }
        std::array<std::vector<int64_t>, 1> sts = {st};
        iterate<1>(t.extents(), sts, {base}, [&](int64_t o, const std::array<int64_t, 1>& off) {
          t.data[static_cast<size_t>(o)] = data[static_cast<size_t>(off[0])];
        });
        return t;
      }
      case Op::ComponentTensor: {
        Tensor c = eval(n.children[0]);
        Tensor t = blank(e);
        std::vector<int64_t> st = free_strides(t.free, c);
        auto cst = row_major_strides(c.extents());
        for (const auto& a : n.indices) {
          int64_t s = 0;
          for (size_t k = 0; k < c.free.size(); ++k)
            if (c.free[k] == a) s = cst[k];
          st.push_back(s);
        }
        std::array<std::vector<int64_t>, 1> sts = {st};
        iterate<1>(t.extents(), sts, {0}, [&](int64_t o, const std::array<int64_t, 1>& off) {
          t.data[static_cast<size_t>(o)] = c.data[static_cast<size_t>(off[0])];
        });
        return t;
      }
      case Op::IndexSum: return index_sum_eval(e);
      case Op::ListTensor: {
        Tensor t = blank(e);
        const int64_t block = shape_size(n.shape);
        IndexList axes = t.free;
        std::vector<int64_t> ext;
        for (const auto& i : axes) ext.push_back(i.extent);
        for (size_t k = 0; k < n.children.size(); ++k) {
          Tensor c = eval(n.children[k]);
          std::array<std::vector<int64_t>, 1> sts = {free_strides(axes, c)};
          iterate<1>(ext, sts, {0}, [&](int64_t o, const std::array<int64_t, 1>& off) {
            t.data[static_cast<size_t>(o * block + static_cast<int64_t>(k))] = c.data[static_cast<size_t>(off[0])];
          });
        }
        return t;
      }
      case Op::Concatenate: {
        Tensor t = blank(e);
        const int64_t total = n.shape[0];
        std::vector<int64_t> ext;
        for (const auto& i : t.free) ext.push_back(i.extent);
        int64_t seg = 0;
        for (const auto& ch : n.children) {
          Tensor c = eval(ch);
          const int64_t len = shape_size(c.shape);
          std::array<std::vector<int64_t>, 1> sts = {free_strides(t.free, c)};
          iterate<1>(ext, sts, {0}, [&](int64_t o, const std::array<int64_t, 1>& off) {
            for (int64_t s = 0; s < len; ++s)
              t.data[static_cast<size_t>(o * total + seg + s)] = c.data[static_cast<size_t>(off[0] + s)];
          });
          seg += len;
        }
        return t;
      }
    }
    throw Error(ErrorKind::IllFormed, "unknown node");
  }

  Tensor index_sum_eval(const Expr& e) {
    const Node& n = *e;
    const Expr& body = n.children[0];
    Tensor t = blank(e);
    IndexList body_free = unbound(body->free);
    if (extent_product(body_free) <= kVectorisedSumLimit) {
      Tensor c = eval(body);
      // Output axes first, then the summed axes.
      IndexList axes = t.free;
      for (const auto& i : n.indices) axes.push_back(i);
      std::vector<int64_t> ext;
      for (const auto& i : axes) ext.push_back(i.extent);
      int64_t inner = extent_product(n.indices);
      std::array<std::vector<int64_t>, 1> sts = {free_strides(axes, c)};
      iterate<1>(ext, sts, {0}, [&](int64_t o, const std::array<int64_t, 1>& off) {
        t.data[static_cast<size_t>(o / inner)] += c.data[static_cast<size_t>(off[0])];
      });
      return t;
    }
    std::vector<int64_t> pos(n.indices.size(), 0);
    while (true) {
      for (size_t k = 0; k < n.indices.size(); ++k) bound_[n.indices[k].id] = pos[k];
      Tensor c = eval(body);
      std::array<std::vector<int64_t>, 1> sts = {free_strides(t.free, c)};
      std::vector<int64_t> ext;
      for (const auto& i : t.free) ext.push_back(i.extent);
      iterate<1>(ext, sts, {0}, [&](int64_t o, const std::array<int64_t, 1>& off) {
        t.data[static_cast<size_t>(o)] += c.data[static_cast<size_t>(off[0])];
      });
      size_t k = n.indices.size();
      bool done = true;
      while (k > 0) {
        --k;
        if (++pos[k] < n.indices[k].extent) {
          done = false;
          break;
        }
        pos[k] = 0;
      }
      if (done) break;
    }
    for (const auto& i : n.indices) bound_.erase(i.id);
    return t;
  }

  const Environment& env_;
  std::unordered_map<uint64_t, int64_t> bound_;
  std::unordered_map<const Node*, std::pair<std::vector<int64_t>, Tensor>> cache_;
};

}  // namespace

Tensor eval_expr(const Expr& e, const Environment& env) {
  Evaluator ev(env);
  return ev.eval(e);
}

std::vector<double> eval_kernel(const Kernel& k, const KernelInputs& inputs) {
  Environment env;
  for (const auto& [name, data] : inputs) env.bind(name, data);
  std::vector<double> out(static_cast<size_t>(k.return_size()), 0.0);
  for (const auto& a : k.assignments) {
    Tensor t = eval_expr(a.expr, env);
    IndexList axes = index_union(t.free, a.view.indices());
    std::vector<int64_t> ext;
    for (const auto& i : axes) ext.push_back(i.extent);
    std::vector<int64_t> vst(axes.size(), 0);
    for (const auto& term : a.view.terms)
      for (size_t x = 0; x < axes.size(); ++x)
        if (axes[x] == term.index) vst[x] += term.stride;
    std::vector<int64_t> tst(axes.size(), 0);
    auto st = row_major_strides(t.extents());
    for (size_t x = 0; x < axes.size(); ++x)
      for (size_t f = 0; f < t.free.size(); ++f)
        if (t.free[f] == axes[x]) tst[x] = st[f];
    std::array<std::vector<int64_t>, 2> sts = {vst, tst};
    iterate<2>(ext, sts, {a.view.offset, 0}, [&](int64_t, const std::array<int64_t, 2>& off) {
      out[static_cast<size_t>(off[0])] += t.data[static_cast<size_t>(off[1])];
    });
  }
  return out;
}

}  // namespace fkc
