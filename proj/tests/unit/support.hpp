#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fkc/evaluator.hpp"
#include "fkc/ir.hpp"

namespace fkc::test {

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

inline double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

// Relative difference with an absolute floor of 1e-14.
inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  return max_abs_diff(a, b) / std::max(max_abs(b), 1e-14);
}

inline std::vector<double> random_values(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Expr random_literal(const Shape& shape, std::mt19937_64& rng) {
  return literal(random_values(static_cast<size_t>(shape_size(shape)), rng), shape);
}

inline std::vector<double> kron(const std::vector<double>& a, const std::vector<double>& b, int na, int nb) {
  // a: na x na, b: nb x nb, row-major; result (na nb) x (na nb)
  const int n = na * nb;
  std::vector<double> r(static_cast<size_t>(n * n));
  for (int i1 = 0; i1 < na; ++i1)
    for (int i2 = 0; i2 < nb; ++i2)
      for (int j1 = 0; j1 < na; ++j1)
        for (int j2 = 0; j2 < nb; ++j2)
          r[static_cast<size_t>((i1 * nb + i2) * n + j1 * nb + j2)] = a[i1 * na + j1] * b[i2 * nb + j2];
  return r;
}

}  // namespace fkc::test

#include <optional>

namespace fkc::test {

template <class F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace fkc::test

#include "fkc/element.hpp"

namespace fkc::test {

// Dense [basis][point][component] values of a tabulation expression. Basis and
// point multi-indices are flattened row-major.
inline std::vector<double> dense(const Expr& e, const IndexList& basis, const IndexList& points) {
  const Tensor t = eval_expr(e, Environment{});
  const int64_t nv = shape_size(e->shape);
  std::vector<int64_t> stride(t.free.size());
  int64_t s = nv;
  for (size_t k = t.free.size(); k-- > 0;) {
    stride[k] = s;
    s *= t.free[k].extent;
  }
  auto stride_of = [&](const Index& i) -> int64_t {
    for (size_t k = 0; k < t.free.size(); ++k)
      if (t.free[k] == i) return stride[k];
    return 0;  // tabulation constant along this index
  };
  IndexList all = basis;
  all.insert(all.end(), points.begin(), points.end());
  const int64_t total = extent_product(all);
  std::vector<double> out(static_cast<size_t>(total * nv));
  for (int64_t flat = 0; flat < total; ++flat) {
    int64_t rem = flat, off = 0;
    for (size_t k = all.size(); k-- > 0;) {
      off += (rem % all[k].extent) * stride_of(all[k]);
      rem /= all[k].extent;
    }
    for (int64_t c = 0; c < nv; ++c) out[static_cast<size_t>(flat * nv + c)] = t.data[static_cast<size_t>(off + c)];
  }
  return out;
}

}  // namespace fkc::test
