#include "fkc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace fkc {

namespace {
constexpr int kMaxNewton = 100;
}

PointSetPtr PointSet::interval(std::vector<double> points) {
  if (points.empty()) throw Error(ErrorKind::InvalidArity, "empty point set");
  auto ps = std::shared_ptr<PointSet>(new PointSet());
  ps->kind_ = Kind::Interval;
  ps->dim_ = 1;
  ps->pts1d_ = std::move(points);
  ps->indices_ = {Index::fresh(static_cast<int64_t>(ps->pts1d_.size()), IndexRole::Quadrature)};
  return ps;
}

PointSetPtr PointSet::simplex(std::vector<std::vector<double>> points) {
  if (points.empty()) throw Error(ErrorKind::InvalidArity, "empty point set");
  auto ps = std::shared_ptr<PointSet>(new PointSet());
  ps->kind_ = Kind::Simplex;
  ps->dim_ = static_cast<int>(points[0].size());
  ps->ptsnd_ = std::move(points);
  ps->indices_ = {Index::fresh(static_cast<int64_t>(ps->ptsnd_.size()), IndexRole::Quadrature)};
  return ps;
}

PointSetPtr PointSet::tensor(std::vector<PointSetPtr> factors) {
  auto ps = std::shared_ptr<PointSet>(new PointSet());
  ps->kind_ = Kind::Tensor;
  ps->dim_ = 0;
  // A factor passed twice gets a fresh copy so each direction has its own index.
  auto add = [&](const PointSetPtr& f) {
    for (const auto& g : ps->factors_)
      if (g->indices()[0] == f->indices()[0]) {
        ps->factors_.push_back(f->kind() == Kind::Interval ? interval(f->pts1d_) : simplex(f->ptsnd_));
        return;
      }
    ps->factors_.push_back(f);
  };
  for (const auto& f : factors) {
    if (f->kind() == Kind::Tensor) {
      for (const auto& g : f->factors()) add(g);
    } else {
      add(f);
    }
  }
  for (const auto& f : ps->factors_) {
    ps->dim_ += f->dimension();
    ps->indices_.push_back(f->indices()[0]);
  }
  return ps;
}

int64_t PointSet::size() const {
  switch (kind_) {
    case Kind::Interval: return static_cast<int64_t>(pts1d_.size());
    case Kind::Simplex: return static_cast<int64_t>(ptsnd_.size());
    case Kind::Tensor: {
      int64_t n = 1;
      for (const auto& f : factors_) n *= f->size();
      return n;
    }
  }
  return 0;
}

std::vector<std::vector<double>> PointSet::points() const {
  switch (kind_) {
    case Kind::Interval: {
      std::vector<std::vector<double>> out;
      for (double x : pts1d_) out.push_back({x});
      return out;
    }
    case Kind::Simplex: return ptsnd_;
    case Kind::Tensor: {
      std::vector<std::vector<double>> out = {{}};
      for (const auto& f : factors_) {
        std::vector<std::vector<double>> next;
        for (const auto& head : out)
          for (const auto& p : f->points()) {
            auto q = head;
            q.insert(q.end(), p.begin(), p.end());
            next.push_back(std::move(q));
          }
        out = std::move(next);
      }
      return out;
    }
  }
  return {};
}

bool PointSet::same_points(const PointSet& other) const {
  if (this == &other) return true;
  if (kind_ != other.kind_ || dim_ != other.dim_) return false;
  switch (kind_) {
    case Kind::Interval:
      return pts1d_.size() == other.pts1d_.size() &&
             std::memcmp(pts1d_.data(), other.pts1d_.data(), pts1d_.size() * sizeof(double)) == 0;
    case Kind::Simplex:
      if (ptsnd_.size() != other.ptsnd_.size()) return false;
      for (size_t k = 0; k < ptsnd_.size(); ++k)
        if (std::memcmp(ptsnd_[k].data(), other.ptsnd_[k].data(), ptsnd_[k].size() * sizeof(double)) != 0)
          return false;
      return true;
    case Kind::Tensor:
      if (factors_.size() != other.factors_.size()) return false;
      for (size_t k = 0; k < factors_.size(); ++k)
        if (!factors_[k]->same_points(*other.factors_[k])) return false;
      return true;
  }
  return false;
}

std::vector<double> QuadratureRule::weights() const {
  std::vector<double> out = {1.0};
  for (const auto& fw : factor_weights) {
    std::vector<double> next;
    next.reserve(out.size() * fw.size());
    for (double a : out)
      for (double b : fw) next.push_back(a * b);
    out = std::move(next);
  }
  return out;
}

Expr QuadratureRule::weight_expr() const {
  const auto& idx = points->indices();
  Expr w = scalar(1.0);
  for (size_t k = 0; k < factor_weights.size(); ++k) {
    auto lit = literal(factor_weights[k], {static_cast<int64_t>(factor_weights[k].size())});
    w = product(w, indexed(lit, {idx[k]}));
  }
  return w;
}

void legendre(int n, double x, double* p, double* dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    *p = 1.0;
    *dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  *p = p1;
  // P'_n = n (x P_n - P_{n-1}) / (x^2 - 1); only used away from the endpoints.
  *dp = n * (x * p1 - p0) / (x * x - 1.0);
}

QuadratureRule gauss_legendre(int m) {
  if (m < 1) throw Error(ErrorKind::InvalidArity, "Gauss-Legendre needs at least one point");
  std::vector<double> x(m), w(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double p = 0, dp = 1;
    for (int it = 0; it < kMaxNewton; ++it) {
      legendre(m, z, &p, &dp);
      double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    legendre(m, z, &p, &dp);
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  std::vector<double> pts(m), wts(m);
  for (int i = 0; i < m; ++i) {
    // Roots come out in descending order; map to [0, 1] ascending.
    pts[m - 1 - i] = 0.5 * (1.0 + x[i]);
    wts[m - 1 - i] = 0.5 * w[i];
  }
  if (m % 2 == 1) pts[m / 2] = 0.5;
  QuadratureRule r;
  r.points = PointSet::interval(std::move(pts));
  r.factor_weights = {std::move(wts)};
  return r;
}

QuadratureRule gauss_lobatto_legendre(int m) {
  if (m < 2) throw Error(ErrorKind::InvalidArity, "Gauss-Lobatto-Legendre needs at least two points");
  const int n = m - 1;
  std::vector<double> x(m), w(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * i / n);
    if (i == 0 || i == n) {
      x[i] = z > 0 ? 1.0 : -1.0;
      continue;
    }
    for (int it = 0; it < kMaxNewton; ++it) {
      // Newton on (1 - z^2) P'_n(z), written with the three-term recurrence.
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      double dz = (z * p1 - p0) / ((n + 1) * p1);
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
  }
  for (int i = 0; i < m; ++i) {
    double p, dp;
    legendre(n, x[i], &p, &dp);
    w[i] = 2.0 / (n * (n + 1.0) * p * p);
  }
  std::vector<double> pts(m), wts(m);
  for (int i = 0; i < m; ++i) {
    pts[m - 1 - i] = 0.5 * (1.0 + x[i]);
    wts[m - 1 - i] = 0.5 * w[i];
  }
  pts.front() = 0.0;
  pts.back() = 1.0;
  if (m % 2 == 1) pts[m / 2] = 0.5;
  QuadratureRule r;
  r.points = PointSet::interval(std::move(pts));
  r.factor_weights = {std::move(wts)};
  return r;
}

QuadratureRule collapsed_triangle(int m) {
  auto gl = gauss_legendre(m);
  const auto& u = gl.points->coordinates_1d();
  const auto& wu = gl.factor_weights[0];
  std::vector<std::vector<double>> pts;
  std::vector<double> wts;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      double v = u[b];
      pts.push_back({u[a] * (1.0 - v), v});
      wts.push_back(wu[a] * wu[b] * (1.0 - v));
    }
  QuadratureRule r;
  r.points = PointSet::simplex(std::move(pts));
  r.factor_weights = {std::move(wts)};
  return r;
}

PointSetPtr tensor_point_set(const PointSetPtr& a, const PointSetPtr& b) {
  return PointSet::tensor({a, b});
}

QuadratureRule tensor_rule(const std::vector<QuadratureRule>& factors) {
  std::vector<PointSetPtr> ps;
  QuadratureRule r;
  for (const auto& f : factors) {
    ps.push_back(f.points);
    for (const auto& w : f.factor_weights) r.factor_weights.push_back(w);
  }
  r.points = PointSet::tensor(std::move(ps));
  return r;
}

}  // namespace fkc
