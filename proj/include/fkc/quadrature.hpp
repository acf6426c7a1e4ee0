#pragma once

#include <memory>
#include <vector>

#include "fkc/ir.hpp"

namespace fkc {

// A set of evaluation points on a reference cell.
//
// Interval and Simplex point sets carry one point index. A Tensor point set
// is the product of its factors; its point multi-index is the concatenation
// of the factor indices and points are enumerated lexicographically.
class PointSet {
 public:
  enum class Kind { Interval, Simplex, Tensor };

  static std::shared_ptr<const PointSet> interval(std::vector<double> points);
  static std::shared_ptr<const PointSet> simplex(std::vector<std::vector<double>> points);
  static std::shared_ptr<const PointSet> tensor(std::vector<std::shared_ptr<const PointSet>> factors);

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  int64_t size() const;
  const IndexList& indices() const { return indices_; }
  const std::vector<std::shared_ptr<const PointSet>>& factors() const { return factors_; }

  // Interval only.
  const std::vector<double>& coordinates_1d() const { return pts1d_; }
  // Simplex only.
  const std::vector<std::vector<double>>& simplex_points() const { return ptsnd_; }

  // All points in lexicographic multi-index order.
  std::vector<std::vector<double>> points() const;

  // Bit-equal coordinates (object identity implies this).
  bool same_points(const PointSet& other) const;

 private:
  PointSet() = default;
  Kind kind_ = Kind::Interval;
  int dim_ = 1;
  std::vector<double> pts1d_;
  std::vector<std::vector<double>> ptsnd_;
  std::vector<std::shared_ptr<const PointSet>> factors_;
  IndexList indices_;
};

using PointSetPtr = std::shared_ptr<const PointSet>;

struct QuadratureRule {
  PointSetPtr points;
  // One weight vector per point-set factor (a single one for Interval and
  // Simplex rules). Tensor weights are the products.
  std::vector<std::vector<double>> factor_weights;

  std::vector<double> weights() const;
  // w_q as a product of indexed factor literals.
  Expr weight_expr() const;
};

QuadratureRule gauss_legendre(int m);
QuadratureRule gauss_lobatto_legendre(int m);
// Collapsed (Duffy) product of GL(m) rules on the unit triangle.
QuadratureRule collapsed_triangle(int m);

PointSetPtr tensor_point_set(const PointSetPtr& a, const PointSetPtr& b);
QuadratureRule tensor_rule(const std::vector<QuadratureRule>& factors);

// Legendre polynomial P_n and derivative at x in [-1, 1].
void legendre(int n, double x, double* p, double* dp);

}  // namespace fkc
