#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fkc/ir.hpp"
#include "fkc/quadrature.hpp"

namespace fkc {

struct Cell {
  enum class Kind { Interval, Triangle, Product };
  Kind kind = Kind::Interval;
  std::vector<Cell> factors;  // Product only, never nested

  static Cell interval();
  static Cell triangle();
  static Cell product(const std::vector<Cell>& factors);
  static Cell by_name(const std::string& name);  // interval quad hex triangle prism

  int dimension() const;
  std::string name() const;
  bool operator==(const Cell& o) const;
};

enum class Continuity { Continuous, Discontinuous };

// Derivative multi-index (one entry per reference direction) -> tabulation.
using DerivKey = std::vector<int>;
using TabulationResult = std::map<DerivKey, Expr>;

std::vector<DerivKey> derivative_keys(int dim, int order);

class FiniteElement {
 public:
  virtual ~FiniteElement() = default;

  const Cell& cell() const { return cell_; }
  int degree() const { return degree_; }
  const Shape& basis_shape() const { return basis_shape_; }
  const Shape& value_shape() const { return value_shape_; }
  int64_t space_dimension() const { return shape_size(basis_shape_); }
  // One tag per reference direction.
  const std::vector<Continuity>& continuity() const { return continuity_; }

  // Fresh free indices matching basis_shape.
  IndexList make_basis_indices(IndexRole role = IndexRole::Argument) const;

  // Tabulations of all derivatives of the given order at `ps`. Each entry
  // has shape value_shape and free indices basis_idx plus the point indices.
  virtual TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                            const IndexList& basis_idx) const = 0;

  virtual std::string describe() const = 0;

 protected:
  Cell cell_;
  int degree_ = 0;
  Shape basis_shape_;
  Shape value_shape_;
  std::vector<Continuity> continuity_;
};

using ElementPtr = std::shared_ptr<const FiniteElement>;

enum class LagrangeVariant { Equispaced, SpectralGLL, SpectralGL };

class LagrangeInterval : public FiniteElement {
 public:
  LagrangeInterval(int n, LagrangeVariant variant, bool discontinuous = false);
  TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                    const IndexList& basis_idx) const override;
  std::string describe() const override;

  const std::vector<double>& nodes() const { return nodes_; }
  LagrangeVariant variant() const { return variant_; }
  // Dense table [basis][point] of the order-th derivative.
  std::vector<double> table(int order, const std::vector<double>& x) const;

 private:
  LagrangeVariant variant_;
  std::vector<double> nodes_;
  PointSetPtr node_set_;
};

// Dense tables for one point set: [basis][point][value components].
struct DenseTables {
  int64_t num_basis = 0;
  int64_t num_points = 0;
  Shape value_shape;
  std::map<DerivKey, std::vector<double>> tables;
};

using Tabulator = std::function<DenseTables(int order, const PointSetPtr& ps)>;

// Structure-free wrapper around numeric tables: every tabulation is an
// Indexed Literal over (basis, points...).
class NumericElement : public FiniteElement {
 public:
  NumericElement(Cell cell, int degree, int64_t num_basis, Shape value_shape, Tabulator tab,
                 std::vector<Continuity> continuity, std::string label);
  TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                    const IndexList& basis_idx) const override;
  std::string describe() const override { return label_; }

 private:
  Tabulator tab_;
  std::string label_;
};

class TensorProductElement : public FiniteElement {
 public:
  explicit TensorProductElement(std::vector<ElementPtr> factors);
  TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                    const IndexList& basis_idx) const override;
  std::string describe() const override;
  const std::vector<ElementPtr>& factors() const { return factors_; }

 private:
  std::vector<ElementPtr> factors_;
};

class TensorElement : public FiniteElement {
 public:
  TensorElement(ElementPtr scalar, Shape shape);
  TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                    const IndexList& basis_idx) const override;
  std::string describe() const override;
  const ElementPtr& scalar_element() const { return scalar_; }

 private:
  ElementPtr scalar_;
};

class EnrichedElement : public FiniteElement {
 public:
  explicit EnrichedElement(std::vector<ElementPtr> subs);
  TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                    const IndexList& basis_idx) const override;
  std::string describe() const override;
  const std::vector<ElementPtr>& subelements() const { return subs_; }

 private:
  std::vector<ElementPtr> subs_;
};

// H(div) / H(curl) value modifiers over a 2D product of one continuous and
// one discontinuous interval element.
class SobolevWrapper : public FiniteElement {
 public:
  enum class Space { HDiv, HCurl };
  SobolevWrapper(Space space, ElementPtr inner);
  TabulationResult basis_evaluation(int order, const PointSetPtr& ps,
                                    const IndexList& basis_idx) const override;
  std::string describe() const override;

 private:
  Space space_;
  ElementPtr inner_;
  int nonzero_component_ = 0;
  double sign_ = 1.0;
};

ElementPtr lagrange_interval(int n, LagrangeVariant variant = LagrangeVariant::Equispaced);
ElementPtr discontinuous_lagrange_interval(int n);
ElementPtr numeric_tabulation_element(Cell cell, int degree, const PointSetPtr& ps,
                                      const DenseTables& tables);
ElementPtr triangle_lagrange(int n);
ElementPtr tensor_product_element(const ElementPtr& a, const ElementPtr& b);
ElementPtr vector_element(const ElementPtr& scalar, int d);
ElementPtr tensor_element(const ElementPtr& scalar, Shape shape);
ElementPtr enriched_element(const std::vector<ElementPtr>& subs);
ElementPtr hdiv_wrap(const ElementPtr& e);
ElementPtr hcurl_wrap(const ElementPtr& e);

// Dense numeric wrapper of any element: tabulations are evaluated and stored
// as flat [basis][points] literals, discarding all structure.
ElementPtr densify(const ElementPtr& e);

// Parse an element string: P<k>, dP<k>, GLL<k>, GL<k>, TP<k> (triangle),
// V(<e>,<d>), products with '*', direct sums with '+', hdiv(<e>), hcurl(<e>).
ElementPtr parse_element(const std::string& text);

}  // namespace fkc
