#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fkc/element.hpp"
#include "fkc/evaluator.hpp"
#include "fkc/geometry.hpp"
#include "fkc/kernel.hpp"
#include "fkc/quadrature.hpp"

namespace fkc {

// Values of one form slot at the quadrature points.
struct Field {
  Expr value;     // shape = value_shape
  Expr ref_grad;  // shape = value_shape + {d}; null unless requested
};

struct FormContext {
  Cell cell;
  int dim = 0;
  GeometryBundle geometry;

  // Physical gradient: sum_b ref_grad[..., b] G[b, a].
  Expr grad(const Field& f) const;
};

// Full contraction of two expressions of equal shape.
Expr inner(const Expr& a, const Expr& b);
// 2D scalar curl in reference coordinates.
Expr ref_curl(const Field& f);

struct FormSpec {
  std::string name;
  int rank = 0;
  int num_coefficients = 0;
  // Highest derivative order needed per slot: arguments (test first), then
  // coefficients.
  std::vector<int> derivative_orders;
  std::function<Expr(const FormContext&, const std::vector<Field>&)> integrand;
  // Element family: "scalar", "vector" or "curl".
  std::string family = "scalar";

  int num_slots() const { return rank + num_coefficients; }
};

const std::vector<FormSpec>& form_registry();
const FormSpec& find_form(const std::string& name);

// Trial argument becomes the first coefficient.
FormSpec action_form(const FormSpec& bilinear);

// C_q = sum_i U_i tab_{iq}; order 0 gives the value, order 1 the reference
// gradient (extra trailing axis of extent d).
Expr evaluate_coefficient(const ElementPtr& element, const Expr& dofs, const PointSetPtr& ps, int order);

// One element per slot.
Kernel lower_form(const FormSpec& spec, const std::vector<ElementPtr>& elements,
                  const QuadratureRule& rule, const Cell& cell);

enum class ElementVariant { Equispaced, SpectralGLL, SpectralGL, Dense };

ElementVariant parse_variant(const std::string& s);
std::string variant_name(ElementVariant v);

struct QuadratureChoice {
  enum class Kind { Default, Points, CollocatedGLL };
  Kind kind = Kind::Default;
  int points = 0;
};

bool form_supports_cell(const FormSpec& spec, const Cell& cell);
ElementPtr form_element(const FormSpec& spec, const Cell& cell, int degree, ElementVariant variant);
QuadratureRule make_quadrature(const Cell& cell, int degree, ElementVariant variant, const QuadratureChoice& q);

// Reference coordinates of the cell's coordinate element, flat.
std::vector<double> reference_coordinates(const Cell& cell);

// Coordinates: reference vertices perturbed by at most 0.1 per component.
// Coefficients: uniform in [-1, 1].
KernelInputs random_inputs(const Kernel& k, const Cell& cell, uint64_t seed);

}  // namespace fkc
