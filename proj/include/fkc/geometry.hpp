#pragma once

#include <string>

#include "fkc/element.hpp"
#include "fkc/ir.hpp"
#include "fkc/quadrature.hpp"

namespace fkc {

struct GeometryBundle {
  int dim = 0;
  Expr J;     // shape (d, d), free point indices
  Expr G;     // J^{-1}
  Expr detJ;
  Expr S;     // |det J|
  std::string coord_variable;  // flat, dof-major then component
  int64_t coord_size = 0;
};

// J_ab(q) = sum_i c_i [d Phi_i / d x_b (q)]_a for a vector coordinate element.
Expr jacobian(const ElementPtr& coord_element, const PointSetPtr& ps, const Expr& coords);

// Closed-form inverse and determinant of a (d, d) expression, d <= 3.
std::pair<Expr, Expr> inverse_and_det(const Expr& J, int d);

// Coordinate element for a cell: vector P1 / Q1 with equispaced nodes.
ElementPtr coordinate_element(const Cell& cell);

GeometryBundle make_geometry(const Cell& cell, const PointSetPtr& ps,
                             const std::string& coord_name = "coords");

}  // namespace fkc
