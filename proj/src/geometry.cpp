#include "fkc/geometry.hpp"

namespace fkc {

namespace {

// J[a][b] as a scalar expression.
Expr entry(const Expr& m, int a, int b) { return indexed(m, {Index::fixed(a), Index::fixed(b)}); }

}  // namespace

Expr jacobian(const ElementPtr& coord_element, const PointSetPtr& ps, const Expr& coords) {
  const int d = ps->dimension();
  if (coord_element->value_shape() != Shape{d} || coord_element->cell().dimension() != d)
    throw Error(ErrorKind::DimensionMismatch, "coordinate element does not match the point set dimension");
  if (coords->shape != Shape{coord_element->space_dimension()})
    throw Error(ErrorKind::ExtentMismatch, "coordinate array has the wrong length");
  IndexList basis = coord_element->make_basis_indices(IndexRole::Coefficient);
  auto tab = coord_element->basis_evaluation(1, ps, basis);

  // Flat layout: dof-major, then component.
  FlexDim layout;
  int64_t stride = 1;
  for (size_t k = basis.size(); k-- > 0;) {
    layout.terms.insert(layout.terms.begin(), FlexTerm{basis[k], stride});
    stride *= basis[k].extent;
  }
  Expr c = flexibly_indexed(coords, {layout});

  std::vector<Expr> entries;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      DerivKey key(static_cast<size_t>(d), 0);
      key[static_cast<size_t>(b)] = 1;
      Expr phi = indexed(tab.at(key), {Index::fixed(a)});
      entries.push_back(index_sum(product(c, phi), basis));
    }
  }
  return list_tensor(entries, {d, d});
}

std::pair<Expr, Expr> inverse_and_det(const Expr& J, int d) {
  if (d < 1 || d > 3) throw Error(ErrorKind::Unsupported, "inverse only for d <= 3");
  if (J->shape != Shape{d, d}) throw Error(ErrorKind::ShapeMismatch, "Jacobian shape mismatch");
  auto j = [&](int a, int b) { return entry(J, a, b); };
  if (d == 1) {
    Expr det = j(0, 0);
    return {list_tensor({division(scalar(1.0), det)}, {1, 1}), det};
  }
  if (d == 2) {
    Expr det = subtract(product(j(0, 0), j(1, 1)), product(j(0, 1), j(1, 0)));
    std::vector<Expr> g = {division(j(1, 1), det), division(negate(j(0, 1)), det),
                           division(negate(j(1, 0)), det), division(j(0, 0), det)};
    return {list_tensor(g, {2, 2}), det};
  }
  // Cofactors C_ab; inverse G_ab = C_ba / det.
  auto cof = [&](int a, int b) {
    int r0 = (a + 1) % 3, r1 = (a + 2) % 3, c0 = (b + 1) % 3, c1 = (b + 2) % 3;
    return subtract(product(j(r0, c0), j(r1, c1)), product(j(r0, c1), j(r1, c0)));
  };
  Expr det = sum(sum(product(j(0, 0), cof(0, 0)), product(j(0, 1), cof(0, 1))),
                 product(j(0, 2), cof(0, 2)));
  std::vector<Expr> g;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) g.push_back(division(cof(b, a), det));
  return {list_tensor(g, {3, 3}), det};
}

ElementPtr coordinate_element(const Cell& cell) {
  switch (cell.kind) {
    case Cell::Kind::Interval: return vector_element(lagrange_interval(1), 1);
    case Cell::Kind::Triangle: return vector_element(triangle_lagrange(1), 2);
    case Cell::Kind::Product: break;
  }
  ElementPtr e;
  for (const auto& f : cell.factors) {
    ElementPtr fe = f.kind == Cell::Kind::Triangle ? triangle_lagrange(1) : lagrange_interval(1);
    e = e ? tensor_product_element(e, fe) : fe;
  }
  return vector_element(e, cell.dimension());
}

GeometryBundle make_geometry(const Cell& cell, const PointSetPtr& ps, const std::string& coord_name) {
  GeometryBundle g;
  g.dim = cell.dimension();
  auto ce = coordinate_element(cell);
  g.coord_variable = coord_name;
  g.coord_size = ce->space_dimension();
  g.J = jacobian(ce, ps, variable(coord_name, {g.coord_size}));
  auto [G, det] = inverse_and_det(g.J, g.dim);
  g.G = G;
  g.detJ = det;
  g.S = math_function("abs", det);
  return g;
}

}  // namespace fkc
