#include "fkc/form.hpp"

#include <algorithm>
#include <random>

namespace fkc {

namespace {

IndexList value_indices(const Shape& s) {
  IndexList out;
  for (auto e : s) out.push_back(Index::fresh(e, IndexRole::Value));
  return out;
}

IndexList fixed_multi_index(int64_t flat, const Shape& s) {
  IndexList out(s.size());
  for (size_t k = s.size(); k-- > 0;) {
    out[k] = Index::fixed(flat % s[k]);
    flat /= s[k];
  }
  return out;
}

DerivKey unit_key(int d, int b) {
  DerivKey k(static_cast<size_t>(d), 0);
  k[static_cast<size_t>(b)] = 1;
  return k;
}

// Row-major flat layout of a basis multi-index, scaled by `outer`.
std::vector<FlexTerm> flat_layout(const IndexList& basis, int64_t outer = 1) {
  std::vector<FlexTerm> terms(basis.size());
  int64_t stride = outer;
  for (size_t k = basis.size(); k-- > 0;) {
    terms[k] = FlexTerm{basis[k], stride};
    stride *= basis[k].extent;
  }
  return terms;
}

Expr component(const Expr& t, const IndexList& fixed) { return fixed.empty() ? t : indexed(t, fixed); }

Field argument_field(const ElementPtr& e, const PointSetPtr& ps, const IndexList& basis, int order) {
  Field f;
  const int d = e->cell().dimension();
  auto tab0 = e->basis_evaluation(0, ps, basis);
  f.value = tab0.at(DerivKey(static_cast<size_t>(d), 0));
  if (order >= 1) {
    auto tab1 = e->basis_evaluation(1, ps, basis);
    const Shape& vs = e->value_shape();
    std::vector<Expr> entries;
    for (int64_t c = 0; c < shape_size(vs); ++c)
      for (int b = 0; b < d; ++b) entries.push_back(component(tab1.at(unit_key(d, b)), fixed_multi_index(c, vs)));
    Shape s = vs;
    s.push_back(d);
    f.ref_grad = list_tensor(entries, s);
  }
  return f;
}

}  // namespace

Expr inner(const Expr& a, const Expr& b) {
  if (a->shape != b->shape) throw Error(ErrorKind::ShapeMismatch, "inner product of differently shaped operands");
  if (a->shape.empty()) return product(a, b);
  IndexList alpha = value_indices(a->shape);
  return index_sum(product(indexed(a, alpha), indexed(b, alpha)), alpha);
}

Expr FormContext::grad(const Field& f) const {
  if (!f.ref_grad) throw Error(ErrorKind::IllFormed, "gradient requested without first derivatives");
  Shape vs = f.ref_grad->shape;
  vs.pop_back();
  IndexList c = value_indices(vs);
  Index a = Index::fresh(dim, IndexRole::Value);
  Index b = Index::fresh(dim, IndexRole::Value);
  IndexList cb = c, ca = c;
  cb.push_back(b);
  ca.push_back(a);
  Expr body = product(indexed(f.ref_grad, cb), indexed(geometry.G, {b, a}));
  return component_tensor(index_sum(body, {b}), ca);
}

Expr ref_curl(const Field& f) {
  if (!f.ref_grad || f.ref_grad->shape != Shape{2, 2})
    throw Error(ErrorKind::ShapeMismatch, "2D curl needs a 2-vector field with first derivatives");
  auto rg = [&](int c, int b) { return indexed(f.ref_grad, {Index::fixed(c), Index::fixed(b)}); };
  return subtract(rg(1, 0), rg(0, 1));
}

Expr evaluate_coefficient(const ElementPtr& element, const Expr& dofs, const PointSetPtr& ps, int order) {
  if (dofs->shape != Shape{element->space_dimension()})
    throw Error(ErrorKind::ExtentMismatch, "coefficient array length does not match the element");
  if (order < 0 || order > 1) throw Error(ErrorKind::Unsupported, "coefficient derivatives above first order");
  const int d = element->cell().dimension();
  const Shape& vs = element->value_shape();
  IndexList basis = element->make_basis_indices(IndexRole::Coefficient);
  Expr u = flexibly_indexed(dofs, {FlexDim{0, flat_layout(basis)}});
  if (order == 0) {
    auto tab = element->basis_evaluation(0, ps, basis).at(DerivKey(static_cast<size_t>(d), 0));
    IndexList kappa = value_indices(vs);
    return component_tensor(index_sum(product(u, component(tab, kappa)), basis), kappa);
  }
  auto tab = element->basis_evaluation(1, ps, basis);
  std::vector<Expr> entries;
  for (int64_t c = 0; c < shape_size(vs); ++c)
    for (int b = 0; b < d; ++b)
      entries.push_back(index_sum(product(u, component(tab.at(unit_key(d, b)), fixed_multi_index(c, vs))), basis));
  Shape s = vs;
  s.push_back(d);
  return list_tensor(entries, s);
}

FormSpec action_form(const FormSpec& bilinear) {
  if (bilinear.rank != 2) throw Error(ErrorKind::ArityMismatch, "action of a non-bilinear form");
  FormSpec a = bilinear;
  a.name = bilinear.name + "_action";
  a.rank = 1;
  a.num_coefficients = bilinear.num_coefficients + 1;
  return a;
}

namespace {

std::vector<FormSpec> build_registry() {
  std::vector<FormSpec> r;
  auto add = [&](std::string name, int rank, int ncoef, std::vector<int> orders, std::string family,
                 std::function<Expr(const FormContext&, const std::vector<Field>&)> fn) {
    FormSpec s;
    s.name = std::move(name);
    s.rank = rank;
    s.num_coefficients = ncoef;
    s.derivative_orders = std::move(orders);
    s.family = std::move(family);
    s.integrand = std::move(fn);
    r.push_back(std::move(s));
  };
  add("mass", 2, 0, {0, 0}, "scalar",
      [](const FormContext&, const std::vector<Field>& f) { return inner(f[1].value, f[0].value); });
  add("weighted_mass", 2, 1, {0, 0, 0}, "scalar", [](const FormContext&, const std::vector<Field>& f) {
    return product(f[2].value, inner(f[1].value, f[0].value));
  });
  add("laplace", 2, 0, {1, 1}, "scalar", [](const FormContext& c, const std::vector<Field>& f) {
    return inner(c.grad(f[1]), c.grad(f[0]));
  });
  add("weighted_laplace", 2, 1, {1, 1, 0}, "scalar", [](const FormContext& c, const std::vector<Field>& f) {
    return product(f[2].value, inner(c.grad(f[1]), c.grad(f[0])));
  });
  add("vector_mass", 2, 0, {0, 0}, "vector",
      [](const FormContext&, const std::vector<Field>& f) { return inner(f[1].value, f[0].value); });
  add("stokes_momentum", 2, 0, {1, 1}, "vector", [](const FormContext& c, const std::vector<Field>& f) {
    return inner(c.grad(f[1]), c.grad(f[0]));
  });
  add("curl_curl", 2, 0, {1, 1}, "curl", [](const FormContext&, const std::vector<Field>& f) {
    return product(ref_curl(f[1]), ref_curl(f[0]));
  });
  add("rhs_source", 1, 1, {0, 0}, "scalar",
      [](const FormContext&, const std::vector<Field>& f) { return product(f[1].value, f[0].value); });
  for (const char* base : {"mass", "laplace", "curl_curl"}) {
    auto it = std::find_if(r.begin(), r.end(), [&](const FormSpec& s) { return s.name == base; });
    r.push_back(action_form(*it));
  }
  return r;
}

}  // namespace

const std::vector<FormSpec>& form_registry() {
  static const std::vector<FormSpec> registry = build_registry();
  return registry;
}

const FormSpec& find_form(const std::string& name) {
  for (const auto& s : form_registry())
    if (s.name == name) return s;
  throw Error(ErrorKind::Usage, "unknown form '" + name + "'");
}

Kernel lower_form(const FormSpec& spec, const std::vector<ElementPtr>& elements, const QuadratureRule& rule,
                  const Cell& cell) {
  if (static_cast<int>(elements.size()) != spec.num_slots())
    throw Error(ErrorKind::ArityMismatch, spec.name + ": expected " + std::to_string(spec.num_slots()) + " elements");
  for (const auto& e : elements)
    if (!(e->cell() == cell)) throw Error(ErrorKind::UnsupportedCell, "element cell does not match " + cell.name());
  if (rule.points->dimension() != cell.dimension())
    throw Error(ErrorKind::DimensionMismatch, "quadrature dimension does not match the cell");

  const PointSetPtr& ps = rule.points;
  FormContext ctx;
  ctx.cell = cell;
  ctx.dim = cell.dimension();
  ctx.geometry = make_geometry(cell, ps);

  Kernel k;
  k.name = spec.name;
  k.rank = spec.rank;
  k.args.push_back({ctx.geometry.coord_variable, ctx.geometry.coord_size});

  std::vector<Field> fields;
  std::vector<IndexList> arg_indices;
  for (int s = 0; s < spec.num_slots(); ++s) {
    const auto& e = elements[static_cast<size_t>(s)];
    const int order = spec.derivative_orders[static_cast<size_t>(s)];
    if (s < spec.rank) {
      IndexList basis = e->make_basis_indices(IndexRole::Argument);
      fields.push_back(argument_field(e, ps, basis, order));
      arg_indices.push_back(basis);
      k.return_shape.push_back(e->space_dimension());
    } else {
      std::string name = "w" + std::to_string(s - spec.rank);
      Expr w = variable(name, {e->space_dimension()});
      k.args.push_back({name, e->space_dimension()});
      Field f;
      f.value = evaluate_coefficient(e, w, ps, 0);
      if (order >= 1) f.ref_grad = evaluate_coefficient(e, w, ps, 1);
      fields.push_back(f);
    }
  }

  Expr integrand = spec.integrand(ctx, fields);
  Expr body = product(product(rule.weight_expr(), ctx.geometry.S), integrand);
  Expr expr = index_sum(body, ps->indices());

  // Test index outermost, row-major within each argument.
  View view;
  for (size_t a = 0; a < arg_indices.size(); ++a) {
    int64_t outer = 1;
    for (size_t b = a + 1; b < arg_indices.size(); ++b) outer *= k.return_shape[b];
    for (const auto& t : flat_layout(arg_indices[a], outer)) view.terms.push_back({t.index, t.stride});
  }
  k.assignments.push_back({normalize_view(view), expr, arg_indices});
  return k;
}

ElementVariant parse_variant(const std::string& s) {
  if (s == "equispaced") return ElementVariant::Equispaced;
  if (s == "spectral_gll") return ElementVariant::SpectralGLL;
  if (s == "spectral_gl") return ElementVariant::SpectralGL;
  if (s == "dense") return ElementVariant::Dense;
  throw Error(ErrorKind::Usage, "unknown element variant '" + s + "'");
}

std::string variant_name(ElementVariant v) {
  switch (v) {
    case ElementVariant::Equispaced: return "equispaced";
    case ElementVariant::SpectralGLL: return "spectral_gll";
    case ElementVariant::SpectralGL: return "spectral_gl";
    case ElementVariant::Dense: return "dense";
  }
  return "?";
}

bool form_supports_cell(const FormSpec& spec, const Cell& cell) {
  if (spec.family != "curl") return true;
  const std::string n = cell.name();
  return n == "quad" || n == "triangle";
}

namespace {

ElementPtr interval_element(int n, ElementVariant v) {
  switch (v) {
    case ElementVariant::SpectralGLL: return lagrange_interval(n, LagrangeVariant::SpectralGLL);
    case ElementVariant::SpectralGL: return lagrange_interval(n, LagrangeVariant::SpectralGL);
    default: return lagrange_interval(n, LagrangeVariant::Equispaced);
  }
}

ElementPtr scalar_element(const Cell& cell, int n, ElementVariant v) {
  auto factor = [&](const Cell& c) {
    if (c.kind == Cell::Kind::Triangle) return triangle_lagrange(n);
    return interval_element(n, v);
  };
  if (cell.kind != Cell::Kind::Product) return factor(cell);
  ElementPtr e;
  for (const auto& f : cell.factors) e = e ? tensor_product_element(e, factor(f)) : factor(f);
  return e;
}

}  // namespace

ElementPtr form_element(const FormSpec& spec, const Cell& cell, int degree, ElementVariant variant) {
  if (!form_supports_cell(spec, cell))
    throw Error(ErrorKind::UnsupportedCell, spec.name + " is not defined on " + cell.name());
  const bool has_triangle = cell.kind == Cell::Kind::Triangle ||
                            std::any_of(cell.factors.begin(), cell.factors.end(),
                                        [](const Cell& c) { return c.kind == Cell::Kind::Triangle; });
  if (has_triangle && (variant == ElementVariant::SpectralGLL || variant == ElementVariant::SpectralGL) &&
      cell.kind == Cell::Kind::Triangle)
    throw Error(ErrorKind::Usage, "spectral variants need interval factors");
  ElementPtr e;
  if (spec.family == "curl" && cell.name() == "quad") {
    if (degree < 1) throw Error(ErrorKind::InvalidDegree, "RTCF needs degree >= 1");
    auto p = interval_element(degree, variant);
    auto dp = discontinuous_lagrange_interval(degree - 1);
    e = enriched_element({hdiv_wrap(tensor_product_element(p, dp)), hdiv_wrap(tensor_product_element(dp, p))});
  } else {
    e = scalar_element(cell, degree, variant);
    if (spec.family != "scalar") e = vector_element(e, cell.dimension());
  }
  return variant == ElementVariant::Dense ? densify(e) : e;
}

QuadratureRule make_quadrature(const Cell& cell, int degree, ElementVariant variant, const QuadratureChoice& q) {
  int m = degree + 1;
  bool gll = false;
  if (q.kind == QuadratureChoice::Kind::Points) {
    if (q.points < 1) throw Error(ErrorKind::Usage, "quadrature needs at least one point");
    m = q.points;
  } else if (q.kind == QuadratureChoice::Kind::CollocatedGLL) {
    if (variant != ElementVariant::SpectralGLL)
      throw Error(ErrorKind::Usage, "collocated-gll quadrature requires --variant spectral_gll");
    gll = true;
  }
  auto rule_for = [&](const Cell& c) {
    if (c.kind == Cell::Kind::Triangle) {
      if (gll) throw Error(ErrorKind::Usage, "collocated-gll quadrature requires interval factors");
      return collapsed_triangle(m);
    }
    return gll ? gauss_lobatto_legendre(m) : gauss_legendre(m);
  };
  if (cell.kind != Cell::Kind::Product) return rule_for(cell);
  std::vector<QuadratureRule> rules;
  for (const auto& f : cell.factors) rules.push_back(rule_for(f));
  return tensor_rule(rules);
}

std::vector<double> reference_coordinates(const Cell& cell) {
  // Node lists per factor, then the row-major product.
  std::vector<std::vector<std::vector<double>>> nodes;
  auto factor_nodes = [](const Cell& c) -> std::vector<std::vector<double>> {
    if (c.kind == Cell::Kind::Triangle) return {{0, 0}, {1, 0}, {0, 1}};
    return {{0}, {1}};
  };
  if (cell.kind == Cell::Kind::Product)
    for (const auto& f : cell.factors) nodes.push_back(factor_nodes(f));
  else
    nodes.push_back(factor_nodes(cell));
  std::vector<std::vector<double>> pts = {{}};
  for (const auto& f : nodes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : pts)
      for (const auto& x : f) {
        auto y = p;
        y.insert(y.end(), x.begin(), x.end());
        next.push_back(std::move(y));
      }
    pts = std::move(next);
  }
  std::vector<double> flat;
  for (const auto& p : pts) flat.insert(flat.end(), p.begin(), p.end());
  return flat;
}

KernelInputs random_inputs(const Kernel& k, const Cell& cell, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pert(-0.1, 0.1), unit(-1.0, 1.0);
  KernelInputs in;
  for (size_t a = 0; a < k.args.size(); ++a) {
    const auto& arg = k.args[a];
    std::vector<double> v(static_cast<size_t>(arg.size));
    if (a == 0) {
      v = reference_coordinates(cell);
      if (static_cast<int64_t>(v.size()) != arg.size)
        throw Error(ErrorKind::ShapeMismatch, "coordinate layout does not match the kernel");
      for (auto& x : v) x += pert(rng);
    } else {
      for (auto& x : v) x = unit(rng);
    }
    in[arg.name] = std::move(v);
  }
  return in;
}

}  // namespace fkc
