#include "fkc/element.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "fkc/evaluator.hpp"

namespace fkc {

//------------------------------------------------------------------------------
// Cells

Cell Cell::interval() { return Cell{}; }

Cell Cell::triangle() {
  Cell c;
  c.kind = Kind::Triangle;
  return c;
}

Cell Cell::product(const std::vector<Cell>& factors) {
  Cell c;
  c.kind = Kind::Product;
  for (const auto& f : factors) {
    if (f.kind == Kind::Product)
      c.factors.insert(c.factors.end(), f.factors.begin(), f.factors.end());
    else
      c.factors.push_back(f);
  }
  return c;
}

Cell Cell::by_name(const std::string& name) {
  if (name == "interval") return interval();
  if (name == "triangle") return triangle();
  if (name == "quad") return product({interval(), interval()});
  if (name == "hex") return product({interval(), interval(), interval()});
  if (name == "prism") return product({triangle(), interval()});
  throw Error(ErrorKind::UnsupportedCell, "unknown cell " + name);
}

int Cell::dimension() const {
  switch (kind) {
    case Kind::Interval: return 1;
    case Kind::Triangle: return 2;
    case Kind::Product: {
      int d = 0;
      for (const auto& f : factors) d += f.dimension();
      return d;
    }
  }
  return 0;
}

std::string Cell::name() const {
  switch (kind) {
    case Kind::Interval: return "interval";
    case Kind::Triangle: return "triangle";
    case Kind::Product: break;
  }
  bool all_interval = std::all_of(factors.begin(), factors.end(),
                                  [](const Cell& c) { return c.kind == Kind::Interval; });
  if (all_interval && factors.size() == 2) return "quad";
  if (all_interval && factors.size() == 3) return "hex";
  if (factors.size() == 2 && factors[0].kind == Kind::Triangle && factors[1].kind == Kind::Interval)
    return "prism";
  std::string s = "product(";
  for (size_t k = 0; k < factors.size(); ++k) s += (k ? "," : "") + factors[k].name();
  return s + ")";
}

bool Cell::operator==(const Cell& o) const {
  if (kind != o.kind || factors.size() != o.factors.size()) return false;
  for (size_t k = 0; k < factors.size(); ++k)
    if (!(factors[k] == o.factors[k])) return false;
  return true;
}

std::vector<DerivKey> derivative_keys(int dim, int order) {
  if (dim == 0) return order == 0 ? std::vector<DerivKey>{{}} : std::vector<DerivKey>{};
  std::vector<DerivKey> out;
  for (int a = order; a >= 0; --a)
    for (auto rest : derivative_keys(dim - 1, order - a)) {
      rest.insert(rest.begin(), a);
      out.push_back(std::move(rest));
    }
  return out;
}

IndexList FiniteElement::make_basis_indices(IndexRole role) const {
  IndexList out;
  for (auto e : basis_shape_) out.push_back(Index::fresh(e, role));
  return out;
}

namespace {

void check_basis(const FiniteElement& e, const IndexList& idx) {
  if (idx.size() != e.basis_shape().size())
    throw Error(ErrorKind::ShapeMismatch, "basis index count does not match the element");
  for (size_t k = 0; k < idx.size(); ++k)
    if (!idx[k].is_free() || idx[k].extent != e.basis_shape()[k])
      throw Error(ErrorKind::ShapeMismatch, "basis index extent does not match the element");
}

IndexList fresh_value_indices(const Shape& vs) {
  IndexList out;
  for (auto e : vs) out.push_back(Index::fresh(e, IndexRole::Value));
  return out;
}

int factorial(int n) { return n <= 1 ? 1 : n * factorial(n - 1); }

}  // namespace

//------------------------------------------------------------------------------
// Interval Lagrange

LagrangeInterval::LagrangeInterval(int n, LagrangeVariant variant, bool discontinuous)
    : variant_(variant) {
  cell_ = Cell::interval();
  degree_ = n;
  switch (variant) {
    case LagrangeVariant::Equispaced:
      if (n < 0 || (n == 0 && !discontinuous))
        throw Error(ErrorKind::InvalidDegree, "equispaced Lagrange needs degree >= 1");
      if (n == 0) {
        nodes_ = {0.5};
      } else {
        for (int i = 0; i <= n; ++i) nodes_.push_back(static_cast<double>(i) / n);
      }
      node_set_ = PointSet::interval(nodes_);
      break;
    case LagrangeVariant::SpectralGLL: {
      if (n < 1) throw Error(ErrorKind::InvalidDegree, "GLL Lagrange needs degree >= 1");
      auto r = gauss_lobatto_legendre(n + 1);
      nodes_ = r.points->coordinates_1d();
      node_set_ = r.points;
      break;
    }
    case LagrangeVariant::SpectralGL: {
      if (n < 0) throw Error(ErrorKind::InvalidDegree, "GL Lagrange needs degree >= 0");
      auto r = gauss_legendre(n + 1);
      nodes_ = r.points->coordinates_1d();
      node_set_ = r.points;
      discontinuous = true;
      break;
    }
  }
  basis_shape_ = {n + 1};
  continuity_ = {discontinuous ? Continuity::Discontinuous : Continuity::Continuous};
}

std::vector<double> LagrangeInterval::table(int order, const std::vector<double>& x) const {
  const size_t nb = nodes_.size();
  std::vector<double> out(nb * x.size(), 0.0);
  if (order < 0) throw Error(ErrorKind::InvalidArity, "negative derivative order");
  const double scale = factorial(order);
  for (size_t i = 0; i < nb; ++i) {
    for (size_t q = 0; q < x.size(); ++q) {
      // The basis function is a product of linear factors; dp[j] collects
      // the terms where j of them have been differentiated.
      std::vector<double> dp(static_cast<size_t>(order) + 1, 0.0);
      dp[0] = 1.0;
      for (size_t m = 0; m < nb; ++m) {
        if (m == i) continue;
        double inv = 1.0 / (nodes_[i] - nodes_[m]);
        double a = (x[q] - nodes_[m]) * inv;
        for (int j = order; j >= 1; --j) dp[j] = dp[j] * a + dp[j - 1] * inv;
        dp[0] *= a;
      }
      out[i * x.size() + q] = scale * dp[static_cast<size_t>(order)];
    }
  }
  return out;
}

TabulationResult LagrangeInterval::basis_evaluation(int order, const PointSetPtr& ps,
                                                    const IndexList& idx) const {
  if (ps->kind() != PointSet::Kind::Interval)
    throw Error(ErrorKind::DimensionMismatch, "interval element needs a 1D point set");
  check_basis(*this, idx);
  const Index& q = ps->indices()[0];
  Expr e;
  if (order == 0 && variant_ != LagrangeVariant::Equispaced && ps->same_points(*node_set_)) {
    e = delta(idx[0], q);
  } else {
    const auto& x = ps->coordinates_1d();
    e = indexed(literal(table(order, x), {basis_shape_[0], static_cast<int64_t>(x.size())}),
                {idx[0], q});
  }
  return {{{order}, e}};
}

std::string LagrangeInterval::describe() const {
  switch (variant_) {
    case LagrangeVariant::Equispaced:
      return (continuity_[0] == Continuity::Discontinuous ? "dP" : "P") + std::to_string(degree_);
    case LagrangeVariant::SpectralGLL: return "GLL" + std::to_string(degree_);
    case LagrangeVariant::SpectralGL: return "GL" + std::to_string(degree_);
  }
  return "?";
}

ElementPtr lagrange_interval(int n, LagrangeVariant variant) {
  return std::make_shared<LagrangeInterval>(n, variant);
}

ElementPtr discontinuous_lagrange_interval(int n) {
  return std::make_shared<LagrangeInterval>(n, LagrangeVariant::Equispaced, true);
}

//------------------------------------------------------------------------------
// Numeric tables

NumericElement::NumericElement(Cell cell, int degree, int64_t num_basis, Shape value_shape,
                               Tabulator tab, std::vector<Continuity> continuity, std::string label)
    : tab_(std::move(tab)), label_(std::move(label)) {
  cell_ = std::move(cell);
  degree_ = degree;
  basis_shape_ = {num_basis};
  value_shape_ = std::move(value_shape);
  continuity_ = std::move(continuity);
}

TabulationResult NumericElement::basis_evaluation(int order, const PointSetPtr& ps,
                                                  const IndexList& idx) const {
  if (ps->dimension() != cell_.dimension())
    throw Error(ErrorKind::DimensionMismatch, "point set dimension does not match the cell");
  check_basis(*this, idx);
  DenseTables t = tab_(order, ps);
  const int64_t nv = shape_size(value_shape_);
  if (t.num_basis != basis_shape_[0] || t.num_points != ps->size() || t.value_shape != value_shape_)
    throw Error(ErrorKind::ShapeMismatch, "numeric tables do not match the element or point set");
  Shape lit_shape = {t.num_basis};
  IndexList lit_idx = {idx[0]};
  for (const auto& q : ps->indices()) {
    lit_shape.push_back(q.extent);
    lit_idx.push_back(q);
  }
  IndexList kappa = fresh_value_indices(value_shape_);
  for (size_t k = 0; k < kappa.size(); ++k) {
    lit_shape.push_back(value_shape_[k]);
    lit_idx.push_back(kappa[k]);
  }
  TabulationResult out;
  for (const auto& key : derivative_keys(cell_.dimension(), order)) {
    auto it = t.tables.find(key);
    if (it == t.tables.end()) throw Error(ErrorKind::ShapeMismatch, "missing derivative table");
    if (static_cast<int64_t>(it->second.size()) != t.num_basis * t.num_points * nv)
      throw Error(ErrorKind::ShapeMismatch, "derivative table has the wrong size");
    out[key] = component_tensor(indexed(literal(it->second, lit_shape), lit_idx), kappa);
  }
  return out;
}

ElementPtr numeric_tabulation_element(Cell cell, int degree, const PointSetPtr& ps,
                                      const DenseTables& tables) {
  if (tables.tables.empty()) throw Error(ErrorKind::ShapeMismatch, "no tables given");
  const int64_t nv = shape_size(tables.value_shape);
  if (tables.num_points != ps->size())
    throw Error(ErrorKind::ShapeMismatch, "table point count does not match the point set");
  for (const auto& [key, tab] : tables.tables) {
    if (static_cast<int>(key.size()) != cell.dimension())
      throw Error(ErrorKind::ShapeMismatch, "derivative key has the wrong dimension");
    if (static_cast<int64_t>(tab.size()) != tables.num_basis * tables.num_points * nv)
      throw Error(ErrorKind::ShapeMismatch, "tables have inconsistent dimensions");
  }
  Tabulator tab = [tables, ps](int order, const PointSetPtr& at) {
    if (!at->same_points(*ps))
      throw Error(ErrorKind::ShapeMismatch, "tables were built for a different point set");
    DenseTables out = tables;
    out.tables.clear();
    for (const auto& [key, t] : tables.tables) {
      int o = 0;
      for (int k : key) o += k;
      if (o == order) out.tables[key] = t;
    }
    return out;
  };
  std::vector<Continuity> cont(static_cast<size_t>(cell.dimension()), Continuity::Continuous);
  return std::make_shared<NumericElement>(cell, degree, tables.num_basis, tables.value_shape, tab,
                                          cont, "numeric");
}

//------------------------------------------------------------------------------
// Triangle P_n through a monomial Vandermonde solve at the principal lattice.

namespace {

std::vector<std::pair<int, int>> triangle_exponents(int n) {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i + j <= n; ++i) out.emplace_back(i, j);
  return out;
}

double monomial_derivative(int a, int b, int da, int db, double x, double y) {
  if (da > a || db > b) return 0.0;
  double c = 1.0;
  for (int k = 0; k < da; ++k) c *= (a - k);
  for (int k = 0; k < db; ++k) c *= (b - k);
  return c * std::pow(x, a - da) * std::pow(y, b - db);
}

}  // namespace

ElementPtr triangle_lagrange(int n) {
  if (n < 1 || n > 6) throw Error(ErrorKind::InvalidDegree, "triangle Lagrange supports 1 <= n <= 6");
  auto ex = triangle_exponents(n);
  const int nb = static_cast<int>(ex.size());
  Eigen::MatrixXd V(nb, nb);
  for (int r = 0; r < nb; ++r) {
    double x = static_cast<double>(ex[r].first) / n, y = static_cast<double>(ex[r].second) / n;
    for (int c = 0; c < nb; ++c) V(r, c) = monomial_derivative(ex[c].first, ex[c].second, 0, 0, x, y);
  }
  // Column i of C holds the monomial coefficients of basis function i.
  Eigen::MatrixXd C = V.fullPivLu().inverse();
  Tabulator tab = [ex, C, nb](int order, const PointSetPtr& ps) {
    auto pts = ps->points();
    DenseTables t;
    t.num_basis = nb;
    t.num_points = static_cast<int64_t>(pts.size());
    for (const auto& key : derivative_keys(2, order)) {
      std::vector<double> table(static_cast<size_t>(nb) * pts.size(), 0.0);
      for (size_t q = 0; q < pts.size(); ++q) {
        std::vector<double> mono(static_cast<size_t>(nb));
        for (int m = 0; m < nb; ++m)
          mono[m] = monomial_derivative(ex[m].first, ex[m].second, key[0], key[1], pts[q][0], pts[q][1]);
        for (int i = 0; i < nb; ++i) {
          double s = 0.0;
          for (int m = 0; m < nb; ++m) s += C(m, i) * mono[m];
          table[static_cast<size_t>(i) * pts.size() + q] = s;
        }
      }
      t.tables[key] = std::move(table);
    }
    return t;
  };
  return std::make_shared<NumericElement>(Cell::triangle(), n, nb, Shape{}, tab,
                                          std::vector<Continuity>{Continuity::Continuous, Continuity::Continuous},
                                          "TP" + std::to_string(n));
}

//------------------------------------------------------------------------------
// Tensor product

TensorProductElement::TensorProductElement(std::vector<ElementPtr> factors) {
  std::vector<Cell> cells;
  for (const auto& f : factors) {
    if (auto tp = std::dynamic_pointer_cast<const TensorProductElement>(f)) {
      factors_.insert(factors_.end(), tp->factors().begin(), tp->factors().end());
    } else {
      factors_.push_back(f);
    }
  }
  for (const auto& f : factors_) {
    if (!f->value_shape().empty())
      throw Error(ErrorKind::Unsupported, "tensor product of non-scalar elements");
    cells.push_back(f->cell());
    basis_shape_.insert(basis_shape_.end(), f->basis_shape().begin(), f->basis_shape().end());
    continuity_.insert(continuity_.end(), f->continuity().begin(), f->continuity().end());
    degree_ = std::max(degree_, f->degree());
  }
  cell_ = Cell::product(cells);
}

TabulationResult TensorProductElement::basis_evaluation(int order, const PointSetPtr& ps,
                                                        const IndexList& idx) const {
  check_basis(*this, idx);
  if (ps->kind() != PointSet::Kind::Tensor || ps->factors().size() != factors_.size())
    throw Error(ErrorKind::DimensionMismatch, "product element needs a matching tensor point set");
  for (size_t f = 0; f < factors_.size(); ++f)
    if (ps->factors()[f]->dimension() != factors_[f]->cell().dimension())
      throw Error(ErrorKind::DimensionMismatch, "point set factor dimension mismatch");
  // Per-factor tabulations for every order up to `order`.
  std::vector<std::vector<TabulationResult>> tabs(factors_.size());
  size_t pos = 0;
  for (size_t f = 0; f < factors_.size(); ++f) {
    const size_t nb = factors_[f]->basis_shape().size();
    IndexList sub(idx.begin() + static_cast<long>(pos), idx.begin() + static_cast<long>(pos + nb));
    pos += nb;
    for (int o = 0; o <= order; ++o) tabs[f].push_back(factors_[f]->basis_evaluation(o, ps->factors()[f], sub));
  }
  TabulationResult out;
  for (const auto& key : derivative_keys(cell_.dimension(), order)) {
    Expr e = scalar(1.0);
    size_t d = 0;
    for (size_t f = 0; f < factors_.size(); ++f) {
      const int fd = factors_[f]->cell().dimension();
      DerivKey sub(key.begin() + static_cast<long>(d), key.begin() + static_cast<long>(d + fd));
      d += static_cast<size_t>(fd);
      int o = 0;
      for (int k : sub) o += k;
      e = product(e, tabs[f][static_cast<size_t>(o)].at(sub));
    }
    out[key] = e;
  }
  return out;
}

std::string TensorProductElement::describe() const {
  std::string s;
  for (size_t k = 0; k < factors_.size(); ++k) s += (k ? "*" : "") + factors_[k]->describe();
  return s;
}

ElementPtr tensor_product_element(const ElementPtr& a, const ElementPtr& b) {
  return std::make_shared<TensorProductElement>(std::vector<ElementPtr>{a, b});
}

//------------------------------------------------------------------------------
// Vector and tensor elements

TensorElement::TensorElement(ElementPtr scalar, Shape shape) : scalar_(std::move(scalar)) {
  if (!scalar_->value_shape().empty())
    throw Error(ErrorKind::Unsupported, "vector/tensor element needs a scalar subelement");
  if (shape.empty()) throw Error(ErrorKind::Unsupported, "empty tensor shape");
  cell_ = scalar_->cell();
  degree_ = scalar_->degree();
  basis_shape_ = scalar_->basis_shape();
  basis_shape_.insert(basis_shape_.end(), shape.begin(), shape.end());
  value_shape_ = std::move(shape);
  continuity_ = scalar_->continuity();
}

TabulationResult TensorElement::basis_evaluation(int order, const PointSetPtr& ps,
                                                 const IndexList& idx) const {
  check_basis(*this, idx);
  const size_t ns = scalar_->basis_shape().size();
  IndexList sub(idx.begin(), idx.begin() + static_cast<long>(ns));
  auto tab = scalar_->basis_evaluation(order, ps, sub);
  TabulationResult out;
  for (const auto& [key, e] : tab) {
    IndexList kappa = fresh_value_indices(value_shape_);
    Expr x = e;
    for (size_t k = 0; k < kappa.size(); ++k) x = product(x, delta(idx[ns + k], kappa[k]));
    out[key] = component_tensor(x, kappa);
  }
  return out;
}

std::string TensorElement::describe() const {
  std::string s = "V(" + scalar_->describe();
  for (auto e : value_shape_) s += "," + std::to_string(e);
  return s + ")";
}

ElementPtr vector_element(const ElementPtr& scalar, int d) {
  return std::make_shared<TensorElement>(scalar, Shape{d});
}

ElementPtr tensor_element(const ElementPtr& scalar, Shape shape) {
  return std::make_shared<TensorElement>(scalar, std::move(shape));
}

//------------------------------------------------------------------------------
// Enriched

EnrichedElement::EnrichedElement(std::vector<ElementPtr> subs) : subs_(std::move(subs)) {
  if (subs_.empty()) throw Error(ErrorKind::Unsupported, "enriched element needs subelements");
  cell_ = subs_[0]->cell();
  value_shape_ = subs_[0]->value_shape();
  continuity_ = subs_[0]->continuity();
  int64_t n = 0;
  for (const auto& s : subs_) {
    if (!(s->cell() == cell_)) throw Error(ErrorKind::Unsupported, "enriched subelements on different cells");
    if (s->value_shape() != value_shape_)
      throw Error(ErrorKind::ValueShapeMismatch, "enriched subelements differ in value shape");
    n += s->space_dimension();
    degree_ = std::max(degree_, s->degree());
  }
  basis_shape_ = {n};
}

TabulationResult EnrichedElement::basis_evaluation(int order, const PointSetPtr& ps,
                                                   const IndexList& idx) const {
  check_basis(*this, idx);
  std::vector<IndexList> alphas;
  std::vector<TabulationResult> tabs;
  for (const auto& s : subs_) {
    alphas.push_back(s->make_basis_indices(idx[0].role));
    tabs.push_back(s->basis_evaluation(order, ps, alphas.back()));
  }
  TabulationResult out;
  for (const auto& key : derivative_keys(cell_.dimension(), order)) {
    IndexList kappa = fresh_value_indices(value_shape_);
    std::vector<Expr> ops;
    for (size_t s = 0; s < subs_.size(); ++s) {
      Expr t = tabs[s].at(key);
      Expr scalar_t = kappa.empty() ? t : indexed(t, kappa);
      ops.push_back(component_tensor(scalar_t, alphas[s]));
    }
    out[key] = component_tensor(indexed(concatenate(ops), {idx[0]}), kappa);
  }
  return out;
}

std::string EnrichedElement::describe() const {
  std::string s;
  for (size_t k = 0; k < subs_.size(); ++k) s += (k ? "+" : "") + subs_[k]->describe();
  return s;
}

ElementPtr enriched_element(const std::vector<ElementPtr>& subs) {
  return std::make_shared<EnrichedElement>(subs);
}

//------------------------------------------------------------------------------
// H(div) / H(curl)

SobolevWrapper::SobolevWrapper(Space space, ElementPtr inner) : space_(space), inner_(std::move(inner)) {
  auto tp = std::dynamic_pointer_cast<const TensorProductElement>(inner_);
  if (!tp || tp->factors().size() != 2 || tp->cell().dimension() != 2 || !tp->value_shape().empty())
    throw Error(ErrorKind::Unsupported, "hdiv/hcurl need a 2D product of interval elements");
  const auto& c = tp->continuity();
  const bool cd = c[0] == Continuity::Continuous && c[1] == Continuity::Discontinuous;
  const bool dc = c[0] == Continuity::Discontinuous && c[1] == Continuity::Continuous;
  if (!cd && !dc) throw Error(ErrorKind::Unsupported, "hdiv/hcurl need one continuous and one discontinuous factor");
  if (space == Space::HDiv) {
    nonzero_component_ = cd ? 0 : 1;
    sign_ = cd ? -1.0 : 1.0;
  } else {
    nonzero_component_ = cd ? 1 : 0;
    sign_ = 1.0;
  }
  cell_ = inner_->cell();
  degree_ = inner_->degree();
  basis_shape_ = inner_->basis_shape();
  value_shape_ = {2};
  continuity_ = c;
}

TabulationResult SobolevWrapper::basis_evaluation(int order, const PointSetPtr& ps,
                                                  const IndexList& idx) const {
  auto tab = inner_->basis_evaluation(order, ps, idx);
  TabulationResult out;
  for (const auto& [key, e] : tab) {
    Expr v = sign_ < 0 ? negate(e) : e;
    std::vector<Expr> entries = {zero(), zero()};
    entries[static_cast<size_t>(nonzero_component_)] = v;
    out[key] = list_tensor(entries, {2});
  }
  return out;
}

std::string SobolevWrapper::describe() const {
  return std::string(space_ == Space::HDiv ? "hdiv(" : "hcurl(") + inner_->describe() + ")";
}

ElementPtr hdiv_wrap(const ElementPtr& e) {
  return std::make_shared<SobolevWrapper>(SobolevWrapper::Space::HDiv, e);
}

ElementPtr hcurl_wrap(const ElementPtr& e) {
  return std::make_shared<SobolevWrapper>(SobolevWrapper::Space::HCurl, e);
}

//------------------------------------------------------------------------------
// Dense wrapper

ElementPtr densify(const ElementPtr& e) {
  ElementPtr inner = e;
  Tabulator tab = [inner](int order, const PointSetPtr& ps) {
    IndexList idx = inner->make_basis_indices(IndexRole::Generic);
    auto t = inner->basis_evaluation(order, ps, idx);
    DenseTables out;
    out.num_basis = inner->space_dimension();
    out.num_points = ps->size();
    out.value_shape = inner->value_shape();
    for (const auto& [key, ex] : t) {
      IndexList kappa = fresh_value_indices(inner->value_shape());
      Expr s = kappa.empty() ? ex : indexed(ex, kappa);
      IndexList order_idx = idx;
      for (const auto& q : ps->indices()) order_idx.push_back(q);
      order_idx.insert(order_idx.end(), kappa.begin(), kappa.end());
      // Evaluate over the indices the tabulation depends on; broadcast the rest.
      IndexList present;
      for (const auto& i : order_idx)
        if (index_contains(s->free, i)) present.push_back(i);
      Tensor dense = eval_expr(component_tensor(s, present), Environment{});
      // Expand to the full [basis][points][value] layout.
      std::vector<int64_t> ext;
      for (const auto& i : order_idx) ext.push_back(i.extent);
      const int64_t total = shape_size(ext);
      std::vector<double> flat(static_cast<size_t>(total));
      std::vector<int64_t> pos(ext.size(), 0);
      for (int64_t lin = 0; lin < total; ++lin) {
        int64_t rem = lin;
        for (int k = static_cast<int>(ext.size()) - 1; k >= 0; --k) {
          pos[static_cast<size_t>(k)] = rem % ext[static_cast<size_t>(k)];
          rem /= ext[static_cast<size_t>(k)];
        }
        int64_t off = 0;
        for (size_t k = 0; k < order_idx.size(); ++k)
          if (index_contains(s->free, order_idx[k])) {
            int64_t e2 = order_idx[k].extent;
            off = off * e2 + pos[k];
          }
        flat[static_cast<size_t>(lin)] = dense.data[static_cast<size_t>(off)];
      }
      out.tables[key] = std::move(flat);
    }
    return out;
  };
  std::vector<Continuity> cont = e->continuity();
  return std::make_shared<NumericElement>(e->cell(), e->degree(), e->space_dimension(), e->value_shape(),
                                          tab, cont, "dense(" + e->describe() + ")");
}

//------------------------------------------------------------------------------
// Element strings

namespace {

class ElementParser {
 public:
  explicit ElementParser(std::string s) {
    for (char c : s)
      if (!std::isspace(static_cast<unsigned char>(c))) text_ += c;
  }

  ElementPtr parse() {
    auto e = sum_expr();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& why) {
    throw Error(ErrorKind::Usage, "element string '" + text_ + "': " + why + " at position " +
                                      std::to_string(pos_));
  }

  bool accept(const std::string& tok) {
    if (text_.compare(pos_, tok.size(), tok) == 0) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(const std::string& tok) {
    if (!accept(tok)) fail("expected '" + tok + "'");
  }

  int number() {
    size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a number");
    return std::stoi(text_.substr(start, pos_ - start));
  }

  ElementPtr sum_expr() {
    std::vector<ElementPtr> terms = {product_expr()};
    while (accept("+")) terms.push_back(product_expr());
    return terms.size() == 1 ? terms[0] : enriched_element(terms);
  }

  ElementPtr product_expr() {
    ElementPtr e = atom();
    while (accept("*")) e = tensor_product_element(e, atom());
    return e;
  }

  ElementPtr atom() {
    if (accept("hdiv(")) {
      auto e = sum_expr();
      expect(")");
      return hdiv_wrap(e);
    }
    if (accept("hcurl(")) {
      auto e = sum_expr();
      expect(")");
      return hcurl_wrap(e);
    }
    if (accept("V(")) {
      auto e = sum_expr();
      expect(",");
      int d = number();
      expect(")");
      return vector_element(e, d);
    }
    if (accept("(")) {
      auto e = sum_expr();
      expect(")");
      return e;
    }
    if (accept("GLL")) return lagrange_interval(number(), LagrangeVariant::SpectralGLL);
    if (accept("GL")) return lagrange_interval(number(), LagrangeVariant::SpectralGL);
    if (accept("dP")) return discontinuous_lagrange_interval(number());
    if (accept("TP")) return triangle_lagrange(number());
    if (accept("P")) return lagrange_interval(number(), LagrangeVariant::Equispaced);
    fail("unknown element");
  }

  std::string text_;
  size_t pos_ = 0;
};

}  // namespace

ElementPtr parse_element(const std::string& text) { return ElementParser(text).parse(); }

}  // namespace fkc
