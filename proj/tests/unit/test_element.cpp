#include <doctest.h>

#include <cmath>
#include <random>

#include "fkc/element.hpp"
#include "fkc/quadrature.hpp"
#include "support.hpp"

using namespace fkc;
using fkc::test::dense;

namespace {

std::vector<double> tab(const ElementPtr& e, int order, const PointSetPtr& ps, DerivKey key,
                        IndexList* basis_out = nullptr) {
  auto b = e->make_basis_indices();
  auto t = e->basis_evaluation(order, ps, b);
  if (basis_out) *basis_out = b;
  return dense(t.at(key), b, ps->indices());
}

PointSetPtr random_interval_points(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) v = u(rng);
  return PointSet::interval(x);
}

PointSetPtr random_triangle_points(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> p;
  while (static_cast<int>(p.size()) < n) {
    double x = u(rng), y = u(rng);
    if (x + y <= 1.0) p.push_back({x, y});
  }
  return PointSet::simplex(p);
}

int count_ops(const Expr& root, Op op) {
  int n = 0;
  for (const auto& e : post_order({root}))
    if (e->op == op) ++n;
  return n;
}

void check_partition_of_unity(const ElementPtr& e, const PointSetPtr& ps) {
  auto t = tab(e, 0, ps, DerivKey(static_cast<size_t>(e->cell().dimension()), 0));
  const int64_t nb = e->space_dimension(), nq = ps->size();
  for (int64_t q = 0; q < nq; ++q) {
    double s = 0;
    for (int64_t i = 0; i < nb; ++i) s += t[static_cast<size_t>(i * nq + q)];
    CHECK(std::fabs(s - 1.0) < 1e-10);
  }
}

}  // namespace

TEST_CASE("linear interval element") {
  auto e = lagrange_interval(1);
  auto nodes = PointSet::interval({0.0, 1.0});
  CHECK(tab(e, 0, nodes, {0}) == std::vector<double>{1, 0, 0, 1});

  std::mt19937_64 rng(1);
  auto ps = random_interval_points(5, rng);
  auto d = tab(e, 1, ps, {1});
  for (int q = 0; q < 5; ++q) {
    CHECK(d[static_cast<size_t>(q)] == doctest::Approx(-1.0));
    CHECK(d[static_cast<size_t>(5 + q)] == doctest::Approx(1.0));
  }
  CHECK(fkc::test::error_kind([] { lagrange_interval(0); }) == ErrorKind::InvalidDegree);
}

TEST_CASE("spectral nodes follow the quadrature points") {
  auto e = std::dynamic_pointer_cast<const LagrangeInterval>(lagrange_interval(4, LagrangeVariant::SpectralGLL));
  REQUIRE(e);
  CHECK(e->nodes() == gauss_lobatto_legendre(5).points->coordinates_1d());
  auto g = std::dynamic_pointer_cast<const LagrangeInterval>(lagrange_interval(3, LagrangeVariant::SpectralGL));
  CHECK(g->nodes() == gauss_legendre(4).points->coordinates_1d());
}

TEST_CASE("collocated spectral tabulation is a delta") {
  for (int n : {1, 3, 7}) {
    auto e = lagrange_interval(n, LagrangeVariant::SpectralGL);
    auto rule = gauss_legendre(n + 1);
    auto b = e->make_basis_indices();
    auto t = e->basis_evaluation(0, rule.points, b).at({0});
    CHECK(t->op == Op::Delta);
    // derivatives stay dense
    CHECK(e->basis_evaluation(1, rule.points, b).at({1})->op == Op::Indexed);
    // a different rule with the same size is not collocated
    CHECK(e->basis_evaluation(0, gauss_lobatto_legendre(n + 1).points, b).at({0})->op != Op::Delta);
  }
  // equispaced nodes never collapse
  auto eq = lagrange_interval(1);
  CHECK(eq->basis_evaluation(0, PointSet::interval({0.0, 1.0}), eq->make_basis_indices()).at({0})->op != Op::Delta);
}

TEST_CASE("nodal property") {
  for (int n = 1; n <= 6; ++n) {
    for (auto v : {LagrangeVariant::Equispaced, LagrangeVariant::SpectralGLL, LagrangeVariant::SpectralGL}) {
      auto e = std::dynamic_pointer_cast<const LagrangeInterval>(lagrange_interval(n, v));
      // a copy of the nodes so the collocation shortcut is bypassed by identity but not by value
      auto t = tab(e, 0, PointSet::interval(e->nodes()), {0});
      for (int i = 0; i <= n; ++i)
        for (int q = 0; q <= n; ++q) CHECK(std::fabs(t[static_cast<size_t>(i * (n + 1) + q)] - (i == q)) < 1e-9);
    }
    auto tri = triangle_lagrange(n);
    std::vector<std::vector<double>> lattice;
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i + j <= n; ++i) lattice.push_back({double(i) / n, double(j) / n});
    auto t = tab(tri, 0, PointSet::simplex(lattice), {0, 0});
    const auto nb = static_cast<size_t>(tri->space_dimension());
    REQUIRE(nb == lattice.size());
    // each node carries exactly one basis function
    for (size_t q = 0; q < nb; ++q) {
      int ones = 0;
      for (size_t i = 0; i < nb; ++i) {
        const double v = t[i * nb + q];
        if (std::fabs(v - 1.0) < 1e-9) ++ones;
        else CHECK(std::fabs(v) < 1e-9);
      }
      CHECK(ones == 1);
    }
  }
  CHECK(fkc::test::error_kind([] { triangle_lagrange(7); }) == ErrorKind::InvalidDegree);
}

TEST_CASE("partition of unity") {
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 4; ++n) {
    auto ps = random_interval_points(6, rng);
    for (auto v : {LagrangeVariant::Equispaced, LagrangeVariant::SpectralGLL, LagrangeVariant::SpectralGL})
      check_partition_of_unity(lagrange_interval(n, v), ps);
    check_partition_of_unity(triangle_lagrange(n), random_triangle_points(6, rng));
    auto q = tensor_product_element(lagrange_interval(n), lagrange_interval(n, LagrangeVariant::SpectralGLL));
    check_partition_of_unity(q, PointSet::tensor({random_interval_points(3, rng), random_interval_points(4, rng)}));
    auto prism = tensor_product_element(triangle_lagrange(n), lagrange_interval(n));
    check_partition_of_unity(prism, PointSet::tensor({random_triangle_points(3, rng), random_interval_points(2, rng)}));
  }
}

TEST_CASE("numeric tabulation wrapper") {
  auto e = lagrange_interval(1);
  auto ps = PointSet::interval({0.1, 0.4, 0.9});
  DenseTables dt;
  dt.num_basis = 2;
  dt.num_points = 3;
  dt.tables[{0}] = tab(e, 0, ps, {0});
  dt.tables[{1}] = tab(e, 1, ps, {1});
  auto w = numeric_tabulation_element(Cell::interval(), 1, ps, dt);
  CHECK(tab(w, 0, ps, {0}) == dt.tables[{0}]);
  CHECK(tab(w, 1, ps, {1}) == dt.tables[{1}]);

  DenseTables bad = dt;
  bad.tables[{1}].pop_back();
  CHECK(fkc::test::error_kind([&] { numeric_tabulation_element(Cell::interval(), 1, ps, bad); }) ==
        ErrorKind::ShapeMismatch);
  DenseTables wrong_points = dt;
  wrong_points.num_points = 4;
  CHECK(fkc::test::error_kind([&] { numeric_tabulation_element(Cell::interval(), 1, ps, wrong_points); }) ==
        ErrorKind::ShapeMismatch);
}

TEST_CASE("tensor product tabulation") {
  auto p1 = lagrange_interval(1);
  auto q1 = tensor_product_element(p1, p1);
  auto mid = PointSet::tensor({PointSet::interval({0.5}), PointSet::interval({0.5})});
  CHECK(tab(q1, 0, mid, {0, 0})[0] == doctest::Approx(0.25));

  auto b = q1->make_basis_indices();
  auto grad_x = q1->basis_evaluation(1, mid, b).at({1, 0});
  CHECK(grad_x->op == Op::Product);
  CHECK(count_ops(grad_x, Op::Literal) == 2);

  auto p2dp1 = tensor_product_element(lagrange_interval(2), discontinuous_lagrange_interval(1));
  CHECK(p2dp1->basis_shape() == Shape{3, 2});
  CHECK(p2dp1->space_dimension() == 6);
  CHECK(tensor_product_element(q1, p1)->basis_shape() == Shape{2, 2, 2});
  CHECK(tensor_product_element(triangle_lagrange(2), lagrange_interval(2))->space_dimension() == 18);

  auto v = vector_element(p1, 2);
  CHECK(fkc::test::error_kind([&] { tensor_product_element(v, v); }) == ErrorKind::Unsupported);
}

TEST_CASE("tensor product tables stay factor sized") {
  for (int n = 1; n <= 5; ++n) {
    auto e = tensor_product_element(tensor_product_element(lagrange_interval(n), lagrange_interval(n)),
                                    lagrange_interval(n));
    auto g = gauss_legendre(n + 1);
    auto ps = tensor_rule({g, g, g}).points;
    const int64_t nf = e->space_dimension(), nq = ps->size();
    for (int order = 0; order <= 1; ++order)
      for (const auto& [key, t] : e->basis_evaluation(order, ps, e->make_basis_indices()))
        for (const auto& node : post_order({t}))
          if (node->op == Op::Literal) CHECK(shape_size(node->shape) < nf * nq);
  }
}

TEST_CASE("vector and tensor elements") {
  auto p1 = lagrange_interval(1);
  auto v = vector_element(p1, 2);
  CHECK(v->value_shape() == Shape{2});
  CHECK(v->basis_shape() == Shape{2, 2});
  auto b = v->make_basis_indices();
  auto t = v->basis_evaluation(0, PointSet::interval({0.0}), b).at({0});
  CHECK(count_ops(t, Op::Delta) == 1);
  // basis (0, 1) at x = 0: unit vector along component 1
  auto d = dense(t, b, {});
  (void)d;
  Environment env;
  env.fix(b[0], 0);
  env.fix(b[1], 1);
  auto val = eval_expr(t, env);
  REQUIRE(val.data.size() == 2);
  CHECK(val.data[0] == 0.0);
  CHECK(val.data[1] == 1.0);

  auto tt = tensor_element(p1, {1, 1});
  CHECK(tt->value_shape() == Shape{1, 1});
  auto tb = tt->make_basis_indices();
  CHECK(count_ops(tt->basis_evaluation(0, PointSet::interval({0.3}), tb).at({0}), Op::Delta) == 2);
  auto t2 = tensor_element(tensor_product_element(p1, p1), {2, 2});
  CHECK(t2->value_shape() == Shape{2, 2});
  CHECK(count_ops(t2->basis_evaluation(0, PointSet::tensor({PointSet::interval({0.3}), PointSet::interval({0.6})}),
                                       t2->make_basis_indices())
                      .at({0, 0}),
                  Op::Delta) == 2);
  CHECK(fkc::test::error_kind([&] { vector_element(v, 2); }) == ErrorKind::Unsupported);
}

TEST_CASE("hdiv and hcurl wrappers") {
  auto p2 = lagrange_interval(2);
  auto dp1 = discontinuous_lagrange_interval(1);
  auto cd = tensor_product_element(p2, dp1);
  auto dc = tensor_product_element(dp1, p2);
  std::mt19937_64 rng(4);
  auto ps = PointSet::tensor({random_interval_points(3, rng), random_interval_points(2, rng)});
  auto psi_cd = tab(cd, 0, ps, {0, 0});
  auto psi_dc = tab(dc, 0, ps, {0, 0});
  auto a = tab(hdiv_wrap(cd), 0, ps, {0, 0});
  auto b = tab(hdiv_wrap(dc), 0, ps, {0, 0});
  auto c = tab(hcurl_wrap(cd), 0, ps, {0, 0});
  for (size_t k = 0; k < psi_cd.size(); ++k) {
    CHECK(a[2 * k] == -psi_cd[k]);
    CHECK(a[2 * k + 1] == 0.0);
    CHECK(b[2 * k] == 0.0);
    CHECK(b[2 * k + 1] == psi_dc[k]);
    CHECK(c[2 * k] == 0.0);
    CHECK(c[2 * k + 1] == psi_cd[k]);
  }
  CHECK(fkc::test::error_kind([&] { hdiv_wrap(tensor_product_element(p2, p2)); }) == ErrorKind::Unsupported);
}

TEST_CASE("hcurl tangential trace is continuous across a vertical edge") {
  // Left cell [0,1]^2 and right cell [1,2]x[0,1] share the edge x = 1. The
  // shared dofs are the left cell's x-node 2 and the right cell's x-node 0.
  auto e = hcurl_wrap(tensor_product_element(lagrange_interval(2), discontinuous_lagrange_interval(1)));
  std::mt19937_64 rng(8);
  auto ys = random_interval_points(4, rng);
  auto left = tab(e, 0, PointSet::tensor({PointSet::interval({1.0}), ys}), {0, 0});
  auto right = tab(e, 0, PointSet::tensor({PointSet::interval({0.0}), ys}), {0, 0});
  // [i1][i2][q][component]
  auto at = [](const std::vector<double>& t, int i1, int i2, int q, int c) {
    return t[static_cast<size_t>(((i1 * 2 + i2) * 4 + q) * 2 + c)];
  };
  for (int i2 = 0; i2 < 2; ++i2)
    for (int q = 0; q < 4; ++q) {
      CHECK(std::fabs(at(left, 2, i2, q, 1) - at(right, 0, i2, q, 1)) < 1e-12);
      for (int i1 = 0; i1 < 2; ++i1) CHECK(std::fabs(at(left, i1, i2, q, 1)) < 1e-12);
      for (int i1 = 1; i1 < 3; ++i1) CHECK(std::fabs(at(right, i1, i2, q, 1)) < 1e-12);
    }
}

TEST_CASE("enriched elements") {
  auto p2 = lagrange_interval(2);
  auto dp1 = discontinuous_lagrange_interval(1);
  auto s0 = hdiv_wrap(tensor_product_element(p2, dp1));
  auto s1 = hdiv_wrap(tensor_product_element(dp1, p2));
  auto rt = enriched_element({s0, s1});
  CHECK(rt->space_dimension() == 12);
  CHECK(rt->value_shape() == Shape{2});

  std::mt19937_64 rng(12);
  auto ps = PointSet::tensor({random_interval_points(2, rng), random_interval_points(3, rng)});
  auto all = tab(rt, 0, ps, {0, 0});
  auto first = tab(s0, 0, ps, {0, 0});
  auto second = tab(s1, 0, ps, {0, 0});
  std::vector<double> joined = first;
  joined.insert(joined.end(), second.begin(), second.end());
  CHECK(fkc::test::max_abs_diff(all, joined) == 0.0);

  auto single = enriched_element({s0});
  CHECK(tab(single, 0, ps, {0, 0}) == first);
  CHECK(fkc::test::error_kind([&] { enriched_element({s0, tensor_product_element(p2, p2)}); }) ==
        ErrorKind::ValueShapeMismatch);
}

TEST_CASE("element strings") {
  CHECK(parse_element("P2")->space_dimension() == 3);
  CHECK(parse_element("P2*dP1")->basis_shape() == Shape{3, 2});
  CHECK(parse_element("hdiv(P2*dP1)+hdiv(dP1*P2)")->space_dimension() == 12);
  CHECK(parse_element("V(TP2,2)")->value_shape() == Shape{2});
  CHECK(parse_element("TP2*P2")->space_dimension() == 18);
  CHECK(parse_element("GLL3")->describe() == "GLL3");
  CHECK(fkc::test::error_kind([] { parse_element("Q2"); }).has_value());
  CHECK(fkc::test::error_kind([] { parse_element("P2*"); }).has_value());
}

TEST_CASE("densified element matches the structured one") {
  auto e = tensor_product_element(lagrange_interval(2), lagrange_interval(2));
  auto g = gauss_legendre(3);
  auto ps = tensor_rule({g, g}).points;
  auto d = densify(e);
  for (const auto& key : derivative_keys(2, 1)) {
    auto x = tab(e, 1, ps, key), y = tab(d, 1, ps, key);
    CHECK(fkc::test::max_abs_diff(x, y) < 1e-14);
  }
}
