#include <doctest.h>

#include <cmath>
#include <random>

#include "fkc/compile.hpp"
#include "fkc/form.hpp"
#include "fkc/quadrature.hpp"
#include "support.hpp"

using namespace fkc;
using fkc::test::max_abs_diff;
using fkc::test::rel_diff;

namespace {

// Polynomials on [0, 1] as coefficient vectors, integrated exactly.
using Poly = std::vector<double>;

Poly mul(const Poly& a, const Poly& b) {
  Poly r(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

double integral(const Poly& p) {
  double s = 0;
  for (size_t k = 0; k < p.size(); ++k) s += p[k] / static_cast<double>(k + 1);
  return s;
}

// 1D P1 mass and stiffness from exact integration of 1 - x and x.
void p1_matrices(std::vector<double>& M, std::vector<double>& K) {
  const Poly phi[2] = {{1, -1}, {0, 1}};
  const Poly dphi[2] = {{-1}, {1}};
  M.assign(4, 0);
  K.assign(4, 0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      M[static_cast<size_t>(2 * i + j)] = integral(mul(phi[i], phi[j]));
      K[static_cast<size_t>(2 * i + j)] = integral(mul(dphi[i], dphi[j]));
    }
}

Kernel lowered(const std::string& form, const std::string& cell_name, int n,
               ElementVariant v = ElementVariant::Equispaced) {
  const auto& spec = find_form(form);
  auto cell = Cell::by_name(cell_name);
  auto e = form_element(spec, cell, n, v);
  auto rule = make_quadrature(cell, n, v, {});
  return lower_form(spec, std::vector<ElementPtr>(static_cast<size_t>(spec.num_slots()), e), rule, cell);
}

std::vector<double> unit_square_matrix(const std::string& form) {
  auto cell = Cell::by_name("quad");
  KernelInputs in;
  in["coords"] = reference_coordinates(cell);
  return eval_kernel(lowered(form, "quad", 1), in);
}

const char* const kCells[] = {"interval", "quad", "triangle", "hex", "prism"};

}  // namespace

TEST_CASE("one dimensional oracle matrices") {
  std::vector<double> M, K;
  p1_matrices(M, K);
  const std::vector<double> m = {1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3};
  CHECK(max_abs_diff(M, m) < 1e-16);
  CHECK(K == std::vector<double>{1, -1, -1, 1});
}

TEST_CASE("Q1 mass and stiffness on the unit square") {
  std::vector<double> M, K;
  p1_matrices(M, K);
  auto mm = fkc::test::kron(M, M, 2, 2);
  auto km = fkc::test::kron(K, M, 2, 2);
  auto mk = fkc::test::kron(M, K, 2, 2);
  std::vector<double> stiff(16);
  for (size_t k = 0; k < 16; ++k) stiff[k] = km[k] + mk[k];
  CHECK(max_abs_diff(unit_square_matrix("mass"), mm) < 1e-12);
  auto A = unit_square_matrix("laplace");
  CHECK(max_abs_diff(A, stiff) < 1e-12);
  CHECK(A[0] == doctest::Approx(2.0 / 3));
  CHECK(A[3] == doctest::Approx(-1.0 / 3));
  CHECK(A[1] == doctest::Approx(-1.0 / 6));
}

TEST_CASE("mass and laplace matrices are symmetric, laplace rows sum to zero") {
  for (const char* c : kCells)
    for (int n = 1; n <= 2; ++n)
      for (const char* form : {"mass", "laplace"}) {
        CAPTURE(c);
        CAPTURE(n);
        CAPTURE(form);
        auto k = lowered(form, c, n);
        auto A = eval_kernel(k, random_inputs(k, Cell::by_name(c), 3));
        const auto N = static_cast<size_t>(k.return_shape[0]);
        const double scale = fkc::test::max_abs(A);
        for (size_t i = 0; i < N; ++i) {
          double row = 0;
          for (size_t j = 0; j < N; ++j) {
            CHECK(std::fabs(A[i * N + j] - A[j * N + i]) <= 1e-12 * scale);
            row += A[i * N + j];
          }
          if (std::string(form) == "laplace") CHECK(std::fabs(row) <= 1e-10 * scale);
        }
      }
}

TEST_CASE("action kernels agree with matrix times vector") {
  for (const char* c : kCells)
    for (int n = 1; n <= 3; ++n)
      for (const char* form : {"mass", "laplace", "curl_curl"}) {
        auto cell = Cell::by_name(c);
        if (!form_supports_cell(find_form(form), cell)) continue;
        if (n == 3 && (std::string(c) == "hex" || std::string(c) == "prism")) continue;
        CAPTURE(c);
        CAPTURE(n);
        CAPTURE(form);
        auto A = lowered(form, c, n);
        auto act = lowered(std::string(form) + "_action", c, n);
        auto in = random_inputs(act, cell, 17);
        auto matrix = eval_kernel(A, in);
        auto y = eval_kernel(act, in);
        const auto& u = in.at(act.args[1].name);
        const auto N = static_cast<size_t>(A.return_shape[0]);
        std::vector<double> Au(N, 0.0);
        for (size_t i = 0; i < N; ++i)
          for (size_t j = 0; j < N; ++j) Au[i] += matrix[i * N + j] * u[j];
        CHECK(rel_diff(y, Au) <= 1e-10);

        // basis vectors pick out matrix columns, zero dofs give zero
        if (n == 1) {
          for (size_t j = 0; j < N; ++j) {
            auto e_in = in;
            e_in[act.args[1].name].assign(N, 0.0);
            e_in[act.args[1].name][j] = 1.0;
            auto col = eval_kernel(act, e_in);
            for (size_t i = 0; i < N; ++i) CHECK(std::fabs(col[i] - matrix[i * N + j]) <= 1e-12);
          }
          auto z = in;
          z[act.args[1].name].assign(N, 0.0);
          CHECK(fkc::test::max_abs(eval_kernel(act, z)) == 0.0);
        }
      }
}

namespace {

std::vector<double> coefficient_values(const ElementPtr& e, std::vector<double> dofs, const PointSetPtr& ps) {
  Environment env;
  const auto n = static_cast<int64_t>(dofs.size());
  env.bind("U", std::move(dofs));
  return eval_expr(evaluate_coefficient(e, variable("U", {n}), ps, 0), env).data;
}

}  // namespace

TEST_CASE("coefficient evaluation") {
  auto rule = gauss_legendre(3);
  auto p1 = lagrange_interval(1);
  auto vx = coefficient_values(p1, {0, 1}, rule.points);
  for (size_t q = 0; q < 3; ++q) CHECK(vx[q] == doctest::Approx(rule.points->coordinates_1d()[q]).epsilon(1e-15));

  auto q2 = tensor_product_element(lagrange_interval(2), lagrange_interval(2));
  auto ps = tensor_rule({gauss_legendre(3), gauss_legendre(4)}).points;
  for (double v : coefficient_values(q2, std::vector<double>(9, 2.5), ps)) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));

  // random dofs against a direct basis sum; P2 nodes 0, 1/2, 1
  auto L = [](int i, double t) {
    const double n[3] = {0, 0.5, 1};
    double r = 1;
    for (int k = 0; k < 3; ++k)
      if (k != i) r *= (t - n[k]) / (n[i] - n[k]);
    return r;
  };
  std::mt19937_64 rng(31);
  auto U = fkc::test::random_values(9, rng);
  auto vals = coefficient_values(q2, U, ps);
  auto pts = ps->points();
  for (size_t q = 0; q < pts.size(); ++q) {
    double s = 0;
    for (int i1 = 0; i1 < 3; ++i1)
      for (int i2 = 0; i2 < 3; ++i2) s += U[static_cast<size_t>(3 * i1 + i2)] * L(i1, pts[q][0]) * L(i2, pts[q][1]);
    CHECK(std::fabs(vals[q] - s) < 1e-12);
  }
  CHECK(fkc::test::error_kind([&] { evaluate_coefficient(q2, variable("U", {2}), ps, 0); }) ==
        ErrorKind::ExtentMismatch);
}

TEST_CASE("lowering checks") {
  const auto& mass = find_form("mass");
  auto cell = Cell::by_name("quad");
  auto e = form_element(mass, cell, 1, ElementVariant::Equispaced);
  auto rule = make_quadrature(cell, 1, ElementVariant::Equispaced, {});
  CHECK(fkc::test::error_kind([&] { lower_form(mass, {e}, rule, cell); }) == ErrorKind::ArityMismatch);
  CHECK(fkc::test::error_kind([&] { action_form(find_form("rhs_source")); }) == ErrorKind::ArityMismatch);
  CHECK_FALSE(form_supports_cell(find_form("curl_curl"), Cell::by_name("hex")));
  CHECK(fkc::test::error_kind([] {
          form_element(find_form("curl_curl"), Cell::by_name("hex"), 1, ElementVariant::Equispaced);
        }) == ErrorKind::UnsupportedCell);
  CHECK(fkc::test::error_kind([] { find_form("hyperelasticity"); }).has_value());
  CHECK(fkc::test::error_kind([] {
          make_quadrature(Cell::by_name("quad"), 2, ElementVariant::Equispaced,
                          {QuadratureChoice::Kind::CollocatedGLL, 0});
        }) == ErrorKind::Usage);
}

TEST_CASE("laplace integrand carries geometry") {
  auto k = lowered("laplace", "hex", 2);
  REQUIRE(k.assignments.size() == 1);
  CHECK(k.rank == 2);
  CHECK(k.return_shape == Shape{27, 27});
  bool abs_seen = false, division_seen = false;
  for (const auto& e : post_order({k.assignments[0].expr})) {
    abs_seen = abs_seen || (e->op == Op::MathFunction && e->name == "abs");
    division_seen = division_seen || e->op == Op::Division;
  }
  CHECK(abs_seen);
  CHECK(division_seen);
  CHECK(k.assignments[0].arguments.size() == 2);
}

TEST_CASE("rank equals the number of argument multi-indices") {
  for (const auto& spec : form_registry()) {
    auto k = lowered(spec.name, "quad", 1);
    for (const auto& a : k.assignments) CHECK(static_cast<int>(a.arguments.size()) == spec.rank);
  }
}

TEST_CASE("collocated mass reduces to a diagonal") {
  for (int n = 1; n <= 3; ++n) {
    CompileRequest r;
    r.form = "mass";
    r.cell = "quad";
    r.degree = n;
    r.variant = ElementVariant::SpectralGL;
    auto c = compile(r);
    for (const auto& a : c.optimised.assignments) CHECK(a.view.indices().size() == 2);
    auto in = random_inputs(c.lowered, c.cell, 1);
    auto A = run_kernel(c.program, in).output;
    auto ref = eval_kernel(c.lowered, in);
    CHECK(rel_diff(A, ref) < 1e-12);
    const auto N = static_cast<size_t>((n + 1) * (n + 1));
    for (size_t i = 0; i < N; ++i)
      for (size_t j = 0; j < N; ++j)
        if (i != j) CHECK(A[i * N + j] == 0.0);
  }
}

TEST_CASE("triangle vector mass integrand has the expected structure") {
  auto k = lowered("vector_mass", "triangle", 2);
  CHECK(k.return_shape == Shape{12, 12});
  int deltas = 0;
  for (const auto& e : post_order({k.assignments[0].expr}))
    if (e->op == Op::Delta) ++deltas;
  CHECK(deltas >= 2);
}
