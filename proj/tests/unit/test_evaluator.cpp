#include <doctest.h>

#include "fkc/codegen.hpp"
#include "fkc/compile.hpp"
#include "fkc/evaluator.hpp"
#include "support.hpp"

using namespace fkc;

TEST_CASE("identity evaluation") {
  auto i = Index::fresh(3), j = Index::fresh(3);
  auto t = eval_expr(indexed(identity(3), {i, j}), {});
  CHECK(t.free.size() == 2);
  CHECK(t.data == std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
}

TEST_CASE("output axes follow token order") {
  auto a = Index::fresh(2), b = Index::fresh(3);
  auto L = literal({0, 1, 2, 3, 4, 5}, {3, 2});
  // indexed as L[b, a]: axes come out (a, b)
  auto t = eval_expr(indexed(L, {b, a}), {});
  REQUIRE(t.free.size() == 2);
  CHECK(t.free[0] == a);
  CHECK(t.extents() == std::vector<int64_t>{2, 3});
  CHECK(t.data == std::vector<double>{0, 2, 4, 1, 3, 5});
}

TEST_CASE("evaluation errors") {
  CHECK(fkc::test::error_kind([] { eval_expr(variable("missing", {2}), {}); }) == ErrorKind::UnboundVariable);
  Environment env;
  env.bind("short", {1.0});
  CHECK(fkc::test::error_kind([&] { eval_expr(variable("short", {2}), env); }).has_value());

  CompileRequest r;
  r.form = "mass";
  auto c = compile(r);
  CHECK(fkc::test::error_kind([&] { run_kernel(c.program, {}); }) == ErrorKind::UnboundVariable);
  CHECK(fkc::test::error_kind([&] { run_kernel(c.program, {{"coords", {0, 1}}}); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("Q1 mass through the scheduled program") {
  CompileRequest r;
  r.form = "mass";
  r.cell = "quad";
  auto c = compile(r);
  const std::vector<double> M = {1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3};
  auto out = run_kernel(c.program, {{"coords", reference_coordinates(c.cell)}}).output;
  CHECK(fkc::test::max_abs_diff(out, fkc::test::kron(M, M, 2, 2)) < 1e-12);
}

TEST_CASE("zero coefficient gives zero action") {
  for (const char* form : {"mass_action", "laplace_action"}) {
    CompileRequest r;
    r.form = form;
    r.cell = "hex";
    r.degree = 2;
    auto c = compile(r);
    auto in = random_inputs(c.lowered, c.cell, 3);
    for (auto& [name, v] : in)
      if (name != "coords") std::fill(v.begin(), v.end(), 0.0);
    CHECK(fkc::test::max_abs(run_kernel(c.program, in).output) == 0.0);
  }
}

TEST_CASE("lowered expression and scheduled program agree") {
  for (const char* form : {"mass", "laplace", "weighted_mass", "vector_mass", "stokes_momentum", "rhs_source"})
    for (const char* cell : {"interval", "quad", "triangle", "hex", "prism"})
      for (int n = 1; n <= 2; ++n)
        for (Mode m : {Mode::Vanilla, Mode::Spectral}) {
          CAPTURE(form);
          CAPTURE(cell);
          CompileRequest r;
          r.form = form;
          r.cell = cell;
          r.degree = n;
          r.mode = m;
          auto c = compile(r);
          auto in = random_inputs(c.lowered, c.cell, 19);
          auto run = run_kernel(c.program, in, true);
          CHECK(fkc::test::rel_diff(run.output, eval_kernel(c.lowered, in)) < 1e-12);
          CHECK(run.flops == c.report.total_flops);
        }
}

TEST_CASE("evaluation is deterministic") {
  CompileRequest r;
  r.form = "laplace";
  r.cell = "prism";
  r.degree = 2;
  auto c = compile(r);
  auto in = random_inputs(c.lowered, c.cell, 8);
  CHECK(run_kernel(c.program, in).output == run_kernel(c.program, in).output);
  CHECK(eval_kernel(c.lowered, in) == eval_kernel(c.lowered, in));
}
