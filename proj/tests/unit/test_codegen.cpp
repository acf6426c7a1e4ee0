#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "fkc/codegen.hpp"
#include "fkc/compile.hpp"
#include "support.hpp"

using namespace fkc;

namespace {

CompileResult compiled(const std::string& form, const std::string& cell, int n, Mode mode = Mode::Spectral) {
  CompileRequest r;
  r.form = form;
  r.cell = cell;
  r.degree = n;
  r.mode = mode;
  return compile(r);
}

struct Case {
  const char* form;
  const char* cell;
  int degree;
  Mode mode;
};

const Case kCorpus[] = {
    {"mass", "quad", 2, Mode::Spectral},         {"laplace", "hex", 2, Mode::Spectral},
    {"laplace", "triangle", 3, Mode::Coffee},    {"vector_mass", "triangle", 2, Mode::Spectral},
    {"stokes_momentum", "quad", 2, Mode::Vanilla}, {"curl_curl", "quad", 2, Mode::Spectral},
    {"rhs_source", "prism", 2, Mode::Spectral},  {"laplace_action", "hex", 3, Mode::Spectral},
    {"weighted_laplace", "interval", 3, Mode::Coffee}, {"curl_curl_action", "triangle", 2, Mode::Vanilla},
};

Operand local(int id) {
  Operand o;
  o.kind = Operand::Kind::Local;
  o.id = id;
  return o;
}

Operand arg(int id, Affine at) {
  Operand o;
  o.kind = Operand::Kind::Arg;
  o.id = id;
  o.at = std::move(at);
  return o;
}

}  // namespace

TEST_CASE("a = b * c + d over ten iterations is twenty flops") {
  LoopProgram p;
  p.output_size = 10;
  p.args = {{"coords", 1}, {"b", 10}, {"c", 10}, {"d", 10}};
  p.indices = {{"i0", 10, IndexRole::Argument}};
  p.num_locals = 2;
  const Affine at{0, {{0, 1}}};
  Statement mul;
  mul.target = Statement::Target::Local;
  mul.id = 0;
  mul.op = StmtOp::Mul;
  mul.args = {arg(1, at), arg(2, at)};
  Statement add = mul;
  add.id = 1;
  add.op = StmtOp::Add;
  add.args = {local(0), arg(3, at)};
  p.nests = {Nest{{0}, {mul, add}}};
  CHECK(count_flops(p).total_flops == 20);
  CHECK(count_flops(p).per_depth.at(1) == 20);

  KernelInputs in = {{"coords", {0}}, {"b", std::vector<double>(10, 2)}, {"c", std::vector<double>(10, 3)},
                     {"d", std::vector<double>(10, 1)}};
  CHECK(run_kernel(p, in, true).flops == 20);
}

TEST_CASE("scalar constant assignment is loop free") {
  Kernel k;
  k.name = "constant";
  k.return_shape = {};
  k.args = {{"coords", 1}};
  Assignment a;
  a.expr = scalar(3.5);
  k.assignments = {a};
  auto p = schedule(k);
  REQUIRE(p.nests.size() >= 1);
  bool stored = false;
  for (const auto& n : p.nests)
    for (const auto& s : n.body)
      if (s.target == Statement::Target::Output) {
        CHECK(n.loops.empty());
        stored = true;
      }
  CHECK(stored);
  CHECK(run_kernel(p, {{"coords", {0}}}).output == std::vector<double>{3.5});
}

TEST_CASE("sum factorised product is split over two nests") {
  auto q1 = Index::fresh(4, IndexRole::Quadrature), q2 = Index::fresh(5, IndexRole::Quadrature);
  auto i1 = Index::fresh(3, IndexRole::Argument), i2 = Index::fresh(3, IndexRole::Argument);
  auto j1 = Index::fresh(3, IndexRole::Argument), j2 = Index::fresh(3, IndexRole::Argument);
  auto psi = variable("psi", {3, 5}), dpsi = variable("dpsi", {3, 4}), P = variable("P", {4, 5});
  auto r = make_tensor_product_ordered(
      {indexed(psi, {i2, q2}), indexed(psi, {j2, q2}), indexed(dpsi, {i1, q1}), indexed(dpsi, {j1, q1}),
       indexed(P, {q1, q2})},
      {q1, q2});
  Kernel k;
  k.name = "opt2";
  k.rank = 2;
  k.return_shape = {9, 9};
  k.args = {{"coords", 1}, {"psi", 15}, {"dpsi", 12}, {"P", 20}};
  Assignment a;
  a.view = View{0, {{i1, 27}, {i2, 9}, {j1, 3}, {j2, 1}}};
  a.expr = r.expr;
  a.arguments = {{i1, i2}, {j1, j2}};
  k.assignments = {a};
  auto p = schedule(k);
  auto roles = [&](const Nest& n) {
    std::pair<int, int> c{0, 0};
    for (int l : n.loops) {
      auto role = p.indices[static_cast<size_t>(l)].role;
      c.first += role == IndexRole::Argument;
      c.second += role == IndexRole::Quadrature;
    }
    return c;
  };
  bool inner = false, outer = false;
  for (const auto& n : p.nests) {
    auto [args, quads] = roles(n);
    inner = inner || (args == 2 && quads == 2);
    outer = outer || (args == 4 && quads == 1);
    CHECK(args + quads <= 5);
  }
  CHECK(inner);
  CHECK(outer);

  std::mt19937_64 rng(6);
  KernelInputs in = {{"coords", {0}},
                     {"psi", fkc::test::random_values(15, rng)},
                     {"dpsi", fkc::test::random_values(12, rng)},
                     {"P", fkc::test::random_values(20, rng)}};
  CHECK(fkc::test::rel_diff(run_kernel(p, in).output, eval_kernel(k, in)) < 1e-13);
}

TEST_CASE("scheduling and emission are deterministic") {
  for (const auto& c : kCorpus) {
    CAPTURE(c.form);
    auto a = compiled(c.form, c.cell, c.degree, c.mode);
    auto b = compiled(c.form, c.cell, c.degree, c.mode);
    CHECK(a.program == b.program);
    CHECK(a.c_text == b.c_text);
    CHECK(a.report.kernel_hash == b.report.kernel_hash);
    CHECK(emit_c(a.program) == a.c_text);
    CHECK(a.report.kernel_hash == fnv1a_hex(a.c_text));
  }
  CHECK(compiled("laplace", "quad", 2).report.kernel_hash != compiled("laplace", "quad", 3).report.kernel_hash);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("serialization round trip") {
  for (const auto& c : kCorpus) {
    CAPTURE(c.form);
    auto p = compiled(c.form, c.cell, c.degree, c.mode).program;
    const auto text = serialize_program(p);
    CHECK(text == serialize_program(p));
    auto back = parse_program(text);
    CHECK(back == p);
    CHECK(serialize_program(back) == text);
  }
  const auto stub = serialize_program(LoopProgram{});
  CHECK(stub == serialize_program(LoopProgram{}));
  CHECK(parse_program(stub) == LoopProgram{});
  CHECK(fkc::test::error_kind([] { parse_program("{not json"); }) == ErrorKind::IllFormed);
}

TEST_CASE("unsupported math functions are rejected at emission") {
  Kernel k;
  k.name = "gamma";
  k.rank = 1;
  k.return_shape = {3};
  k.args = {{"coords", 3}};
  auto i = Index::fresh(3, IndexRole::Argument);
  Assignment a;
  a.view = View{0, {{i, 1}}};
  a.expr = math_function("tgamma", indexed(variable("coords", {3}), {i}));
  a.arguments = {{i}};
  k.assignments = {a};
  auto p = schedule(k);
  CHECK(fkc::test::error_kind([&] { emit_c(p); }) == ErrorKind::UnsupportedFunction);

  a.expr = math_function("sqrt", indexed(variable("coords", {3}), {i}));
  k.assignments = {a};
  auto text = emit_c(schedule(k));
  CHECK(text.find("sqrt(") != std::string::npos);
}

TEST_CASE("counted flops match the instrumented interpreter") {
  for (const auto& c : kCorpus) {
    CAPTURE(c.form);
    CAPTURE(c.cell);
    auto r = compiled(c.form, c.cell, c.degree, c.mode);
    auto in = random_inputs(r.lowered, r.cell, 13);
    auto run = run_kernel(r.program, in, true);
    CHECK(run.flops == r.report.total_flops);
    CHECK(fkc::test::rel_diff(run.output, eval_kernel(r.lowered, in)) < 1e-10);
    int64_t by_depth = 0;
    for (const auto& [d, f] : r.report.per_depth) by_depth += f;
    CHECK(by_depth == r.report.total_flops);
  }
}

TEST_CASE("vanilla costs more than spectral on hex laplace") {
  CHECK(compiled("laplace", "hex", 2, Mode::Vanilla).report.total_flops >
        compiled("laplace", "hex", 2, Mode::Spectral).report.total_flops);
}

TEST_CASE("table storage stays factor sized") {
  CompileRequest r;
  r.form = "laplace";
  r.cell = "quad";
  r.degree = 8;
  auto structured = compile(r);
  r.variant = ElementVariant::Dense;
  auto dense = compile(r);
  CHECK(structured.report.table_bytes * 5 <= dense.report.table_bytes);
  CHECK(structured.report.table_bytes == [&] {
    int64_t b = 0;
    for (const auto& t : structured.program.tables) b += 8 * static_cast<int64_t>(t.values.size());
    return b;
  }());
}

TEST_CASE("emitted kernel clears the output first") {
  auto r = compiled("mass", "quad", 1);
  const auto& c = r.c_text;
  CHECK(c.find("#include <math.h>") != std::string::npos);
  CHECK(c.find("void kernel(double *restrict A") != std::string::npos);
  const auto clear = c.find("A[");
  const auto acc = c.find("+=");
  REQUIRE(clear != std::string::npos);
  REQUIRE(acc != std::string::npos);
  CHECK(clear < acc);
}

TEST_CASE("emitted C compiles cleanly when a compiler is available") {
  if (std::system("cc --version > /dev/null 2>&1") != 0) return;
  const auto dir = std::filesystem::temp_directory_path() / "fkc_c99_check";
  std::filesystem::create_directories(dir);
  for (const auto& c : {Case{"mass", "quad", 1, Mode::Spectral}, Case{"laplace", "hex", 2, Mode::Spectral},
                        Case{"curl_curl", "quad", 2, Mode::Vanilla}, Case{"laplace_action", "prism", 2, Mode::Coffee}}) {
    CAPTURE(c.form);
    const auto src = dir / (std::string(c.form) + "_" + c.cell + ".c");
    {
      std::ofstream f(src);
      f << compiled(c.form, c.cell, c.degree, c.mode).c_text;
    }
    const std::string cmd = "cc -std=c99 -pedantic -Wall -Wextra -Werror -c -o /dev/null " + src.string();
    CHECK(std::system(cmd.c_str()) == 0);
  }
}
