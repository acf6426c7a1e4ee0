// fkc: compile registry forms to cell kernels and run flop sweeps.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fkc/compile.hpp"

namespace {

struct Options {
  std::string form = "laplace";
  std::string cell = "quad";
  int degree = 1;
  std::string mode = "spectral";
  std::string variant = "equispaced";
  std::string quadrature = "default";
  std::string emit;
  bool report = false;
  std::string out;
  int from = 2;
  int to = 6;
  bool time = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--form", o.form, "registry form name")->capture_default_str();
  cmd->add_option("--cell", o.cell, "interval, quad, hex, triangle or prism")->capture_default_str();
  cmd->add_option("--mode", o.mode, "spectral, coffee or vanilla")->capture_default_str();
  cmd->add_option("--variant", o.variant, "equispaced, spectral_gll, spectral_gl or dense")->capture_default_str();
  cmd->add_option("--quadrature", o.quadrature, "points per direction or collocated-gll")->capture_default_str();
}

fkc::CompileRequest request(const Options& o) {
  fkc::CompileRequest r;
  r.form = o.form;
  r.cell = o.cell;
  r.degree = o.degree;
  r.mode = fkc::parse_mode(o.mode);
  r.variant = fkc::parse_variant(o.variant);
  r.quadrature = fkc::parse_quadrature(o.quadrature);
  return r;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw fkc::Error(fkc::ErrorKind::Usage, "cannot write " + p.string());
  f << text;
}

int cmd_compile(const Options& o) {
  const auto r = request(o);
  const auto c = fkc::compile(r);
  const bool want_c = o.emit == "c" || o.emit == "both";
  const bool want_program = o.emit == "program" || o.emit == "both";
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    const std::string stem = o.form + "_" + o.cell + "_" + std::to_string(o.degree) + "_" + o.mode;
    if (want_c) write_file(std::filesystem::path(o.out) / (stem + ".c"), c.c_text);
    if (want_program) write_file(std::filesystem::path(o.out) / (stem + ".json"), fkc::serialize_program(c.program));
  } else {
    if (want_c) std::cout << c.c_text;
    if (want_program) std::cout << fkc::serialize_program(c.program);
  }
  if (o.report || o.emit.empty()) std::cout << fkc::report_record(r, c.report) << "\n";
  return 0;
}

int cmd_sweep(const Options& o) {
  auto base = request(o);
  const auto s = fkc::sweep(base, o.from, o.to, o.time);
  for (const auto& row : s.rows) {
    base.degree = row.degree;
    std::cout << fkc::report_record(base, row.report) << "\n";
    if (o.time) std::fprintf(stderr, "degree %d: %.6f s\n", row.degree, row.seconds);
  }
  nlohmann::ordered_json j;
  j["form"] = o.form;
  j["cell"] = o.cell;
  j["mode"] = o.mode;
  j["from"] = o.from;
  j["to"] = o.to;
  j["slope"] = s.slope;
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite element kernel compiler"};
  app.require_subcommand(1);
  Options o;

  auto* compile = app.add_subcommand("compile", "compile one form to a kernel");
  add_common(compile, o);
  compile->add_option("--degree", o.degree, "polynomial degree")->capture_default_str();
  compile->add_option("--emit", o.emit, "c, program or both")->check(CLI::IsMember({"c", "program", "both"}));
  compile->add_flag("--report", o.report, "print the flop report record");
  compile->add_option("--out", o.out, "output directory for emitted files");

  auto* sweep = app.add_subcommand("sweep", "flop counts over a degree range with a log-log slope fit");
  add_common(sweep, o);
  sweep->add_option("--from", o.from, "lowest degree")->capture_default_str();
  sweep->add_option("--to", o.to, "highest degree")->capture_default_str();
  sweep->add_flag("--time", o.time, "time each kernel in the interpreter (stderr)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*compile) return cmd_compile(o);
    return cmd_sweep(o);
  } catch (const fkc::Error& e) {
    std::cerr << "fkc: " << e.what() << "\n";
    return fkc::is_usage_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "fkc: " << e.what() << "\n";
    return 3;
  }
}
