#pragma once

#include <string>
#include <vector>

#include "fkc/codegen.hpp"
#include "fkc/form.hpp"
#include "fkc/passes.hpp"

namespace fkc {

struct CompileRequest {
  std::string form = "laplace";
  std::string cell = "quad";
  int degree = 1;
  Mode mode = Mode::Spectral;
  ElementVariant variant = ElementVariant::Equispaced;
  QuadratureChoice quadrature;
};

// "collocated-gll" or a positive point count per direction.
QuadratureChoice parse_quadrature(const std::string& s);

struct CompileResult {
  Cell cell;
  Kernel lowered;    // straight from the form
  Kernel optimised;  // after the pass pipeline
  LoopProgram program;
  std::string c_text;
  FlopReport report;
};

// Validates the request (Usage / UnsupportedCell / InvalidDegree errors) and
// runs lowering, passes and scheduling.
CompileResult compile(const CompileRequest& r);

// Single-line report record.
std::string report_record(const CompileRequest& r, const FlopReport& f);

struct SweepRow {
  int degree = 0;
  FlopReport report;
  double seconds = 0.0;  // interpreter run time, informational
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending degree
  double slope = 0.0;
};

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Compiles every degree in [lo, hi] concurrently; slope is fitted against n+1.
SweepResult sweep(CompileRequest base, int lo, int hi, bool time_kernels = false);

}  // namespace fkc
