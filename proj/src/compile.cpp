#include "fkc/compile.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <json.hpp>

namespace fkc {

QuadratureChoice parse_quadrature(const std::string& s) {
  QuadratureChoice q;
  if (s.empty() || s == "default") return q;
  if (s == "collocated-gll") {
    q.kind = QuadratureChoice::Kind::CollocatedGLL;
    return q;
  }
  size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || n < 1)
    throw Error(ErrorKind::Usage, "quadrature must be 'collocated-gll' or a positive point count, got '" + s + "'");
  q.kind = QuadratureChoice::Kind::Points;
  q.points = n;
  return q;
}

CompileResult compile(const CompileRequest& r) {
  if (r.degree < 1) throw Error(ErrorKind::InvalidDegree, "degree must be at least 1");
  CompileResult out;
  const FormSpec& spec = find_form(r.form);
  try {
    out.cell = Cell::by_name(r.cell);
  } catch (const Error& e) {
    throw Error(ErrorKind::Usage, e.what());
  }
  if (!form_supports_cell(spec, out.cell))
    throw Error(ErrorKind::UnsupportedCell, spec.name + " is not defined on " + r.cell);
  ElementPtr e = form_element(spec, out.cell, r.degree, r.variant);
  QuadratureRule rule = make_quadrature(out.cell, r.degree, r.variant, r.quadrature);
  std::vector<ElementPtr> elements(static_cast<size_t>(spec.num_slots()), e);
  out.lowered = lower_form(spec, elements, rule, out.cell);
  out.optimised = run_pipeline(out.lowered, r.mode);
  out.program = schedule(out.optimised);
  out.c_text = emit_c(out.program);
  out.report = count_flops(out.program);
  return out;
}

std::string report_record(const CompileRequest& r, const FlopReport& f) {
  nlohmann::ordered_json j;
  j["form"] = r.form;
  j["cell"] = r.cell;
  j["degree"] = r.degree;
  j["mode"] = mode_name(r.mode);
  j["flops"] = f.total_flops;
  j["table_bytes"] = f.table_bytes;
  j["kernel_hash"] = f.kernel_hash;
  return j.dump();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorKind::Usage, "slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t k = 0; k < n; ++k) {
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

SweepResult sweep(CompileRequest base, int lo, int hi, bool time_kernels) {
  if (lo < 1 || hi < lo) throw Error(ErrorKind::Usage, "bad degree range");
  std::vector<std::future<SweepRow>> jobs;
  for (int n = lo; n <= hi; ++n) {
    CompileRequest r = base;
    r.degree = n;
    jobs.push_back(std::async(std::launch::async, [r, time_kernels] {
      CompileResult c = compile(r);
      SweepRow row;
      row.degree = r.degree;
      row.report = c.report;
      if (time_kernels) {
        const auto inputs = random_inputs(c.optimised, c.cell, 1);
        const auto t0 = std::chrono::steady_clock::now();
        run_kernel(c.program, inputs);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      return row;
    }));
  }
  SweepResult out;
  std::vector<double> xs, ys;
  for (auto& j : jobs) {
    out.rows.push_back(j.get());
    xs.push_back(out.rows.back().degree + 1.0);
    ys.push_back(static_cast<double>(out.rows.back().report.total_flops));
  }
  if (out.rows.size() >= 2) out.slope = loglog_slope(xs, ys);
  return out;
}

}  // namespace fkc
