#include <cmath>

#include "fkc/codegen.hpp"
#include "fkc/evaluator.hpp"

namespace fkc {

namespace {

class Interpreter {
 public:
  Interpreter(const LoopProgram& p, const KernelInputs& inputs, bool count) : p_(p), count_(count) {
    for (const auto& a : p.args) {
      auto it = inputs.find(a.name);
      if (it == inputs.end()) throw Error(ErrorKind::UnboundVariable, "missing input " + a.name);
      if (static_cast<int64_t>(it->second.size()) != a.size)
        throw Error(ErrorKind::ShapeMismatch, "input " + a.name + " has " + std::to_string(it->second.size()) +
                                                  " entries, expected " + std::to_string(a.size));
      args_.push_back(&it->second);
    }
    for (const auto& t : p.temps) temps_.emplace_back(static_cast<size_t>(t.size), 0.0);
    locals_.assign(static_cast<size_t>(p.num_locals), 0.0);
    vars_.assign(p.indices.size(), 0);
    out_.output.assign(static_cast<size_t>(p.output_size), 0.0);
  }

  RunResult run() {
    for (const auto& n : p_.nests) run_nest(n, 0);
    return std::move(out_);
  }

 private:
  int64_t at(const Affine& a) const {
    int64_t v = a.offset;
    for (const auto& [id, s] : a.terms) v += s * vars_[static_cast<size_t>(id)];
    return v;
  }

  static double checked(const std::vector<double>& buf, int64_t k) {
    if (k < 0 || k >= static_cast<int64_t>(buf.size())) throw Error(ErrorKind::IndexOutOfRange, "buffer access");
    return buf[static_cast<size_t>(k)];
  }

  double operand(const Operand& o) const {
    switch (o.kind) {
      case Operand::Kind::Const: return o.value;
      case Operand::Kind::Local: return locals_[static_cast<size_t>(o.id)];
      case Operand::Kind::Temp: return checked(temps_[static_cast<size_t>(o.id)], at(o.at));
      case Operand::Kind::Table: return checked(p_.tables[static_cast<size_t>(o.id)].values, at(o.at));
      case Operand::Kind::Arg: return checked(*args_[static_cast<size_t>(o.id)], at(o.at));
      case Operand::Kind::Delta: return at(o.at) == at(o.rhs) ? 1.0 : 0.0;
    }
    return 0.0;
  }

  static double apply_fn(const std::string& fn, double x) {
    if (fn == "abs") return std::fabs(x);
    if (fn == "sqrt") return std::sqrt(x);
    if (fn == "exp") return std::exp(x);
    if (fn == "log") return std::log(x);
    if (fn == "sin") return std::sin(x);
    if (fn == "cos") return std::cos(x);
    if (fn == "tan") return std::tan(x);
    if (fn == "erf") return std::erf(x);
    throw Error(ErrorKind::UnsupportedFunction, fn);
  }

  static double compare(const std::string& op, double a, double b) {
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    throw Error(ErrorKind::IllFormed, "comparison " + op);
  }

  double value(const Statement& s) const {
    auto a = [&](size_t k) { return operand(s.args[k]); };
    switch (s.op) {
      case StmtOp::Copy: return a(0);
      case StmtOp::Add: return a(0) + a(1);
      case StmtOp::Mul: return a(0) * a(1);
      case StmtOp::Div: return a(0) / a(1);
      case StmtOp::Pow: return std::pow(a(0), a(1));
      case StmtOp::Min: return std::fmin(a(0), a(1));
      case StmtOp::Max: return std::fmax(a(0), a(1));
      case StmtOp::Fn: return apply_fn(s.fn, a(0));
      case StmtOp::Cmp: return compare(s.fn, a(0), a(1));
      case StmtOp::And: return a(0) != 0.0 && a(1) != 0.0;
      case StmtOp::Or: return a(0) != 0.0 || a(1) != 0.0;
      case StmtOp::Not: return a(0) == 0.0;
      case StmtOp::Select: return a(0) != 0.0 ? a(1) : a(2);
    }
    return 0.0;
  }

  void store(std::vector<double>& buf, int64_t k, double v, bool acc) {
    if (k < 0 || k >= static_cast<int64_t>(buf.size())) throw Error(ErrorKind::IndexOutOfRange, "buffer store");
    auto& slot = buf[static_cast<size_t>(k)];
    slot = acc ? slot + v : v;
  }

  void exec(const Statement& s) {
    const double v = value(s);
    if (count_) out_.flops += s.flops();
    switch (s.target) {
      case Statement::Target::Local: locals_[static_cast<size_t>(s.id)] = v; break;
      case Statement::Target::Temp: store(temps_[static_cast<size_t>(s.id)], at(s.at), v, s.accumulate); break;
      case Statement::Target::Output: store(out_.output, at(s.at), v, s.accumulate); break;
    }
  }

  void run_nest(const Nest& n, size_t depth) {
    if (depth == n.loops.size()) {
      for (const auto& s : n.body) exec(s);
      return;
    }
    const auto id = static_cast<size_t>(n.loops[depth]);
    const int64_t ext = p_.indices[id].extent;
    for (int64_t v = 0; v < ext; ++v) {
      vars_[id] = v;
      run_nest(n, depth + 1);
    }
  }

  const LoopProgram& p_;
  bool count_;
  std::vector<const std::vector<double>*> args_;
  std::vector<std::vector<double>> temps_;
  std::vector<double> locals_;
  std::vector<int64_t> vars_;
  RunResult out_;
};

}  // namespace

RunResult run_kernel(const LoopProgram& p, const KernelInputs& inputs, bool count) {
  return Interpreter(p, inputs, count).run();
}

}  // namespace fkc
