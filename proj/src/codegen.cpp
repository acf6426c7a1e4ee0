#include "fkc/codegen.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

namespace fkc {

int64_t Statement::flops() const {
  int64_t f = accumulate ? 1 : 0;
  switch (op) {
    case StmtOp::Add:
    case StmtOp::Mul:
    case StmtOp::Div:
    case StmtOp::Pow:
    case StmtOp::Min:
    case StmtOp::Max:
    case StmtOp::Fn:
    case StmtOp::Cmp:
      return f + 1;
    default:
      return f;
  }
}

namespace {

int role_rank(IndexRole r) {
  switch (r) {
    case IndexRole::Argument: return 0;
    case IndexRole::Coefficient: return 1;
    case IndexRole::Quadrature: return 2;
    case IndexRole::Value: return 3;
    case IndexRole::Generic: return 4;
  }
  return 5;
}

IndexList loop_order(IndexList s) {
  std::sort(s.begin(), s.end(), [](const Index& a, const Index& b) {
    if (role_rank(a.role) != role_rank(b.role)) return role_rank(a.role) < role_rank(b.role);
    return index_less(a, b);
  });
  return s;
}

bool same_space(const IndexList& a, const IndexList& b) {
  if (a.size() != b.size()) return false;
  for (size_t k = 0; k < a.size(); ++k)
    if (!(a[k] == b[k])) return false;
  return true;
}

bool is_compute(Op op) {
  switch (op) {
    case Op::Sum:
    case Op::Product:
    case Op::Division:
    case Op::Power:
    case Op::MinValue:
    case Op::MaxValue:
    case Op::MathFunction:
    case Op::Comparison:
    case Op::LogicalAnd:
    case Op::LogicalOr:
    case Op::LogicalNot:
    case Op::Conditional:
    case Op::IndexSum:
    case Op::ListTensor:
      return true;
    default:
      return false;
  }
}

[[noreturn]] void unlowered(const Expr& e) {
  throw Error(ErrorKind::UnloweredNode, std::string("cannot lower ") + op_name(e->op) + " node");
}

class Scheduler {
 public:
  explicit Scheduler(const Kernel& k) : k_(k) {}

  LoopProgram run() {
    prog_.name = k_.name;
    prog_.output_size = k_.return_size();
    for (const auto& a : k_.args) prog_.args.push_back({a.name, a.size});
    collect();
    place();
    decide_storage();
    emit();
    return std::move(prog_);
  }

 private:
  struct NodeRec {
    Expr e;
    bool compute = false;
    bool barrier = false;  // IndexSum / ListTensor: complete only after its nest
    IndexList space;       // iteration space (loop order)
    std::vector<int> deps;
    int nest = -1;
    bool local = false;
    int storage = -1;      // local or temp id, assigned at emission
    IndexList layout;      // temp axes (loop order)
  };
  struct OutputRec {
    size_t assignment;
    int root;
    IndexList space;
    int nest = -1;
  };
  struct NestRec {
    IndexList space;
    std::vector<int> items;  // >= 0 node id, < 0 output -(k+1)
  };

  int id_of(const Expr& e) const { return ptr_id_.at(e.get()); }

  void collect() {
    std::vector<Expr> roots;
    for (const auto& a : k_.assignments)
      if (!is_zero(a.expr)) roots.push_back(a.expr);
    for (const auto& n : post_order(roots)) {
      auto it = canon_.find(n);
      if (it != canon_.end()) {
        ptr_id_[n.get()] = it->second;
        continue;
      }
      int id = static_cast<int>(nodes_.size());
      canon_.emplace(n, id);
      ptr_id_[n.get()] = id;
      NodeRec r;
      r.e = n;
      r.compute = is_compute(n->op);
      r.barrier = n->op == Op::IndexSum || n->op == Op::ListTensor;
      if (r.compute) {
        r.space = loop_order(n->op == Op::IndexSum ? n->children[0]->free : n->free);
        for (const auto& c : n->children) {
          int cid = id_of(c);
          if (nodes_[static_cast<size_t>(cid)].compute) {
            r.deps.push_back(cid);
          } else if (c->op == Op::Indexed && c->children[0]->op == Op::ListTensor) {
            r.deps.push_back(id_of(c->children[0]));
          }
        }
      }
      nodes_.push_back(std::move(r));
    }
    for (size_t a = 0; a < k_.assignments.size(); ++a) {
      const auto& as = k_.assignments[a];
      if (is_zero(as.expr)) continue;
      OutputRec o;
      o.assignment = a;
      o.root = id_of(as.expr);
      o.space = loop_order(index_union(as.view.indices(), as.expr->free));
      outputs_.push_back(o);
    }
  }

  int lower_bound(const IndexList& space, const std::vector<int>& deps) const {
    int lb = 0;
    for (int d : deps) {
      const auto& r = nodes_[static_cast<size_t>(d)];
      int need = (!r.barrier && same_space(r.space, space)) ? r.nest : r.nest + 1;
      lb = std::max(lb, need);
    }
    return lb;
  }

  int place_item(const IndexList& space, const std::vector<int>& deps, int item) {
    int lb = lower_bound(space, deps);
    for (int n = static_cast<int>(nests_.size()) - 1; n >= lb; --n) {
      if (same_space(nests_[static_cast<size_t>(n)].space, space)) {
        nests_[static_cast<size_t>(n)].items.push_back(item);
        return n;
      }
    }
    nests_.push_back({space, {item}});
    return static_cast<int>(nests_.size()) - 1;
  }

  std::vector<int> root_deps(int root) const {
    const auto& r = nodes_[static_cast<size_t>(root)];
    if (r.compute) return {root};
    if (r.e->op == Op::Indexed && r.e->children[0]->op == Op::ListTensor) return {id_of(r.e->children[0])};
    return {};
  }

  void place() {
    for (size_t i = 0; i < nodes_.size(); ++i) {
      auto& r = nodes_[i];
      if (!r.compute) continue;
      r.nest = place_item(r.space, r.deps, static_cast<int>(i));
    }
    for (size_t o = 0; o < outputs_.size(); ++o)
      outputs_[o].nest = place_item(outputs_[o].space, root_deps(outputs_[o].root), -static_cast<int>(o) - 1);
  }

  void decide_storage() {
    std::vector<std::vector<int>> users(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i)
      for (int d : nodes_[i].deps) users[static_cast<size_t>(d)].push_back(nodes_[i].nest);
    for (const auto& o : outputs_)
      for (int d : root_deps(o.root)) users[static_cast<size_t>(d)].push_back(o.nest);
    for (size_t i = 0; i < nodes_.size(); ++i) {
      auto& r = nodes_[i];
      if (!r.compute) continue;
      r.local = !r.barrier && std::all_of(users[i].begin(), users[i].end(), [&](int n) { return n == r.nest; });
      if (!r.local) r.layout = loop_order(r.e->free);
    }
  }

  // ---- emission -------------------------------------------------------

  int index_id(const Index& i) {
    auto it = index_ids_.find(i.id);
    if (it != index_ids_.end()) return it->second;
    int id = static_cast<int>(prog_.indices.size());
    prog_.indices.push_back({index_role_letter(i.role) + std::to_string(id), i.extent, i.role});
    index_ids_.emplace(i.id, id);
    return id;
  }

  void add_term(Affine* a, const Index& i, int64_t stride) {
    if (i.is_fixed()) {
      a->offset += stride * i.value;
      return;
    }
    if (!i.is_free()) throw Error(ErrorKind::UnloweredNode, "runtime index in a cell kernel");
    int id = index_id(i);
    for (auto& t : a->terms)
      if (t.first == id) {
        t.second += stride;
        return;
      }
    a->terms.emplace_back(id, stride);
  }

  // Row-major address of `idx` into `shape`, plus `base`.
  Affine row_major(const IndexList& idx, const Shape& shape, Affine base = {}, int64_t scale = 1) {
    int64_t stride = scale;
    for (size_t k = idx.size(); k-- > 0;) {
      add_term(&base, idx[k], stride);
      stride *= shape[k];
    }
    return base;
  }

  Shape extents(const IndexList& l) const {
    Shape s;
    for (const auto& i : l) s.push_back(i.extent);
    return s;
  }

  int temp_id(NodeRec& r) {
    if (r.storage < 0) {
      r.storage = static_cast<int>(prog_.temps.size());
      int64_t size = extent_product(r.layout) * shape_size(r.e->shape);
      prog_.temps.push_back({"t" + std::to_string(r.storage), std::max<int64_t>(size, 1)});
    }
    return r.storage;
  }

  Affine temp_address(NodeRec& r, const IndexList& extra = {}) {
    const int64_t inner = shape_size(r.e->shape);
    Affine a = row_major(r.layout, extents(r.layout), {}, inner);
    if (!extra.empty()) a = row_major(extra, r.e->shape, a);
    return a;
  }

  int table_id(const Expr& lit) {
    const auto& v = *lit->values;
    auto it = std::find_if(prog_.tables.begin(), prog_.tables.end(), [&](const TableInfo& t) { return t.values == v; });
    if (it != prog_.tables.end()) return static_cast<int>(it - prog_.tables.begin());
    int id = static_cast<int>(prog_.tables.size());
    prog_.tables.push_back({"T" + std::to_string(id), v});
    return id;
  }

  int arg_id(const Expr& var) const {
    for (size_t a = 0; a < prog_.args.size(); ++a)
      if (prog_.args[a].name == var->name) return static_cast<int>(a);
    throw Error(ErrorKind::UnboundVariable, "kernel has no argument " + var->name);
  }

  Operand operand(const Expr& e) {
    auto& r = nodes_[static_cast<size_t>(id_of(e))];
    Operand o;
    if (r.compute) {
      if (e->op == Op::ListTensor) unlowered(e);
      if (r.local) {
        o.kind = Operand::Kind::Local;
        o.id = r.storage;
      } else {
        o.kind = Operand::Kind::Temp;
        o.id = temp_id(r);
        o.at = temp_address(r);
      }
      return o;
    }
    switch (e->op) {
      case Op::Literal:
        if (!e->shape.empty()) unlowered(e);
        o.value = (*e->values)[0];
        return o;
      case Op::Zero:
        if (!e->shape.empty()) unlowered(e);
        return o;
      case Op::Variable:
        if (!e->shape.empty()) unlowered(e);
        o.kind = Operand::Kind::Arg;
        o.id = arg_id(e);
        return o;
      case Op::Delta:
        o.kind = Operand::Kind::Delta;
        add_term(&o.at, e->indices[0], 1);
        add_term(&o.rhs, e->indices[1], 1);
        return o;
      case Op::FlexiblyIndexed: {
        o.kind = Operand::Kind::Arg;
        const Expr& var = e->children[0];
        o.id = arg_id(var);
        int64_t scale = 1;
        for (size_t d = e->flex.size(); d-- > 0;) {
          const auto& fd = e->flex[d];
          o.at.offset += fd.offset * scale;
          for (const auto& t : fd.terms) add_term(&o.at, t.index, t.stride * scale);
          scale *= var->shape[d];
        }
        return o;
      }
      case Op::Indexed: {
        const Expr& base = e->children[0];
        if (base->op == Op::Literal) {
          o.kind = Operand::Kind::Table;
          o.id = table_id(base);
          o.at = row_major(e->indices, base->shape);
          return o;
        }
        if (base->op == Op::Variable) {
          o.kind = Operand::Kind::Arg;
          o.id = arg_id(base);
          o.at = row_major(e->indices, base->shape);
          return o;
        }
        if (base->op == Op::ListTensor) {
          auto& lt = nodes_[static_cast<size_t>(id_of(base))];
          o.kind = Operand::Kind::Temp;
          o.id = temp_id(lt);
          o.at = temp_address(lt, e->indices);
          return o;
        }
        unlowered(e);
      }
      default:
        unlowered(e);
    }
  }

  void set_target(NodeRec& r, Statement* s) {
    if (r.local) {
      s->target = Statement::Target::Local;
      r.storage = prog_.num_locals++;
      s->id = r.storage;
    } else {
      s->target = Statement::Target::Temp;
      s->id = temp_id(r);
      s->at = temp_address(r);
    }
  }

  void emit_node(NodeRec& r, Nest* nest) {
    const Node& n = *r.e;
    if (n.op == Op::ListTensor) {
      const int tid = temp_id(r);
      Affine base = temp_address(r);
      for (size_t k = 0; k < n.children.size(); ++k) {
        if (is_zero(n.children[k])) continue;
        Statement s;
        s.target = Statement::Target::Temp;
        s.id = tid;
        s.at = base;
        s.at.offset += static_cast<int64_t>(k);
        s.op = StmtOp::Copy;
        s.args = {operand(n.children[k])};
        nest->body.push_back(std::move(s));
      }
      return;
    }
    Statement s;
    for (const auto& c : n.children) s.args.push_back(operand(c));
    switch (n.op) {
      case Op::Sum: s.op = StmtOp::Add; break;
      case Op::Product: s.op = StmtOp::Mul; break;
      case Op::Division: s.op = StmtOp::Div; break;
      case Op::Power: s.op = StmtOp::Pow; break;
      case Op::MinValue: s.op = StmtOp::Min; break;
      case Op::MaxValue: s.op = StmtOp::Max; break;
      case Op::MathFunction: s.op = StmtOp::Fn; s.fn = n.name; break;
      case Op::Comparison: s.op = StmtOp::Cmp; s.fn = n.name; break;
      case Op::LogicalAnd: s.op = StmtOp::And; break;
      case Op::LogicalOr: s.op = StmtOp::Or; break;
      case Op::LogicalNot: s.op = StmtOp::Not; break;
      case Op::Conditional: s.op = StmtOp::Select; break;
      case Op::IndexSum: s.op = StmtOp::Copy; s.accumulate = true; break;
      default: unlowered(r.e);
    }
    set_target(r, &s);
    nest->body.push_back(std::move(s));
  }

  void emit_output(const OutputRec& o, Nest* nest) {
    const auto& a = k_.assignments[o.assignment];
    Statement s;
    s.target = Statement::Target::Output;
    s.accumulate = true;
    s.op = StmtOp::Copy;
    s.at.offset = a.view.offset;
    for (const auto& t : a.view.terms) add_term(&s.at, t.index, t.stride);
    s.args = {operand(a.expr)};
    nest->body.push_back(std::move(s));
  }

  void emit() {
    for (auto& nr : nests_) {
      Nest nest;
      for (const auto& i : nr.space) nest.loops.push_back(index_id(i));
      for (int item : nr.items) {
        if (item >= 0)
          emit_node(nodes_[static_cast<size_t>(item)], &nest);
        else
          emit_output(outputs_[static_cast<size_t>(-item - 1)], &nest);
      }
      if (!nest.body.empty()) prog_.nests.push_back(std::move(nest));
    }
  }

  const Kernel& k_;
  LoopProgram prog_;
  ExprMap<int> canon_;
  std::unordered_map<const Node*, int> ptr_id_;
  std::vector<NodeRec> nodes_;
  std::vector<OutputRec> outputs_;
  std::vector<NestRec> nests_;
  std::unordered_map<uint64_t, int> index_ids_;
};

}  // namespace

LoopProgram schedule(const Kernel& k) { return Scheduler(k).run(); }

//------------------------------------------------------------------------------
// Flops

namespace {

int64_t iterations(const LoopProgram& p, const Nest& n) {
  int64_t c = 1;
  for (int l : n.loops) c *= p.indices[static_cast<size_t>(l)].extent;
  return c;
}

}  // namespace

FlopReport count_flops(const LoopProgram& p) {
  FlopReport r;
  for (const auto& n : p.nests) {
    int64_t per = 0;
    for (const auto& s : n.body) per += s.flops();
    const int64_t f = per * iterations(p, n);
    r.total_flops += f;
    r.per_depth[static_cast<int>(n.loops.size())] += f;
  }
  for (const auto& t : p.tables) r.table_bytes += static_cast<int64_t>(t.values.size() * sizeof(double));
  r.kernel_hash = fnv1a_hex(emit_c(p));
  return r;
}

int64_t output_accumulate_flops(const LoopProgram& p) {
  int64_t total = 0;
  for (const auto& n : p.nests)
    for (const auto& s : n.body)
      if (s.target == Statement::Target::Output) total += s.flops() * iterations(p, n);
  return total;
}

std::string fnv1a_hex(const std::string& text) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

//------------------------------------------------------------------------------
// C emission

namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return v < 0 ? "(" + s + ")" : s;
}

std::string c_function(const std::string& fn) {
  static const std::map<std::string, std::string> table = {
      {"abs", "fabs"}, {"sqrt", "sqrt"}, {"exp", "exp"}, {"log", "log"},
      {"sin", "sin"},  {"cos", "cos"},   {"tan", "tan"}, {"erf", "erf"}};
  auto it = table.find(fn);
  if (it == table.end()) throw Error(ErrorKind::UnsupportedFunction, "no C equivalent for " + fn);
  return it->second;
}

class CWriter {
 public:
  explicit CWriter(const LoopProgram& p) : p_(p) {}

  std::string run() {
    out_ << "/* " << p_.name << " */\n#include <math.h>\n\n";
    out_ << "void kernel(double *restrict A";
    for (const auto& a : p_.args) out_ << ", const double *restrict " << a.name;
    out_ << ")\n{\n";
    for (const auto& t : p_.tables) {
      out_ << "  const double " << t.name << "[" << t.values.size() << "] = {";
      for (size_t k = 0; k < t.values.size(); ++k) out_ << (k ? ", " : "") << number(t.values[k]);
      out_ << "};\n";
    }
    for (const auto& t : p_.temps) out_ << "  double " << t.name << "[" << t.size << "] = {0};\n";
    out_ << "  for (int n = 0; n < " << p_.output_size << "; ++n)\n    A[n] = 0.0;\n";
    for (const auto& n : p_.nests) nest(n);
    out_ << "}\n";
    return out_.str();
  }

 private:
  std::string affine(const Affine& a) const {
    std::string s;
    for (const auto& [id, stride] : a.terms) {
      if (stride == 0) continue;
      if (!s.empty()) s += " + ";
      s += stride == 1 ? name(id) : std::to_string(stride) + "*" + name(id);
    }
    if (a.offset != 0 || s.empty()) s += (s.empty() ? "" : " + ") + std::to_string(a.offset);
    return s;
  }

  const std::string& name(int id) const { return p_.indices[static_cast<size_t>(id)].name; }

  std::string operand(const Operand& o) const {
    switch (o.kind) {
      case Operand::Kind::Const: return number(o.value);
      case Operand::Kind::Local: return "l" + std::to_string(o.id);
      case Operand::Kind::Temp: return p_.temps[static_cast<size_t>(o.id)].name + "[" + affine(o.at) + "]";
      case Operand::Kind::Table: return p_.tables[static_cast<size_t>(o.id)].name + "[" + affine(o.at) + "]";
      case Operand::Kind::Arg: return p_.args[static_cast<size_t>(o.id)].name + "[" + affine(o.at) + "]";
      case Operand::Kind::Delta: return "(double)(" + affine(o.at) + " == " + affine(o.rhs) + ")";
    }
    return "";
  }

  std::string value(const Statement& s) const {
    auto a = [&](size_t k) { return operand(s.args[k]); };
    switch (s.op) {
      case StmtOp::Copy: return a(0);
      case StmtOp::Add: return a(0) + " + " + a(1);
      case StmtOp::Mul: return a(0) + " * " + a(1);
      case StmtOp::Div: return a(0) + " / " + a(1);
      case StmtOp::Pow: return "pow(" + a(0) + ", " + a(1) + ")";
      case StmtOp::Min: return "fmin(" + a(0) + ", " + a(1) + ")";
      case StmtOp::Max: return "fmax(" + a(0) + ", " + a(1) + ")";
      case StmtOp::Fn: return c_function(s.fn) + "(" + a(0) + ")";
      case StmtOp::Cmp: return "(double)(" + a(0) + " " + s.fn + " " + a(1) + ")";
      case StmtOp::And: return "(double)(" + a(0) + " != 0.0 && " + a(1) + " != 0.0)";
      case StmtOp::Or: return "(double)(" + a(0) + " != 0.0 || " + a(1) + " != 0.0)";
      case StmtOp::Not: return "(double)(" + a(0) + " == 0.0)";
      case StmtOp::Select: return "(" + a(0) + " != 0.0 ? " + a(1) + " : " + a(2) + ")";
    }
    return "";
  }

  void nest(const Nest& n) {
    std::string pad = "  ";
    for (int l : n.loops) {
      out_ << pad << "for (int " << name(l) << " = 0; " << name(l) << " < "
           << p_.indices[static_cast<size_t>(l)].extent << "; ++" << name(l) << ")\n";
      pad += "  ";
    }
    out_ << std::string(pad.size() - 2, ' ') << "{\n";
    for (const auto& s : n.body) {
      out_ << pad;
      const char* op = s.accumulate ? " += " : " = ";
      switch (s.target) {
        case Statement::Target::Local: out_ << "const double l" << s.id << " = "; break;
        case Statement::Target::Temp: out_ << p_.temps[static_cast<size_t>(s.id)].name << "[" << affine(s.at) << "]" << op; break;
        case Statement::Target::Output: out_ << "A[" << affine(s.at) << "]" << op; break;
      }
      out_ << value(s) << ";\n";
    }
    out_ << std::string(pad.size() - 2, ' ') << "}\n";
  }

  const LoopProgram& p_;
  std::ostringstream out_;
};

}  // namespace

std::string emit_c(const LoopProgram& p) { return CWriter(p).run(); }

//------------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json affine_json(const Affine& a) {
  json t = json::array();
  for (const auto& [id, s] : a.terms) t.push_back({id, s});
  return {{"offset", a.offset}, {"terms", t}};
}

Affine affine_from(const json& j) {
  Affine a;
  a.offset = j.at("offset").get<int64_t>();
  for (const auto& t : j.at("terms")) a.terms.emplace_back(t.at(0).get<int>(), t.at(1).get<int64_t>());
  return a;
}

const char* kind_names[] = {"const", "local", "temp", "table", "arg", "delta"};
const char* op_names[] = {"copy", "add", "mul", "div", "pow", "min", "max", "fn", "cmp", "and", "or", "not", "select"};
const char* target_names[] = {"local", "temp", "output"};

template <size_t N>
int lookup(const char* (&names)[N], const std::string& s) {
  for (size_t k = 0; k < N; ++k)
    if (s == names[k]) return static_cast<int>(k);
  throw Error(ErrorKind::IllFormed, "unknown program token " + s);
}

}  // namespace

std::string serialize_program(const LoopProgram& p) {
  json j;
  j["name"] = p.name;
  j["output_size"] = p.output_size;
  j["num_locals"] = p.num_locals;
  j["args"] = json::array();
  for (const auto& a : p.args) j["args"].push_back({{"name", a.name}, {"size", a.size}});
  j["indices"] = json::array();
  for (const auto& i : p.indices)
    j["indices"].push_back({{"name", i.name}, {"extent", i.extent}, {"role", static_cast<int>(i.role)}});
  j["tables"] = json::array();
  for (const auto& t : p.tables) j["tables"].push_back({{"name", t.name}, {"values", t.values}});
  j["temps"] = json::array();
  for (const auto& t : p.temps) j["temps"].push_back({{"name", t.name}, {"size", t.size}});
  j["nests"] = json::array();
  for (const auto& n : p.nests) {
    json body = json::array();
    for (const auto& s : n.body) {
      json args = json::array();
      for (const auto& o : s.args)
        args.push_back({{"kind", kind_names[static_cast<int>(o.kind)]},
                        {"value", o.value},
                        {"id", o.id},
                        {"at", affine_json(o.at)},
                        {"rhs", affine_json(o.rhs)}});
      body.push_back({{"target", target_names[static_cast<int>(s.target)]},
                      {"id", s.id},
                      {"at", affine_json(s.at)},
                      {"accumulate", s.accumulate},
                      {"op", op_names[static_cast<int>(s.op)]},
                      {"fn", s.fn},
                      {"args", args}});
    }
    j["nests"].push_back({{"loops", n.loops}, {"body", body}});
  }
  return j.dump(1) + "\n";
}

LoopProgram parse_program(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IllFormed, std::string("program text: ") + e.what());
  }
  LoopProgram p;
  p.name = j.at("name").get<std::string>();
  p.output_size = j.at("output_size").get<int64_t>();
  p.num_locals = j.at("num_locals").get<int>();
  for (const auto& a : j.at("args")) p.args.push_back({a.at("name").get<std::string>(), a.at("size").get<int64_t>()});
  for (const auto& i : j.at("indices"))
    p.indices.push_back({i.at("name").get<std::string>(), i.at("extent").get<int64_t>(),
                         static_cast<IndexRole>(i.at("role").get<int>())});
  for (const auto& t : j.at("tables"))
    p.tables.push_back({t.at("name").get<std::string>(), t.at("values").get<std::vector<double>>()});
  for (const auto& t : j.at("temps")) p.temps.push_back({t.at("name").get<std::string>(), t.at("size").get<int64_t>()});
  for (const auto& n : j.at("nests")) {
    Nest nest;
    nest.loops = n.at("loops").get<std::vector<int>>();
    for (const auto& s : n.at("body")) {
      Statement st;
      st.target = static_cast<Statement::Target>(lookup(target_names, s.at("target").get<std::string>()));
      st.id = s.at("id").get<int>();
      st.at = affine_from(s.at("at"));
      st.accumulate = s.at("accumulate").get<bool>();
      st.op = static_cast<StmtOp>(lookup(op_names, s.at("op").get<std::string>()));
      st.fn = s.at("fn").get<std::string>();
      for (const auto& o : s.at("args")) {
        Operand op;
        op.kind = static_cast<Operand::Kind>(lookup(kind_names, o.at("kind").get<std::string>()));
        op.value = o.at("value").get<double>();
        op.id = o.at("id").get<int>();
        op.at = affine_from(o.at("at"));
        op.rhs = affine_from(o.at("rhs"));
        st.args.push_back(std::move(op));
      }
      nest.body.push_back(std::move(st));
    }
    p.nests.push_back(std::move(nest));
  }
  return p;
}

}  // namespace fkc
