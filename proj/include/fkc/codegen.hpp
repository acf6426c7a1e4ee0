#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fkc/kernel.hpp"

namespace fkc {

// offset + sum(stride * loop variable).
struct Affine {
  int64_t offset = 0;
  std::vector<std::pair<int, int64_t>> terms;  // (loop index id, stride)

  bool operator==(const Affine& o) const { return offset == o.offset && terms == o.terms; }
};

struct Operand {
  enum class Kind { Const, Local, Temp, Table, Arg, Delta };
  Kind kind = Kind::Const;
  double value = 0.0;  // Const
  int id = 0;          // local, temp, table or argument id
  Affine at;           // Temp, Table, Arg; Delta left-hand side
  Affine rhs;          // Delta right-hand side

  bool operator==(const Operand& o) const {
    return kind == o.kind && value == o.value && id == o.id && at == o.at && rhs == o.rhs;
  }
};

enum class StmtOp { Copy, Add, Mul, Div, Pow, Min, Max, Fn, Cmp, And, Or, Not, Select };

struct Statement {
  enum class Target { Local, Temp, Output };
  Target target = Target::Local;
  int id = 0;         // local or temp id
  Affine at;          // Temp / Output address
  bool accumulate = false;
  StmtOp op = StmtOp::Copy;
  std::string fn;     // Fn name or Cmp operator
  std::vector<Operand> args;

  // Arithmetic operations per execution, including the accumulate add.
  int64_t flops() const;
  bool operator==(const Statement& o) const {
    return target == o.target && id == o.id && at == o.at && accumulate == o.accumulate && op == o.op &&
           fn == o.fn && args == o.args;
  }
};

struct Nest {
  std::vector<int> loops;  // outermost first
  std::vector<Statement> body;

  bool operator==(const Nest& o) const { return loops == o.loops && body == o.body; }
};

struct LoopIndexInfo {
  std::string name;
  int64_t extent = 0;
  IndexRole role = IndexRole::Generic;

  bool operator==(const LoopIndexInfo& o) const { return name == o.name && extent == o.extent && role == o.role; }
};

struct BufferInfo {
  std::string name;
  int64_t size = 0;

  bool operator==(const BufferInfo& o) const { return name == o.name && size == o.size; }
};

struct TableInfo {
  std::string name;
  std::vector<double> values;

  bool operator==(const TableInfo& o) const { return name == o.name && values == o.values; }
};

// Explicit loop-nest program. Nests run in order; every statement of a nest
// runs once per iteration of its loops. Temporaries and the output start at
// zero.
struct LoopProgram {
  std::string name = "kernel";
  int64_t output_size = 0;
  std::vector<BufferInfo> args;  // coords, w0, w1, ...
  std::vector<LoopIndexInfo> indices;
  std::vector<TableInfo> tables;
  std::vector<BufferInfo> temps;
  int num_locals = 0;
  std::vector<Nest> nests;

  bool operator==(const LoopProgram& o) const {
    return name == o.name && output_size == o.output_size && args == o.args && indices == o.indices &&
           tables == o.tables && temps == o.temps && num_locals == o.num_locals && nests == o.nests;
  }
};

LoopProgram schedule(const Kernel& k);

struct FlopReport {
  int64_t total_flops = 0;
  std::map<int, int64_t> per_depth;  // loop depth -> flops
  int64_t table_bytes = 0;
  std::string kernel_hash;
};

FlopReport count_flops(const LoopProgram& p);

// Flops spent in output accumulation statements.
int64_t output_accumulate_flops(const LoopProgram& p);

std::string emit_c(const LoopProgram& p);

std::string serialize_program(const LoopProgram& p);
LoopProgram parse_program(const std::string& text);

// FNV-1a 64-bit, lower-case hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace fkc
