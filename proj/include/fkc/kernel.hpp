#pragma once

#include <string>
#include <vector>

#include "fkc/ir.hpp"

namespace fkc {

// Affine region of the flat return buffer: offset + sum(stride * index).
struct ViewTerm {
  Index index;
  int64_t stride = 0;
};

struct View {
  int64_t offset = 0;
  std::vector<ViewTerm> terms;

  IndexList indices() const;
  View substitute(const IndexMap& m) const;
  bool operator==(const View& o) const;
};

// Normalise: fold fixed indices into the offset, merge repeated indices.
View normalize_view(View v);

struct Assignment {
  View view;
  Expr expr;
  // Basis multi-index of each argument (test first) as it appears in `expr`.
  std::vector<IndexList> arguments;
};

struct KernelArg {
  std::string name;
  int64_t size = 0;
};

struct Kernel {
  std::string name;
  int rank = 0;
  Shape return_shape;  // e.g. {N_test, N_trial}
  std::vector<KernelArg> args;  // coords first, then coefficient arrays w0, w1, ...
  std::vector<Assignment> assignments;

  int64_t return_size() const { return shape_size(return_shape); }
};

}  // namespace fkc
