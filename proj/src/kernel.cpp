#include "fkc/kernel.hpp"

#include <algorithm>

namespace fkc {

IndexList View::indices() const {
  IndexList out;
  for (const auto& t : terms) out.push_back(t.index);
  return sorted_free(out);
}

View normalize_view(View v) {
  View out;
  out.offset = v.offset;
  for (const auto& t : v.terms) {
    if (t.index.is_fixed()) {
      out.offset += t.stride * t.index.value;
      continue;
    }
    if (!t.index.is_free()) throw Error(ErrorKind::Unsupported, "runtime index in a return view");
    auto it = std::find_if(out.terms.begin(), out.terms.end(),
                           [&](const ViewTerm& u) { return u.index == t.index; });
    if (it != out.terms.end())
      it->stride += t.stride;
    else
      out.terms.push_back(t);
  }
  return out;
}

View View::substitute(const IndexMap& m) const {
  View v = *this;
  for (auto& t : v.terms)
    for (const auto& [from, to] : m)
      if (t.index == from) {
        t.index = to;
        break;
      }
  return normalize_view(std::move(v));
}

bool View::operator==(const View& o) const {
  if (offset != o.offset || terms.size() != o.terms.size()) return false;
  for (size_t k = 0; k < terms.size(); ++k)
    if (!(terms[k].index == o.terms[k].index) || terms[k].stride != o.terms[k].stride) return false;
  return true;
}

}  // namespace fkc
