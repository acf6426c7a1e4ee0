#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fkc/ir.hpp"
#include "fkc/kernel.hpp"

namespace fkc {

enum class Mode { Spectral, Coffee, Vanilla };

Mode parse_mode(const std::string& s);
std::string mode_name(Mode m);

struct Monomial {
  IndexList sum_indices;     // contraction indices
  std::vector<Expr> atomics;  // argument-dependent factors
  Expr rest;                 // argument-independent scalar factor

  // Product of all factors summed over sum_indices.
  Expr reassemble() const;
};

struct MonomialSum {
  std::vector<Monomial> monomials;

  Expr reassemble() const;
};

// (1) Split Concatenate nodes together with the indices that select them:
// argument indices split the assignment, summed indices split the sum.
Kernel split_concatenate(const Kernel& k);

// Unroll IndexSums over value indices with extent <= max_extent.
Expr expand_small_sums(const Expr& e, int64_t max_extent = 3);

// (2) Sum-of-products form. `arguments` are the basis multi-indices of each
// argument; atomics depend on argument indices, the rest does not.
MonomialSum argument_factorise(const Expr& e, const std::vector<IndexList>& arguments);

// (3) Remove Delta factors against contraction indices.
Monomial cancel_contraction_deltas(Monomial m);

// (4) Remove Delta factors against return-view indices. Returns the
// monomials grouped by their (possibly changed) views.
std::vector<std::pair<View, MonomialSum>> cancel_assignment_deltas(const View& view, const MonomialSum& ms);

// Deterministic product of factors: left fold, fewest free indices first,
// then structural hash. `flops` receives the cost of the new products.
Expr make_product(std::vector<Expr> factors, int64_t* flops = nullptr);

struct TensorProductResult {
  Expr expr;
  int64_t flops = 0;             // products and contractions built here
  IndexList ordering;            // contraction order used
};

inline constexpr size_t kPermutationLimit = 4;

// Best contraction order over all permutations of `indices`.
// Beyond the permutation limit a greedy smallest-extent-first order is used.
TensorProductResult make_tensor_product(const std::vector<Expr>& factors, const IndexList& indices);

// Contraction order search for one fixed ordering (indices absent from the factors are
// skipped).
TensorProductResult make_tensor_product_ordered(const std::vector<Expr>& factors, const IndexList& ordering);

// One contraction order shared by all monomials, minimising total flops.
// Ties go to the first permutation in token order.
IndexList choose_shared_ordering(const std::vector<Monomial>& monomials);

// (6) Greedy hoisting of common argument-dependent factors out of sums,
// applied at every contraction level. Never increases dag flops.
Expr distributive_refactor(const Expr& e, const IndexList& argument_indices);

// Coefficient evaluations (IndexSums over coefficient indices): delta
// cancellation and sum factorisation.
Kernel optimise_coefficients(const Kernel& k);

// Individual stages as kernel transforms, for soundness checks.
Kernel expand_small_sums_pass(const Kernel& k);
Kernel argument_factorise_pass(const Kernel& k);
Kernel delta_cancellation_pass(const Kernel& k);  // (3) and (4)
Kernel sum_factorise_pass(const Kernel& k);       // (3), (4) and (5)

Kernel run_pipeline(const Kernel& k, Mode mode);

}  // namespace fkc
