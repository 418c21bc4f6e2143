#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smgark/tableau.hpp"

namespace smgark {

// Default tolerance for algebraic condition checks.  Shipped schemes have
// exact dyadic coefficients, so genuine residuals are pure rounding noise.
inline constexpr double kConditionTol = 1e-12;

struct ConditionEntry {
  std::string condition_id;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  double tol = kConditionTol;
  bool pass = true;

  double max_residual() const;
  // Returns the entry with the given id, or nullptr.
  const ConditionEntry* find(std::string_view condition_id) const;
  // Number of entries whose id starts with the given prefix.
  int count_prefix(std::string_view prefix) const;
};

// Evaluates the accuracy conditions of orders 1..p_max (p_max in {1,2,3})
// directly on the block form: per-micro-step sums, diag() constructions,
// (lambda-1) shifts and trailing-weight suffixes.  Entry ids follow
// "p<order>.<slow|fast>.<shape>.<leading half>".
ConditionReport order_report(const PartitionedMgarkTableau& t, int p_max,
                             double tol = kConditionTol);

// Same condition set evaluated on the flattened monolithic pair, using only
// tier-blocked slices of the big matrices.  Independent of the block route;
// used as an oracle for it.  Ids are prefixed "flat.".
ConditionReport order_report_flattened(const PartitionedMgarkTableau& t,
                                       int p_max, double tol = kConditionTol);

// Conservation-of-symplectic-form conditions: the slow-slow condition (a),
// and per micro-step the fast-fast (b), fast-slow (c) and slow-fast (d)
// conditions, each reported as the max entrywise residual of its matrix
// identity.  Ids: "symplectic.a", "symplectic.b.lambda=k", ...
ConditionReport is_symplectic(const PartitionedMgarkTableau& t,
                              double tol = kConditionTol);

// A scheme is symmetric iff it equals its adjoint.  Compares every block of
// adjoint_tableau(t) against t; ids "symmetric.<block>[.lambda=k]".
ConditionReport is_symmetric(const PartitionedMgarkTableau& t,
                             double tol = kConditionTol);

// True iff the elementwise products between each position-half block and the
// transposed opposite momentum-half block vanish identically, evaluated on
// the flattened halves.  This is the structural condition under which the
// scheme reduces to a composition of exactly solvable flows.
bool is_explicit(const PartitionedMgarkTableau& t);

// True iff the stage dependency graph (nodes per stage, edges along nonzero
// coefficients, strongly connected groups inside one diagonal block
// contracted) has no cycle spanning different blocks, so each implicit solve
// involves a single tier and micro step only.
bool is_decoupled(const MgarkTableau& t);

// True iff every weight entry of every b vector is strictly positive
// (algebraic stability of the shipped schemes).
bool positive_weights(const PartitionedMgarkTableau& t);
bool positive_weights(const MgarkTableau& t);

// Residuals of the two composition-weight conditions for raising a scheme of
// even order p by two: (sum gamma_i - 1, sum gamma_i^{p+1}).
std::pair<double, double> composition_order_residual(const Vector& gammas,
                                                     int base_order);

// CSV serialization: condition_id, lhs, rhs, residual, pass.
void write_report_csv(std::ostream& os, const ConditionReport& report);

}  // namespace smgark
