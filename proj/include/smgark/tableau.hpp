#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace smgark {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Plain Butcher tableau: square coefficient matrix `a` plus weight vector
/// `b` of matching size.
struct RkTableau {
  Matrix a;
  Vector b;

  int stages() const { return static_cast<int>(b.size()); }
};

/// Tableau pair for a partitioned (two-half) method.  The `bar` half weights
/// kinetic-gradient evaluations and advances positions; the `tilde` half
/// weights potential-gradient evaluations and advances momenta.
struct RkTableauPair {
  RkTableau bar;
  RkTableau tilde;
};

/// Multirate tableau for an additively partitioned system integrated with two
/// tableau halves.  A macro step of size H is subdivided into `micro_steps`
/// micro steps of size h = H / micro_steps.  The slow tier is integrated once
/// per macro step with `slow`; the fast tier takes one micro step per entry
/// of `fast`.  The coupling blocks describe how each tier's stages read the
/// other tier's stage values:
///   couple_sf_*[k]  (slow stages x fast stages): slow stages reading micro
///                   step k+1 of the fast tier; scaled by h in the step map.
///   couple_fs_*[k]  (fast stages x slow stages): fast micro step k+1 reading
///                   the slow stages; scaled by H in the step map.
struct PartitionedMgarkTableau {
  int micro_steps = 1;
  RkTableauPair slow;
  std::vector<RkTableauPair> fast;
  std::vector<Matrix> couple_sf_bar;
  std::vector<Matrix> couple_sf_tilde;
  std::vector<Matrix> couple_fs_bar;
  std::vector<Matrix> couple_fs_tilde;
  std::string name;

  int slow_stages() const { return slow.bar.stages(); }
  int fast_stages(int lambda) const { return fast[lambda].bar.stages(); }
  /// Total fast stage count across all micro steps.
  int total_fast_stages() const;
  /// Throws std::invalid_argument if any block has inconsistent dimensions.
  void validate() const;
};

/// Multirate tableau whose two halves coincide (a single coefficient set per
/// block).  Used for schemes that treat both phase-space halves with the same
/// weights.
struct MgarkTableau {
  int micro_steps = 1;
  RkTableau slow;
  std::vector<RkTableau> fast;
  std::vector<Matrix> couple_sf;
  std::vector<Matrix> couple_fs;
  std::string name;

  int slow_stages() const { return slow.stages(); }
  int fast_stages(int lambda) const { return fast[lambda].stages(); }

  /// Expands to the partitioned representation with bar == tilde per block.
  PartitionedMgarkTableau as_partitioned() const;
};

/// Two-stage explicit tableau pair realizing one position/momentum leapfrog
/// step (half kick, drift, half kick).
RkTableauPair leapfrog_pair();

/// One-stage implicit midpoint tableau.
RkTableau implicit_midpoint();

/// Multirate leapfrog scheme: explicit, second order, symmetric and
/// symplectic.  Requires an even number of micro steps; throws
/// std::invalid_argument("M must be even") otherwise.
PartitionedMgarkTableau build_mr_lpfr(int micro_steps);

/// Multirate implicit-explicit scheme: slow tier explicit (trapezoidal-like
/// kicks), fast tier implicit midpoint micro steps.  Second order,
/// symplectic, symmetric, decoupled.
MgarkTableau build_mr_imex2(int micro_steps);

/// Multirate implicit-implicit scheme built from implicit midpoint on both
/// tiers with midpoint-consistent coupling.  Second order, symplectic,
/// symmetric; the tiers are fully coupled (one joint implicit system).
MgarkTableau build_mr_imim2(int micro_steps);

/// Monolithic single-rate view of a multirate tableau.  Stage order: all
/// fast stages of micro step 1, ..., micro step M, then the slow stages.
/// Coefficients are expressed in macro-step units, so fast diagonal blocks
/// and completed-micro-step fills carry a factor 1/M.  Returns {bar, tilde}.
std::pair<RkTableau, RkTableau> flatten(const PartitionedMgarkTableau& t);

/// Same monolithic view with every coefficient additionally multiplied by
/// `macro_step`, giving the absolute time increments used by one step.
std::pair<RkTableau, RkTableau> flatten(const PartitionedMgarkTableau& t,
                                        double macro_step);

/// Collapses a partitioned tableau whose halves agree blockwise into the
/// single-half representation.  Throws std::invalid_argument naming the
/// first differing block otherwise.
MgarkTableau reduce_partitioned(const PartitionedMgarkTableau& t,
                                double tol = 0.0);

/// Adjoint (time-reversed) tableau: the one-step map of the result is the
/// inverse of the original map with negated step size.  Blockwise this flips
/// stage order within every block, reverses the micro-step order, and maps
/// coefficients a -> b - a against the owning column block's weights.
/// Requires a uniform fast stage count across micro steps.
PartitionedMgarkTableau adjoint_tableau(const PartitionedMgarkTableau& t);

}  // namespace smgark
