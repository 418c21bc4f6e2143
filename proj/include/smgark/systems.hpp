#pragma once

#include "smgark/tableau.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace smgark {

/// Phase-space point; p and q have equal length for all shipped problems.
struct PhaseState {
  Vector p;
  Vector q;
};

using ForceFn = std::function<Vector(const Vector&)>;
using EnergyFn = std::function<double(const Vector&)>;
using HessianFn = std::function<Matrix(const Vector&)>;

/// Four-way separable Hamiltonian H = T^s(p) + T^f(p) + V^s(q) + V^f(q).
/// grad_* callbacks return the gradient of the matching energy.  Hessian
/// callbacks are optional (empty std::function) and enable analytic Newton
/// Jacobians in the implicit steppers.
struct SeparableSystem {
  int dim = 0;  // length of p (== length of q)
  std::string name;
  ForceFn grad_t_slow, grad_t_fast, grad_v_slow, grad_v_fast;
  EnergyFn t_slow, t_fast, v_slow, v_fast;
  HessianFn hess_t_slow, hess_t_fast, hess_v_slow, hess_v_fast;
  // Structural-zero markers: a true flag asserts the matching energy (and
  // force) is identically zero, letting steppers prune those terms.
  bool zero_t_slow = false, zero_t_fast = false;
  bool zero_v_slow = false, zero_v_fast = false;

  double hamiltonian(const PhaseState& y) const;
};

/// Two-way additive split of the phase-space vector field:
/// y' = f_slow(y) + f_fast(y), where f_slow depends only on q and has zero
/// q-component.  jac_fast (optional) is the 2n x 2n Jacobian of f_fast in
/// stacked [p; q] coordinates.
struct TwoWaySystem {
  int dim = 0;  // length of p (== length of q)
  std::function<PhaseState(const PhaseState&)> f_slow, f_fast;
  std::function<Matrix(const PhaseState&)> jac_fast;
};

/// Chain of 2m unit masses with stiff linear springs (stiffness omega) on the
/// odd-indexed coordinates and soft quartic springs along the chain.
struct FpuParams {
  int m = 3;
  double omega = 50.0;
};

/// Builds the chain benchmark system with analytic gradients and Hessians.
/// Coordinate layout interleaves the per-mass pairs:
/// q = (q_{0,1}, q_{1,1}, q_{0,2}, q_{1,2}, ...), likewise for p.
SeparableSystem fpu_system(const FpuParams& params);

/// Per-spring oscillatory energies I_j = (p_{1,j}^2 + omega^2 q_{1,j}^2) / 2
/// and their sum (an adiabatic invariant of the chain).
std::pair<Vector, double> oscillatory_energy(const PhaseState& y,
                                             const FpuParams& params);

/// Standard benchmark initial state: q_{0,1} = p_{0,1} = p_{1,1} = 1,
/// q_{1,1} = 1/omega, all other components zero.
PhaseState fpu_benchmark_state(const FpuParams& params);

/// Indices of the slow (soft-motion) components within a length-2m vector;
/// identical for the p and q layouts.
std::vector<int> fpu_slow_indices(int m);

/// Indices of the slow positions within the stacked state [p; q] (length
/// 4m): the q-components of the soft pairs.  This is the norm used by the
/// step-refinement and stiffness-sweep error studies; the slow momenta carry
/// an O(1/omega)-amplitude oscillatory term slaved to the fast phase, which
/// obscures the secular error until the fast oscillation is resolved.
std::vector<int> fpu_slow_position_mask(int m);

/// One-dimensional oscillator H = p^2/2 + omega^2 q^2 / 2, entirely in the
/// fast tier (slow energies identically zero).
SeparableSystem harmonic_system(double omega);

/// Exact flow of harmonic_system(omega) after time t.
PhaseState harmonic_flow(double omega, const PhaseState& y0, double t);

/// Two-way split with f_slow(q) = (-grad V^s, 0) and
/// f_fast(p,q) = (-grad V^f, grad T^s + grad T^f): the whole kinetic part is
/// treated as fast.
TwoWaySystem imex_split(const SeparableSystem& s);

/// The involution (p, q) -> (-p, q).
PhaseState momentum_reversal(const PhaseState& y);

PhaseState zero_state(int dim);

}  // namespace smgark
