#pragma once

#include "smgark/integrators.hpp"
#include "smgark/systems.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace smgark {

/// Step-size refinement study: final-time errors per step size plus the
/// fitted log-log slope.
struct ConvergenceResult {
  std::vector<double> step_sizes;  // strictly decreasing
  std::vector<double> errors;      // masked max-norm at t_end; all positive
  double slope = 0.0;  // least-squares slope of log(error) vs log(step)
  /// Indices into the stacked state [p; q] (length 2*dim) entering the error
  /// norm; empty selects every component.
  std::vector<int> component_mask;
};

/// Energy record on the macro grid of one long run.
struct EnergySeries {
  std::vector<double> times;
  std::vector<double> hamiltonian;
  /// One row per sample: the per-spring oscillatory energies I_1..I_m
  /// followed by their sum I.
  Matrix oscillatory;
  double drift_slope = 0.0;    // least-squares slope of (H(t) - H(0)) vs t
  double max_deviation = 0.0;  // max |H(t) - H(0)|; +inf once energies overflow
};

/// Maximum-entry violation of M^T J M = J for one step y -> stepper(y, H).
/// M is the step Jacobian built by central finite differences (column-wise
/// perturbation 1e-6 * (1 + |y_i|)) and J = [[0, I], [-I, 0]] in stacked
/// [p; q] coordinates.  Zero (up to FD noise) iff the step map is symplectic.
double symplecticity_residual(const Stepper& stepper, const PhaseState& y,
                              double H);

/// Infinity-norm of rho(Phi_H(rho(Phi_H(y)))) - y with the momentum reversal
/// rho(p, q) = (-p, q); zero (up to solver tolerance) for a time-symmetric
/// map applied to a reversible field.
double reversibility_residual(const Stepper& stepper, const PhaseState& y,
                              double H);

/// Builds a fresh stepper per refinement run, isolating per-instance caches
/// (fused boundary kicks) between runs.
using StepperFactory = std::function<Stepper()>;

/// Integrates y0 to t_end once per step size, measures the masked max-norm
/// error against `reference`, and fits the slope on the log-log cloud.
/// step_sizes must be strictly decreasing and t_end an integer multiple of
/// each (std::invalid_argument otherwise); an exactly zero error makes the
/// fit impossible and raises std::runtime_error.
ConvergenceResult convergence_order(const StepperFactory& make_stepper,
                                    const PhaseState& y0, double t_end,
                                    const std::vector<double>& step_sizes,
                                    const PhaseState& reference,
                                    const std::vector<int>& component_mask = {});

/// Runs the stepper over [0, t_end] on the oscillator-chain benchmark and
/// records the Hamiltonian and the oscillatory energies at every macro step.
/// Stepper failures are rethrown with the failure time prepended.  Overflowed
/// (non-finite) energies are kept in the series; they drive max_deviation to
/// +inf and the drift slope to NaN.
EnergySeries energy_study(const Stepper& stepper, const SeparableSystem& sys,
                          const FpuParams& params, const PhaseState& y0,
                          double macro_step, double t_end);

/// One scheme entry of a stability sweep: display name plus a factory that
/// binds the scheme to a concrete system instance.
struct SweepScheme {
  std::string name;
  std::function<Stepper(const SeparableSystem& sys)> make_stepper;
};

/// One (scheme, stiffness, step) cell: the slow-component error at t_end, or
/// NaN with the failure reason in `note`.
struct SweepCell {
  std::string scheme;
  double omega = 0.0;
  double step_size = 0.0;
  double error = 0.0;
  std::string note;
};

/// Sweep results in deterministic order: scheme-major, then stiffness, then
/// step sizes in the order given.
struct SweepTable {
  std::vector<SweepCell> cells;
};

/// Default step grid 2^-5, ..., 2^-13 (strictly decreasing).
std::vector<double> default_sweep_steps();

/// Global slow-position errors of every scheme on the oscillator-chain
/// benchmark (m = 3, standard start state) over a stiffness/step grid.  One
/// reference per stiffness value is computed up front; the cells then run
/// independently in parallel and are merged in deterministic order.  Any
/// cell failure (reference self-consistency, solver breakdown, non-integral
/// step count) is recorded as a NaN error with the reason in `note` and the
/// sweep continues.
SweepTable stability_sweep(const std::vector<SweepScheme>& schemes,
                           const std::vector<double>& omega_list,
                           const std::vector<double>& step_list = default_sweep_steps(),
                           double t_end = 3.0);

/// High-accuracy final state at t_end: a fourth-order triple-jump composition
/// of the single-rate leapfrog at fixed substep 1e-5, cross-checked against a
/// half-step rerun.  The two runs must agree to 1e-10 in max norm over the
/// full state; otherwise std::runtime_error reports the observed gap.
PhaseState reference_solution(const SeparableSystem& sys, const PhaseState& y0,
                              double t_end);

/// Same engine with the self-consistency gate restricted to the masked
/// components (both p and q; empty mask = all) at tolerance gate_tol.  Used
/// when only part of the state enters a downstream error norm: at large
/// stiffness the fast phases decorrelate first and a full-state gate at
/// 1e-10 is unattainable at any practical fixed step, while the slow
/// components stay orders of magnitude more consistent.
PhaseState reference_solution(const SeparableSystem& sys, const PhaseState& y0,
                              double t_end, const std::vector<int>& mask,
                              double gate_tol);

/// CSV with header "H,error,slope": one row per step size, each carrying the
/// fitted slope in the last column (so the footer row reports it).
void write_convergence_csv(std::ostream& os, const ConvergenceResult& r);

/// CSV with header "t,H,I_1,...,I_m,I": one row per sample.
void write_energy_csv(std::ostream& os, const EnergySeries& s);

/// CSV with header "scheme,omega,H,error,note": one row per cell in table
/// order; failed cells carry error "nan" and a non-empty note.
void write_sweep_csv(std::ostream& os, const SweepTable& t);

}  // namespace smgark
