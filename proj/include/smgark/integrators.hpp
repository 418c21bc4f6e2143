#pragma once

#include "smgark/systems.hpp"
#include "smgark/tableau.hpp"

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <utility>
#include <vector>

namespace smgark {

enum class JacobianMode { Analytic, FiniteDifference };

/// Newton stage-solver settings.  Analytic mode falls back to finite
/// differences when a required Hessian callback is missing.
struct SolverConfig {
  double newton_rel_tol = 1e-12;
  double newton_abs_tol = 1e-14;
  int max_iters = 50;
  JacobianMode jacobian_mode = JacobianMode::Analytic;
  double fd_step_scale = 1.4901161193847656e-08;  // sqrt(machine epsilon)
};

/// Work counters.  slow_force_evals counts slow potential-gradient (or
/// f_slow) evaluations; fast_force_evals counts fast force evaluations
/// (grad_v_fast, or f_fast for the two-way form).  Cheap kinetic gradients
/// are not counted separately.
struct StepStats {
  long long slow_force_evals = 0;
  long long fast_force_evals = 0;
  long long newton_iters = 0;

  StepStats& operator+=(const StepStats& o) {
    slow_force_evals += o.slow_force_evals;
    fast_force_evals += o.fast_force_evals;
    newton_iters += o.newton_iters;
    return *this;
  }
};

/// Raised when the damped Newton iteration fails to reach tolerance.
class NewtonError : public std::runtime_error {
 public:
  NewtonError(const std::string& message, double residual_norm);
  double residual_norm() const { return residual_norm_; }

 private:
  double residual_norm_;
};

/// A one-step map y0 -> y1 over macro step H, accumulating work counters.
using Stepper =
    std::function<PhaseState(const PhaseState& y0, double H, StepStats&)>;

/// Damped Newton with halving line search (up to 8 halvings) and dense LU
/// solves.  `jacobian` may be empty, selecting central finite differences
/// with step fd_step_scale*(1+|x_i|).  Returns x with
/// ||residual(x)|| <= newton_abs_tol + newton_rel_tol*||x||; throws
/// NewtonError carrying the last residual norm otherwise.  When  iters  is
/// non-null it is incremented once per Newton update.
Vector newton_solve(const std::function<Vector(const Vector&)>& residual,
                    const std::function<Matrix(const Vector&)>& jacobian,
                    Vector guess, const SolverConfig& cfg = {},
                    long long* iters = nullptr);

/// Generic stepper for any partitioned multirate tableau on a four-way
/// separable system.  Builds the stage dependency graph once (micro-step
/// prefix terms included), orders it topologically, evaluates explicit
/// stages directly and solves each strongly connected stage group by one
/// joint Newton iteration.  Negative H (composition substeps) doubles the
/// Newton iteration budget.
Stepper make_pmgark_stepper(const PartitionedMgarkTableau& t,
                            const SeparableSystem& sys,
                            const SolverConfig& cfg = {});
std::pair<PhaseState, StepStats> step_pmgark(const PartitionedMgarkTableau& t,
                                             const SeparableSystem& sys,
                                             const PhaseState& y0, double H,
                                             const SolverConfig& cfg = {});

/// Single-rate stepper over the monolithic (flattened) view of a tableau.
/// Mathematically identical to the multirate stepper; used by checkers as an
/// independent route.
Stepper make_flattened_stepper(const PartitionedMgarkTableau& t,
                               const SeparableSystem& sys,
                               const SolverConfig& cfg = {});

/// Multirate leapfrog: half-step slow kick, M/2 fast leapfrog micro steps,
/// full slow drift, M/2 fast micro steps, half-step slow kick.  Requires
/// even M; M = 1 degenerates to single-rate leapfrog on the summed forces.
/// With fuse_kicks the trailing kick's slow force is cached and reused as
/// the next step's leading kick when the position state is unchanged.
Stepper make_mr_lpfr_stepper(const SeparableSystem& sys, int micro_steps,
                             bool fuse_kicks = false);
std::pair<PhaseState, StepStats> step_mr_lpfr(const SeparableSystem& sys,
                                              const PhaseState& y0, double H,
                                              int micro_steps);

/// Multirate implicit-explicit impulse stepper: half-step slow kick, M
/// implicit-midpoint micro steps on the fast field, half-step slow kick.
Stepper make_mr_imex2_stepper(const TwoWaySystem& sys, int micro_steps,
                              const SolverConfig& cfg = {},
                              bool fuse_kicks = false);
Stepper make_mr_imex2_stepper(const SeparableSystem& sys, int micro_steps,
                              const SolverConfig& cfg = {},
                              bool fuse_kicks = false);
std::pair<PhaseState, StepStats> step_mr_imex2(const SeparableSystem& sys,
                                               const PhaseState& y0, double H,
                                               int micro_steps,
                                               const SolverConfig& cfg = {});

/// Multirate implicit-implicit stepper: the generic path on its own tableau
/// (all stages form one coupled implicit system) with the kinetic part
/// treated as fast.
Stepper make_mr_imim2_stepper(const SeparableSystem& sys, int micro_steps,
                              const SolverConfig& cfg = {});
std::pair<PhaseState, StepStats> step_mr_imim2(const SeparableSystem& sys,
                                               const PhaseState& y0, double H,
                                               int micro_steps,
                                               const SolverConfig& cfg = {});

/// Reassigns the whole kinetic energy to the fast tier (T^s := 0), the
/// system form the implicit-explicit and implicit-implicit schemes act on.
SeparableSystem with_kinetic_as_fast(const SeparableSystem& s);

/// Non-symplectic comparison steppers.
Stepper make_forward_euler_stepper(const SeparableSystem& sys);
Stepper make_explicit_midpoint_stepper(const SeparableSystem& sys);

// ------------------------------------------------------------- driver ----

struct TrajectoryPoint {
  double t = 0.0;
  PhaseState y;
  StepStats stats;  // cumulative from the start of the run
};

using Observer =
    std::function<void(double t, const PhaseState&, const StepStats&)>;

/// Applies the stepper n_steps times from y0.  Returns the macro-grid
/// trajectory (n_steps + 1 points, cumulative stats).  The observer, if
/// given, is called after every step.  Stepper errors are rethrown with the
/// failing step index prepended.
std::vector<TrajectoryPoint> integrate(const Stepper& step,
                                       const PhaseState& y0, double H,
                                       long long n_steps,
                                       const Observer& observer = {});

/// Same loop without storing the trajectory; returns the final state and
/// accumulates stats into `stats`.
PhaseState integrate_final(const Stepper& step, const PhaseState& y0,
                           double H, long long n_steps, StepStats& stats,
                           const Observer& observer = {});

/// Number of macro steps covering [0, t_end] at step H; throws
/// std::invalid_argument when t_end is not an integer multiple of H
/// (relative tolerance 1e-9).
long long steps_for(double t_end, double H);

/// CSV rows: t, p..., q..., H, I, slow_evals, fast_evals.  `oscillatory`
/// may be empty; the I column is then written as 0.
void write_trajectory_csv(
    std::ostream& os, const std::vector<TrajectoryPoint>& trajectory,
    const SeparableSystem& sys,
    const std::function<double(const PhaseState&)>& oscillatory = {});

}  // namespace smgark
