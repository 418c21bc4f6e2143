#include "smgark/diagnostics.hpp"

#include "smgark/composition.hpp"
#include "smgark/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace smgark {

namespace {

Vector stack_state(const PhaseState& y) {
  Vector x(y.p.size() + y.q.size());
  x << y.p, y.q;
  return x;
}

PhaseState unstack_state(const Vector& x, Eigen::Index n) {
  return PhaseState{x.head(n), x.tail(x.size() - n)};
}

double lsq_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mean_x;
    sxx += dx * dx;
    sxy += dx * (ys[i] - mean_y);
  }
  return sxy / sxx;
}

/// Max-norm distance over the masked components of the stacked state [p; q]
/// (empty mask: all components).
double masked_gap(const PhaseState& a, const PhaseState& b,
                  const std::vector<int>& mask) {
  if (mask.empty()) {
    return std::max((a.p - b.p).cwiseAbs().maxCoeff(),
                    (a.q - b.q).cwiseAbs().maxCoeff());
  }
  const Eigen::Index n = a.p.size();
  double gap = 0.0;
  for (int i : mask) {
    if (i < 0 || i >= n + a.q.size()) {
      throw std::invalid_argument("component mask index " + std::to_string(i) +
                                  " out of range");
    }
    const double d = i < n ? std::abs(a.p[i] - b.p[i])
                           : std::abs(a.q[i - n] - b.q[i - n]);
    gap = std::max(gap, d);
  }
  return gap;
}

void run_on_pool(std::size_t n_items, const std::function<void(std::size_t)>& body) {
  if (n_items == 0) return;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_items) return;
      body(i);
    }
  };
  std::size_t n_threads = std::thread::hardware_concurrency();
  if (n_threads == 0) n_threads = 1;
  n_threads = std::min(n_threads, n_items);
  if (n_threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
}

}  // namespace

double symplecticity_residual(const Stepper& stepper, const PhaseState& y,
                              double H) {
  const Eigen::Index n = y.p.size();
  const Eigen::Index dim = n + y.q.size();
  const Vector x0 = stack_state(y);
  auto apply = [&](const Vector& x) {
    StepStats stats;
    return stack_state(stepper(unstack_state(x, n), H, stats));
  };
  Matrix jac(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double d = 1e-6 * (1.0 + std::abs(x0[i]));
    Vector xp = x0;
    Vector xm = x0;
    xp[i] += d;
    xm[i] -= d;
    jac.col(i) = (apply(xp) - apply(xm)) / (2.0 * d);
  }
  Matrix j = Matrix::Zero(dim, dim);
  j.topRightCorner(n, n) = Matrix::Identity(n, n);
  j.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
  return (jac.transpose() * j * jac - j).cwiseAbs().maxCoeff();
}

double reversibility_residual(const Stepper& stepper, const PhaseState& y,
                              double H) {
  StepStats stats;
  const PhaseState forward = stepper(y, H, stats);
  const PhaseState again = stepper(momentum_reversal(forward), H, stats);
  const PhaseState back = momentum_reversal(again);
  return std::max((back.p - y.p).cwiseAbs().maxCoeff(),
                  (back.q - y.q).cwiseAbs().maxCoeff());
}

ConvergenceResult convergence_order(const StepperFactory& make_stepper,
                                    const PhaseState& y0, double t_end,
                                    const std::vector<double>& step_sizes,
                                    const PhaseState& reference,
                                    const std::vector<int>& component_mask) {
  if (step_sizes.size() < 2) {
    throw std::invalid_argument("need at least two step sizes to fit a slope");
  }
  for (std::size_t i = 0; i < step_sizes.size(); ++i) {
    if (!(step_sizes[i] > 0.0)) {
      throw std::invalid_argument("step sizes must be positive");
    }
    if (i > 0 && !(step_sizes[i] < step_sizes[i - 1])) {
      throw std::invalid_argument("step sizes must be strictly decreasing");
    }
  }
  std::vector<long long> step_counts;
  step_counts.reserve(step_sizes.size());
  for (double h : step_sizes) step_counts.push_back(steps_for(t_end, h));

  ConvergenceResult result;
  result.step_sizes = step_sizes;
  result.component_mask = component_mask;
  std::vector<double> log_h;
  std::vector<double> log_err;
  for (std::size_t i = 0; i < step_sizes.size(); ++i) {
    const double h = step_sizes[i];
    const long long n_steps = step_counts[i];
    Stepper step = make_stepper();
    StepStats stats;
    const PhaseState y_end = integrate_final(step, y0, h, n_steps, stats);
    const double err = masked_gap(y_end, reference, component_mask);
    if (!std::isfinite(err)) {
      throw std::runtime_error("non-finite error at step size " +
                               format_g17(h));
    }
    if (err == 0.0) {
      throw std::runtime_error("exactly zero error at step size " +
                               format_g17(h) + "; log-log fit impossible");
    }
    result.errors.push_back(err);
    log_h.push_back(std::log(h));
    log_err.push_back(std::log(err));
  }
  result.slope = lsq_slope(log_h, log_err);
  return result;
}

EnergySeries energy_study(const Stepper& stepper, const SeparableSystem& sys,
                          const FpuParams& params, const PhaseState& y0,
                          double macro_step, double t_end) {
  const long long n_steps = steps_for(t_end, macro_step);
  EnergySeries series;
  series.times.reserve(static_cast<std::size_t>(n_steps) + 1);
  series.hamiltonian.reserve(static_cast<std::size_t>(n_steps) + 1);
  series.oscillatory.resize(n_steps + 1, params.m + 1);
  PhaseState y = y0;
  for (long long k = 0; k <= n_steps; ++k) {
    series.times.push_back(static_cast<double>(k) * macro_step);
    series.hamiltonian.push_back(sys.hamiltonian(y));
    const auto [per_spring, total] = oscillatory_energy(y, params);
    series.oscillatory.block(k, 0, 1, params.m) = per_spring.transpose();
    series.oscillatory(k, params.m) = total;
    if (k == n_steps) break;
    StepStats stats;
    try {
      y = stepper(y, macro_step, stats);
    } catch (const std::exception& ex) {
      throw std::runtime_error("t=" + format_g17(series.times.back()) + ": " +
                               ex.what());
    }
  }
  const double h0 = series.hamiltonian.front();
  std::vector<double> deviation(series.hamiltonian.size());
  bool all_finite = true;
  for (std::size_t i = 0; i < series.hamiltonian.size(); ++i) {
    deviation[i] = series.hamiltonian[i] - h0;
    if (!std::isfinite(deviation[i])) all_finite = false;
  }
  if (all_finite) {
    series.max_deviation = 0.0;
    for (double d : deviation) {
      series.max_deviation = std::max(series.max_deviation, std::abs(d));
    }
    series.drift_slope = lsq_slope(series.times, deviation);
  } else {
    series.max_deviation = std::numeric_limits<double>::infinity();
    series.drift_slope = std::numeric_limits<double>::quiet_NaN();
  }
  return series;
}

std::vector<double> default_sweep_steps() {
  std::vector<double> steps;
  for (int k = 5; k <= 13; ++k) steps.push_back(std::ldexp(1.0, -k));
  return steps;
}

namespace {

PhaseState composed_leapfrog_run(const SeparableSystem& sys,
                                 const PhaseState& y0, double t_end,
                                 double substep) {
  Stepper base = make_mr_lpfr_stepper(sys, 1, /*fuse_kicks=*/true);
  Stepper composed = compose_stepper(std::move(base), triple_jump(2));
  StepStats stats;
  return integrate_final(composed, y0, substep, steps_for(t_end, substep),
                         stats);
}

}  // namespace

PhaseState reference_solution(const SeparableSystem& sys, const PhaseState& y0,
                              double t_end) {
  return reference_solution(sys, y0, t_end, {}, 1e-10);
}

PhaseState reference_solution(const SeparableSystem& sys, const PhaseState& y0,
                              double t_end, const std::vector<int>& mask,
                              double gate_tol) {
  if (t_end == 0.0) return y0;
  const double substep = 1e-5;
  const PhaseState full = composed_leapfrog_run(sys, y0, t_end, substep);
  const PhaseState half = composed_leapfrog_run(sys, y0, t_end, substep / 2.0);
  const double gap = masked_gap(full, half, mask);
  if (!(gap <= gate_tol)) {
    throw std::runtime_error(
        "reference self-consistency failure: step and half-step runs differ "
        "by " +
        format_g17(gap) + " (tolerance " + format_g17(gate_tol) + ")");
  }
  return full;
}

SweepTable stability_sweep(const std::vector<SweepScheme>& schemes,
                           const std::vector<double>& omega_list,
                           const std::vector<double>& step_list, double t_end) {
  // The error norm below only sees the slow positions, so the per-stiffness
  // reference is gated on those; a full-state gate is unattainable at large
  // stiffness (the fast phases decorrelate first at any practical substep).
  constexpr double kSweepGateTol = 1e-8;
  const std::vector<int> mask = fpu_slow_position_mask(3);

  struct Column {
    SeparableSystem sys;
    PhaseState y0;
    PhaseState ref;
    std::string failure;
  };
  std::vector<Column> columns(omega_list.size());
  for (std::size_t oi = 0; oi < omega_list.size(); ++oi) {
    columns[oi].sys = fpu_system({3, omega_list[oi]});
    columns[oi].y0 = fpu_benchmark_state({3, omega_list[oi]});
  }
  run_on_pool(columns.size(), [&](std::size_t oi) {
    Column& col = columns[oi];
    try {
      col.ref = reference_solution(col.sys, col.y0, t_end, mask, kSweepGateTol);
    } catch (const std::exception& ex) {
      col.failure = ex.what();
    }
  });

  SweepTable table;
  table.cells.resize(schemes.size() * omega_list.size() * step_list.size());
  const std::size_t per_scheme = omega_list.size() * step_list.size();
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    const std::size_t si = i / per_scheme;
    const std::size_t oi = (i % per_scheme) / step_list.size();
    const std::size_t hi = i % step_list.size();
    table.cells[i].scheme = schemes[si].name;
    table.cells[i].omega = omega_list[oi];
    table.cells[i].step_size = step_list[hi];
  }
  run_on_pool(table.cells.size(), [&](std::size_t i) {
    SweepCell& cell = table.cells[i];
    const std::size_t si = i / per_scheme;
    const std::size_t oi = (i % per_scheme) / step_list.size();
    const Column& col = columns[oi];
    try {
      if (!col.failure.empty()) throw std::runtime_error(col.failure);
      Stepper step = schemes[si].make_stepper(col.sys);
      const long long n_steps = steps_for(t_end, cell.step_size);
      StepStats stats;
      const PhaseState y_end =
          integrate_final(step, col.y0, cell.step_size, n_steps, stats);
      const double err = masked_gap(y_end, col.ref, mask);
      if (!std::isfinite(err)) {
        throw std::runtime_error("non-finite error (unstable run)");
      }
      cell.error = err;
    } catch (const std::exception& ex) {
      cell.error = std::numeric_limits<double>::quiet_NaN();
      cell.note = ex.what();
    }
  });
  return table;
}

void write_convergence_csv(std::ostream& os, const ConvergenceResult& r) {
  write_csv_row(os, std::vector<std::string>{"H", "error", "slope"});
  for (std::size_t i = 0; i < r.step_sizes.size(); ++i) {
    write_csv_row(os,
                  std::vector<double>{r.step_sizes[i], r.errors[i], r.slope});
  }
}

void write_energy_csv(std::ostream& os, const EnergySeries& s) {
  const Eigen::Index m = s.oscillatory.cols() - 1;
  std::vector<std::string> header{"t", "H"};
  for (Eigen::Index j = 1; j <= m; ++j) {
    header.push_back("I_" + std::to_string(j));
  }
  header.push_back("I");
  write_csv_row(os, header);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    std::vector<double> row{s.times[i], s.hamiltonian[i]};
    for (Eigen::Index j = 0; j <= m; ++j) {
      row.push_back(s.oscillatory(static_cast<Eigen::Index>(i), j));
    }
    write_csv_row(os, row);
  }
}

void write_sweep_csv(std::ostream& os, const SweepTable& t) {
  write_csv_row(os,
                std::vector<std::string>{"scheme", "omega", "H", "error",
                                         "note"});
  for (const SweepCell& cell : t.cells) {
    std::string note = cell.note;
    std::replace(note.begin(), note.end(), ',', ';');
    write_csv_row(os, std::vector<std::string>{
                          cell.scheme, format_g17(cell.omega),
                          format_g17(cell.step_size), format_g17(cell.error),
                          note});
  }
}

}  // namespace smgark
