#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smgark/integrators.hpp"
#include "smgark/systems.hpp"
#include "smgark/tableau.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace smgark;

namespace {

PhaseState random_state(std::mt19937& rng, int n, double scale = 0.5) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  PhaseState y{Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    y.p(i) = dist(rng);
    y.q(i) = dist(rng);
  }
  return y;
}

double state_diff(const PhaseState& a, const PhaseState& b) {
  return std::max((a.p - b.p).cwiseAbs().maxCoeff(),
                  (a.q - b.q).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("newton_solve: linear residual converges in one iteration") {
  const Vector c = Vector{{1.5, -2.0, 0.25}};
  long long iters = 0;
  const Vector x = newton_solve(
      [&](const Vector& v) { return Vector(v - c); }, nullptr,
      Vector::Zero(3), SolverConfig{}, &iters);
  CHECK((x - c).norm() <= 1e-14);
  CHECK(iters == 1);
}

TEST_CASE("newton_solve: midpoint stage equation matches the linear solve") {
  // Stage equation Y = y0 + (h/2) A Y for the oscillator, omega = 50.
  const double omega = 50.0, h = 0.002;
  Matrix a(2, 2);
  a << 0.0, -omega * omega, 1.0, 0.0;  // d/dt [p;q] = A [p;q]
  const Vector y0{{1.0, 0.02}};
  long long iters = 0;
  const Vector y = newton_solve(
      [&](const Vector& v) { return Vector(v - y0 - 0.5 * h * a * v); },
      nullptr, y0, SolverConfig{}, &iters);
  const Vector exact =
      (Matrix::Identity(2, 2) - 0.5 * h * a).partialPivLu().solve(y0);
  CHECK((y - exact).norm() <= 1e-12);
  CHECK(iters <= 5);
}

TEST_CASE("newton_solve: rootless residual raises a diagnosable error") {
  auto residual = [](const Vector& v) {
    return Vector{{v(0) * v(0) + 1.0}};
  };
  try {
    newton_solve(residual, nullptr, Vector{{2.0}}, SolverConfig{});
    FAIL("expected NewtonError");
  } catch (const NewtonError& e) {
    CHECK(e.residual_norm() > 0.0);
    CHECK(std::string(e.what()).find("did not converge") !=
          std::string::npos);
  }
}

TEST_CASE("multirate leapfrog with zero slow parts equals plain leapfrog") {
  const auto sys = harmonic_system(3.0);
  const PhaseState y0{Vector{{0.7}}, Vector{{-0.2}}};
  const double H = 0.02, h = H / 2.0;

  auto [y1, stats] = step_mr_lpfr(sys, y0, H, 2);

  PhaseState z = y0;  // two hand-rolled leapfrog steps of size h
  for (int k = 0; k < 2; ++k) {
    z.p -= 0.5 * h * sys.grad_v_fast(z.q);
    z.q += h * sys.grad_t_fast(z.p);
    z.p -= 0.5 * h * sys.grad_v_fast(z.q);
  }
  CHECK(state_diff(y1, z) <= 1e-15);
}

TEST_CASE("single-rate degeneration at M = 1 is plain leapfrog on the "
          "summed forces") {
  const auto sys = fpu_system({2, 10.0});
  std::mt19937 rng(11);
  const PhaseState y0 = random_state(rng, 4);
  const double H = 0.003;
  auto [y1, stats] = step_mr_lpfr(sys, y0, H, 1);

  PhaseState z = y0;
  z.p -= 0.5 * H * (sys.grad_v_slow(z.q) + sys.grad_v_fast(z.q));
  z.q += H * (sys.grad_t_slow(z.p) + sys.grad_t_fast(z.p));
  z.p -= 0.5 * H * (sys.grad_v_slow(z.q) + sys.grad_v_fast(z.q));
  CHECK(state_diff(y1, z) <= 1e-15);

  CHECK_THROWS_WITH_AS(step_mr_lpfr(sys, y0, H, 3), "M must be even",
                       std::invalid_argument);
}

TEST_CASE("specialized and generic multirate leapfrog agree") {
  const auto harmonic = harmonic_system(5.0);
  const auto lpfr2 = build_mr_lpfr(2);
  const PhaseState h0{Vector{{0.3}}, Vector{{0.9}}};
  auto [generic, gs] = step_pmgark(lpfr2, harmonic, h0, 0.01);
  auto [special, ss] = step_mr_lpfr(harmonic, h0, 0.01, 2);
  CHECK(state_diff(generic, special) <= 1e-12);

  const auto fpu = fpu_system({3, 50.0});
  std::mt19937 rng(42);
  for (int m : {2, 4}) {
    const auto tableau = build_mr_lpfr(m);
    const auto stepper = make_pmgark_stepper(tableau, fpu);
    for (double H : {1e-3, 1e-2}) {
      for (int trial = 0; trial < 10; ++trial) {
        const PhaseState y0 = random_state(rng, 6);
        StepStats st;
        const PhaseState a = stepper(y0, H, st);
        const PhaseState b = step_mr_lpfr(fpu, y0, H, m).first;
        CHECK(state_diff(a, b) <= 1e-12);
      }
    }
  }
}

TEST_CASE("specialized and generic implicit-explicit steppers agree") {
  const auto fpu = fpu_system({3, 50.0});
  const auto fast_kinetic = with_kinetic_as_fast(fpu);
  std::mt19937 rng(43);
  for (int m : {2, 4}) {
    const auto tableau = build_mr_imex2(m).as_partitioned();
    const auto generic = make_pmgark_stepper(tableau, fast_kinetic);
    const auto special = make_mr_imex2_stepper(fpu, m);
    for (double H : {1e-3, 1e-2}) {
      for (int trial = 0; trial < 10; ++trial) {
        const PhaseState y0 = random_state(rng, 6);
        StepStats sa, sb;
        const PhaseState a = generic(y0, H, sa);
        const PhaseState b = special(y0, H, sb);
        CHECK(state_diff(a, b) <= 1e-11);
        // Pruned generic path and impulse path agree on slow-force work.
        CHECK(sa.slow_force_evals == 2);
        CHECK(sb.slow_force_evals == 2);
      }
    }
  }
}

TEST_CASE("implicit-explicit micro step equals the exact midpoint map on a "
          "linear system") {
  const double omega = 7.0, H = 0.01;
  const auto sys = harmonic_system(omega);
  const PhaseState y0{Vector{{0.4}}, Vector{{-0.1}}};
  auto [y1, stats] = step_mr_imex2(sys, y0, H, 1);

  Matrix a(2, 2);
  a << 0.0, -omega * omega, 1.0, 0.0;
  const Matrix left = Matrix::Identity(2, 2) - 0.5 * H * a;
  const Matrix right = Matrix::Identity(2, 2) + 0.5 * H * a;
  const Vector exact = left.partialPivLu().solve(right * Vector{{y0.p(0),
                                                                 y0.q(0)}});
  CHECK(std::abs(y1.p(0) - exact(0)) <= 1e-12);
  CHECK(std::abs(y1.q(0) - exact(1)) <= 1e-12);
}

TEST_CASE("kick fusion amortizes slow forces to N+1 evaluations") {
  const auto fpu = fpu_system({3, 50.0});
  const PhaseState y0 = fpu_benchmark_state({3, 50.0});
  const auto fused = make_mr_imex2_stepper(fpu, 5, SolverConfig{}, true);
  StepStats stats;
  integrate_final(fused, y0, 0.01, 10, stats);
  CHECK(stats.slow_force_evals == 11);

  const auto plain = make_mr_imex2_stepper(fpu, 5);
  StepStats unfused;
  integrate_final(plain, y0, 0.01, 10, unfused);
  CHECK(unfused.slow_force_evals == 20);

  // Fusion must not change the trajectory.
  StepStats sa, sb;
  const PhaseState a = integrate_final(fused, y0, 0.01, 3, sa);
  const PhaseState b = integrate_final(plain, y0, 0.01, 3, sb);
  CHECK(state_diff(a, b) == 0.0);

  const auto lpfr_fused = make_mr_lpfr_stepper(fpu, 4, true);
  StepStats ls;
  integrate_final(lpfr_fused, y0, 0.01, 10, ls);
  CHECK(ls.slow_force_evals == 11);
}

TEST_CASE("implicit-implicit stepper matches the monolithic single-rate "
          "route") {
  const auto fpu = fpu_system({3, 50.0});
  const auto fast_kinetic = with_kinetic_as_fast(fpu);
  std::mt19937 rng(44);
  for (int m : {1, 3}) {
    const auto tableau = build_mr_imim2(m).as_partitioned();
    const auto flat = make_flattened_stepper(tableau, fast_kinetic);
    const auto multi = make_mr_imim2_stepper(fpu, m);
    for (int trial = 0; trial < 5; ++trial) {
      const PhaseState y0 = random_state(rng, 6);
      StepStats sa, sb;
      const PhaseState a = flat(y0, 0.01, sa);
      const PhaseState b = multi(y0, 0.01, sb);
      CHECK(state_diff(a, b) <= 1e-11);
    }
  }
}

TEST_CASE("multirate leapfrog matches the monolithic single-rate route") {
  const auto fpu = fpu_system({2, 20.0});
  std::mt19937 rng(45);
  const auto tableau = build_mr_lpfr(4);
  const auto flat = make_flattened_stepper(tableau, fpu);
  const auto multi = make_pmgark_stepper(tableau, fpu);
  for (int trial = 0; trial < 5; ++trial) {
    const PhaseState y0 = random_state(rng, 4);
    StepStats sa, sb;
    CHECK(state_diff(flat(y0, 0.02, sa), multi(y0, 0.02, sb)) <= 1e-12);
  }
}

TEST_CASE("implicit-implicit stepper is time-reversible to solver accuracy") {
  const auto fpu = fpu_system({3, 50.0});
  const PhaseState y0 = fpu_benchmark_state({3, 50.0});
  const auto stepper = make_mr_imim2_stepper(fpu, 3);
  StepStats stats;
  const PhaseState forward = stepper(y0, 0.05, stats);
  const PhaseState back =
      stepper(momentum_reversal(forward), 0.05, stats);
  CHECK(state_diff(momentum_reversal(back), y0) <= 1e-11);
}

TEST_CASE("negative macro steps work (composition substeps)") {
  const auto fpu = fpu_system({3, 50.0});
  const PhaseState y0 = fpu_benchmark_state({3, 50.0});
  for (const auto& stepper :
       {make_mr_lpfr_stepper(fpu, 2), make_mr_imex2_stepper(fpu, 2),
        make_mr_imim2_stepper(fpu, 2)}) {
    StepStats stats;
    const PhaseState there = stepper(y0, 0.01, stats);
    const PhaseState back = stepper(there, -0.01, stats);
    CHECK(state_diff(back, y0) <= 1e-10);
  }
}

TEST_CASE("integrate: trivial runs, analytic oracle, and error reporting") {
  const auto sys = harmonic_system(1.0);
  const PhaseState y0{Vector{{0.0}}, Vector{{1.0}}};

  const auto none = integrate(make_mr_lpfr_stepper(sys, 2), y0, 0.1, 0);
  REQUIRE(none.size() == 1);
  CHECK(state_diff(none[0].y, y0) == 0.0);

  const double period = 2.0 * M_PI;
  const long long n = 629;  // ~2*pi/0.01
  const double H = period / static_cast<double>(n);
  const auto traj = integrate(make_mr_lpfr_stepper(sys, 2), y0, H, n);
  REQUIRE(traj.size() == static_cast<std::size_t>(n) + 1);
  CHECK(state_diff(traj.back().y, y0) <= 1e-3);
  CHECK(traj.back().t == doctest::Approx(period).epsilon(1e-12));

  // A Newton failure reports the failing step index.
  const auto fpu = fpu_system({3, 50.0});
  SolverConfig strict;
  strict.max_iters = 1;
  strict.newton_rel_tol = 1e-30;
  strict.newton_abs_tol = 1e-30;
  const auto doomed = make_mr_imim2_stepper(fpu, 2, strict);
  try {
    integrate(doomed, fpu_benchmark_state({3, 50.0}), 0.05, 3);
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("steps_for validates divisibility") {
  CHECK(steps_for(1.0, 0.1) == 10);
  CHECK(steps_for(220.0, 0.1) == 2200);
  CHECK(steps_for(0.0, 0.1) == 0);
  CHECK_THROWS_AS(steps_for(1.05, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(steps_for(1.0, -0.1), std::invalid_argument);
}

TEST_CASE("trajectory CSV layout") {
  const auto sys = harmonic_system(2.0);
  const PhaseState y0{Vector{{0.1}}, Vector{{0.2}}};
  const auto traj = integrate(make_mr_lpfr_stepper(sys, 2), y0, 0.01, 3);
  std::ostringstream os;
  write_trajectory_csv(os, traj, sys);
  const std::string text = os.str();
  CHECK(text.rfind("t,p1,q1,H,I,slow_evals,fast_evals\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(text.find("\r") == std::string::npos);
}
