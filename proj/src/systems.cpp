#include "smgark/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace smgark {

double SeparableSystem::hamiltonian(const PhaseState& y) const {
  return t_slow(y.p) + t_fast(y.p) + v_slow(y.q) + v_fast(y.q);
}

namespace {

double cube(double x) { return x * x * x; }

/// Masked quadratic helpers: energy 1/2 * sum of selected components^2.
Vector masked(const Vector& x, int parity) {
  Vector out = Vector::Zero(x.size());
  for (Eigen::Index i = parity; i < x.size(); i += 2) out(i) = x(i);
  return out;
}

double masked_half_square(const Vector& x, int parity) {
  double s = 0.0;
  for (Eigen::Index i = parity; i < x.size(); i += 2) s += x(i) * x(i);
  return 0.5 * s;
}

Matrix masked_identity(int n, int parity, double scale) {
  Matrix out = Matrix::Zero(n, n);
  for (int i = parity; i < n; i += 2) out(i, i) = scale;
  return out;
}

/// Soft-spring elongations of the chain: u_0 at the left wall, u_1..u_{m-1}
/// between neighbouring masses, u_m at the right wall.
Vector chain_elongations(const Vector& q, int m) {
  Vector u(m + 1);
  u(0) = q(0) - q(1);
  for (int i = 1; i < m; ++i)
    u(i) = q(2 * i) - q(2 * i + 1) - q(2 * i - 2) - q(2 * i - 1);
  u(m) = q(2 * m - 2) + q(2 * m - 1);
  return u;
}

}  // namespace

SeparableSystem fpu_system(const FpuParams& params) {
  if (params.m < 1) throw std::invalid_argument("m must be positive");
  if (!(params.omega > 0.0))
    throw std::invalid_argument("omega must be positive");
  const int m = params.m;
  const int n = 2 * m;
  const double w2 = params.omega * params.omega;

  SeparableSystem s;
  s.dim = n;
  s.name = "fpu";
  s.t_slow = [](const Vector& p) { return masked_half_square(p, 0); };
  s.t_fast = [](const Vector& p) { return masked_half_square(p, 1); };
  s.grad_t_slow = [](const Vector& p) { return masked(p, 0); };
  s.grad_t_fast = [](const Vector& p) { return masked(p, 1); };
  s.hess_t_slow = [n](const Vector&) { return masked_identity(n, 0, 1.0); };
  s.hess_t_fast = [n](const Vector&) { return masked_identity(n, 1, 1.0); };

  s.v_fast = [w2](const Vector& q) { return w2 * masked_half_square(q, 1); };
  s.grad_v_fast = [w2](const Vector& q) { return Vector(w2 * masked(q, 1)); };
  s.hess_v_fast = [n, w2](const Vector&) {
    return masked_identity(n, 1, w2);
  };

  s.v_slow = [m](const Vector& q) {
    const Vector u = chain_elongations(q, m);
    double sum = 0.0;
    for (int i = 0; i <= m; ++i) sum += u(i) * u(i) * u(i) * u(i);
    return 0.25 * sum;
  };
  s.grad_v_slow = [m, n](const Vector& q) {
    const Vector u = chain_elongations(q, m);
    Vector g = Vector::Zero(n);
    const double w0 = cube(u(0));
    g(0) += w0;
    g(1) -= w0;
    for (int i = 1; i < m; ++i) {
      const double w = cube(u(i));
      g(2 * i) += w;
      g(2 * i + 1) -= w;
      g(2 * i - 2) -= w;
      g(2 * i - 1) -= w;
    }
    const double wm = cube(u(m));
    g(n - 2) += wm;
    g(n - 1) += wm;
    return g;
  };
  s.hess_v_slow = [m, n](const Vector& q) {
    const Vector u = chain_elongations(q, m);
    Matrix h = Matrix::Zero(n, n);
    // Each spring contributes 3 u^2 d d^T with d the elongation direction.
    auto add = [&](double u_val, const std::vector<std::pair<int, double>>&
                                     dir) {
      const double c = 3.0 * u_val * u_val;
      for (const auto& [i, di] : dir)
        for (const auto& [j, dj] : dir) h(i, j) += c * di * dj;
    };
    add(u(0), {{0, 1.0}, {1, -1.0}});
    for (int i = 1; i < m; ++i)
      add(u(i), {{2 * i, 1.0},
                 {2 * i + 1, -1.0},
                 {2 * i - 2, -1.0},
                 {2 * i - 1, -1.0}});
    add(u(m), {{n - 2, 1.0}, {n - 1, 1.0}});
    return h;
  };
  return s;
}

std::pair<Vector, double> oscillatory_energy(const PhaseState& y,
                                             const FpuParams& params) {
  const int m = params.m;
  if (y.p.size() != 2 * m || y.q.size() != 2 * m)
    throw std::invalid_argument("state dimension does not match parameters");
  const double w2 = params.omega * params.omega;
  Vector per_spring(m);
  for (int j = 0; j < m; ++j) {
    const double pj = y.p(2 * j + 1);
    const double qj = y.q(2 * j + 1);
    per_spring(j) = 0.5 * (pj * pj + w2 * qj * qj);
  }
  return {per_spring, per_spring.sum()};
}

PhaseState fpu_benchmark_state(const FpuParams& params) {
  PhaseState y = zero_state(2 * params.m);
  y.q(0) = 1.0;
  y.q(1) = 1.0 / params.omega;
  y.p(0) = 1.0;
  y.p(1) = 1.0;
  return y;
}

std::vector<int> fpu_slow_indices(int m) {
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = 2 * i;
  return idx;
}

std::vector<int> fpu_slow_position_mask(int m) {
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = 2 * m + 2 * i;
  return idx;
}

SeparableSystem harmonic_system(double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
  const double w2 = omega * omega;
  SeparableSystem s;
  s.dim = 1;
  s.name = "harmonic";
  s.zero_t_slow = true;
  s.zero_v_slow = true;
  auto zero_energy = [](const Vector&) { return 0.0; };
  auto zero_force = [](const Vector& x) { return Vector(Vector::Zero(x.size())); };
  auto zero_hess = [](const Vector& x) {
    return Matrix(Matrix::Zero(x.size(), x.size()));
  };
  s.t_slow = zero_energy;
  s.v_slow = zero_energy;
  s.grad_t_slow = zero_force;
  s.grad_v_slow = zero_force;
  s.hess_t_slow = zero_hess;
  s.hess_v_slow = zero_hess;
  s.t_fast = [](const Vector& p) { return 0.5 * p.squaredNorm(); };
  s.grad_t_fast = [](const Vector& p) { return p; };
  s.hess_t_fast = [](const Vector& p) {
    return Matrix(Matrix::Identity(p.size(), p.size()));
  };
  s.v_fast = [w2](const Vector& q) { return 0.5 * w2 * q.squaredNorm(); };
  s.grad_v_fast = [w2](const Vector& q) { return Vector(w2 * q); };
  s.hess_v_fast = [w2](const Vector& q) {
    return Matrix(w2 * Matrix::Identity(q.size(), q.size()));
  };
  return s;
}

PhaseState harmonic_flow(double omega, const PhaseState& y0, double t) {
  const double c = std::cos(omega * t);
  const double s = std::sin(omega * t);
  PhaseState y;
  y.p = c * y0.p - omega * s * y0.q;
  y.q = c * y0.q + (s / omega) * y0.p;
  return y;
}

TwoWaySystem imex_split(const SeparableSystem& s) {
  TwoWaySystem out;
  out.dim = s.dim;
  out.f_slow = [s](const PhaseState& y) {
    PhaseState f;
    f.p = -s.grad_v_slow(y.q);
    f.q = Vector::Zero(y.q.size());
    return f;
  };
  out.f_fast = [s](const PhaseState& y) {
    PhaseState f;
    f.p = -s.grad_v_fast(y.q);
    f.q = s.grad_t_slow(y.p) + s.grad_t_fast(y.p);
    return f;
  };
  if (s.hess_v_fast && s.hess_t_slow && s.hess_t_fast) {
    out.jac_fast = [s](const PhaseState& y) {
      const auto n = y.p.size();
      Matrix j = Matrix::Zero(2 * n, 2 * n);
      j.topRightCorner(n, n) = -s.hess_v_fast(y.q);
      j.bottomLeftCorner(n, n) = s.hess_t_slow(y.p) + s.hess_t_fast(y.p);
      return j;
    };
  }
  return out;
}

PhaseState momentum_reversal(const PhaseState& y) {
  return PhaseState{-y.p, y.q};
}

PhaseState zero_state(int dim) {
  return PhaseState{Vector::Zero(dim), Vector::Zero(dim)};
}

}  // namespace smgark
