#include "smgark/integrators.hpp"

#include "smgark/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <utility>

namespace smgark {

NewtonError::NewtonError(const std::string& message, double residual_norm)
    : std::runtime_error(message), residual_norm_(residual_norm) {}

namespace {

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f,
                   const Vector& x, double step_scale) {
  const auto n = x.size();
  Matrix j(f(x).size(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double h = step_scale * (1.0 + std::abs(x(c)));
    Vector xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

}  // namespace

Vector newton_solve(const std::function<Vector(const Vector&)>& residual,
                    const std::function<Matrix(const Vector&)>& jacobian,
                    Vector x, const SolverConfig& cfg, long long* iters) {
  Vector r = residual(x);
  double rnorm = r.norm();
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (rnorm <= cfg.newton_abs_tol + cfg.newton_rel_tol * x.norm()) return x;
    const Matrix j =
        jacobian ? jacobian(x) : fd_jacobian(residual, x, cfg.fd_step_scale);
    const Vector dx = j.partialPivLu().solve(-r);
    if (!dx.allFinite())
      throw NewtonError("Newton linear solve produced a non-finite step",
                        rnorm);
    // Halving line search: keep the best trial, stop once the norm drops.
    double alpha = 1.0;
    double best_norm = std::numeric_limits<double>::infinity();
    Vector best_x, best_r;
    for (int halve = 0; halve <= 8; ++halve) {
      const Vector xt = x + alpha * dx;
      Vector rt = residual(xt);
      const double nt = rt.norm();
      if (nt < best_norm) {
        best_norm = nt;
        best_x = xt;
        best_r = std::move(rt);
      }
      if (nt < rnorm) break;
      alpha *= 0.5;
    }
    x = std::move(best_x);
    r = std::move(best_r);
    rnorm = best_norm;
    if (iters) ++*iters;
  }
  if (rnorm <= cfg.newton_abs_tol + cfg.newton_rel_tol * x.norm()) return x;
  throw NewtonError("Newton did not converge after " +
                        std::to_string(cfg.max_iters) +
                        " iterations (residual norm " + format_g17(rnorm) +
                        ")",
                    rnorm);
}

// ===================================================== stage-graph engine ==
namespace {

// Force kinds indexed by what applies to a stage value: momentum stages feed
// kinetic gradients, position stages feed potential gradients.
enum Kind : int { kTs = 0, kTf = 1, kVs = 2, kVf = 3 };

struct Node {
  bool is_p = false;   // momentum-type stage: base is p0 (else q0)
  int force = kTs;     // force kind evaluated at this node's value
  int guess_from = -1; // matching stage of the previous micro step, if any
  std::vector<std::pair<int, double>> terms;  // rhs += H * coeff * F(dep)
};

struct Plan {
  std::vector<Node> nodes;
  std::vector<std::vector<int>> groups;  // dependency-respecting order
  std::vector<char> implicit;            // per group
  std::vector<char> needed;              // per node
  std::vector<std::pair<int, double>> out_p, out_q;
};

/// Incrementally assembles nodes and terms, dropping structural zeros.
class PlanBuilder {
 public:
  explicit PlanBuilder(const bool* zero_force) : zero_(zero_force) {}

  int add_node(bool is_p, int force, int guess_from = -1) {
    plan_.nodes.push_back(Node{is_p, force, guess_from, {}});
    return static_cast<int>(plan_.nodes.size()) - 1;
  }

  void add_term(int node, int dep, double coeff) {
    if (coeff == 0.0 || zero_[plan_.nodes[dep].force]) return;
    plan_.nodes[node].terms.emplace_back(dep, coeff);
  }

  void add_out_p(int dep, double coeff) {
    if (coeff != 0.0 && !zero_[plan_.nodes[dep].force])
      plan_.out_p.emplace_back(dep, coeff);
  }

  void add_out_q(int dep, double coeff) {
    if (coeff != 0.0 && !zero_[plan_.nodes[dep].force])
      plan_.out_q.emplace_back(dep, coeff);
  }

  /// Dead-stage elimination + strongly-connected grouping in evaluation
  /// order (Tarjan; components complete only after their dependencies).
  Plan finish() {
    mark_needed();
    tarjan();
    return std::move(plan_);
  }

 private:
  void mark_needed() {
    const auto n = plan_.nodes.size();
    plan_.needed.assign(n, 0);
    std::vector<int> stack;
    auto push = [&](int u) {
      if (!plan_.needed[static_cast<std::size_t>(u)]) {
        plan_.needed[static_cast<std::size_t>(u)] = 1;
        stack.push_back(u);
      }
    };
    for (const auto& [dep, c] : plan_.out_p) push(dep);
    for (const auto& [dep, c] : plan_.out_q) push(dep);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& [dep, c] : plan_.nodes[u].terms) push(dep);
    }
  }

  void tarjan() {
    const int n = static_cast<int>(plan_.nodes.size());
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    int counter = 0;
    // Iterative DFS frames: (node, next edge position).
    struct Frame {
      int node;
      std::size_t edge;
    };
    for (int root = 0; root < n; ++root) {
      if (index[root] >= 0 || !plan_.needed[root]) continue;
      std::vector<Frame> frames{{root, 0}};
      index[root] = low[root] = counter++;
      stack.push_back(root);
      on_stack[root] = 1;
      while (!frames.empty()) {
        Frame& f = frames.back();
        const auto& terms = plan_.nodes[f.node].terms;
        if (f.edge < terms.size()) {
          const int w = terms[f.edge++].first;
          if (index[w] < 0) {
            index[w] = low[w] = counter++;
            stack.push_back(w);
            on_stack[w] = 1;
            frames.push_back({w, 0});
          } else if (on_stack[w]) {
            low[f.node] = std::min(low[f.node], index[w]);
          }
        } else {
          const int v = f.node;
          frames.pop_back();
          if (!frames.empty())
            low[frames.back().node] = std::min(low[frames.back().node],
                                               low[v]);
          if (low[v] == index[v]) {
            std::vector<int> comp;
            while (true) {
              const int w = stack.back();
              stack.pop_back();
              on_stack[w] = 0;
              comp.push_back(w);
              if (w == v) break;
            }
            bool self = comp.size() > 1;
            if (!self)
              for (const auto& [dep, c] : plan_.nodes[comp[0]].terms)
                if (dep == comp[0]) self = true;
            plan_.groups.push_back(std::move(comp));
            plan_.implicit.push_back(self ? 1 : 0);
          }
        }
      }
    }
  }

  Plan plan_;
  const bool* zero_;
};

/// Stage plan for the four-way multirate equations (h = H/M prefix sums,
/// micro-step coupling scalings folded into unit coefficients).
Plan build_pmgark_plan(const PartitionedMgarkTableau& t, const bool* zero) {
  const int m = t.micro_steps;
  const int ss = t.slow_stages();
  const double inv_m = 1.0 / static_cast<double>(m);
  PlanBuilder b(zero);

  std::vector<int> ps(ss), qs(ss);
  std::vector<std::vector<int>> pf(m), qf(m);
  for (int i = 0; i < ss; ++i) {
    ps[i] = b.add_node(true, kTs);
    qs[i] = b.add_node(false, kVs);
  }
  for (int k = 0; k < m; ++k) {
    const int sf = t.fast_stages(k);
    pf[k].resize(sf);
    qf[k].resize(sf);
    for (int i = 0; i < sf; ++i) {
      const bool same_shape = k > 0 && t.fast_stages(k - 1) == sf;
      pf[k][i] = b.add_node(true, kTf, same_shape ? pf[k - 1][i] : -1);
      qf[k][i] = b.add_node(false, kVf, same_shape ? qf[k - 1][i] : -1);
    }
  }

  for (int i = 0; i < ss; ++i) {
    for (int j = 0; j < ss; ++j) {
      b.add_term(ps[i], qs[j], -t.slow.tilde.a(i, j));
      b.add_term(qs[i], ps[j], t.slow.bar.a(i, j));
    }
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < t.fast_stages(k); ++j) {
        b.add_term(ps[i], qf[k][j], -inv_m * t.couple_sf_tilde[k](i, j));
        b.add_term(qs[i], pf[k][j], inv_m * t.couple_sf_bar[k](i, j));
      }
  }
  for (int k = 0; k < m; ++k) {
    const int sf = t.fast_stages(k);
    for (int i = 0; i < sf; ++i) {
      for (int l = 0; l < k; ++l)
        for (int j = 0; j < t.fast_stages(l); ++j) {
          b.add_term(pf[k][i], qf[l][j], -inv_m * t.fast[l].tilde.b(j));
          b.add_term(qf[k][i], pf[l][j], inv_m * t.fast[l].bar.b(j));
        }
      for (int j = 0; j < ss; ++j) {
        b.add_term(pf[k][i], qs[j], -t.couple_fs_tilde[k](i, j));
        b.add_term(qf[k][i], ps[j], t.couple_fs_bar[k](i, j));
      }
      for (int j = 0; j < sf; ++j) {
        b.add_term(pf[k][i], qf[k][j], -inv_m * t.fast[k].tilde.a(i, j));
        b.add_term(qf[k][i], pf[k][j], inv_m * t.fast[k].bar.a(i, j));
      }
    }
  }
  for (int j = 0; j < ss; ++j) {
    b.add_out_p(qs[j], -t.slow.tilde.b(j));
    b.add_out_q(ps[j], t.slow.bar.b(j));
  }
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < t.fast_stages(k); ++j) {
      b.add_out_p(qf[k][j], -inv_m * t.fast[k].tilde.b(j));
      b.add_out_q(pf[k][j], inv_m * t.fast[k].bar.b(j));
    }
  return b.finish();
}

/// Stage plan for the monolithic (flattened) single-rate view.
Plan build_flat_plan(const RkTableau& bar, const RkTableau& tilde,
                     int n_fast_stages, const bool* zero) {
  const int n = bar.stages();
  PlanBuilder b(zero);
  std::vector<int> p(n), q(n);
  for (int i = 0; i < n; ++i) {
    const bool fast = i < n_fast_stages;
    p[i] = b.add_node(true, fast ? kTf : kTs);
    q[i] = b.add_node(false, fast ? kVf : kVs);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      b.add_term(p[i], q[j], -tilde.a(i, j));
      b.add_term(q[i], p[j], bar.a(i, j));
    }
  for (int j = 0; j < n; ++j) {
    b.add_out_p(q[j], -tilde.b(j));
    b.add_out_q(p[j], bar.b(j));
  }
  return b.finish();
}

/// Executes a stage plan for one macro step.
class PlanRunner {
 public:
  PlanRunner(Plan plan, SeparableSystem sys, SolverConfig cfg)
      : plan_(std::move(plan)), sys_(std::move(sys)), cfg_(cfg) {
    forces_[kTs] = sys_.grad_t_slow;
    forces_[kTf] = sys_.grad_t_fast;
    forces_[kVs] = sys_.grad_v_slow;
    forces_[kVf] = sys_.grad_v_fast;
    jacs_[kTs] = sys_.hess_t_slow;
    jacs_[kTf] = sys_.hess_t_fast;
    jacs_[kVs] = sys_.hess_v_slow;
    jacs_[kVf] = sys_.hess_v_fast;
  }

  PhaseState operator()(const PhaseState& y0, double H,
                        StepStats& stats) const {
    if (y0.p.size() != sys_.dim || y0.q.size() != sys_.dim)
      throw std::invalid_argument("state dimension does not match system");
    const auto n_nodes = plan_.nodes.size();
    std::vector<Vector> value(n_nodes), fval(n_nodes);
    SolverConfig cfg = cfg_;
    if (H < 0.0) cfg.max_iters *= 2;  // composition substeps run backwards

    auto base = [&](int u) -> const Vector& {
      return plan_.nodes[u].is_p ? y0.p : y0.q;
    };
    auto eval_force = [&](int u) {
      fval[u] = forces_[plan_.nodes[u].force](value[u]);
      count(plan_.nodes[u].force, stats);
    };

    for (std::size_t g = 0; g < plan_.groups.size(); ++g) {
      const auto& group = plan_.groups[g];
      if (!plan_.implicit[g]) {
        const int u = group[0];
        Vector v = base(u);
        for (const auto& [dep, c] : plan_.nodes[u].terms)
          v += (H * c) * fval[dep];
        value[u] = std::move(v);
        eval_force(u);
        continue;
      }
      solve_group(group, y0, H, cfg, value, fval, stats);
    }

    PhaseState y1{y0.p, y0.q};
    for (const auto& [dep, c] : plan_.out_p) y1.p += (H * c) * fval[dep];
    for (const auto& [dep, c] : plan_.out_q) y1.q += (H * c) * fval[dep];
    return y1;
  }

 private:
  void count(int kind, StepStats& stats) const {
    if (kind == kVs)
      ++stats.slow_force_evals;
    else if (kind == kVf)
      ++stats.fast_force_evals;
  }

  void solve_group(const std::vector<int>& group, const PhaseState& y0,
                   double H, const SolverConfig& cfg,
                   std::vector<Vector>& value, std::vector<Vector>& fval,
                   StepStats& stats) const {
    const int dim = sys_.dim;
    const int g_size = static_cast<int>(group.size());
    std::vector<int> pos(plan_.nodes.size(), -1);
    for (int k = 0; k < g_size; ++k) pos[group[k]] = k;

    Vector guess(g_size * dim);
    for (int k = 0; k < g_size; ++k) {
      const int u = group[k];
      const int from = plan_.nodes[u].guess_from;
      guess.segment(k * dim, dim) =
          (from >= 0 && value[from].size() == dim) ? value[from]
                                                   : Vector(plan_.nodes[u].is_p
                                                                ? y0.p
                                                                : y0.q);
    }

    // Trial forces for in-group stages, refreshed on every residual call so
    // the final Newton check leaves them at the converged point.
    std::vector<Vector> trial(g_size);
    auto residual = [&](const Vector& x) {
      for (int k = 0; k < g_size; ++k) {
        value[group[k]] = x.segment(k * dim, dim);
        trial[k] = forces_[plan_.nodes[group[k]].force](value[group[k]]);
        count(plan_.nodes[group[k]].force, stats);
      }
      Vector r(g_size * dim);
      for (int k = 0; k < g_size; ++k) {
        const int u = group[k];
        Vector rhs = plan_.nodes[u].is_p ? y0.p : y0.q;
        for (const auto& [dep, c] : plan_.nodes[u].terms)
          rhs += (H * c) * (pos[dep] >= 0 ? trial[pos[dep]] : fval[dep]);
        r.segment(k * dim, dim) = x.segment(k * dim, dim) - rhs;
      }
      return r;
    };

    std::function<Matrix(const Vector&)> jac;
    if (cfg.jacobian_mode == JacobianMode::Analytic &&
        group_has_jacobians(group, pos)) {
      jac = [&, g_size, dim](const Vector& x) {
        Matrix j = Matrix::Identity(g_size * dim, g_size * dim);
        std::vector<Matrix> dep_jac(g_size);
        std::vector<char> have(g_size, 0);
        for (int k = 0; k < g_size; ++k) {
          const int u = group[k];
          for (const auto& [dep, c] : plan_.nodes[u].terms) {
            const int kd = pos[dep];
            if (kd < 0) continue;
            if (!have[kd]) {
              dep_jac[kd] = jacs_[plan_.nodes[dep].force](
                  x.segment(kd * dim, dim));
              have[kd] = 1;
            }
            j.block(k * dim, kd * dim, dim, dim) -= (H * c) * dep_jac[kd];
          }
        }
        return j;
      };
    }

    newton_solve(residual, jac, guess, cfg, &stats.newton_iters);
    // `value` and `trial` already hold the converged point (last residual
    // evaluation); publish the forces.
    for (int k = 0; k < g_size; ++k) fval[group[k]] = trial[k];
  }

  bool group_has_jacobians(const std::vector<int>& group,
                           const std::vector<int>& pos) const {
    for (int u : group)
      for (const auto& [dep, c] : plan_.nodes[u].terms)
        if (pos[dep] >= 0 && !jacs_[plan_.nodes[dep].force]) return false;
    return true;
  }

  Plan plan_;
  SeparableSystem sys_;
  SolverConfig cfg_;
  ForceFn forces_[4];
  HessianFn jacs_[4];
};

void zero_flags(const SeparableSystem& sys, bool* zero) {
  zero[kTs] = sys.zero_t_slow;
  zero[kTf] = sys.zero_t_fast;
  zero[kVs] = sys.zero_v_slow;
  zero[kVf] = sys.zero_v_fast;
}

}  // namespace

Stepper make_pmgark_stepper(const PartitionedMgarkTableau& t,
                            const SeparableSystem& sys,
                            const SolverConfig& cfg) {
  t.validate();
  bool zero[4];
  zero_flags(sys, zero);
  return PlanRunner(build_pmgark_plan(t, zero), sys, cfg);
}

std::pair<PhaseState, StepStats> step_pmgark(const PartitionedMgarkTableau& t,
                                             const SeparableSystem& sys,
                                             const PhaseState& y0, double H,
                                             const SolverConfig& cfg) {
  StepStats stats;
  PhaseState y1 = make_pmgark_stepper(t, sys, cfg)(y0, H, stats);
  return {std::move(y1), stats};
}

Stepper make_flattened_stepper(const PartitionedMgarkTableau& t,
                               const SeparableSystem& sys,
                               const SolverConfig& cfg) {
  const auto [bar, tilde] = flatten(t);
  bool zero[4];
  zero_flags(sys, zero);
  return PlanRunner(build_flat_plan(bar, tilde, t.total_fast_stages(), zero),
                    sys, cfg);
}

// ======================================================== special paths ===
namespace {

struct KickCache {
  bool valid = false;
  Vector q;
  Vector force;
};

bool cache_hit(const KickCache& cache, const Vector& q) {
  return cache.valid && cache.q.size() == q.size() &&
         (cache.q.array() == q.array()).all();
}

}  // namespace

Stepper make_mr_lpfr_stepper(const SeparableSystem& sys, int micro_steps,
                             bool fuse_kicks) {
  if (micro_steps == 1) {
    // Single-rate degeneration: plain leapfrog on the summed forces.
    return [sys](const PhaseState& y0, double H, StepStats& stats) {
      PhaseState y = y0;
      auto v_force = [&](const Vector& q) {
        ++stats.slow_force_evals;
        ++stats.fast_force_evals;
        return Vector(sys.grad_v_slow(q) + sys.grad_v_fast(q));
      };
      y.p -= 0.5 * H * v_force(y.q);
      y.q += H * (sys.grad_t_slow(y.p) + sys.grad_t_fast(y.p));
      y.p -= 0.5 * H * v_force(y.q);
      return y;
    };
  }
  if (micro_steps < 2 || micro_steps % 2 != 0)
    throw std::invalid_argument("M must be even");
  auto cache = std::make_shared<KickCache>();
  return [sys, micro_steps, fuse_kicks, cache](const PhaseState& y0, double H,
                                               StepStats& stats) {
    const double h = H / micro_steps;
    PhaseState y = y0;
    Vector vs;
    if (fuse_kicks && cache_hit(*cache, y.q)) {
      vs = cache->force;
    } else {
      vs = sys.grad_v_slow(y.q);
      ++stats.slow_force_evals;
    }
    y.p -= 0.5 * H * vs;
    for (int half = 0; half < 2; ++half) {
      if (half == 1) y.q += H * sys.grad_t_slow(y.p);
      for (int k = 0; k < micro_steps / 2; ++k) {
        y.p -= 0.5 * h * sys.grad_v_fast(y.q);
        ++stats.fast_force_evals;
        y.q += h * sys.grad_t_fast(y.p);
        y.p -= 0.5 * h * sys.grad_v_fast(y.q);
        ++stats.fast_force_evals;
      }
    }
    vs = sys.grad_v_slow(y.q);
    ++stats.slow_force_evals;
    y.p -= 0.5 * H * vs;
    if (fuse_kicks) {
      cache->valid = true;
      cache->q = y.q;
      cache->force = vs;
    }
    return y;
  };
}

std::pair<PhaseState, StepStats> step_mr_lpfr(const SeparableSystem& sys,
                                              const PhaseState& y0, double H,
                                              int micro_steps) {
  StepStats stats;
  PhaseState y1 = make_mr_lpfr_stepper(sys, micro_steps)(y0, H, stats);
  return {std::move(y1), stats};
}

Stepper make_mr_imex2_stepper(const TwoWaySystem& sys, int micro_steps,
                              const SolverConfig& cfg, bool fuse_kicks) {
  if (micro_steps < 1)
    throw std::invalid_argument("micro_steps must be positive");
  auto cache = std::make_shared<KickCache>();
  return [sys, micro_steps, cfg, fuse_kicks, cache](const PhaseState& y0,
                                                    double H,
                                                    StepStats& stats) {
    const int n = sys.dim;
    if (y0.p.size() != n || y0.q.size() != n)
      throw std::invalid_argument("state dimension does not match system");
    const double h = H / micro_steps;
    SolverConfig local = cfg;
    if (H < 0.0) local.max_iters *= 2;

    PhaseState y = y0;
    Vector slow;
    if (fuse_kicks && cache_hit(*cache, y.q)) {
      slow = cache->force;
    } else {
      slow = sys.f_slow(y).p;
      ++stats.slow_force_evals;
    }
    y.p += 0.5 * H * slow;

    Vector stage(2 * n);
    bool have_stage = false;
    for (int k = 0; k < micro_steps; ++k) {
      auto residual = [&](const Vector& x) {
        const PhaseState trial{x.head(n), x.tail(n)};
        const PhaseState f = sys.f_fast(trial);
        ++stats.fast_force_evals;
        Vector r(2 * n);
        r.head(n) = x.head(n) - y.p - 0.5 * h * f.p;
        r.tail(n) = x.tail(n) - y.q - 0.5 * h * f.q;
        return r;
      };
      std::function<Matrix(const Vector&)> jac;
      if (local.jacobian_mode == JacobianMode::Analytic && sys.jac_fast) {
        jac = [&](const Vector& x) {
          const PhaseState trial{x.head(n), x.tail(n)};
          return Matrix(Matrix::Identity(2 * n, 2 * n) -
                        0.5 * h * sys.jac_fast(trial));
        };
      }
      Vector guess(2 * n);
      if (have_stage) {
        guess = stage;
      } else {
        guess.head(n) = y.p;
        guess.tail(n) = y.q;
      }
      stage = newton_solve(residual, jac, guess, local, &stats.newton_iters);
      have_stage = true;
      // Midpoint update: y1 = y + h f(Y) = 2Y - y exactly, since the stage
      // equation fixes h f(Y) = 2 (Y - y).
      y.p = 2.0 * stage.head(n) - y.p;
      y.q = 2.0 * stage.tail(n) - y.q;
    }

    slow = sys.f_slow(y).p;
    ++stats.slow_force_evals;
    y.p += 0.5 * H * slow;
    if (fuse_kicks) {
      cache->valid = true;
      cache->q = y.q;
      cache->force = slow;
    }
    return y;
  };
}

Stepper make_mr_imex2_stepper(const SeparableSystem& sys, int micro_steps,
                              const SolverConfig& cfg, bool fuse_kicks) {
  return make_mr_imex2_stepper(imex_split(sys), micro_steps, cfg, fuse_kicks);
}

std::pair<PhaseState, StepStats> step_mr_imex2(const SeparableSystem& sys,
                                               const PhaseState& y0, double H,
                                               int micro_steps,
                                               const SolverConfig& cfg) {
  StepStats stats;
  PhaseState y1 = make_mr_imex2_stepper(sys, micro_steps, cfg)(y0, H, stats);
  return {std::move(y1), stats};
}

SeparableSystem with_kinetic_as_fast(const SeparableSystem& s) {
  SeparableSystem out = s;
  out.t_slow = [](const Vector&) { return 0.0; };
  out.grad_t_slow = [](const Vector& p) {
    return Vector(Vector::Zero(p.size()));
  };
  out.hess_t_slow = [](const Vector& p) {
    return Matrix(Matrix::Zero(p.size(), p.size()));
  };
  out.zero_t_slow = true;
  out.zero_t_fast = s.zero_t_slow && s.zero_t_fast;
  out.t_fast = [s](const Vector& p) { return s.t_slow(p) + s.t_fast(p); };
  out.grad_t_fast = [s](const Vector& p) {
    return Vector(s.grad_t_slow(p) + s.grad_t_fast(p));
  };
  if (s.hess_t_slow && s.hess_t_fast) {
    out.hess_t_fast = [s](const Vector& p) {
      return Matrix(s.hess_t_slow(p) + s.hess_t_fast(p));
    };
  } else {
    out.hess_t_fast = nullptr;
  }
  return out;
}

Stepper make_mr_imim2_stepper(const SeparableSystem& sys, int micro_steps,
                              const SolverConfig& cfg) {
  return make_pmgark_stepper(build_mr_imim2(micro_steps).as_partitioned(),
                             with_kinetic_as_fast(sys), cfg);
}

std::pair<PhaseState, StepStats> step_mr_imim2(const SeparableSystem& sys,
                                               const PhaseState& y0, double H,
                                               int micro_steps,
                                               const SolverConfig& cfg) {
  StepStats stats;
  PhaseState y1 = make_mr_imim2_stepper(sys, micro_steps, cfg)(y0, H, stats);
  return {std::move(y1), stats};
}

Stepper make_forward_euler_stepper(const SeparableSystem& sys) {
  return [sys](const PhaseState& y0, double H, StepStats& stats) {
    ++stats.slow_force_evals;
    ++stats.fast_force_evals;
    PhaseState y1;
    y1.p = y0.p - H * (sys.grad_v_slow(y0.q) + sys.grad_v_fast(y0.q));
    y1.q = y0.q + H * (sys.grad_t_slow(y0.p) + sys.grad_t_fast(y0.p));
    return y1;
  };
}

Stepper make_explicit_midpoint_stepper(const SeparableSystem& sys) {
  return [sys](const PhaseState& y0, double H, StepStats& stats) {
    auto field = [&](const PhaseState& y) {
      ++stats.slow_force_evals;
      ++stats.fast_force_evals;
      PhaseState f;
      f.p = -(sys.grad_v_slow(y.q) + sys.grad_v_fast(y.q));
      f.q = sys.grad_t_slow(y.p) + sys.grad_t_fast(y.p);
      return f;
    };
    const PhaseState f0 = field(y0);
    const PhaseState mid{y0.p + 0.5 * H * f0.p, y0.q + 0.5 * H * f0.q};
    const PhaseState f1 = field(mid);
    return PhaseState{y0.p + H * f1.p, y0.q + H * f1.q};
  };
}

// ================================================================ driver ==

std::vector<TrajectoryPoint> integrate(const Stepper& step,
                                       const PhaseState& y0, double H,
                                       long long n_steps,
                                       const Observer& observer) {
  std::vector<TrajectoryPoint> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  StepStats cumulative;
  out.push_back(TrajectoryPoint{0.0, y0, cumulative});
  PhaseState y = y0;
  for (long long k = 1; k <= n_steps; ++k) {
    try {
      y = step(y, H, cumulative);
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(k) + ": " + e.what());
    }
    const double t = static_cast<double>(k) * H;
    out.push_back(TrajectoryPoint{t, y, cumulative});
    if (observer) observer(t, y, cumulative);
  }
  return out;
}

PhaseState integrate_final(const Stepper& step, const PhaseState& y0,
                           double H, long long n_steps, StepStats& stats,
                           const Observer& observer) {
  PhaseState y = y0;
  for (long long k = 1; k <= n_steps; ++k) {
    try {
      y = step(y, H, stats);
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(k) + ": " + e.what());
    }
    if (observer) observer(static_cast<double>(k) * H, y, stats);
  }
  return y;
}

long long steps_for(double t_end, double H) {
  if (!(H > 0.0)) throw std::invalid_argument("H must be positive");
  const long long n = std::llround(t_end / H);
  if (n < 0 || std::abs(static_cast<double>(n) * H - t_end) >
                   1e-9 * std::max(1.0, std::abs(t_end)))
    throw std::invalid_argument(
        "t_end is not an integer multiple of the macro step");
  return n;
}

void write_trajectory_csv(
    std::ostream& os, const std::vector<TrajectoryPoint>& trajectory,
    const SeparableSystem& sys,
    const std::function<double(const PhaseState&)>& oscillatory) {
  std::vector<std::string> header{"t"};
  for (int i = 1; i <= sys.dim; ++i) header.push_back("p" + std::to_string(i));
  for (int i = 1; i <= sys.dim; ++i) header.push_back("q" + std::to_string(i));
  header.insert(header.end(), {"H", "I", "slow_evals", "fast_evals"});
  write_csv_row(os, header);
  for (const auto& point : trajectory) {
    std::vector<std::string> row{format_g17(point.t)};
    for (int i = 0; i < sys.dim; ++i) row.push_back(format_g17(point.y.p(i)));
    for (int i = 0; i < sys.dim; ++i) row.push_back(format_g17(point.y.q(i)));
    row.push_back(format_g17(sys.hamiltonian(point.y)));
    row.push_back(format_g17(oscillatory ? oscillatory(point.y) : 0.0));
    row.push_back(std::to_string(point.stats.slow_force_evals));
    row.push_back(std::to_string(point.stats.fast_force_evals));
    write_csv_row(os, row);
  }
}

}  // namespace smgark
