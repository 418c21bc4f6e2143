#include "smgark/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "smgark/csv.hpp"

namespace smgark {

namespace {

Vector ones(int n) { return Vector::Ones(n); }

void add_entry(ConditionReport& report, std::string id, double lhs,
               double rhs) {
  report.entries.push_back(ConditionEntry{std::move(id), lhs, rhs, lhs - rhs});
}

void finalize(ConditionReport& report) {
  report.pass = report.max_residual() <= report.tol;
}

/// Pointers into one half (bar or tilde) of a partitioned tableau.
struct HalfView {
  const Matrix* ss = nullptr;
  const Vector* bs = nullptr;
  std::vector<const Matrix*> ff, sf, fs;
  std::vector<const Vector*> bf;
  std::string label;
};

HalfView make_view(const PartitionedMgarkTableau& t, bool bar) {
  HalfView v;
  v.label = bar ? "bar" : "tilde";
  v.ss = bar ? &t.slow.bar.a : &t.slow.tilde.a;
  v.bs = bar ? &t.slow.bar.b : &t.slow.tilde.b;
  for (int k = 0; k < t.micro_steps; ++k) {
    v.ff.push_back(bar ? &t.fast[k].bar.a : &t.fast[k].tilde.a);
    v.bf.push_back(bar ? &t.fast[k].bar.b : &t.fast[k].tilde.b);
    v.sf.push_back(bar ? &t.couple_sf_bar[k] : &t.couple_sf_tilde[k]);
    v.fs.push_back(bar ? &t.couple_fs_bar[k] : &t.couple_fs_tilde[k]);
  }
  return v;
}

/// Accuracy conditions led by half X (its weights start every row) against
/// the opposite half Y.  The slow tier is sampled once per macro step, the
/// fast tier M times, which puts factors of M on the fast-side right-hand
/// sides.  Completed micro steps enter through (lambda-1) shifts and through
/// suffix sums of the fast weights.
void order_conditions_half(ConditionReport& rep,
                           const PartitionedMgarkTableau& t, const HalfView& X,
                           const HalfView& Y, int p_max) {
  const int m = t.micro_steps;
  const double M = static_cast<double>(m);
  const int s = t.slow_stages();
  const Vector one_s = ones(s);

  add_entry(rep, "p1.slow." + X.label, X.bs->sum(), 1.0);
  double fast_b_sum = 0.0;
  for (int k = 0; k < m; ++k) fast_b_sum += X.bf[k]->sum();
  add_entry(rep, "p1.fast." + X.label, fast_b_sum, M);
  if (p_max < 2) return;

  const std::string xy = X.label + "-" + Y.label;

  // Row sums used repeatedly below.
  const Vector x_ss_rows = (*X.ss) * one_s;
  const Vector y_ss_rows = (*Y.ss) * one_s;
  Vector x_sf_rows = Vector::Zero(s);
  Vector y_sf_rows = Vector::Zero(s);
  for (int k = 0; k < m; ++k) {
    x_sf_rows += (*X.sf[k]) * ones(t.fast_stages(k));
    y_sf_rows += (*Y.sf[k]) * ones(t.fast_stages(k));
  }

  add_entry(rep, "p2.slow." + xy + "-ss", X.bs->dot(y_ss_rows), 0.5);
  add_entry(rep, "p2.slow." + xy + "-sf", X.bs->dot(y_sf_rows), 0.5 * M);
  double ff = 0.0;
  double fs = 0.0;
  for (int k = 0; k < m; ++k) {
    ff += X.bf[k]->dot((*Y.ff[k]) * ones(t.fast_stages(k)));
    fs += X.bf[k]->dot((*Y.fs[k]) * one_s);
  }
  add_entry(rep, "p2.fast." + xy + "-ff", ff, 0.5 * M);
  add_entry(rep, "p2.fast." + xy + "-fs", fs, 0.5 * M);
  if (p_max < 3) return;

  // Trailing fast weight mass after micro step k+1 (exclusive suffix sums of
  // the leading half's fast weights).
  std::vector<double> suffix(m + 1, 0.0);
  for (int k = m - 1; k >= 0; --k) suffix[k] = suffix[k + 1] + X.bf[k]->sum();

  // Slow-rooted trees.
  add_entry(rep, "p3.slow.diag-ss." + X.label,
            X.bs->dot(y_ss_rows.cwiseProduct(x_ss_rows)), 1.0 / 3.0);
  add_entry(rep, "p3.slow.diag-sf." + X.label,
            X.bs->dot(y_ss_rows.cwiseProduct(x_sf_rows)), M / 3.0);
  add_entry(rep, "p3.slow.diag-sfsf." + X.label,
            X.bs->dot(y_sf_rows.cwiseProduct(x_sf_rows)), M * M / 3.0);
  add_entry(rep, "p3.slow.chain-ss." + X.label, X.bs->dot((*Y.ss) * x_ss_rows),
            1.0 / 6.0);
  add_entry(rep, "p3.slow.chain-sf." + X.label, X.bs->dot((*Y.ss) * x_sf_rows),
            M / 6.0);
  Vector cross_sffs = Vector::Zero(s);
  Vector shift_sfff = Vector::Zero(s);
  for (int k = 0; k < m; ++k) {
    const Vector one_f = ones(t.fast_stages(k));
    cross_sffs += (*Y.sf[k]) * ((*X.fs[k]) * one_s);
    shift_sfff +=
        (*Y.sf[k]) * ((*X.ff[k]) * one_f + static_cast<double>(k) * one_f);
  }
  add_entry(rep, "p3.slow.cross-sffs." + X.label, X.bs->dot(cross_sffs),
            M / 6.0);
  add_entry(rep, "p3.slow.shift-sfff." + X.label, X.bs->dot(shift_sfff),
            M * M / 6.0);

  // Fast-rooted trees.
  double diag_ff = 0.0, shift_fs = 0.0, diag_fs = 0.0, chain_ff = 0.0;
  double prefix_fs = 0.0, cross_fssf = 0.0;
  Vector fs_weighted = Vector::Zero(s);
  for (int k = 0; k < m; ++k) {
    const Vector one_f = ones(t.fast_stages(k));
    const Vector y_ff_rows = (*Y.ff[k]) * one_f;
    const Vector x_ff_rows = (*X.ff[k]) * one_f;
    const Vector y_fs_rows = (*Y.fs[k]) * one_s;
    const Vector x_fs_rows = (*X.fs[k]) * one_s;
    diag_ff += X.bf[k]->dot(y_ff_rows.cwiseProduct(x_ff_rows));
    shift_fs += X.bf[k]
                    ->cwiseProduct(y_ff_rows + static_cast<double>(k) * one_f)
                    .dot(x_fs_rows);
    diag_fs += X.bf[k]->cwiseProduct(y_fs_rows).dot(x_fs_rows);
    chain_ff += X.bf[k]->dot((*Y.ff[k]) * x_ff_rows);
    prefix_fs += X.bf[k]->dot((*Y.ff[k]) * x_fs_rows) +
                 suffix[k + 1] * X.bf[k]->dot(x_fs_rows);
    cross_fssf += X.bf[k]->dot((*Y.fs[k]) * x_sf_rows);
    fs_weighted += Y.fs[k]->transpose() * (*X.bf[k]);
  }
  add_entry(rep, "p3.fast.diag-ff." + X.label, diag_ff, M / 3.0);
  add_entry(rep, "p3.fast.shift-fs." + X.label, shift_fs, M * M / 3.0);
  add_entry(rep, "p3.fast.diag-fs." + X.label, diag_fs, M / 3.0);
  add_entry(rep, "p3.fast.chain-ff." + X.label, chain_ff, M / 6.0);
  add_entry(rep, "p3.fast.prefix-fs." + X.label, prefix_fs, M * M / 6.0);
  add_entry(rep, "p3.fast.cross-fssf." + X.label, cross_fssf, M * M / 6.0);
  add_entry(rep, "p3.fast.fs-ss." + X.label, fs_weighted.dot(x_ss_rows),
            M / 6.0);
}

void check_p_max(int p_max) {
  if (p_max < 1 || p_max > 3) {
    throw std::invalid_argument("p_max must be 1, 2, or 3");
  }
}

/// One half of the flattened monolithic tableau sliced into tier blocks.
/// Index 0 = slow tier, 1 = fast tier.
struct FlatView {
  Matrix a[2][2];
  Vector b[2];
  std::string label;
};

FlatView make_flat_view(const RkTableau& half, int fast_total, int slow,
                        std::string label) {
  FlatView v;
  v.label = std::move(label);
  v.a[1][1] = half.a.topLeftCorner(fast_total, fast_total);
  v.a[1][0] = half.a.topRightCorner(fast_total, slow);
  v.a[0][1] = half.a.bottomLeftCorner(slow, fast_total);
  v.a[0][0] = half.a.bottomRightCorner(slow, slow);
  v.b[1] = half.b.head(fast_total);
  v.b[0] = half.b.tail(slow);
  return v;
}

constexpr const char* kTier[2] = {"s", "f"};

void flat_conditions_half(ConditionReport& rep, const FlatView& X,
                          const FlatView& Y, int p_max) {
  const int n[2] = {static_cast<int>(X.b[0].size()),
                    static_cast<int>(X.b[1].size())};
  for (int q = 0; q < 2; ++q) {
    add_entry(rep, std::string("flat.p1.") + kTier[q] + "." + X.label,
              X.b[q].sum(), 1.0);
  }
  if (p_max < 2) return;
  for (int q = 0; q < 2; ++q) {
    for (int mm = 0; mm < 2; ++mm) {
      add_entry(rep,
                std::string("flat.p2.") + kTier[q] + kTier[mm] + "." + X.label,
                X.b[q].dot(Y.a[q][mm] * ones(n[mm])), 0.5);
    }
  }
  if (p_max < 3) return;
  // Leaf-pair trees: the inner-density factor comes from the opposite half,
  // the second leaf chain from the leading half.  Per root tier only the
  // combinations that appear in the block-form condition set.
  const int bushy[2][3][2] = {{{0, 0}, {0, 1}, {1, 1}},
                              {{1, 1}, {1, 0}, {0, 0}}};
  for (int q = 0; q < 2; ++q) {
    for (const auto& mr : bushy[q]) {
      const int mm = mr[0], r = mr[1];
      add_entry(rep,
                std::string("flat.p3.bushy.") + kTier[q] + "." + kTier[mm] +
                    kTier[r] + "." + X.label,
                X.b[q].dot((Y.a[q][mm] * ones(n[mm]))
                               .cwiseProduct(X.a[q][r] * ones(n[r]))),
                1.0 / 3.0);
    }
  }
  for (int q = 0; q < 2; ++q) {
    for (int mm = 0; mm < 2; ++mm) {
      for (int r = 0; r < 2; ++r) {
        add_entry(rep,
                  std::string("flat.p3.tall.") + kTier[q] + kTier[mm] +
                      kTier[r] + "." + X.label,
                  X.b[q].dot(Y.a[q][mm] * (X.a[mm][r] * ones(n[r]))),
                  1.0 / 6.0);
      }
    }
  }
}

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Max residual of  Abar^T Btilde + Bbar Atilde - bbar btilde^T = 0, the
/// bilinear identity conserving the symplectic two-form across one step.
/// `b_bar` weights the rows of the tilde block, `b_tilde` the columns of the
/// transposed bar block.
double symplectic_residual(const Matrix& a_bar, const Matrix& a_tilde,
                           const Vector& b_bar, const Vector& b_tilde) {
  Matrix lhs = a_bar.transpose() * b_tilde.asDiagonal();
  lhs += b_bar.asDiagonal() * a_tilde;
  lhs -= b_bar * b_tilde.transpose();
  return max_abs(lhs);
}

}  // namespace

double ConditionReport::max_residual() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, std::abs(e.residual));
  return worst;
}

const ConditionEntry* ConditionReport::find(std::string_view id) const {
  for (const auto& e : entries) {
    if (e.condition_id == id) return &e;
  }
  return nullptr;
}

int ConditionReport::count_prefix(std::string_view prefix) const {
  int n = 0;
  for (const auto& e : entries) {
    if (std::string_view(e.condition_id).substr(0, prefix.size()) == prefix) {
      ++n;
    }
  }
  return n;
}

ConditionReport order_report(const PartitionedMgarkTableau& t, int p_max,
                             double tol) {
  check_p_max(p_max);
  t.validate();
  ConditionReport rep;
  rep.tol = tol;
  const HalfView bar = make_view(t, true);
  const HalfView tilde = make_view(t, false);
  order_conditions_half(rep, t, bar, tilde, p_max);
  order_conditions_half(rep, t, tilde, bar, p_max);
  finalize(rep);
  return rep;
}

ConditionReport order_report_flattened(const PartitionedMgarkTableau& t,
                                       int p_max, double tol) {
  check_p_max(p_max);
  t.validate();
  ConditionReport rep;
  rep.tol = tol;
  const auto [bar, tilde] = flatten(t);
  const int fast_total = t.total_fast_stages();
  const int slow = t.slow_stages();
  const FlatView x = make_flat_view(bar, fast_total, slow, "bar");
  const FlatView y = make_flat_view(tilde, fast_total, slow, "tilde");
  flat_conditions_half(rep, x, y, p_max);
  flat_conditions_half(rep, y, x, p_max);
  finalize(rep);
  return rep;
}

ConditionReport is_symplectic(const PartitionedMgarkTableau& t, double tol) {
  t.validate();
  ConditionReport rep;
  rep.tol = tol;
  add_entry(rep, "symplectic.a",
            symplectic_residual(t.slow.bar.a, t.slow.tilde.a, t.slow.bar.b,
                                t.slow.tilde.b),
            0.0);
  for (int k = 0; k < t.micro_steps; ++k) {
    const std::string suffix = ".lambda=" + std::to_string(k + 1);
    add_entry(rep, "symplectic.b" + suffix,
              symplectic_residual(t.fast[k].bar.a, t.fast[k].tilde.a,
                                  t.fast[k].bar.b, t.fast[k].tilde.b),
              0.0);
    // Coupling rows mix the tiers: the fast-reads-slow bar block pairs with
    // the slow-reads-fast tilde block, weighted by the tier each one feeds.
    add_entry(rep, "symplectic.c" + suffix,
              symplectic_residual(t.couple_fs_bar[k], t.couple_sf_tilde[k],
                                  t.slow.bar.b, t.fast[k].tilde.b),
              0.0);
    add_entry(rep, "symplectic.d" + suffix,
              symplectic_residual(t.couple_sf_bar[k], t.couple_fs_tilde[k],
                                  t.fast[k].bar.b, t.slow.tilde.b),
              0.0);
  }
  finalize(rep);
  return rep;
}

ConditionReport is_symmetric(const PartitionedMgarkTableau& t, double tol) {
  t.validate();
  ConditionReport rep;
  rep.tol = tol;
  const PartitionedMgarkTableau adj = adjoint_tableau(t);
  add_entry(rep, "symmetric.slow.bar.a", max_abs(adj.slow.bar.a - t.slow.bar.a),
            0.0);
  add_entry(rep, "symmetric.slow.bar.b",
            max_abs(adj.slow.bar.b - t.slow.bar.b), 0.0);
  add_entry(rep, "symmetric.slow.tilde.a",
            max_abs(adj.slow.tilde.a - t.slow.tilde.a), 0.0);
  add_entry(rep, "symmetric.slow.tilde.b",
            max_abs(adj.slow.tilde.b - t.slow.tilde.b), 0.0);
  for (int k = 0; k < t.micro_steps; ++k) {
    const std::string suffix = ".lambda=" + std::to_string(k + 1);
    add_entry(rep, "symmetric.fast.bar.a" + suffix,
              max_abs(adj.fast[k].bar.a - t.fast[k].bar.a), 0.0);
    add_entry(rep, "symmetric.fast.bar.b" + suffix,
              max_abs(adj.fast[k].bar.b - t.fast[k].bar.b), 0.0);
    add_entry(rep, "symmetric.fast.tilde.a" + suffix,
              max_abs(adj.fast[k].tilde.a - t.fast[k].tilde.a), 0.0);
    add_entry(rep, "symmetric.fast.tilde.b" + suffix,
              max_abs(adj.fast[k].tilde.b - t.fast[k].tilde.b), 0.0);
    add_entry(rep, "symmetric.couple-sf.bar" + suffix,
              max_abs(adj.couple_sf_bar[k] - t.couple_sf_bar[k]), 0.0);
    add_entry(rep, "symmetric.couple-sf.tilde" + suffix,
              max_abs(adj.couple_sf_tilde[k] - t.couple_sf_tilde[k]), 0.0);
    add_entry(rep, "symmetric.couple-fs.bar" + suffix,
              max_abs(adj.couple_fs_bar[k] - t.couple_fs_bar[k]), 0.0);
    add_entry(rep, "symmetric.couple-fs.tilde" + suffix,
              max_abs(adj.couple_fs_tilde[k] - t.couple_fs_tilde[k]), 0.0);
  }
  finalize(rep);
  return rep;
}

bool is_explicit(const PartitionedMgarkTableau& t) {
  t.validate();
  const auto [bar, tilde] = flatten(t);
  const int fast_total = t.total_fast_stages();
  const int slow = t.slow_stages();
  const FlatView pos = make_flat_view(bar, fast_total, slow, "bar");
  const FlatView mom = make_flat_view(tilde, fast_total, slow, "tilde");
  for (int q = 0; q < 2; ++q) {
    for (int mm = 0; mm < 2; ++mm) {
      const Matrix prod =
          pos.a[q][mm].cwiseProduct(mom.a[mm][q].transpose());
      if (max_abs(prod) != 0.0) return false;
    }
  }
  return true;
}

bool is_decoupled(const MgarkTableau& t) {
  const int m = t.micro_steps;
  const int s = t.slow_stages();
  std::vector<int> offset(m + 1, 0);
  for (int k = 0; k < m; ++k) offset[k + 1] = offset[k] + t.fast_stages(k);
  const int fast_total = offset[m];
  const int n = fast_total + s;
  auto fast_node = [&](int k, int i) { return offset[k] + i; };
  auto slow_node = [&](int i) { return fast_total + i; };
  // Block index per node: micro step k for fast stages, m for slow stages.
  std::vector<int> block(n);
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < t.fast_stages(k); ++i) block[fast_node(k, i)] = k;
  }
  for (int i = 0; i < s; ++i) block[slow_node(i)] = m;

  std::vector<std::pair<int, int>> edges;  // j -> i: stage i depends on j
  auto add_block_edges = [&](const Matrix& a, auto node) {
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) {
        if (i != j && a(i, j) != 0.0) edges.emplace_back(node(j), node(i));
      }
    }
  };
  add_block_edges(t.slow.a, slow_node);
  for (int k = 0; k < m; ++k) {
    add_block_edges(t.fast[k].a,
                    [&](int i) { return fast_node(k, i); });
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < t.fast_stages(k); ++j) {
        if (t.couple_sf[k](i, j) != 0.0) {
          edges.emplace_back(fast_node(k, j), slow_node(i));
        }
      }
    }
    for (int i = 0; i < t.fast_stages(k); ++i) {
      for (int j = 0; j < s; ++j) {
        if (t.couple_fs[k](i, j) != 0.0) {
          edges.emplace_back(slow_node(j), fast_node(k, i));
        }
      }
    }
    // Completed micro steps feed every later micro step through their
    // weighted update.
    for (int l = 0; l < k; ++l) {
      for (int j = 0; j < t.fast_stages(l); ++j) {
        if (t.fast[l].b(j) == 0.0) continue;
        for (int i = 0; i < t.fast_stages(k); ++i) {
          edges.emplace_back(fast_node(l, j), fast_node(k, i));
        }
      }
    }
  }

  // Stages that are mutually reachable through edges of their own block form
  // one implicit group; solving inside a single block is allowed.
  std::vector<int> comp(n);
  std::iota(comp.begin(), comp.end(), 0);
  for (int b = 0; b <= m; ++b) {
    std::vector<int> members;
    for (int v = 0; v < n; ++v) {
      if (block[v] == b) members.push_back(v);
    }
    const int c = static_cast<int>(members.size());
    if (c <= 1) continue;
    std::vector<std::vector<bool>> reach(c, std::vector<bool>(c, false));
    for (int i = 0; i < c; ++i) reach[i][i] = true;
    for (const auto& [u, v] : edges) {
      if (block[u] != b || block[v] != b) continue;
      const int iu = static_cast<int>(
          std::find(members.begin(), members.end(), u) - members.begin());
      const int iv = static_cast<int>(
          std::find(members.begin(), members.end(), v) - members.begin());
      reach[iu][iv] = true;
    }
    for (int w = 0; w < c; ++w) {
      for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
          if (reach[i][w] && reach[w][j]) reach[i][j] = true;
        }
      }
    }
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < i; ++j) {
        if (reach[i][j] && reach[j][i]) {
          comp[members[i]] = comp[members[j]];
        }
      }
    }
  }

  // Cycle check on the contracted graph (self-edges represent implicitness
  // inside one block and are ignored).
  std::vector<std::vector<int>> adj(n);
  std::vector<int> indegree(n, 0);
  for (const auto& [u, v] : edges) {
    if (comp[u] == comp[v]) continue;
    adj[comp[u]].push_back(comp[v]);
    ++indegree[comp[v]];
  }
  std::vector<int> queue;
  int seen = 0;
  int active = 0;
  for (int v = 0; v < n; ++v) {
    if (comp[v] != v) continue;
    ++active;
    if (indegree[v] == 0) queue.push_back(v);
  }
  while (!queue.empty()) {
    const int u = queue.back();
    queue.pop_back();
    ++seen;
    for (int v : adj[u]) {
      if (--indegree[v] == 0) queue.push_back(v);
    }
  }
  return seen == active;
}

bool positive_weights(const PartitionedMgarkTableau& t) {
  auto all_positive = [](const Vector& b) { return (b.array() > 0.0).all(); };
  if (!all_positive(t.slow.bar.b) || !all_positive(t.slow.tilde.b)) {
    return false;
  }
  for (const auto& pair : t.fast) {
    if (!all_positive(pair.bar.b) || !all_positive(pair.tilde.b)) return false;
  }
  return true;
}

bool positive_weights(const MgarkTableau& t) {
  if (!(t.slow.b.array() > 0.0).all()) return false;
  for (const auto& scheme : t.fast) {
    if (!(scheme.b.array() > 0.0).all()) return false;
  }
  return true;
}

std::pair<double, double> composition_order_residual(const Vector& gammas,
                                                     int base_order) {
  if (base_order < 1) {
    throw std::invalid_argument("base_order must be positive");
  }
  const double sum = gammas.sum();
  double power_sum = 0.0;
  for (int i = 0; i < gammas.size(); ++i) {
    double p = gammas[i];
    for (int e = 0; e < base_order; ++e) p *= gammas[i];
    power_sum += p;
  }
  return {sum - 1.0, power_sum};
}

void write_report_csv(std::ostream& os, const ConditionReport& report) {
  write_csv_row(os, std::vector<std::string>{"condition_id", "lhs", "rhs",
                                             "residual", "pass"});
  for (const auto& e : report.entries) {
    write_csv_row(
        os, std::vector<std::string>{
                e.condition_id, format_g17(e.lhs), format_g17(e.rhs),
                format_g17(e.residual),
                std::abs(e.residual) <= report.tol ? "true" : "false"});
  }
}

}  // namespace smgark
