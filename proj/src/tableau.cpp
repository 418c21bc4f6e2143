#include "smgark/tableau.hpp"

#include <stdexcept>

namespace smgark {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_square(const RkTableau& t, const std::string& where) {
  require(t.a.rows() == t.a.cols(), where + ": coefficient matrix not square");
  require(t.a.rows() == t.b.size(), where + ": weight size mismatch");
}

}  // namespace

int PartitionedMgarkTableau::total_fast_stages() const {
  int n = 0;
  for (const auto& pair : fast) n += pair.bar.stages();
  return n;
}

void PartitionedMgarkTableau::validate() const {
  require(micro_steps >= 1, "micro_steps must be positive");
  const auto m = static_cast<std::size_t>(micro_steps);
  require(fast.size() == m, "fast block count != micro_steps");
  require(couple_sf_bar.size() == m && couple_sf_tilde.size() == m &&
              couple_fs_bar.size() == m && couple_fs_tilde.size() == m,
          "coupling block count != micro_steps");
  check_square(slow.bar, "slow.bar");
  check_square(slow.tilde, "slow.tilde");
  require(slow.bar.stages() == slow.tilde.stages(),
          "slow halves disagree on stage count");
  for (int k = 0; k < micro_steps; ++k) {
    const std::string tag = "fast[" + std::to_string(k + 1) + "]";
    check_square(fast[k].bar, tag + ".bar");
    check_square(fast[k].tilde, tag + ".tilde");
    require(fast[k].bar.stages() == fast[k].tilde.stages(),
            tag + " halves disagree on stage count");
    const int sf = fast[k].bar.stages();
    const int ss = slow_stages();
    for (const auto* m_sf : {&couple_sf_bar[k], &couple_sf_tilde[k]})
      require(m_sf->rows() == ss && m_sf->cols() == sf,
              "couple_sf[" + std::to_string(k + 1) + "] has wrong shape");
    for (const auto* m_fs : {&couple_fs_bar[k], &couple_fs_tilde[k]})
      require(m_fs->rows() == sf && m_fs->cols() == ss,
              "couple_fs[" + std::to_string(k + 1) + "] has wrong shape");
  }
}

PartitionedMgarkTableau MgarkTableau::as_partitioned() const {
  PartitionedMgarkTableau out;
  out.micro_steps = micro_steps;
  out.name = name;
  out.slow = RkTableauPair{slow, slow};
  out.fast.reserve(fast.size());
  for (const auto& f : fast) out.fast.push_back(RkTableauPair{f, f});
  out.couple_sf_bar = couple_sf;
  out.couple_sf_tilde = couple_sf;
  out.couple_fs_bar = couple_fs;
  out.couple_fs_tilde = couple_fs;
  return out;
}

RkTableauPair leapfrog_pair() {
  RkTableauPair pair;
  pair.bar.a = Matrix{{0.0, 0.0}, {0.5, 0.5}};
  pair.bar.b = Vector{{0.5, 0.5}};
  pair.tilde.a = Matrix{{0.5, 0.0}, {0.5, 0.0}};
  pair.tilde.b = Vector{{0.5, 0.5}};
  return pair;
}

RkTableau implicit_midpoint() {
  RkTableau t;
  t.a = Matrix{{0.5}};
  t.b = Vector{{1.0}};
  return t;
}

PartitionedMgarkTableau build_mr_lpfr(int micro_steps) {
  if (micro_steps < 1 || micro_steps % 2 != 0)
    throw std::invalid_argument("M must be even");
  const int m = micro_steps;
  const RkTableauPair lf = leapfrog_pair();
  const Matrix zero2 = Matrix::Zero(2, 2);
  const Matrix lower{{0.0, 0.0}, {0.5, 0.5}};    // leapfrog bar matrix
  const Matrix column{{0.5, 0.0}, {0.5, 0.0}};   // leapfrog tilde matrix
  const Matrix full = Matrix::Constant(2, 2, 0.5);

  PartitionedMgarkTableau t;
  t.micro_steps = m;
  t.name = "mr-lpfr";
  t.slow = lf;
  t.fast.assign(m, lf);
  t.couple_sf_bar.resize(m);
  t.couple_sf_tilde.resize(m);
  t.couple_fs_bar.resize(m);
  t.couple_fs_tilde.resize(m);
  // Slow kicks anchor at the initial and final positions (all micro-steps
  // feed the second slow stage); the slow drift lands between the two fast
  // half-sweeps, so only micro-steps after M/2 see the slow position update.
  for (int k = 0; k < m; ++k) {
    const int lambda = k + 1;
    t.couple_sf_bar[k] = lower;
    t.couple_sf_tilde[k] = lambda <= m / 2 ? full : zero2;
    t.couple_fs_bar[k] = lambda <= m / 2 ? zero2 : full;
    t.couple_fs_tilde[k] = column;
  }
  t.validate();
  return t;
}

MgarkTableau build_mr_imex2(int micro_steps) {
  if (micro_steps < 1)
    throw std::invalid_argument("micro_steps must be positive");
  const int m = micro_steps;
  MgarkTableau t;
  t.micro_steps = m;
  t.name = "mr-imex2";
  t.slow.a = Matrix{{0.25, 0.0}, {0.5, 0.25}};
  t.slow.b = Vector{{0.5, 0.5}};
  t.fast.assign(m, implicit_midpoint());
  t.couple_sf.assign(m, Matrix{{0.0}, {1.0}});
  t.couple_fs.assign(m, Matrix{{0.5, 0.0}});
  t.as_partitioned().validate();
  return t;
}

MgarkTableau build_mr_imim2(int micro_steps) {
  if (micro_steps < 1)
    throw std::invalid_argument("micro_steps must be positive");
  const int m = micro_steps;
  MgarkTableau t;
  t.micro_steps = m;
  t.name = "mr-imim2";
  t.slow = implicit_midpoint();
  t.fast.assign(m, implicit_midpoint());
  t.couple_sf.resize(m);
  t.couple_fs.resize(m);
  for (int k = 0; k < m; ++k) {
    const double c = (2.0 * (k + 1) - 1.0) / (2.0 * m);
    t.couple_fs[k] = Matrix{{c}};
    t.couple_sf[k] = Matrix{{1.0 - c}};
  }
  t.as_partitioned().validate();
  return t;
}

namespace {

/// Assembles one monolithic half from the per-block coefficients of the
/// corresponding multirate half.
RkTableau flatten_half(const PartitionedMgarkTableau& t, bool tilde_half) {
  const int m = t.micro_steps;
  const int ss = t.slow_stages();
  const int fs_total = t.total_fast_stages();
  const int n = fs_total + ss;
  const double inv_m = 1.0 / static_cast<double>(m);

  auto diag = [&](int k) -> const Matrix& {
    return tilde_half ? t.fast[k].tilde.a : t.fast[k].bar.a;
  };
  auto fast_b = [&](int k) -> const Vector& {
    return tilde_half ? t.fast[k].tilde.b : t.fast[k].bar.b;
  };
  const Matrix& slow_a = tilde_half ? t.slow.tilde.a : t.slow.bar.a;
  const Vector& slow_b = tilde_half ? t.slow.tilde.b : t.slow.bar.b;
  const auto& sf = tilde_half ? t.couple_sf_tilde : t.couple_sf_bar;
  const auto& fs = tilde_half ? t.couple_fs_tilde : t.couple_fs_bar;

  RkTableau out;
  out.a = Matrix::Zero(n, n);
  out.b = Vector::Zero(n);

  std::vector<int> offset(m + 1, 0);
  for (int k = 0; k < m; ++k)
    offset[k + 1] = offset[k] + t.fast_stages(k);

  for (int k = 0; k < m; ++k) {
    const int r0 = offset[k];
    const int rows = t.fast_stages(k);
    // Completed earlier micro steps enter through their full weight vectors.
    for (int l = 0; l < k; ++l)
      out.a.block(r0, offset[l], rows, t.fast_stages(l)) =
          inv_m * Vector::Ones(rows) * fast_b(l).transpose();
    out.a.block(r0, offset[k], rows, rows) = inv_m * diag(k);
    out.a.block(r0, fs_total, rows, ss) = fs[k];
    out.b.segment(offset[k], rows) = inv_m * fast_b(k);
  }
  for (int k = 0; k < m; ++k)
    out.a.block(fs_total, offset[k], ss, t.fast_stages(k)) = inv_m * sf[k];
  out.a.block(fs_total, fs_total, ss, ss) = slow_a;
  out.b.segment(fs_total, ss) = slow_b;
  return out;
}

}  // namespace

std::pair<RkTableau, RkTableau> flatten(const PartitionedMgarkTableau& t) {
  t.validate();
  return {flatten_half(t, /*tilde_half=*/false),
          flatten_half(t, /*tilde_half=*/true)};
}

std::pair<RkTableau, RkTableau> flatten(const PartitionedMgarkTableau& t,
                                        double macro_step) {
  auto [bar, tilde] = flatten(t);
  bar.a *= macro_step;
  bar.b *= macro_step;
  tilde.a *= macro_step;
  tilde.b *= macro_step;
  return {std::move(bar), std::move(tilde)};
}

namespace {

bool matches(const Matrix& x, const Matrix& y, double tol) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
  return (x - y).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

MgarkTableau reduce_partitioned(const PartitionedMgarkTableau& t, double tol) {
  t.validate();
  auto reject = [](const std::string& block) {
    throw std::invalid_argument("tableau halves differ in block " + block);
  };
  if (!matches(t.slow.bar.a, t.slow.tilde.a, tol)) reject("slow.a");
  if (!matches(t.slow.bar.b, t.slow.tilde.b, tol)) reject("slow.b");
  for (int k = 0; k < t.micro_steps; ++k) {
    const std::string lam = "[lambda=" + std::to_string(k + 1) + "]";
    if (!matches(t.fast[k].bar.a, t.fast[k].tilde.a, tol))
      reject("fast" + lam + ".a");
    if (!matches(t.fast[k].bar.b, t.fast[k].tilde.b, tol))
      reject("fast" + lam + ".b");
    if (!matches(t.couple_sf_bar[k], t.couple_sf_tilde[k], tol))
      reject("couple_sf" + lam);
    if (!matches(t.couple_fs_bar[k], t.couple_fs_tilde[k], tol))
      reject("couple_fs" + lam);
  }
  MgarkTableau out;
  out.micro_steps = t.micro_steps;
  out.name = t.name;
  out.slow = t.slow.bar;
  out.fast.reserve(t.fast.size());
  for (const auto& f : t.fast) out.fast.push_back(f.bar);
  out.couple_sf = t.couple_sf_bar;
  out.couple_fs = t.couple_fs_bar;
  return out;
}

namespace {

/// Single-block adjoint against the given column weights: entry (i,j) of the
/// result is b(j') - a(i',j') with flipped indices i' = rows-1-i, etc.
Matrix block_adjoint(const Matrix& a, const Vector& col_b) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out(i, j) = col_b(a.cols() - 1 - j) -
                  a(a.rows() - 1 - i, a.cols() - 1 - j);
  return out;
}

RkTableau tableau_adjoint(const RkTableau& t) {
  return RkTableau{block_adjoint(t.a, t.b), t.b.reverse()};
}

}  // namespace

PartitionedMgarkTableau adjoint_tableau(const PartitionedMgarkTableau& t) {
  t.validate();
  const int m = t.micro_steps;
  for (int k = 1; k < m; ++k)
    if (t.fast_stages(k) != t.fast_stages(0))
      throw std::invalid_argument(
          "adjoint requires a uniform fast stage count");
  PartitionedMgarkTableau out;
  out.micro_steps = m;
  out.name = t.name.empty() ? t.name : t.name + "-adjoint";
  out.slow.bar = tableau_adjoint(t.slow.bar);
  out.slow.tilde = tableau_adjoint(t.slow.tilde);
  out.fast.resize(m);
  out.couple_sf_bar.resize(m);
  out.couple_sf_tilde.resize(m);
  out.couple_fs_bar.resize(m);
  out.couple_fs_tilde.resize(m);
  for (int k = 0; k < m; ++k) {
    const int src = m - 1 - k;  // reversed micro-step order
    out.fast[k].bar = tableau_adjoint(t.fast[src].bar);
    out.fast[k].tilde = tableau_adjoint(t.fast[src].tilde);
    out.couple_sf_bar[k] =
        block_adjoint(t.couple_sf_bar[src], t.fast[src].bar.b);
    out.couple_sf_tilde[k] =
        block_adjoint(t.couple_sf_tilde[src], t.fast[src].tilde.b);
    out.couple_fs_bar[k] = block_adjoint(t.couple_fs_bar[src], t.slow.bar.b);
    out.couple_fs_tilde[k] =
        block_adjoint(t.couple_fs_tilde[src], t.slow.tilde.b);
  }
  return out;
}

}  // namespace smgark
