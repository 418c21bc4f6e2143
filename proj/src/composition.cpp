#include "smgark/composition.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "smgark/conditions.hpp"
#include "smgark/csv.hpp"

namespace smgark {

namespace {

void check_even_order(int p) {
  if (p < 2 || p % 2 != 0) {
    throw std::invalid_argument("base order must be even and >= 2");
  }
}

/// r-fold concatenation of one scheme: scaled copies on the diagonal, the
/// completed copies' weighted updates as fills below it.
RkTableau compose_rk(const RkTableau& rk, const Vector& g) {
  const int r = static_cast<int>(g.size());
  const int n = rk.stages();
  RkTableau out;
  out.a = Matrix::Zero(r * n, r * n);
  out.b = Vector::Zero(r * n);
  for (int i = 0; i < r; ++i) {
    out.a.block(i * n, i * n, n, n) = g(i) * rk.a;
    out.b.segment(i * n, n) = g(i) * rk.b;
    for (int j = 0; j < i; ++j) {
      out.a.block(i * n, j * n, n, n) =
          g(j) * Vector::Ones(n) * rk.b.transpose();
    }
  }
  return out;
}

const char* family_tag(CompositionFamily f) {
  switch (f) {
    case CompositionFamily::TripleJump:
      return "tj";
    case CompositionFamily::Suzuki:
      return "sf";
    case CompositionFamily::AdvancedComposition:
      return "ac";
    case CompositionFamily::Custom:
      return "comp";
  }
  return "comp";
}

/// Palindromic symmetry plus the power-sum conditions every second-order
/// base needs up to `order`; used to gate file-loaded sets.
void validate_weights(const Vector& g, int order, const std::string& what) {
  const int r = static_cast<int>(g.size());
  for (int i = 0; i < r; ++i) {
    if (std::abs(g(i) - g(r - 1 - i)) > 1e-15) {
      throw std::runtime_error(what + ": weights are not palindromic");
    }
  }
  for (int k = 2; k < order; k += 2) {
    const auto [sum_res, pow_res] = composition_order_residual(g, k);
    if (std::abs(sum_res) > 1e-12 || std::abs(pow_res) > 1e-12) {
      throw std::runtime_error(what + ": order-" + std::to_string(k + 2) +
                               " composition conditions violated");
    }
  }
}

}  // namespace

CompositionWeights triple_jump(int p) {
  check_even_order(p);
  const double root = std::pow(2.0, 1.0 / (p + 1));
  const double outer = 1.0 / (2.0 - root);
  CompositionWeights w;
  w.gammas = Vector{{outer, -root * outer, outer}};
  w.base_order = p;
  w.target_order = p + 2;
  w.family = CompositionFamily::TripleJump;
  return w;
}

CompositionWeights suzuki(int p) {
  check_even_order(p);
  const double root = std::pow(4.0, 1.0 / (p + 1));
  const double outer = 1.0 / (4.0 - root);
  CompositionWeights w;
  w.gammas = Vector{{outer, outer, -root * outer, outer, outer}};
  w.base_order = p;
  w.target_order = p + 2;
  w.family = CompositionFamily::Suzuki;
  return w;
}

std::vector<WeightSet> read_weight_sets(std::istream& is) {
  std::vector<WeightSet> sets;
  std::string line;
  int line_no = 0;
  int pending = 0;  // weights still expected for the current set
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("composition weights, line " +
                             std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (pending > 0) {
      double value = 0.0;
      if (!(ls >> value)) fail("expected a weight value");
      WeightSet& cur = sets.back();
      cur.gammas(cur.gammas.size() - pending) = value;
      --pending;
      continue;
    }
    std::string kw_family, family, kw_order, kw_r;
    int order = 0, r = 0;
    if (!(ls >> kw_family >> family >> kw_order >> order >> kw_r >> r) ||
        kw_family != "family" || kw_order != "order" || kw_r != "r") {
      fail("expected 'family <name> order <p> r <count>'");
    }
    if (order < 2 || r < 1) fail("order/r out of range");
    WeightSet set;
    set.family = family;
    set.order = order;
    set.gammas = Vector::Zero(r);
    sets.push_back(std::move(set));
    pending = r;
  }
  ++line_no;
  if (pending > 0) fail("file ended inside a weight set");
  return sets;
}

void write_weight_sets(std::ostream& os, const std::vector<WeightSet>& sets) {
  for (const auto& set : sets) {
    os << "family " << set.family << " order " << set.order << " r "
       << set.gammas.size() << "\n";
    for (int i = 0; i < set.gammas.size(); ++i) {
      os << format_g17(set.gammas(i)) << "\n";
    }
  }
}

std::string bundled_weights_path() {
  if (const char* env = std::getenv("SMGARK_WEIGHTS_FILE");
      env != nullptr && *env != '\0') {
    return env;
  }
#ifdef SMGARK_BUNDLED_WEIGHTS_FILE
  return SMGARK_BUNDLED_WEIGHTS_FILE;
#else
  return "data/composition_weights.txt";
#endif
}

CompositionWeights advanced_composition(int order, bool stay_in_window) {
  if (order != 4 && order != 6 && order != 8 && order != 10) {
    throw std::invalid_argument("unsupported order (want 4, 6, 8, or 10)");
  }
  const std::string family = stay_in_window ? "advanced-window" : "advanced";
  const std::string path = bundled_weights_path();
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open composition weights file: " + path);
  }
  const std::vector<WeightSet> sets = read_weight_sets(is);
  for (const auto& set : sets) {
    if (set.family != family || set.order != order) continue;
    const std::string what = family + " order " + std::to_string(order);
    validate_weights(set.gammas, order, what);
    CompositionWeights w;
    w.gammas = set.gammas;
    w.base_order = 2;
    w.target_order = order;
    w.family = CompositionFamily::AdvancedComposition;
    return w;
  }
  throw std::runtime_error("no '" + family + "' set of order " +
                           std::to_string(order) + " in " + path);
}

PartitionedMgarkTableau compose_tableau(const PartitionedMgarkTableau& t,
                                        const CompositionWeights& w) {
  t.validate();
  const Vector& g = w.gammas;
  const int r = w.steps();
  if (r < 1) throw std::invalid_argument("empty weight vector");
  const int m = t.micro_steps;
  const int s = t.slow_stages();

  PartitionedMgarkTableau out;
  out.micro_steps = r * m;
  out.slow.bar = compose_rk(t.slow.bar, g);
  out.slow.tilde = compose_rk(t.slow.tilde, g);
  out.fast.reserve(out.micro_steps);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < m; ++k) {
      const double scale = r * g(i);
      const int f = t.fast_stages(k);
      RkTableauPair pair;
      pair.bar = RkTableau{scale * t.fast[k].bar.a, scale * t.fast[k].bar.b};
      pair.tilde =
          RkTableau{scale * t.fast[k].tilde.a, scale * t.fast[k].tilde.b};
      out.fast.push_back(std::move(pair));

      // Slow copy i' reads this micro step through the scaled coupling block
      // (own copy), the completed micro-step update (later copies), or not
      // at all (earlier copies); and symmetrically for the fast side.
      auto couple_sf = [&](const Matrix& block, const Vector& fast_b) {
        Matrix c = Matrix::Zero(r * s, f);
        c.block(i * s, 0, s, f) = scale * block;
        for (int ip = i + 1; ip < r; ++ip) {
          c.block(ip * s, 0, s, f) =
              scale * Vector::Ones(s) * fast_b.transpose();
        }
        return c;
      };
      auto couple_fs = [&](const Matrix& block, const Vector& slow_b) {
        Matrix c = Matrix::Zero(f, r * s);
        c.block(0, i * s, f, s) = g(i) * block;
        for (int jp = 0; jp < i; ++jp) {
          c.block(0, jp * s, f, s) =
              g(jp) * Vector::Ones(f) * slow_b.transpose();
        }
        return c;
      };
      out.couple_sf_bar.push_back(
          couple_sf(t.couple_sf_bar[k], t.fast[k].bar.b));
      out.couple_sf_tilde.push_back(
          couple_sf(t.couple_sf_tilde[k], t.fast[k].tilde.b));
      out.couple_fs_bar.push_back(couple_fs(t.couple_fs_bar[k], t.slow.bar.b));
      out.couple_fs_tilde.push_back(
          couple_fs(t.couple_fs_tilde[k], t.slow.tilde.b));
    }
  }
  out.name = t.name + "+" + family_tag(w.family) +
             std::to_string(w.target_order);
  out.validate();
  return out;
}

MgarkTableau compose_tableau(const MgarkTableau& t,
                             const CompositionWeights& w) {
  return reduce_partitioned(compose_tableau(t.as_partitioned(), w));
}

Stepper compose_stepper(Stepper base, const CompositionWeights& w) {
  if (w.steps() < 1) throw std::invalid_argument("empty weight vector");
  return [base = std::move(base), g = w.gammas](
             const PhaseState& y0, double H, StepStats& stats) {
    PhaseState y = y0;
    for (int i = 0; i < g.size(); ++i) y = base(y, g(i) * H, stats);
    return y;
  };
}

}  // namespace smgark
