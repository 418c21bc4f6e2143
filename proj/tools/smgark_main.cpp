// Command-line front end: tableau checking, trajectory integration,
// benchmark experiments, and tableau composition.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smgark/composition.hpp"
#include "smgark/conditions.hpp"
#include "smgark/csv.hpp"
#include "smgark/diagnostics.hpp"
#include "smgark/integrators.hpp"
#include "smgark/systems.hpp"
#include "smgark/tableau.hpp"
#include "smgark/tableau_io.hpp"

namespace {

using namespace smgark;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;   // a requested check failed or a run diverged
constexpr int kExitUsage = 2;  // bad arguments, unreadable files, bad values

const std::vector<std::string>& builtin_scheme_names() {
  static const std::vector<std::string> names{"mr-lpfr", "mr-imex2",
                                              "mr-imim2"};
  return names;
}

bool is_builtin_scheme(const std::string& name) {
  const auto& names = builtin_scheme_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string format_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::string spaced = text;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  std::istringstream is(spaced);
  std::vector<double> values;
  double v = 0.0;
  while (is >> v) values.push_back(v);
  if (!is.eof())
    throw std::invalid_argument("invalid number list '" + text + "'");
  if (values.empty()) throw std::invalid_argument("empty number list");
  return values;
}

std::string strip_ws(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Reads a flat key=value config file and turns each entry into an option
// token of the given subcommand.  '#' starts a comment; keys must name an
// option of the subcommand (without the leading dashes).
std::vector<std::string> config_tokens(const std::string& path,
                                       const CLI::App* sub) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    const std::string body = strip_ws(line);
    if (body.empty()) continue;
    const auto where = path + ", line " + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(where + ": expected key=value");
    const std::string key = strip_ws(body.substr(0, eq));
    const std::string value = strip_ws(body.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(where + ": empty key");
    if (key == "config")
      throw std::runtime_error(where + ": config files cannot nest");
    if (sub->get_option_no_throw("--" + key) == nullptr)
      throw std::runtime_error(where + ": unknown key '" + key + "'");
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// Expands `--config FILE` of a config-capable subcommand into option tokens
// inserted ahead of the user's flags; with take-last option semantics the
// explicitly given flags then override the file.
std::vector<std::string> expand_config_args(
    std::vector<std::string> args, const std::vector<CLI::App*>& config_subs) {
  std::size_t sub_index = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size() && sub == nullptr; ++i) {
    for (const CLI::App* candidate : config_subs) {
      if (args[i] == candidate->get_name()) {
        sub = candidate;
        sub_index = i;
        break;
      }
    }
  }
  if (sub == nullptr) return args;
  std::string path;
  for (std::size_t i = sub_index + 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      ++i;
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    }
  }
  if (path.empty()) return args;
  const std::vector<std::string> tokens = config_tokens(path, sub);
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_index) + 1,
              tokens.begin(), tokens.end());
  return args;
}

// Later occurrences of an option override earlier ones (configuration file
// entries are inserted first, so command-line flags win).
void take_last_options(CLI::App* cmd) {
  for (CLI::Option* o : cmd->get_options()) {
    if (o->get_positional() || o->get_name() == "--help") continue;
    o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

// Writes CSV to the given path, "-"/empty meaning stdout.  Returns an exit
// code so callers can propagate file problems.
int write_csv_output(const std::string& path,
                     const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return std::cout ? kExitOk : kExitFail;
  }
  std::ofstream os(path);
  if (!os) {
    std::cerr << "error: cannot open '" << path << "' for writing\n";
    return kExitUsage;
  }
  write(os);
  os.flush();
  if (!os) {
    std::cerr << "error: failed while writing '" << path << "'\n";
    return kExitFail;
  }
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- tableaus

struct LoadedTableau {
  PartitionedMgarkTableau part;
  // Single-half view when both halves coincide; absent for genuinely
  // partitioned tableaus, whose stage graph has no single-half form.
  std::optional<MgarkTableau> mono;
};

LoadedTableau load_builtin(const std::string& name, int micro_steps) {
  if (name == "mr-lpfr") return {build_mr_lpfr(micro_steps), std::nullopt};
  MgarkTableau mono = name == "mr-imex2" ? build_mr_imex2(micro_steps)
                                         : build_mr_imim2(micro_steps);
  PartitionedMgarkTableau part = mono.as_partitioned();
  return {std::move(part), std::move(mono)};
}

LoadedTableau load_target(const std::string& target, int micro_steps) {
  if (is_builtin_scheme(target)) return load_builtin(target, micro_steps);
  LoadedTableau loaded{read_tableau_file(target), std::nullopt};
  loaded.part.validate();
  try {
    loaded.mono = reduce_partitioned(loaded.part, 1e-13);
  } catch (const std::invalid_argument&) {
  }
  return loaded;
}

// ---------------------------------------------------------------- schemes

CompositionWeights family_weights(const std::string& family, int base_order,
                                  int target_order) {
  if (family == "triple-jump") return triple_jump(base_order);
  if (family == "suzuki") return suzuki(base_order);
  if (family == "advanced") return advanced_composition(target_order, false);
  if (family == "advanced-window")
    return advanced_composition(target_order, true);
  throw std::invalid_argument("unknown composition family '" + family + "'");
}

void check_composition_order(int order) {
  if (order < 4 || order % 2 != 0)
    throw std::invalid_argument("composition order must be even and >= 4");
}

Stepper compose_scheme_stepper(Stepper base, const std::string& family,
                               int order) {
  if (family == "none") return base;
  check_composition_order(order);
  if (family == "triple-jump" || family == "suzuki") {
    for (int p = 2; p < order; p += 2)
      base = compose_stepper(std::move(base), family_weights(family, p, p + 2));
    return base;
  }
  return compose_stepper(std::move(base), family_weights(family, 2, order));
}

PartitionedMgarkTableau compose_scheme_tableau(PartitionedMgarkTableau t,
                                               const std::string& family,
                                               int order) {
  if (family == "none") return t;
  check_composition_order(order);
  if (family == "triple-jump" || family == "suzuki") {
    for (int p = 2; p < order; p += 2)
      t = compose_tableau(t, family_weights(family, p, p + 2));
    return t;
  }
  return compose_tableau(t, family_weights(family, 2, order));
}

struct SchemeOptions {
  std::string scheme = "mr-imex2";
  int micro_steps = 1;
  std::string compose = "none";
  int order = 4;
};

Stepper make_base_stepper(const std::string& scheme,
                          const SeparableSystem& sys, int micro_steps,
                          const SolverConfig& cfg) {
  if (scheme == "mr-lpfr") return make_mr_lpfr_stepper(sys, micro_steps, true);
  if (scheme == "mr-imex2")
    return make_mr_imex2_stepper(sys, micro_steps, cfg, true);
  if (scheme == "mr-imim2") return make_mr_imim2_stepper(sys, micro_steps, cfg);
  throw std::invalid_argument("unknown scheme '" + scheme +
                              "'; available: mr-lpfr, mr-imex2, mr-imim2");
}

Stepper make_scheme_stepper(const SchemeOptions& s, const SeparableSystem& sys,
                            const SolverConfig& cfg) {
  return compose_scheme_stepper(
      make_base_stepper(s.scheme, sys, s.micro_steps, cfg), s.compose, s.order);
}

// -------------------------------------------------------------- condition
// summaries shared by `check` and the pre-run verification of builtins

struct SectionSummary {
  bool holds = true;
  double max_residual = 0.0;
  std::string worst_id;
};

SectionSummary summarize(const ConditionReport& report,
                         const std::string& prefix, double tol) {
  SectionSummary s;
  for (const auto& e : report.entries) {
    if (!prefix.empty() && e.condition_id.rfind(prefix, 0) != 0) continue;
    const double r = std::abs(e.residual);
    if (r > s.max_residual) {
      s.max_residual = r;
      s.worst_id = e.condition_id;
    }
    if (r > tol) s.holds = false;
  }
  return s;
}

// Empty result means the tableau is fit for integration: order <= 2 on the
// monolithic route, symplectic, strictly positive weights.
std::string builtin_defect(const PartitionedMgarkTableau& t) {
  const ConditionReport order = order_report_flattened(t, 2);
  if (!order.pass) {
    const SectionSummary s = summarize(order, "", order.tol);
    return "order conditions fail at " + s.worst_id + " (residual " +
           format_short(s.max_residual) + ")";
  }
  const ConditionReport symp = is_symplectic(t);
  if (!symp.pass) {
    const SectionSummary s = summarize(symp, "", symp.tol);
    return "symplecticity fails at " + s.worst_id + " (residual " +
           format_short(s.max_residual) + ")";
  }
  if (!positive_weights(t)) return "weights are not strictly positive";
  return {};
}

void verify_builtin_scheme(const std::string& name, int micro_steps) {
  const LoadedTableau loaded = load_builtin(name, micro_steps);
  const std::string defect = builtin_defect(loaded.part);
  if (!defect.empty())
    throw std::runtime_error("scheme " + name + " (micro steps " +
                             std::to_string(micro_steps) +
                             ") failed its pre-run check: " + defect);
}

// ------------------------------------------------------------------ check

struct CheckOptions {
  std::string target;
  int micro_steps = 2;
  double tol = kConditionTol;
  int require_order = 2;
  bool require_symmetric = false;
  bool require_explicit = false;
  bool require_decoupled = false;
  bool require_positive = false;
  std::string output;
};

void print_section(const std::string& label, const SectionSummary& s) {
  std::cout << label << (s.holds ? ": satisfied" : ": not satisfied")
            << " (max residual " << format_short(s.max_residual);
  if (!s.holds && !s.worst_id.empty()) std::cout << " at " << s.worst_id;
  std::cout << ")\n";
}

int run_check(const CheckOptions& opt) {
  LoadedTableau loaded;
  try {
    loaded = load_target(opt.target, opt.micro_steps);
  } catch (const ParseError& e) {
    std::cerr << opt.target << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const PartitionedMgarkTableau& t = loaded.part;

  const ConditionReport order = order_report_flattened(t, 3, opt.tol);
  const ConditionReport symplectic = is_symplectic(t, opt.tol);
  std::optional<ConditionReport> symmetric;
  std::string symmetric_note;
  try {
    symmetric = is_symmetric(t, opt.tol);
  } catch (const std::exception& e) {
    symmetric_note = e.what();
  }
  const bool explicit_scheme = is_explicit(t);
  std::optional<bool> decoupled;
  if (loaded.mono) decoupled = is_decoupled(*loaded.mono);
  const bool positive = positive_weights(t);

  std::cout << "tableau: " << (t.name.empty() ? opt.target : t.name)
            << " | micro steps " << t.micro_steps << " | slow stages "
            << t.slow_stages() << " | fast stages " << t.total_fast_stages()
            << "\n";
  std::vector<SectionSummary> order_level(4);
  for (int p = 1; p <= 3; ++p) {
    order_level[p] = summarize(order, "flat.p" + std::to_string(p) + ".",
                               opt.tol);
    print_section("order " + std::to_string(p), order_level[p]);
  }
  const SectionSummary symp_summary = summarize(symplectic, "", opt.tol);
  print_section("symplectic", symp_summary);
  SectionSummary symm_summary;
  if (symmetric) {
    symm_summary = summarize(*symmetric, "", opt.tol);
    print_section("symmetric", symm_summary);
  } else {
    std::cout << "symmetric: n/a (" << symmetric_note << ")\n";
  }
  std::cout << "explicit: " << (explicit_scheme ? "yes" : "no") << "\n";
  if (decoupled)
    std::cout << "decoupled: " << (*decoupled ? "yes" : "no") << "\n";
  else
    std::cout << "decoupled: n/a (halves differ; no single-half stage graph)\n";
  std::cout << "positive weights: " << (positive ? "yes" : "no") << "\n";

  std::vector<std::string> failures;
  for (int p = 1; p <= opt.require_order; ++p) {
    const SectionSummary& s = order_level[p];
    if (!s.holds)
      failures.push_back("order<=" + std::to_string(p) + ": " + s.worst_id +
                         " residual " + format_short(s.max_residual));
  }
  if (!symp_summary.holds)
    failures.push_back("symplectic: " + symp_summary.worst_id + " residual " +
                       format_short(symp_summary.max_residual));
  if (opt.require_symmetric) {
    if (!symmetric)
      failures.push_back("symmetric: n/a (" + symmetric_note + ")");
    else if (!symm_summary.holds)
      failures.push_back("symmetric: " + symm_summary.worst_id + " residual " +
                         format_short(symm_summary.max_residual));
  }
  if (opt.require_explicit && !explicit_scheme)
    failures.push_back("explicit: no");
  if (opt.require_decoupled && !(decoupled.has_value() && *decoupled))
    failures.push_back(decoupled.has_value() ? "decoupled: no"
                                             : "decoupled: n/a");
  if (opt.require_positive && !positive)
    failures.push_back("positive weights: no");

  if (failures.empty()) {
    std::cout << "result: PASS\n";
  } else {
    std::cout << "result: FAIL\n";
    for (const auto& f : failures) std::cout << "  " << f << "\n";
  }

  if (!opt.output.empty()) {
    ConditionReport combined;
    combined.tol = opt.tol;
    combined.pass = failures.empty();
    auto append = [&combined](const ConditionReport& r) {
      combined.entries.insert(combined.entries.end(), r.entries.begin(),
                              r.entries.end());
    };
    append(order);
    append(symplectic);
    if (symmetric) append(*symmetric);
    auto boolean_entry = [](const std::string& id, bool value) {
      return ConditionEntry{id, value ? 1.0 : 0.0, 1.0, value ? 0.0 : 1.0};
    };
    combined.entries.push_back(boolean_entry("explicit", explicit_scheme));
    if (decoupled)
      combined.entries.push_back(boolean_entry("decoupled", *decoupled));
    combined.entries.push_back(boolean_entry("positive-weights", positive));
    const int code = write_csv_output(opt.output, [&](std::ostream& os) {
      write_report_csv(os, combined);
    });
    if (code != kExitOk) return code;
  }
  return failures.empty() ? kExitOk : kExitFail;
}

// --------------------------------------------------------------- problems

struct ProblemOptions {
  std::string problem = "fpu";
  int m = 3;
  double omega = 50.0;
  std::string preset = "benchmark";
  std::string p0;
  std::string q0;
};

struct ResolvedProblem {
  SeparableSystem sys;
  PhaseState y0;
  std::function<double(const PhaseState&)> oscillatory;
};

ResolvedProblem resolve_problem(const ProblemOptions& o) {
  if (o.preset != "benchmark" && o.preset != "paper")
    throw std::invalid_argument("unknown preset '" + o.preset +
                                "' (available: benchmark)");
  ResolvedProblem r;
  if (o.problem == "fpu") {
    const FpuParams params{o.m, o.omega};
    r.sys = fpu_system(params);
    r.y0 = fpu_benchmark_state(params);
    r.oscillatory = [params](const PhaseState& y) {
      return oscillatory_energy(y, params).second;
    };
  } else if (o.problem == "harmonic") {
    r.sys = harmonic_system(o.omega);
    r.y0.p = Vector::Zero(1);
    r.y0.q = Vector::Ones(1);
  } else {
    throw std::invalid_argument("unknown problem '" + o.problem +
                                "'; available: fpu, harmonic");
  }
  if (o.p0.empty() != o.q0.empty())
    throw std::invalid_argument("--p0 and --q0 must be given together");
  if (!o.p0.empty()) {
    const std::vector<double> p = parse_number_list(o.p0);
    const std::vector<double> q = parse_number_list(o.q0);
    const auto n = static_cast<std::size_t>(r.y0.p.size());
    if (p.size() != n || q.size() != n)
      throw std::invalid_argument(
          "initial state needs " + std::to_string(n) +
          " momenta and positions; got " + std::to_string(p.size()) + " and " +
          std::to_string(q.size()));
    for (std::size_t i = 0; i < n; ++i) {
      r.y0.p[static_cast<Eigen::Index>(i)] = p[i];
      r.y0.q[static_cast<Eigen::Index>(i)] = q[i];
    }
  }
  return r;
}

// ----------------------------------------------------------------- solver

struct SolverOptions {
  double newton_rel_tol = 1e-12;
  double newton_abs_tol = 1e-14;
  int newton_max_iters = 50;
  std::string jacobian = "analytic";

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.newton_rel_tol = newton_rel_tol;
    cfg.newton_abs_tol = newton_abs_tol;
    cfg.max_iters = newton_max_iters;
    cfg.jacobian_mode = jacobian == "fd" ? JacobianMode::FiniteDifference
                                         : JacobianMode::Analytic;
    return cfg;
  }
};

// -------------------------------------------------------------- integrate

struct IntegrateOptions {
  SchemeOptions scheme;
  ProblemOptions problem;
  SolverOptions solver;
  double macro_step = 0.1;
  double t_end = 1.0;
  std::string config;
  std::string output;
};

int run_integrate(const IntegrateOptions& opt) {
  std::vector<TrajectoryPoint> trajectory;
  ResolvedProblem prob;
  try {
    prob = resolve_problem(opt.problem);
    verify_builtin_scheme(opt.scheme.scheme, opt.scheme.micro_steps);
    const long long n_steps = steps_for(opt.t_end, opt.macro_step);
    const Stepper step =
        make_scheme_stepper(opt.scheme, prob.sys, opt.solver.config());
    trajectory = integrate(step, prob.y0, opt.macro_step, n_steps);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "integration failed: " << e.what() << "\n";
    return kExitFail;
  }
  return write_csv_output(opt.output, [&](std::ostream& os) {
    write_trajectory_csv(os, trajectory, prob.sys, prob.oscillatory);
  });
}

// ------------------------------------------------------------- experiment

struct ExperimentOptions {
  std::string name;
  SchemeOptions scheme;
  SolverOptions solver;
  int m = 3;
  double omega = 50.0;
  std::string omega_list = "50,500,5000,10000";
  double macro_step = 0.1;
  double t_end = 3.0;
  int k_min = 5;
  int k_max = 9;
  std::string out_dir = ".";
  std::string config;
  std::string output;
  // Filled after parsing: whether the user set the value explicitly.
  bool micro_steps_given = false;
  bool t_end_given = false;
  bool k_max_given = false;
};

std::vector<double> dyadic_steps(int k_min, int k_max) {
  if (k_min < 1 || k_max < k_min || k_max > 40)
    throw std::invalid_argument("need 1 <= k-min <= k-max <= 40");
  std::vector<double> steps;
  for (int k = k_min; k <= k_max; ++k) steps.push_back(std::ldexp(1.0, -k));
  return steps;
}

std::string output_path(const ExperimentOptions& opt,
                        const std::string& stem) {
  return opt.output.empty() ? opt.out_dir + "/" + stem + ".csv" : opt.output;
}

int run_experiment_energy(const ExperimentOptions& opt) {
  const int micro = opt.micro_steps_given ? opt.scheme.micro_steps : 50;
  const double t_end = opt.t_end_given ? opt.t_end : 220.0;
  EnergySeries series;
  try {
    const FpuParams params{opt.m, opt.omega};
    const SeparableSystem sys = fpu_system(params);
    const PhaseState y0 = fpu_benchmark_state(params);
    verify_builtin_scheme(opt.scheme.scheme, micro);
    SchemeOptions scheme = opt.scheme;
    scheme.micro_steps = micro;
    const Stepper step = make_scheme_stepper(scheme, sys, opt.solver.config());
    series = energy_study(step, sys, params, y0, opt.macro_step, t_end);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "energy experiment failed: " << e.what() << "\n";
    return kExitFail;
  }
  std::cout << "energy: " << series.times.size() << " samples | drift slope "
            << format_short(series.drift_slope)
            << " per unit time | max oscillatory deviation "
            << format_short(series.max_deviation) << "\n";
  return write_csv_output(output_path(opt, "energy"), [&](std::ostream& os) {
    write_energy_csv(os, series);
  });
}

int run_experiment_convergence(const ExperimentOptions& opt) {
  const int micro = opt.micro_steps_given ? opt.scheme.micro_steps : 1;
  const double t_end = opt.t_end_given ? opt.t_end : 3.0;
  const int k_max = opt.k_max_given ? opt.k_max : 9;
  ConvergenceResult result;
  try {
    const std::vector<double> steps = dyadic_steps(opt.k_min, k_max);
    const FpuParams params{opt.m, opt.omega};
    const SeparableSystem sys = fpu_system(params);
    const PhaseState y0 = fpu_benchmark_state(params);
    verify_builtin_scheme(opt.scheme.scheme, micro);
    SchemeOptions scheme = opt.scheme;
    scheme.micro_steps = micro;
    const SolverConfig cfg = opt.solver.config();
    const std::vector<int> mask = fpu_slow_position_mask(opt.m);
    const PhaseState reference = reference_solution(sys, y0, t_end, mask, 1e-8);
    const StepperFactory factory = [&scheme, &sys, &cfg]() {
      return make_scheme_stepper(scheme, sys, cfg);
    };
    result = convergence_order(factory, y0, t_end, steps, reference, mask);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "convergence experiment failed: " << e.what() << "\n";
    return kExitFail;
  }
  std::cout << "convergence: slope " << format_short(result.slope) << " over "
            << result.errors.size() << " step sizes (slow-position error)\n";
  return write_csv_output(output_path(opt, "convergence"),
                          [&](std::ostream& os) {
                            write_convergence_csv(os, result);
                          });
}

std::vector<SweepScheme> sweep_schemes(int micro, const SolverConfig& cfg) {
  const auto imex = [micro, cfg](const SeparableSystem& sys) {
    return make_mr_imex2_stepper(sys, micro, cfg, true);
  };
  const auto imim = [micro, cfg](const SeparableSystem& sys) {
    return make_mr_imim2_stepper(sys, micro, cfg);
  };
  const CompositionWeights tj = triple_jump(2);
  return {
      {"mr-imex2", imex},
      {"mr-imim2", imim},
      {"mr-imex2+tj4",
       [imex, tj](const SeparableSystem& sys) {
         return compose_stepper(imex(sys), tj);
       }},
      {"mr-imim2+tj4",
       [imim, tj](const SeparableSystem& sys) {
         return compose_stepper(imim(sys), tj);
       }},
  };
}

int run_experiment_sweep(const ExperimentOptions& opt) {
  const int micro = opt.micro_steps_given ? opt.scheme.micro_steps : 1;
  const double t_end = opt.t_end_given ? opt.t_end : 3.0;
  const int k_max = opt.k_max_given ? opt.k_max : 13;
  SweepTable table;
  std::size_t n_schemes = 0;
  std::size_t n_omegas = 0;
  std::size_t n_steps = 0;
  try {
    const std::vector<double> omegas = parse_number_list(opt.omega_list);
    const std::vector<double> steps = dyadic_steps(opt.k_min, k_max);
    verify_builtin_scheme("mr-imex2", micro);
    verify_builtin_scheme("mr-imim2", micro);
    const std::vector<SweepScheme> schemes =
        sweep_schemes(micro, opt.solver.config());
    n_schemes = schemes.size();
    n_omegas = omegas.size();
    n_steps = steps.size();
    table = stability_sweep(schemes, omegas, steps, t_end);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "sweep experiment failed: " << e.what() << "\n";
    return kExitFail;
  }
  const std::size_t failed = static_cast<std::size_t>(
      std::count_if(table.cells.begin(), table.cells.end(),
                    [](const SweepCell& c) { return !c.note.empty(); }));
  std::cout << "sweep: " << table.cells.size() << " cells (" << n_schemes
            << " schemes x " << n_omegas << " frequencies x " << n_steps
            << " step sizes), " << failed << " failed\n";
  return write_csv_output(output_path(opt, "sweep"), [&](std::ostream& os) {
    write_sweep_csv(os, table);
  });
}

int run_experiment(const ExperimentOptions& opt) {
  if (opt.name == "energy") return run_experiment_energy(opt);
  if (opt.name == "convergence") return run_experiment_convergence(opt);
  if (opt.name == "sweep") return run_experiment_sweep(opt);
  std::cerr << "error: unknown experiment '" << opt.name
            << "'; available: energy, convergence, sweep\n";
  return kExitUsage;
}

// ---------------------------------------------------------------- compose

struct ComposeOptions {
  std::string target;
  int micro_steps = 1;
  std::string family = "triple-jump";
  int order = 4;
  std::string output = "composed.tab";
};

int run_compose(const ComposeOptions& opt) {
  try {
    const LoadedTableau base = load_target(opt.target, opt.micro_steps);
    PartitionedMgarkTableau composed =
        compose_scheme_tableau(base.part, opt.family, opt.order);
    const std::string base_name =
        base.part.name.empty() ? "custom" : base.part.name;
    composed.name = base_name + "+" + opt.family + std::to_string(opt.order);
    write_tableau_file(opt.output, composed);
    std::cout << "composed " << base_name << " (micro steps "
              << base.part.micro_steps << ") with " << opt.family << " order "
              << opt.order << ": " << composed.micro_steps
              << " micro steps per macro step\n";
    std::cout << "wrote " << opt.output << "\n";
    return kExitOk;
  } catch (const ParseError& e) {
    std::cerr << opt.target << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

// ------------------------------------------------------------------- list

int run_list() {
  std::cout
      << "schemes:\n"
         "  mr-lpfr    explicit multirate leapfrog; second order, symmetric,"
         " symplectic; micro-step count must be even\n"
         "  mr-imex2   implicit-explicit multirate impulse scheme; second"
         " order, symmetric, symplectic, decoupled micro solves\n"
         "  mr-imim2   implicit-implicit multirate scheme; second order,"
         " symmetric, symplectic, one coupled stage system\n"
         "composition families (--compose, and `compose --family`):\n"
         "  triple-jump      3 substeps per order raise; orders 4, 6, 8, ...\n"
         "  suzuki           5 substeps per order raise, substep times stay"
         " inside the step window\n"
         "  advanced         minimal substep counts 3/7/15/31 for orders"
         " 4/6/8/10\n"
         "  advanced-window  window-respecting variants, 5/9/17/33 substeps"
         " for orders 4/6/8/10\n"
         "problems:\n"
         "  fpu       Fermi-Pasta-Ulam spring chain; --m stiff springs,"
         " stiffness --omega\n"
         "  harmonic  one-dimensional oscillator with frequency --omega,"
         " entirely in the fast tier\n"
         "presets:\n"
         "  benchmark  unit excitation of the first soft and stiff modes\n"
         "experiments:\n"
         "  energy       long-run Hamiltonian and oscillatory-invariant"
         " series\n"
         "  convergence  slow-position error slope over dyadic macro steps\n"
         "  sweep        scheme x stiffness x step-size error grid\n";
  return kExitOk;
}

// ------------------------------------------------------------ CLI wiring

CLI::Option* add_scheme_options(CLI::App* cmd, SchemeOptions& opt) {
  cmd->add_option("--scheme", opt.scheme, "integration scheme")
      ->check(CLI::IsMember(builtin_scheme_names()))
      ->capture_default_str();
  CLI::Option* micro =
      cmd->add_option("--M,--micro-steps", opt.micro_steps,
                      "fast micro steps per macro step")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
  cmd->add_option("--compose", opt.compose,
                  "composition family raising the order")
      ->check(CLI::IsMember(
          {"none", "triple-jump", "suzuki", "advanced", "advanced-window"}))
      ->capture_default_str();
  cmd->add_option("--order", opt.order, "target order of the composed scheme")
      ->capture_default_str();
  return micro;
}

void add_problem_options(CLI::App* cmd, ProblemOptions& opt) {
  cmd->add_option("--problem", opt.problem, "problem to integrate")
      ->check(CLI::IsMember({"fpu", "harmonic"}))
      ->capture_default_str();
  cmd->add_option("--m", opt.m, "number of stiff springs in the chain")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--omega", opt.omega, "stiff frequency")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--preset", opt.preset, "start-state preset")
      ->capture_default_str();
  cmd->add_option("--p0", opt.p0,
                  "explicit start momenta, comma separated (with --q0)");
  cmd->add_option("--q0", opt.q0,
                  "explicit start positions, comma separated (with --p0)");
}

void add_solver_options(CLI::App* cmd, SolverOptions& opt) {
  cmd->add_option("--newton-rel-tol", opt.newton_rel_tol,
                  "Newton relative tolerance")
      ->capture_default_str();
  cmd->add_option("--newton-abs-tol", opt.newton_abs_tol,
                  "Newton absolute tolerance")
      ->capture_default_str();
  cmd->add_option("--newton-max-iters", opt.newton_max_iters,
                  "Newton iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--jacobian", opt.jacobian, "stage Jacobian mode")
      ->check(CLI::IsMember({"analytic", "fd"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "symplectic multirate integrators for additively partitioned"
      " Hamiltonian systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "smgark 0.1.0");

  CheckOptions copt;
  CLI::App* check = app.add_subcommand(
      "check",
      "verify the algebraic conditions of a builtin scheme or a tableau file");
  check
      ->add_option("target", copt.target,
                   "builtin scheme (mr-lpfr, mr-imex2, mr-imim2) or tableau"
                   " file path")
      ->required();
  check
      ->add_option("--M,--micro-steps", copt.micro_steps,
                   "micro steps per macro step for builtin schemes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  check->add_option("--tol", copt.tol, "condition residual tolerance")
      ->capture_default_str();
  check
      ->add_option("--require-order", copt.require_order,
                   "orders 1..p must hold for exit code 0")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  check->add_flag("--require-symmetric", copt.require_symmetric,
                  "fail unless the tableau equals its adjoint");
  check->add_flag("--require-explicit", copt.require_explicit,
                  "fail unless the scheme is explicit");
  check->add_flag("--require-decoupled", copt.require_decoupled,
                  "fail unless the stage graph decouples across tiers");
  check->add_flag("--require-positive-weights", copt.require_positive,
                  "fail unless every weight is strictly positive");
  check->add_option("--output,-o", copt.output,
                    "write the full condition report CSV here");

  IntegrateOptions iopt;
  CLI::App* integ = app.add_subcommand(
      "integrate", "integrate a problem and write the macro-grid trajectory"
                   " as CSV");
  integ->add_option("--config", iopt.config,
                    "flat key=value file with these option names;"
                    " command-line flags win");
  add_scheme_options(integ, iopt.scheme);
  add_problem_options(integ, iopt.problem);
  integ->add_option("--H", iopt.macro_step, "macro step size")
      ->capture_default_str();
  integ
      ->add_option("--t-end", iopt.t_end,
                   "final time, an integer multiple of the macro step")
      ->capture_default_str();
  add_solver_options(integ, iopt.solver);
  integ->add_option("--output,-o", iopt.output,
                    "output CSV path (default: stdout)");

  ExperimentOptions eopt;
  CLI::App* exper = app.add_subcommand(
      "experiment", "run a benchmark experiment on the spring chain and"
                    " write CSV results");
  exper->add_option("--config", eopt.config,
                    "flat key=value file with these option names;"
                    " command-line flags win");
  exper
      ->add_option("name", eopt.name,
                   "one of: energy, convergence, sweep")
      ->required()
      ->check(CLI::IsMember({"energy", "convergence", "sweep"}));
  CLI::Option* micro_opt = add_scheme_options(exper, eopt.scheme);
  exper->add_option("--m", eopt.m, "number of stiff springs in the chain")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  exper
      ->add_option("--omega", eopt.omega,
                   "stiff frequency (energy and convergence)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  exper
      ->add_option("--omega-list", eopt.omega_list,
                   "comma-separated stiff frequencies (sweep)")
      ->capture_default_str();
  exper->add_option("--H", eopt.macro_step, "macro step size (energy)")
      ->capture_default_str();
  CLI::Option* t_end_opt = exper->add_option(
      "--t-end", eopt.t_end,
      "final time (defaults: energy 220, convergence and sweep 3)");
  exper
      ->add_option("--k-min", eopt.k_min,
                   "smallest k of the dyadic step grid H = 2^-k")
      ->capture_default_str();
  CLI::Option* k_max_opt = exper->add_option(
      "--k-max", eopt.k_max, "largest k (defaults: convergence 9, sweep 13)");
  exper->add_option("--out-dir", eopt.out_dir,
                    "directory for the experiment CSV")
      ->capture_default_str();
  exper->add_option("--output,-o", eopt.output,
                    "explicit output CSV path (overrides --out-dir)");
  add_solver_options(exper, eopt.solver);

  ComposeOptions xopt;
  CLI::App* compose = app.add_subcommand(
      "compose", "compose a base tableau with palindromic substeps and write"
                 " the result as a tableau file");
  compose
      ->add_option("target", xopt.target,
                   "builtin scheme name or tableau file path")
      ->required();
  compose
      ->add_option("--M,--micro-steps", xopt.micro_steps,
                   "micro steps per macro step of the base scheme")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compose->add_option("--family", xopt.family, "composition family")
      ->check(CLI::IsMember(
          {"triple-jump", "suzuki", "advanced", "advanced-window"}))
      ->capture_default_str();
  compose->add_option("--order", xopt.order, "target order")
      ->capture_default_str();
  compose->add_option("--output,-o", xopt.output, "output tableau path")
      ->capture_default_str();

  CLI::App* list = app.add_subcommand(
      "list", "list builtin schemes, composition families, problems and"
              " experiments");

  take_last_options(integ);
  take_last_options(exper);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config_args(std::move(args), {integ, exper});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*check) return run_check(copt);
  if (*integ) return run_integrate(iopt);
  if (*exper) {
    eopt.micro_steps_given = micro_opt->count() > 0;
    eopt.t_end_given = t_end_opt->count() > 0;
    eopt.k_max_given = k_max_opt->count() > 0;
    return run_experiment(eopt);
  }
  if (*compose) return run_compose(xopt);
  if (*list) return run_list();
  return kExitUsage;
}
