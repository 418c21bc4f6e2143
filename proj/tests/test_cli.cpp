#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smgark/tableau.hpp"
#include "smgark/tableau_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace smgark;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SMGARK_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult result;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

// Scratch directory shared by all cases of one test run.
const std::string& work_dir() {
  static const std::string dir = [] {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "smgark-cli-XXXXXX")
            .string();
    const char* made = mkdtemp(tmpl.data());
    REQUIRE(made != nullptr);
    return std::string(made);
  }();
  return dir;
}

std::string path_in_work_dir(const std::string& name) {
  return work_dir() + "/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream out;
  out << is.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  REQUIRE(os.good());
  os << content;
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  return fields;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream is(text);
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("check accepts the shipped schemes") {
  CHECK(run_cli("check mr-lpfr --M 2").exit_code == 0);
  CHECK(run_cli("check mr-lpfr --M 4 --require-explicit --require-symmetric "
                "--require-positive-weights")
            .exit_code == 0);
  CHECK(run_cli("check mr-imex2 --M 5 --require-decoupled --require-symmetric")
            .exit_code == 0);
  CHECK(run_cli("check mr-imim2 --M 3 --require-symmetric "
                "--require-positive-weights")
            .exit_code == 0);
  const CliResult r = run_cli("check mr-lpfr --M 2");
  CHECK(contains(r.output, "result: PASS"));
  CHECK(contains(r.output, "explicit: yes"));
}

TEST_CASE("check rejects an odd micro-step count for the leapfrog") {
  const CliResult r = run_cli("check mr-lpfr --M 3");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.output, "M must be even"));
}

TEST_CASE("check reflects property violations in the exit code") {
  const CliResult coupled = run_cli("check mr-imim2 --M 2 --require-decoupled");
  CHECK(coupled.exit_code == 1);
  CHECK(contains(coupled.output, "result: FAIL"));
  CHECK(contains(coupled.output, "decoupled: no"));

  const CliResult implicit = run_cli("check mr-imex2 --M 2 --require-explicit");
  CHECK(implicit.exit_code == 1);
  CHECK(contains(implicit.output, "explicit: no"));
}

TEST_CASE("check names the failing conditions of a corrupted tableau") {
  PartitionedMgarkTableau t = build_mr_imex2(2).as_partitioned();
  t.slow.bar.b(0) += 0.125;
  const std::string path = path_in_work_dir("corrupt.tab");
  write_tableau_file(path, t);

  const CliResult r = run_cli("check " + path);
  CHECK(r.exit_code == 1);
  CHECK(contains(r.output, "result: FAIL"));
  CHECK(contains(r.output, "flat.p1"));
  CHECK(contains(r.output, "symplectic."));
}

TEST_CASE("check reports parse errors with line and column") {
  const std::string path = path_in_work_dir("bad.tab");
  write_file(path, "M = 2\n[bar.ss]\n0.5 junk\n");

  const CliResult r = run_cli("check " + path);
  CHECK(r.exit_code == 2);
  CHECK(contains(r.output, "line 3"));
  CHECK(contains(r.output, "column 5"));

  const CliResult missing = run_cli("check " + path_in_work_dir("absent.tab"));
  CHECK(missing.exit_code == 2);
}

TEST_CASE("check writes the full condition report CSV") {
  const std::string path = path_in_work_dir("report.csv");
  CHECK(run_cli("check mr-lpfr --M 2 --output " + path).exit_code == 0);

  const std::string csv = read_file(path);
  const std::vector<std::string> lines = lines_of(csv);
  REQUIRE(lines.size() > 40);
  CHECK(lines[0] == "condition_id,lhs,rhs,residual,pass");
  CHECK(contains(csv, "flat.p1"));
  CHECK(contains(csv, "symplectic.a"));
  CHECK(contains(csv, "explicit,1,1,0,true"));
  CHECK(contains(csv, "positive-weights,1,1,0,true"));
}

TEST_CASE("integrate writes the macro-grid trajectory") {
  const std::string path = path_in_work_dir("traj.csv");
  const CliResult r =
      run_cli("integrate --scheme mr-imex2 --H 0.1 --M 50 --t-end 1 "
              "--preset paper --output " +
              path);
  CHECK(r.exit_code == 0);

  const std::vector<std::string> lines = lines_of(read_file(path));
  REQUIRE(lines.size() == 12);  // header + 11 macro-grid rows
  const std::vector<std::string> header = split_csv_line(lines[0]);
  REQUIRE(header.size() == 17);  // t, 6 momenta, 6 positions, H, I, counters
  CHECK(header[0] == "t");
  CHECK(header[13] == "H");
  CHECK(header[14] == "I");
  CHECK(header[16] == "fast_evals");

  const std::vector<std::string> first = split_csv_line(lines[1]);
  CHECK(first[0] == "0");   // t = 0
  CHECK(first[1] == "1");   // soft momentum excitation
  CHECK(first[14] == "1");  // oscillatory invariant starts at exactly 1
  const std::vector<std::string> last = split_csv_line(lines[11]);
  CHECK(std::stod(last[0]) == doctest::Approx(1.0));
}

TEST_CASE("integrate with t-end zero emits the start state only") {
  const std::string path = path_in_work_dir("start.csv");
  CHECK(run_cli("integrate --t-end 0 --output " + path).exit_code == 0);
  CHECK(count_lines(read_file(path)) == 2);  // header + one row
}

TEST_CASE("integrate reruns are byte identical") {
  const std::string first = path_in_work_dir("run1.csv");
  const std::string second = path_in_work_dir("run2.csv");
  const std::string args =
      "integrate --scheme mr-imim2 --H 0.125 --M 3 --t-end 0.5 --output ";
  CHECK(run_cli(args + first).exit_code == 0);
  CHECK(run_cli(args + second).exit_code == 0);
  CHECK(read_file(first) == read_file(second));
}

TEST_CASE("integrate honors config files and flag overrides") {
  const std::string cfg = path_in_work_dir("run.cfg");
  write_file(cfg,
             "# benchmark run\n"
             "scheme = mr-lpfr\n"
             "M = 2\n"
             "H = 0.125\n"
             "t-end = 0.5\n");
  const std::string from_file = path_in_work_dir("cfg1.csv");
  CHECK(run_cli("integrate --config " + cfg + " --output " + from_file)
            .exit_code == 0);
  CHECK(count_lines(read_file(from_file)) == 6);  // header + 5 rows

  const std::string overridden = path_in_work_dir("cfg2.csv");
  CHECK(run_cli("integrate --config " + cfg + " --t-end 0.25 --output " +
                overridden)
            .exit_code == 0);
  CHECK(count_lines(read_file(overridden)) == 4);  // flag wins over the file

  const std::string bad = path_in_work_dir("bad.cfg");
  write_file(bad, "scheme = mr-lpfr\nbogus = 1\n");
  const CliResult unknown = run_cli("integrate --config " + bad);
  CHECK(unknown.exit_code == 2);
  CHECK(contains(unknown.output, "line 2"));
  CHECK(contains(unknown.output, "bogus"));

  CHECK(run_cli("integrate --config " + path_in_work_dir("absent.cfg"))
            .exit_code == 2);
}

TEST_CASE("integrate rejects unknown schemes listing the alternatives") {
  const CliResult r = run_cli("integrate --scheme mr-foo");
  CHECK(r.exit_code != 0);
  CHECK(contains(r.output, "mr-lpfr"));
  CHECK(contains(r.output, "mr-imex2"));
  CHECK(contains(r.output, "mr-imim2"));
}

TEST_CASE("integrate validates the time grid") {
  const CliResult r = run_cli("integrate --H 0.3 --t-end 1");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.output, "integer multiple"));

  const CliResult negative = run_cli("integrate --H -0.1 --t-end 1");
  CHECK(negative.exit_code == 2);
}

TEST_CASE("integrate surfaces solver failures with the step index") {
  const CliResult r = run_cli(
      "integrate --scheme mr-imim2 --omega 5000 --H 0.5 --t-end 1 "
      "--newton-max-iters 2");
  CHECK(r.exit_code == 1);
  CHECK(contains(r.output, "step 1:"));
  CHECK(contains(r.output, "Newton"));
}

TEST_CASE("compose emits a tableau file the checker accepts") {
  const std::string path = path_in_work_dir("suzuki4.tab");
  const CliResult r = run_cli(
      "compose mr-imex2 --M 2 --family suzuki --order 4 --output " + path);
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "10 micro steps"));  // 5 substeps x M = 2

  CHECK(run_cli("check " + path).exit_code == 0);
  // Order raising trades away positive weights; the checker keeps that
  // honest when asked for it.
  CHECK(run_cli("check " + path + " --require-positive-weights").exit_code ==
        1);

  const std::string sixth = path_in_work_dir("tj6.tab");
  CHECK(run_cli("compose mr-imim2 --family triple-jump --order 6 --output " +
                sixth)
            .exit_code == 0);
  CHECK(run_cli("check " + sixth + " --require-order 3").exit_code == 0);
}

TEST_CASE("experiment energy writes the invariant series") {
  const CliResult r = run_cli(
      "experiment energy --scheme mr-imex2 --M 50 --t-end 22 --out-dir " +
      work_dir());
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "drift slope"));

  const std::vector<std::string> lines =
      lines_of(read_file(path_in_work_dir("energy.csv")));
  REQUIRE(lines.size() == 222);  // header + 221 samples at H = 0.1
  CHECK(lines[0] == "t,H,I_1,I_2,I_3,I");
  const std::vector<std::string> first = split_csv_line(lines[1]);
  CHECK(first[0] == "0");
  CHECK(first[5] == "1");  // the oscillatory invariant starts at exactly 1
}

TEST_CASE("experiment convergence reports the slope in the footer") {
  const std::string path = path_in_work_dir("slope.csv");
  const CliResult r = run_cli("experiment convergence --output " + path);
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "slope"));

  const std::vector<std::string> lines = lines_of(read_file(path));
  REQUIRE(lines.size() == 6);  // header + the k = 5..9 dyadic grid
  CHECK(lines[0] == "H,error,slope");
  const double slope = std::stod(split_csv_line(lines.back())[2]);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
  for (std::size_t i = 1; i < lines.size(); ++i)  // footer value on every row
    CHECK(split_csv_line(lines[i])[2] == split_csv_line(lines[1])[2]);
}

TEST_CASE("experiment convergence accepts a composed scheme") {
  const std::string path = path_in_work_dir("slope-tj.csv");
  const CliResult r = run_cli(
      "experiment convergence --compose triple-jump --k-min 6 --k-max 7 "
      "--t-end 1.5 --output " +
      path);
  CHECK(r.exit_code == 0);
  const std::vector<std::string> lines = lines_of(read_file(path));
  REQUIRE(lines.size() == 3);
  const double coarse = std::stod(split_csv_line(lines[1])[1]);
  const double fine = std::stod(split_csv_line(lines[2])[1]);
  CHECK(fine < coarse);  // fourth-order scheme: halving H shrinks the error
}

TEST_CASE("experiment sweep covers the requested grid deterministically") {
  const std::string args =
      "experiment sweep --omega-list 50 --k-min 5 --k-max 6 --t-end 1.5 "
      "--output ";
  const std::string first = path_in_work_dir("sweep1.csv");
  const CliResult r = run_cli(args + first);
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "8 cells"));

  const std::vector<std::string> lines = lines_of(read_file(first));
  REQUIRE(lines.size() == 9);  // header + 4 schemes x 1 frequency x 2 steps
  CHECK(lines[0] == "scheme,omega,H,error,note");
  const std::vector<std::string> row = split_csv_line(lines[1]);
  CHECK(row[0] == "mr-imex2");
  CHECK(row[1] == "50");
  CHECK(row[2] == "0.03125");
  CHECK(contains(read_file(first), "mr-imim2+tj4"));

  const std::string second = path_in_work_dir("sweep2.csv");
  CHECK(run_cli(args + second).exit_code == 0);
  CHECK(read_file(first) == read_file(second));
}

TEST_CASE("list shows the builtin inventory") {
  const CliResult r = run_cli("list");
  CHECK(r.exit_code == 0);
  for (const char* name : {"mr-lpfr", "mr-imex2", "mr-imim2", "triple-jump",
                           "suzuki", "advanced", "fpu", "harmonic", "energy",
                           "convergence", "sweep"})
    CHECK(contains(r.output, name));
}

TEST_CASE("help and version respond without a subcommand") {
  const CliResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  for (const char* sub : {"check", "integrate", "experiment", "compose",
                          "list"})
    CHECK(contains(help.output, sub));
  CHECK(run_cli("--version").exit_code == 0);
  CHECK(run_cli("").exit_code != 0);  // a subcommand is required
}
