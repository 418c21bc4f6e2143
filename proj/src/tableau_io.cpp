#include "smgark/tableau_io.hpp"

#include "smgark/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

namespace smgark {

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

void write_matrix(std::ostream& os, const std::string& header,
                  const Matrix& m) {
  os << '[' << header << "]\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_g17(m(i, j));
    }
    os << '\n';
  }
  os << '\n';
}

void write_vector(std::ostream& os, const std::string& header,
                  const Vector& v) {
  write_matrix(os, header, v.transpose());
}

}  // namespace

void write_tableau(std::ostream& os, const PartitionedMgarkTableau& t) {
  t.validate();
  if (!t.name.empty()) os << "name = " << t.name << '\n';
  os << "M = " << t.micro_steps << "\n\n";
  write_matrix(os, "bar.ss", t.slow.bar.a);
  write_vector(os, "bar.b.s", t.slow.bar.b);
  write_matrix(os, "tilde.ss", t.slow.tilde.a);
  write_vector(os, "tilde.b.s", t.slow.tilde.b);
  for (int k = 0; k < t.micro_steps; ++k) {
    const std::string lam = " lambda=" + std::to_string(k + 1);
    write_matrix(os, "bar.ff" + lam, t.fast[k].bar.a);
    write_matrix(os, "bar.sf" + lam, t.couple_sf_bar[k]);
    write_matrix(os, "bar.fs" + lam, t.couple_fs_bar[k]);
    write_vector(os, "bar.b.f" + lam, t.fast[k].bar.b);
    write_matrix(os, "tilde.ff" + lam, t.fast[k].tilde.a);
    write_matrix(os, "tilde.sf" + lam, t.couple_sf_tilde[k]);
    write_matrix(os, "tilde.fs" + lam, t.couple_fs_tilde[k]);
    write_vector(os, "tilde.b.f" + lam, t.fast[k].tilde.b);
  }
}

namespace {

struct Section {
  int line = 0;                            // header line number
  std::vector<std::vector<double>> rows;   // numeric payload
};

struct ParsedFile {
  std::optional<int> micro_steps;
  std::string name;
  std::map<std::string, Section> sections;
  int line_count = 0;
};

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

ParsedFile scan(std::istream& is) {
  ParsedFile out;
  std::string raw;
  Section* current = nullptr;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    const std::string body = strip(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      const int col = static_cast<int>(line.find('[')) + 1;
      if (body.back() != ']')
        throw ParseError(line_no, col, "unterminated section header");
      const std::string header = strip(body.substr(1, body.size() - 2));
      if (out.sections.count(header))
        throw ParseError(line_no, col, "duplicate section [" + header + "]");
      current = &out.sections[header];
      current->line = line_no;
      continue;
    }
    if (auto eq = body.find('='); eq != std::string::npos &&
                                  std::isalpha(static_cast<unsigned char>(
                                      body.front()))) {
      const std::string key = strip(body.substr(0, eq));
      const std::string value = strip(body.substr(eq + 1));
      const int col = static_cast<int>(line.find('=')) + 2;
      if (key == "M") {
        char* end = nullptr;
        const long m = std::strtol(value.c_str(), &end, 10);
        if (end == value.c_str() || *end != '\0' || m < 1)
          throw ParseError(line_no, col, "invalid micro-step count '" +
                                             value + "'");
        out.micro_steps = static_cast<int>(m);
      } else if (key == "name") {
        out.name = value;
      } else {
        throw ParseError(line_no, 1, "unknown key '" + key + "'");
      }
      continue;
    }
    if (!current)
      throw ParseError(line_no, 1, "data outside of any section");
    std::vector<double> row;
    const char* base = line.c_str();
    const char* cursor = base;
    while (true) {
      while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
      if (*cursor == '\0') break;
      char* end = nullptr;
      const double v = std::strtod(cursor, &end);
      if (end == cursor || (*end != '\0' && *end != ' ' && *end != '\t' &&
                            *end != '\r')) {
        const int col = static_cast<int>(cursor - base) + 1;
        std::string tok(cursor, std::min<std::size_t>(16, std::strcspn(
                                    cursor, " \t\r")));
        throw ParseError(line_no, col, "invalid number '" + tok + "'");
      }
      row.push_back(v);
      cursor = end;
    }
    if (!current->rows.empty() &&
        current->rows.front().size() != row.size())
      throw ParseError(line_no, 1, "inconsistent row length in section");
    current->rows.push_back(std::move(row));
  }
  out.line_count = line_no;
  return out;
}

Matrix to_matrix(const Section& s) {
  const auto rows = static_cast<Eigen::Index>(s.rows.size());
  const auto cols =
      rows ? static_cast<Eigen::Index>(s.rows.front().size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = s.rows[static_cast<std::size_t>(i)]
                      [static_cast<std::size_t>(j)];
  return m;
}

Vector to_vector(const Section& s, const ParsedFile& f,
                 const std::string& header) {
  if (s.rows.size() != 1)
    throw ParseError(s.line ? s.line : f.line_count, 1,
                     "weight section [" + header + "] must be a single row");
  return to_matrix(s).transpose().col(0);
}

const Section& need(const ParsedFile& f, const std::string& header) {
  auto it = f.sections.find(header);
  if (it == f.sections.end())
    throw ParseError(f.line_count, 1, "missing section [" + header + "]");
  return it->second;
}

}  // namespace

PartitionedMgarkTableau read_tableau(std::istream& is) {
  const ParsedFile f = scan(is);
  if (!f.micro_steps)
    throw ParseError(f.line_count, 1, "missing 'M = <k>' line");
  PartitionedMgarkTableau t;
  t.micro_steps = *f.micro_steps;
  t.name = f.name;
  t.slow.bar.a = to_matrix(need(f, "bar.ss"));
  t.slow.bar.b = to_vector(need(f, "bar.b.s"), f, "bar.b.s");
  t.slow.tilde.a = to_matrix(need(f, "tilde.ss"));
  t.slow.tilde.b = to_vector(need(f, "tilde.b.s"), f, "tilde.b.s");
  t.fast.resize(t.micro_steps);
  t.couple_sf_bar.resize(t.micro_steps);
  t.couple_sf_tilde.resize(t.micro_steps);
  t.couple_fs_bar.resize(t.micro_steps);
  t.couple_fs_tilde.resize(t.micro_steps);
  for (int k = 0; k < t.micro_steps; ++k) {
    const std::string lam = " lambda=" + std::to_string(k + 1);
    t.fast[k].bar.a = to_matrix(need(f, "bar.ff" + lam));
    t.fast[k].bar.b = to_vector(need(f, "bar.b.f" + lam), f, "bar.b.f" + lam);
    t.fast[k].tilde.a = to_matrix(need(f, "tilde.ff" + lam));
    t.fast[k].tilde.b =
        to_vector(need(f, "tilde.b.f" + lam), f, "tilde.b.f" + lam);
    t.couple_sf_bar[k] = to_matrix(need(f, "bar.sf" + lam));
    t.couple_sf_tilde[k] = to_matrix(need(f, "tilde.sf" + lam));
    t.couple_fs_bar[k] = to_matrix(need(f, "bar.fs" + lam));
    t.couple_fs_tilde[k] = to_matrix(need(f, "tilde.fs" + lam));
  }
  // Reject sections that belong to no expected block (typo protection).
  for (const auto& [header, section] : f.sections) {
    const bool bar = header.rfind("bar.", 0) == 0;
    const bool tilde = header.rfind("tilde.", 0) == 0;
    if (!bar && !tilde)
      throw ParseError(section.line, 1, "unknown section [" + header + "]");
    const std::string rest = header.substr(bar ? 4 : 6);
    if (rest == "ss" || rest == "b.s") continue;
    auto lam_pos = rest.find(" lambda=");
    if (lam_pos == std::string::npos)
      throw ParseError(section.line, 1, "unknown section [" + header + "]");
    const std::string kind = rest.substr(0, lam_pos);
    if (kind != "ff" && kind != "sf" && kind != "fs" && kind != "b.f")
      throw ParseError(section.line, 1, "unknown section [" + header + "]");
    const std::string lam_str = rest.substr(lam_pos + 8);
    char* end = nullptr;
    const long lam = std::strtol(lam_str.c_str(), &end, 10);
    if (end == lam_str.c_str() || *end != '\0' || lam < 1 ||
        lam > t.micro_steps)
      throw ParseError(section.line, 1,
                       "lambda out of range in [" + header + "]");
  }
  t.validate();
  return t;
}

void write_tableau_file(const std::string& path,
                        const PartitionedMgarkTableau& t) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_tableau(os, t);
  if (!os) throw std::runtime_error("write failed: " + path);
}

PartitionedMgarkTableau read_tableau_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_tableau(is);
}

}  // namespace smgark
