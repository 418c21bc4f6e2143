#pragma once

#include "smgark/tableau.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace smgark {

/// Error raised by the tableau text parser; carries the 1-based line and
/// column of the offending input.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Serializes a tableau in the plain-text block format:
///   M = <k>                       (and an optional "name = <id>" line)
///   [bar.ss] / [tilde.ss]         slow coefficient matrices, one row/line
///   [bar.b.s] / [tilde.b.s]       slow weights, single line
///   [bar.ff lambda=k] ...         fast blocks and couplings per micro step
///   [bar.sf lambda=k], [bar.fs lambda=k], [bar.b.f lambda=k]  (+ tilde)
/// Values use 17 significant digits, so write/read round-trips are lossless.
void write_tableau(std::ostream& os, const PartitionedMgarkTableau& t);

/// Parses the format written by write_tableau.  Throws ParseError with line
/// and column information on malformed input, std::invalid_argument on
/// structurally inconsistent blocks.
PartitionedMgarkTableau read_tableau(std::istream& is);

/// File helpers; throw std::runtime_error when the file cannot be opened.
void write_tableau_file(const std::string& path,
                        const PartitionedMgarkTableau& t);
PartitionedMgarkTableau read_tableau_file(const std::string& path);

}  // namespace smgark
