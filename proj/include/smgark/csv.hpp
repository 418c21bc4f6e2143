#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace smgark {

/// Formats a double with 17 significant digits ("%.17g", C locale), enough
/// for lossless binary round-trips.
std::string format_g17(double value);

/// Writes one CSV row (comma separators, LF terminator).
void write_csv_row(std::ostream& os, const std::vector<std::string>& cells);

/// Convenience: formats every value with format_g17 and writes the row.
void write_csv_row(std::ostream& os, const std::vector<double>& values);

}  // namespace smgark
