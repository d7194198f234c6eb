#pragma once

#include <string>
#include <vector>

namespace qfilter {

/// Formats a value with 12 significant digits ("%.12g"); NaN prints "nan".
std::string format_sig12(double v);

/// Writes rows as comma-separated lines; the header goes first. Throws
/// InputError when the file cannot be created.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

} // namespace qfilter
