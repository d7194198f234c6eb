#include "qfilter/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qfilter/errors.hpp"

namespace qfilter {

std::string format_sig12(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot create \"" + path + "\"");
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_sig12(row[i]);
        }
        out << '\n';
    }
}

} // namespace qfilter
