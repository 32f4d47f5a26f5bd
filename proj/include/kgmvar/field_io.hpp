#pragma once

// Text serialization of ScalarField: a CSV table (one row per node) and the
// legacy structured-points format understood by common visualization
// tools. Decimals are written with 17 significant digits, which makes the
// CSV round-trip bit-exact.

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "kgmvar/domain.hpp"

namespace kgmvar::io {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

/// Header `i,j[,k],x,y[,z],value`; indices are padded-lattice coordinates
/// (0 and n_a+1 are boundary layers).
inline void write_csv(std::ostream& os, const ScalarField& f) {
    const Domain& d = f.domain();
    const char* idx_names[] = {"i", "j", "k"};
    const char* pos_names[] = {"x", "y", "z"};
    for (int a = 0; a < d.dim(); ++a) {
        os << idx_names[a] << ',';
    }
    for (int a = 0; a < d.dim(); ++a) {
        os << pos_names[a] << ',';
    }
    os << "value\n";
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
        const NodeIndex c = d.coords(flat);
        const Point x = d.position(flat);
        for (int a = 0; a < d.dim(); ++a) {
            os << c[a] << ',';
        }
        for (int a = 0; a < d.dim(); ++a) {
            os << format_double(x[a]) << ',';
        }
        os << format_double(f[flat]) << '\n';
    }
}

/// Reads a table produced by write_csv back onto `d`. Rows may come in any
/// order; every node must appear exactly once.
inline ScalarField read_csv(std::istream& is, const Domain& d) {
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigError("csv: empty input");
    }
    const std::size_t columns = static_cast<std::size_t>(2 * d.dim() + 1);
    ScalarField f(d);
    std::vector<char> seen(d.node_count(), 0);
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() != columns) {
            throw ConfigError("csv: expected " + std::to_string(columns) + " columns");
        }
        NodeIndex c{0, 0, 0};
        for (int a = 0; a < d.dim(); ++a) {
            c[a] = static_cast<int>(parse_double(cells[a]));
            if (c[a] < 0 || c[a] >= d.extent(a)) {
                throw ConfigError("csv: node index out of range");
            }
        }
        const std::size_t flat = d.index(c);
        if (seen[flat]) {
            throw ConfigError("csv: duplicate node");
        }
        seen[flat] = 1;
        f[flat] = parse_double(cells.back());
        ++rows;
    }
    if (rows != d.node_count()) {
        throw ConfigError("csv: expected " + std::to_string(d.node_count()) + " rows, got " + std::to_string(rows));
    }
    return f;
}

inline void write_structured_points(std::ostream& os, const ScalarField& f, const std::string& name = "value") {
    const Domain& d = f.domain();
    os << "# vtk DataFile Version 3.0\n";
    os << name << "\n";
    os << "ASCII\n";
    os << "DATASET STRUCTURED_POINTS\n";
    os << "DIMENSIONS " << d.extent(0) << ' ' << d.extent(1) << ' ' << d.extent(2) << '\n';
    os << "ORIGIN 0 0 0\n";
    os << "SPACING " << format_double(d.spacing(0)) << ' ' << format_double(d.spacing(1)) << ' '
       << format_double(d.dim() == 3 ? d.spacing(2) : 1.0) << '\n';
    os << "POINT_DATA " << d.node_count() << '\n';
    os << "SCALARS " << name << " double 1\n";
    os << "LOOKUP_TABLE default\n";
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
        os << format_double(f[flat]) << '\n';
    }
}

inline std::string to_csv(const ScalarField& f) {
    std::ostringstream os;
    write_csv(os, f);
    return os.str();
}

}  // namespace kgmvar::io
