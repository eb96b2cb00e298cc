#include "hypoql/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace hypoql {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_cell(const std::string& s, long row, long col) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0'))
        throw NonNumericCellError("non-numeric cell '" + s + "' at row " + std::to_string(row) +
                                      ", column " + std::to_string(col),
                                  row, col);
    return v;
}

} // namespace

void write_path_csv(const std::string& file, const SamplePath& path, int d_x, int d_y) {
    if (d_x + d_y != path.d_z())
        throw InvalidArgumentError("write_path_csv: d_x + d_y != path dimension");
    std::ofstream os(file);
    if (!os) throw Error("cannot open '" + file + "' for writing");
    os << "t";
    for (int i = 1; i <= d_x; ++i) os << ",x" << i;
    for (int i = 1; i <= d_y; ++i) os << ",y" << i;
    os << "\n";
    for (long j = 0; j <= path.n(); ++j) {
        os << fmt17(static_cast<double>(j) * path.h);
        for (int k = 0; k < path.d_z(); ++k) os << "," << fmt17(path.states(k, j));
        os << "\n";
    }
    if (!os) throw Error("error while writing '" + file + "'");
}

PathCsv read_path_csv(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw Error("cannot open '" + file + "' for reading");

    std::string line;
    if (!std::getline(is, line)) throw MalformedHeaderError("empty file: " + file);
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "t")
        throw MalformedHeaderError("header must start with 't', got '" + line + "'");
    int d_x = 0, d_y = 0;
    std::size_t i = 1;
    for (; i < header.size() && header[i] == "x" + std::to_string(d_x + 1); ++i) ++d_x;
    for (; i < header.size() && header[i] == "y" + std::to_string(d_y + 1); ++i) ++d_y;
    if (i != header.size() || d_x < 1 || d_y < 1)
        throw MalformedHeaderError("header must be t,x1..x{d_X},y1..y{d_Y}, got '" + line + "'");

    std::vector<double> times;
    std::vector<Vec> states;
    long row = 1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw MalformedHeaderError("row " + std::to_string(row) + " has " +
                                       std::to_string(cells.size()) + " cells, want " +
                                       std::to_string(header.size()));
        times.push_back(parse_cell(cells[0], row, 0));
        Vec z(d_x + d_y);
        for (int k = 0; k < d_x + d_y; ++k) z[k] = parse_cell(cells[k + 1], row, k + 1);
        states.push_back(std::move(z));
        ++row;
    }
    if (times.size() < 2) throw NonEquispacedError("need at least two rows");

    const double h = times[1] - times[0];
    if (!(h > 0.0)) throw NonEquispacedError("time must be strictly increasing");
    for (std::size_t j = 1; j < times.size(); ++j) {
        double dt = times[j] - times[j - 1];
        if (!(dt > 0.0) || std::abs(dt - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw NonEquispacedError("non-equispaced time at row " + std::to_string(j + 1));
    }

    PathCsv out;
    out.d_x = d_x;
    out.d_y = d_y;
    out.path.h = h;
    out.path.states.resize(d_x + d_y, static_cast<long>(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) out.path.states.col(j) = states[j];
    return out;
}

void write_y_curve_csv(const std::string& file, const YFieldCurve& curve) {
    std::ofstream os(file);
    if (!os) throw Error("cannot open '" + file + "' for writing");
    for (int k = 0; k < curve.grid.rows(); ++k) os << "theta" << (k + 1) << ",";
    os << "value\n";
    for (Eigen::Index g = 0; g < curve.grid.cols(); ++g) {
        for (int k = 0; k < curve.grid.rows(); ++k) os << fmt17(curve.grid(k, g)) << ",";
        os << fmt17(curve.values[g]) << "\n";
    }
}

} // namespace hypoql
