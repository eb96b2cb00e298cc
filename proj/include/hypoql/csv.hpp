#ifndef HYPOQL_CSV_HPP
#define HYPOQL_CSV_HPP

#include <string>

#include "hypoql/asymptotics.hpp"
#include "hypoql/simulate.hpp"

namespace hypoql {

/// Writes a path as CSV: header `t,x1..x{d_X},y1..y{d_Y}`, one row per
/// observation time, 17 significant digits (lossless round-trip).
void write_path_csv(const std::string& file, const SamplePath& path, int d_x, int d_y);

/// Reads a path CSV back; infers d_x/d_y from the header. Throws
/// MalformedHeaderError, NonEquispacedError (relative tolerance 1e-9 on the
/// spacing) or NonNumericCellError (with row/column).
struct PathCsv {
    SamplePath path;
    int d_x = 0;
    int d_y = 0;
};
PathCsv read_path_csv(const std::string& file);

/// Identifiability diagnostic curve dump: grid coordinates then the value.
void write_y_curve_csv(const std::string& file, const YFieldCurve& curve);

} // namespace hypoql

#endif
