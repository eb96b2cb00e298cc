#ifndef HYPOQL_REPORT_HPP
#define HYPOQL_REPORT_HPP

#include <string>

#include "hypoql/estimators.hpp"

namespace hypoql {

inline constexpr const char* kVersion = "0.1.0";

/// JSON document for an adaptive estimation run:
/// {meta:{version, config, seeds}, stages:[...], final:{...}, gammas:{...},
///  cis:{...}} — every estimator setting is echoed so the numbers are
/// reproducible from the report alone.
std::string report_to_json(const AdaptiveReport& report, const std::string& model_name);

void write_report_json(const std::string& file, const AdaptiveReport& report,
                       const std::string& model_name);

} // namespace hypoql

#endif
