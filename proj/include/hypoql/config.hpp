#ifndef HYPOQL_CONFIG_HPP
#define HYPOQL_CONFIG_HPP

#include <map>
#include <string>

#include "hypoql/estimators.hpp"

namespace hypoql {

/// Monte Carlo experiment description (the `mc` subcommand input).
struct MCConfig {
    std::string model_name = "linear";
    ThetaBlocks theta_star;
    SamplingDesign design;      // per-replicate seeds are derived, design.seed unused
    EstimateOptions options;
    long replicates = 100;
    std::uint64_t base_seed = 1;
    int threads = 0;            // 0 = hardware concurrency
    std::string out_rows;
    std::string out_summary;

    void validate(const ModelSpec& model) const;
};

/// Flat key-value config file, TOML-style sections:
///   [model] name, theta1, theta2, theta3
///   [design] n, h, substeps, burn_in
///   [estimators] scheme, mh_length, mh_burn_in_fraction, mh_proposal_frac,
///                mh_adapt, qmle_budget, warm_start, warm_budget,
///                quad_cross_grid, ci_level
///   [mc] replicates, base_seed, threads, out_rows, out_summary
/// Unknown keys are rejected; values are numbers, booleans, "strings" or
/// [arrays, of, numbers]. Throws ConfigError with the offending key.
MCConfig parse_mc_config_text(const std::string& text);
MCConfig parse_mc_config_file(const std::string& file);

/// The parsed raw layer, exposed for the config tests.
using RawConfig = std::map<std::string, std::map<std::string, std::string>>;
RawConfig parse_raw_config(const std::string& text);

} // namespace hypoql

#endif
