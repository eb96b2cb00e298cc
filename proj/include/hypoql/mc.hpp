#ifndef HYPOQL_MC_HPP
#define HYPOQL_MC_HPP

#include "hypoql/config.hpp"

namespace hypoql {

struct ReplicateRow {
    long replicate = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Vec th1_init, th2, th3, th1_impr; // estimates of the four computing stages
    Vec th1_init_quad;                // quadrature cross-check when enabled
};

struct SummaryRow {
    std::string estimator;
    int coord = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample sd; 0 when n_ok == 1 (n_ok is the single-run flag)
    long n_ok = 0;
};

struct MCResult {
    std::vector<ReplicateRow> rows;
    std::vector<SummaryRow> summary;

    double failure_fraction() const;
};

/// Recomputes the summary table from the rows.
std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows);

/// Runs R replicates: simulate with a derived seed, run the adaptive
/// pipeline, collect the stage estimates. Replicates execute on a small
/// thread pool; rows are ordered by replicate index regardless of completion
/// order and the output is byte-deterministic given the config. Failed
/// replicates are recorded with their reason and excluded from the summary;
/// more than 5% failures raises TooManyFailuresError (after the output files
/// are written). model_override replaces the registry lookup (tests).
MCResult run_mc(const MCConfig& config, const ModelSpec* model_override = nullptr);

/// Row/summary CSV writers and the row reader used by the summary
/// consistency check.
void write_mc_rows_csv(const std::string& file, const MCResult& result);
void write_mc_summary_csv(const std::string& file, const MCResult& result);
std::vector<ReplicateRow> read_mc_rows_csv(const std::string& file);

} // namespace hypoql

#endif
