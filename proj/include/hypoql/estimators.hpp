#ifndef HYPOQL_ESTIMATORS_HPP
#define HYPOQL_ESTIMATORS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "hypoql/asymptotics.hpp"
#include "hypoql/quasilik.hpp"

namespace hypoql {

enum class EstimatorKind : char { qmle = 'M', qbe = 'B' };

/// Estimator kinds for the four computing stages, in pipeline order
/// (theta1-initial, theta2, theta3, theta1-improved); parsed from strings
/// like "BBBB" or "MBMB". Stage 5 reuses stage 2's output.
struct Scheme {
    EstimatorKind a0 = EstimatorKind::qbe; // theta1 initial
    EstimatorKind a2 = EstimatorKind::qbe; // theta2
    EstimatorKind a3 = EstimatorKind::qbe; // theta3
    EstimatorKind a1 = EstimatorKind::qbe; // theta1 improved

    static Scheme parse(const std::string& s);
    std::string str() const;
};

/// Prior density over one block's box, up to normalization. Must be strictly
/// positive and bounded on the open box; the default is the uniform density.
struct PriorSpec {
    std::function<double(const Vec&)> density; // empty => uniform

    double operator()(const Vec& v) const { return density ? density(v) : 1.0; }
    static PriorSpec uniform() { return {}; }
};

struct MHConfig {
    long chain_length = 5000;
    double burn_in_fraction = 0.2;
    Vec initial_point;        // empty => box center
    Vec proposal_scale;       // per coordinate; empty => 2% of box width
    bool adapt = true;        // scale adaptation during burn-in, target 0.3
    std::uint64_t seed = 1;

    void validate(int dim) const;
};

/// Result of one estimation stage.
struct StageResult {
    std::string block;            // "theta1_initial", "theta2", ...
    EstimatorKind kind = EstimatorKind::qmle;
    Vec estimate;
    double objective = std::numeric_limits<double>::quiet_NaN(); // field at estimate
    // quasi-Bayes diagnostics
    double accept_rate = std::numeric_limits<double>::quiet_NaN();
    Vec mc_se;                    // batch-means standard error of the chain mean
    bool modified = false;        // posterior mean fell outside the open box
    Vec proposal_scale_used;
    // common diagnostics
    long evaluations = 0;
    long pd_failures = 0;
    double wall_seconds = 0.0;
};

/// Bounded derivative-free maximization of a quasi-likelihood field:
/// multi-start Nelder-Mead (box center plus 4 seeded uniform draws), every
/// candidate clipped into the closed box, termination on a coordinate-wise
/// simplex diameter of 1e-6 of the box width or on budget exhaustion. The
/// best point ever evaluated wins; ties go to the earlier start. Throws
/// AllEvaluationsRejectedError when every probe was -inf.
StageResult qmle(const QLField& field, const ParamBox& box, long budget, std::uint64_t seed);

/// Posterior-mean estimator by tensor trapezoid quadrature over the box,
/// with the max-shift trick. Restricted to block dimension <= 2 and
/// grid_per_dim >= 51. Applies the modification rule: a mean outside the
/// open box is replaced by the fallback point (box center) and flagged.
StageResult qbe_quadrature(const QLField& field, const PriorSpec& prior, int grid_per_dim);

/// Posterior-mean estimator by random-walk Metropolis-Hastings targeting
/// exp(field) * prior. Gaussian proposals with per-coordinate scales;
/// out-of-box or -inf proposals are rejected; optional global scale
/// adaptation during burn-in (frozen afterwards). The estimate is the
/// post-burn-in sample mean, with the same modification rule as quadrature.
StageResult qbe_metropolis(const QLField& field, const PriorSpec& prior, const MHConfig& cfg);

/// Everything run_adaptive needs besides the data: scheme, budgets, MH
/// configuration, priors and seeds. Defaults follow the benchmark studies.
struct EstimateOptions {
    Scheme scheme;
    long qmle_budget = 0;              // per stage; 0 => 1500 * block dimension
    long mh_length = 5000;
    double mh_burn_in_fraction = 0.2;
    double mh_proposal_frac = 0.02;    // of box width, per coordinate
    bool mh_adapt = true;
    bool warm_start = true;            // start B-stage chains at a short QMLE
    long warm_budget = 0;              // 0 => 400 * block dimension
    int quad_cross_grid = 0;           // >0: quadrature cross-check of stage 1 (p1 <= 2)
    double ci_level = 0.95;
    std::uint64_t seed = 1;
    PriorSpec prior1, prior2, prior3;

    long stage_budget(int dim) const { return qmle_budget > 0 ? qmle_budget : 1500L * dim; }
    long stage_warm_budget(int dim) const { return warm_budget > 0 ? warm_budget : 400L * dim; }
};

/// Output of the 5-step pipeline.
struct AdaptiveReport {
    std::array<StageResult, 5> stages; // 1..4 computing stages, 5 = theta2 carry-over
    ThetaBlocks final_estimate;
    long n = 0;
    double h = 0.0;
    bool design_regime_ok = false;     // nh^2 < 1 flag echoed from the data

    bool gammas_ok = false;
    std::string gammas_error;
    GammaBlocks gammas;
    std::vector<ConfidenceInterval> cis;

    std::optional<StageResult> quad_cross_check; // stage-1 quadrature variant

    EstimateOptions options; // full echo for reproducibility
};

/// Runs the adaptive pipeline on a path:
///   1. theta1-initial on the X-only field,
///   2. theta2 given step 1,
///   3. theta3 given steps 1-2,
///   4. theta1-improved given steps 2-3,
///   5. final theta2 := step 2's estimate.
/// Stage errors are rethrown as StageError with the stage index. A stage
/// whose field rejected more than 0.1% of its evaluations as non-PD also
/// fails. Plug-in information and confidence intervals are attached when
/// computable.
AdaptiveReport run_adaptive(const SamplePath& path, const ModelSpec& model,
                            const EstimateOptions& options);

} // namespace hypoql

#endif
