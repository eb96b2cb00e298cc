#ifndef HYPOQL_ASYMPTOTICS_HPP
#define HYPOQL_ASYMPTOTICS_HPP

#include <string>
#include <vector>

#include "hypoql/quasilik.hpp"

namespace hypoql {

/// Per-block convergence rates: theta1 at n^{-1/2}, theta2 at (nh)^{-1/2},
/// theta3 at n^{-1/2} h^{1/2} (the fastest block when h < 1).
struct RateMatrix {
    long n = 0;
    double h = 0.0;

    double s1() const { return 1.0 / std::sqrt(static_cast<double>(n)); }
    double s2() const { return 1.0 / std::sqrt(static_cast<double>(n) * h); }
    double s3() const { return std::sqrt(h / static_cast<double>(n)); }
};

/// Plug-in information matrices averaged over the path's empirical measure.
/// gamma1_init is the X-only information for the initial theta1 estimator;
/// gamma11 the improved one (two-trace form).
struct GammaBlocks {
    Mat gamma1_init;  // p1 x p1
    Mat gamma11;      // p1 x p1
    Mat gamma22;      // p2 x p2
    Mat gamma33;      // p3 x p3
};

/// Evaluates the four information integrands at every Z_{t_{j-1}} and
/// theta_hat, averaged over j. Throws NotPositiveDefiniteError if C or V
/// fails along the path.
GammaBlocks gamma_blocks(const SamplePath& path, const ModelSpec& model,
                         const ThetaBlocks& theta_hat);

struct ConfidenceInterval {
    std::string block;   // "theta1_initial", "theta1", "theta2", "theta3"
    int coord = 0;
    double estimate = 0.0;
    double half_width = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Two-sided standard normal quantile at probability p (Acklam's algorithm,
/// refined by one Halley step; |error| well below 1e-9).
double normal_quantile(double p);

/// a_n-scaled confidence intervals: theta_hat_i +/- z * s_block *
/// sqrt((Gamma_block^{-1})_{ii}). The improved theta1 block uses gamma11, the
/// initial theta1 estimate (when supplied) gamma1_init. Throws
/// SingularGammaError when a block cannot be inverted.
std::vector<ConfidenceInterval> confidence_intervals(const ThetaBlocks& theta_hat,
                                                     const Vec* theta1_initial,
                                                     const GammaBlocks& gammas,
                                                     const RateMatrix& rates, double level);

struct VarianceComparisonEntry {
    long state_index = 0;
    double max_violation = 0.0; // max over directions of (lhs - rhs)
    bool holds = false;
};

struct VarianceComparisonReport {
    std::vector<VarianceComparisonEntry> entries;
    bool all_hold() const {
        for (const auto& e : entries)
            if (!e.holds) return false;
        return true;
    }
};

/// Checks, at each probe state, that the V-route information term never
/// exceeds the C-route term:
///   Tr{V^{-1}Hx(d1C)Hx* V^{-1}Hx(d1C)Hx*} <= Tr{C^{-1}(d1C)C^{-1}(d1C)}
/// as p1 x p1 quadratic forms on 20 random directions (tolerance 1e-10).
/// Requires d_Y <= d_X and rank(H_x) = d_Y; throws RankDeficientHxError
/// otherwise. states: one probe per column.
VarianceComparisonReport check_variance_improvement(const ModelSpec& model, const Mat& states,
                                                    const Vec& theta1, const Vec& theta3);

enum class YField { y1, yj1, y2, y3 };

struct YFieldCurve {
    YField which = YField::y1;
    Mat grid;    // one grid point per column (block dimension rows)
    Vec values;  // empirical-measure field value per grid point
};

/// Empirical-measure identifiability diagnostics; all four vanish at the true
/// block value and are nonpositive. theta_star must be known (simulation /
/// diagnostic use). grid: one block-parameter point per column.
YFieldCurve eval_y_field(const SamplePath& path, const ModelSpec& model,
                         const ThetaBlocks& theta_star, YField which, const Mat& grid);

} // namespace hypoql

#endif
