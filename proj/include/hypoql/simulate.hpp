#ifndef HYPOQL_SIMULATE_HPP
#define HYPOQL_SIMULATE_HPP

#include <cstdint>
#include <vector>

#include "hypoql/model.hpp"

namespace hypoql {

/// Equally spaced sampling design with a fine internal Euler grid.
struct SamplingDesign {
    long n = 1000;            // observed increments
    double h = 0.1;           // observation step
    int substeps = 100;       // internal Euler steps per observation step
    double burn_in = 100.0;   // time discarded before recording
    Vec z0;                   // initial state, zeros of length d_z if empty
    std::uint64_t seed = 0;

    /// True when the design sits in the asymptotic regime nh^2 < 1. The
    /// benchmarks deliberately violate this; the flag is a warning, not an
    /// error, and is echoed in report metadata.
    bool regime_ok() const { return static_cast<double>(n) * h * h < 1.0; }

    void validate() const {
        if (n < 1 || !(h > 0.0) || substeps < 1 || burn_in < 0.0)
            throw InvalidArgumentError("sampling design: need n>=1, h>0, substeps>=1, burn_in>=0");
    }
};

/// Equally spaced observations (t_j, Z_{t_j}), j = 0..n, t_j = j*h after the
/// burn-in re-zeroing. One state per column, rough coordinates first.
struct SamplePath {
    double h = 0.0;
    Mat states;   // d_z x (n+1)

    long n() const { return states.cols() - 1; }
    int d_z() const { return static_cast<int>(states.rows()); }
    ConstVecRef state(long j) const { return states.col(j); }
};

/// SamplePath plus the post-burn-in fine grid (debug / reconstruction use).
struct DetailedPath {
    SamplePath path;
    Mat fine_states;   // d_z x (n*substeps + 1)
    double fine_step = 0.0;
};

/// Euler-Maruyama on the fine grid of step h/substeps: X gets the diffusion
/// term with i.i.d. Gaussian increments of variance h/substeps, Y advances by
/// H*(h/substeps). The first ceil(burn_in*substeps/h) fine steps are
/// discarded, then every substeps-th state is recorded. Deterministic given
/// the seed. Throws NonFiniteError when any state coordinate exceeds 1e12 in
/// magnitude (with the blow-up time).
SamplePath simulate_path(const ModelSpec& model, const ThetaBlocks& theta_star,
                         const SamplingDesign& design);

/// Same trajectory, also returning the fine grid.
DetailedPath simulate_path_detailed(const ModelSpec& model, const ThetaBlocks& theta_star,
                                    const SamplingDesign& design);

/// Time averages of monomials of the state over the observation points.
/// Each requested power is a vector of d_z exponents.
Vec empirical_moments(const SamplePath& path, const std::vector<Eigen::VectorXi>& powers);

} // namespace hypoql

#endif
