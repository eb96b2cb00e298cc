#include "hypoql/simulate.hpp"

#include <cmath>

#include "hypoql/rng.hpp"

namespace hypoql {

namespace {

struct Stepper {
    const ModelSpec& model;
    const ThetaBlocks& theta;
    double dt;
    double sqrt_dt;
    Rng rng;

    Vec x, y;        // current state
    Vec a, hvec, xi; // workspaces
    Mat b;

    Stepper(const ModelSpec& m, const ThetaBlocks& th, double dt_, std::uint64_t seed,
            const Vec& z0)
        : model(m), theta(th), dt(dt_), sqrt_dt(std::sqrt(dt_)), rng(seed) {
        const auto& d = m.dims;
        x = z0.head(d.d_x);
        y = z0.tail(d.d_y);
        a.resize(d.d_x);
        hvec.resize(d.d_y);
        xi.resize(d.r);
        b.resize(d.d_x, d.r);
    }

    void advance(double t_now) {
        model.drift(x, y, theta.theta2, a);
        model.diffusion(x, y, theta.theta1, b);
        model.smooth_drift(x, y, theta.theta3, hvec);
        for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
        x.noalias() += dt * a;
        x.noalias() += sqrt_dt * (b * xi);
        y.noalias() += dt * hvec;
        double m = std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
        if (!std::isfinite(m) || m > 1e12)
            throw NonFiniteError("trajectory blow-up at t = " + std::to_string(t_now), t_now);
    }
};

DetailedPath simulate_impl(const ModelSpec& model, const ThetaBlocks& theta,
                           const SamplingDesign& design, bool keep_fine) {
    design.validate();
    model.dims.validate();
    if (!model.theta_in_boxes(theta))
        throw InvalidArgumentError("simulate_path: theta_star outside parameter boxes");

    const auto& d = model.dims;
    Vec z0 = design.z0.size() ? design.z0 : Vec::Zero(d.d_z());
    if (z0.size() != d.d_z())
        throw InvalidArgumentError("simulate_path: z0 length != d_z");

    const double dt = design.h / design.substeps;
    const long burn_steps =
        static_cast<long>(std::ceil(design.burn_in * design.substeps / design.h));

    Stepper st(model, theta, dt, design.seed, z0);
    for (long k = 0; k < burn_steps; ++k) st.advance(k * dt);

    DetailedPath out;
    out.path.h = design.h;
    out.path.states.resize(d.d_z(), design.n + 1);
    if (keep_fine) {
        out.fine_states.resize(d.d_z(), design.n * design.substeps + 1);
        out.fine_step = dt;
    }

    auto record_obs = [&](long j) {
        out.path.states.col(j).head(d.d_x) = st.x;
        out.path.states.col(j).tail(d.d_y) = st.y;
    };
    auto record_fine = [&](long k) {
        if (!keep_fine) return;
        out.fine_states.col(k).head(d.d_x) = st.x;
        out.fine_states.col(k).tail(d.d_y) = st.y;
    };

    record_obs(0);
    record_fine(0);
    for (long j = 1; j <= design.n; ++j) {
        for (int s = 0; s < design.substeps; ++s) {
            // time is re-zeroed at the end of burn-in
            double t_now = (j - 1) * design.h + s * dt;
            st.advance(t_now);
            record_fine((j - 1) * design.substeps + s + 1);
        }
        record_obs(j);
    }
    return out;
}

} // namespace

SamplePath simulate_path(const ModelSpec& model, const ThetaBlocks& theta_star,
                         const SamplingDesign& design) {
    return simulate_impl(model, theta_star, design, false).path;
}

DetailedPath simulate_path_detailed(const ModelSpec& model, const ThetaBlocks& theta_star,
                                    const SamplingDesign& design) {
    return simulate_impl(model, theta_star, design, true);
}

Vec empirical_moments(const SamplePath& path, const std::vector<Eigen::VectorXi>& powers) {
    if (path.states.cols() == 0) throw InvalidArgumentError("empirical_moments: empty path");
    Vec out(powers.size());
    const long m = path.states.cols();
    for (std::size_t q = 0; q < powers.size(); ++q) {
        const auto& pw = powers[q];
        if (pw.size() != path.states.rows())
            throw InvalidArgumentError("empirical_moments: power length != d_z");
        double acc = 0.0;
        for (long j = 0; j < m; ++j) {
            double term = 1.0;
            for (Eigen::Index k = 0; k < pw.size(); ++k) {
                double v = path.states(k, j);
                for (int e = 0; e < pw[k]; ++e) term *= v;
            }
            acc += term;
        }
        out[q] = acc / static_cast<double>(m);
    }
    return out;
}

} // namespace hypoql
