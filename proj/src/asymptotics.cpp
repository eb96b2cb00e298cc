#include "hypoql/asymptotics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>

#include "hypoql/rng.hpp"

namespace hypoql {

namespace {

Mat cholesky_inverse(const Mat& a, const char* what) {
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError(std::string(what) + " is not positive definite");
    return llt.solve(Mat::Identity(a.rows(), a.cols()));
}

} // namespace

GammaBlocks gamma_blocks(const SamplePath& path, const ModelSpec& model,
                         const ThetaBlocks& theta_hat) {
    const auto& d = model.dims;
    if (path.n() < 1) throw InvalidArgumentError("gamma_blocks: need n >= 1");
    if (!model.theta_in_boxes(theta_hat))
        throw InvalidArgumentError("gamma_blocks: theta_hat outside parameter boxes");

    GammaBlocks g;
    g.gamma1_init = Mat::Zero(d.p1, d.p1);
    g.gamma11 = Mat::Zero(d.p1, d.p1);
    g.gamma22 = Mat::Zero(d.p2, d.p2);
    g.gamma33 = Mat::Zero(d.p3, d.p3);

    const long n = path.n();
    Mat b, hx, da, dh;
    std::vector<Mat> dc;
    for (long j = 0; j < n; ++j) {
        Vec z = path.states.col(j);
        auto x = z.head(d.d_x);
        auto y = z.tail(d.d_y);

        model.diffusion(x, y, theta_hat.theta1, b);
        Mat c = b * b.transpose();
        Mat cinv = cholesky_inverse(c, "gamma_blocks: C along path");
        model.smooth_dx(x, y, theta_hat.theta3, hx);
        Mat v = hx * c * hx.transpose();
        Mat vinv = cholesky_inverse(v, "gamma_blocks: V along path");

        model.cov_d1(x, y, theta_hat.theta1, dc);
        // two-trace form for the improved-block information:
        //   1/2 [ Tr{C^{-1} dC_k C^{-1} dC_l}
        //         + Tr{V^{-1} Hx dC_k Hx* V^{-1} Hx dC_l Hx*} ]
        for (int k = 0; k < d.p1; ++k) {
            Mat ck = cinv * dc[k];
            Mat wk = vinv * (hx * dc[k] * hx.transpose());
            for (int l = 0; l < d.p1; ++l) {
                Mat cl = cinv * dc[l];
                double tc = (ck * cl).trace();
                Mat wl = vinv * (hx * dc[l] * hx.transpose());
                double tv = (wk * wl).trace();
                g.gamma1_init(k, l) += 0.5 * tc;
                g.gamma11(k, l) += 0.5 * (tc + tv);
            }
        }

        model.drift_d2(x, y, theta_hat.theta2, da);
        g.gamma22.noalias() += da.transpose() * cinv * da;

        model.smooth_d3(x, y, theta_hat.theta3, dh);
        g.gamma33.noalias() += 12.0 * dh.transpose() * vinv * dh;
    }

    auto finish = [n](Mat& m) {
        m /= static_cast<double>(n);
        m = ((m + m.transpose()) / 2.0).eval(); // remove round-off asymmetry
    };
    finish(g.gamma1_init);
    finish(g.gamma11);
    finish(g.gamma22);
    finish(g.gamma33);
    return g;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgumentError("normal_quantile: p in (0,1)");
    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    }
    // one Halley refinement against erfc
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1 + x * u / 2);
    return x;
}

namespace {

void append_cis(std::vector<ConfidenceInterval>& out, const std::string& block, const Vec& est,
                const Mat& gamma, double scale, double z) {
    Eigen::LLT<Mat> llt(gamma);
    if (llt.info() != Eigen::Success)
        throw SingularGammaError("confidence_intervals: " + block + " information singular");
    Mat ginv = llt.solve(Mat::Identity(gamma.rows(), gamma.cols()));
    for (int i = 0; i < est.size(); ++i) {
        ConfidenceInterval ci;
        ci.block = block;
        ci.coord = i;
        ci.estimate = est[i];
        ci.half_width = z * scale * std::sqrt(ginv(i, i));
        ci.lo = ci.estimate - ci.half_width;
        ci.hi = ci.estimate + ci.half_width;
        out.push_back(ci);
    }
}

} // namespace

std::vector<ConfidenceInterval> confidence_intervals(const ThetaBlocks& theta_hat,
                                                     const Vec* theta1_initial,
                                                     const GammaBlocks& gammas,
                                                     const RateMatrix& rates, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw InvalidArgumentError("confidence_intervals: level in (0,1)");
    double z = normal_quantile(0.5 * (1.0 + level));
    std::vector<ConfidenceInterval> out;
    if (theta1_initial)
        append_cis(out, "theta1_initial", *theta1_initial, gammas.gamma1_init, rates.s1(), z);
    append_cis(out, "theta1", theta_hat.theta1, gammas.gamma11, rates.s1(), z);
    append_cis(out, "theta2", theta_hat.theta2, gammas.gamma22, rates.s2(), z);
    append_cis(out, "theta3", theta_hat.theta3, gammas.gamma33, rates.s3(), z);
    return out;
}

VarianceComparisonReport check_variance_improvement(const ModelSpec& model, const Mat& states,
                                                    const Vec& theta1, const Vec& theta3) {
    const auto& d = model.dims;
    if (d.d_y > d.d_x)
        throw InvalidArgumentError("check_variance_improvement: requires d_Y <= d_X");
    if (states.rows() != d.d_z())
        throw InvalidArgumentError("check_variance_improvement: state length != d_z");

    VarianceComparisonReport rep;
    Mat b, hx;
    std::vector<Mat> dc;
    for (Eigen::Index s = 0; s < states.cols(); ++s) {
        Vec z = states.col(s);
        auto x = z.head(d.d_x);
        auto y = z.tail(d.d_y);
        model.smooth_dx(x, y, theta3, hx);
        Eigen::JacobiSVD<Mat> svd(hx);
        double smax = svd.singularValues().maxCoeff();
        if (svd.singularValues().minCoeff() <= 1e-12 * std::max(1.0, smax))
            throw RankDeficientHxError("H_x rank < d_Y at probe state " + std::to_string(s));

        model.diffusion(x, y, theta1, b);
        Mat c = b * b.transpose();
        Mat cinv = cholesky_inverse(c, "check_variance_improvement: C");
        Mat v = hx * c * hx.transpose();
        Mat vinv = cholesky_inverse(v, "check_variance_improvement: V");
        model.cov_d1(x, y, theta1, dc);

        Mat lhs(d.p1, d.p1), rhs(d.p1, d.p1);
        for (int k = 0; k < d.p1; ++k) {
            Mat wk = vinv * (hx * dc[k] * hx.transpose());
            Mat ck = cinv * dc[k];
            for (int l = 0; l < d.p1; ++l) {
                Mat wl = vinv * (hx * dc[l] * hx.transpose());
                Mat cl = cinv * dc[l];
                lhs(k, l) = (wk * wl).trace();
                rhs(k, l) = (ck * cl).trace();
            }
        }

        VarianceComparisonEntry e;
        e.state_index = s;
        Rng rng(derive_seed(0x51c6a11u, static_cast<std::uint64_t>(s)));
        double worst = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < 20; ++t) {
            Vec u(d.p1);
            for (int i = 0; i < d.p1; ++i) u[i] = rng.normal();
            u.normalize();
            double viol = u.dot(lhs * u) - u.dot(rhs * u);
            worst = std::max(worst, viol);
        }
        e.max_violation = worst;
        e.holds = worst <= 1e-10;
        rep.entries.push_back(e);
    }
    return rep;
}

namespace {

double logdet_psd(const Mat& a, const char* what) {
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError(std::string(what) + " not positive definite");
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace

YFieldCurve eval_y_field(const SamplePath& path, const ModelSpec& model,
                         const ThetaBlocks& theta_star, YField which, const Mat& grid) {
    const auto& d = model.dims;
    YFieldCurve curve;
    curve.which = which;
    curve.grid = grid;
    curve.values = Vec::Zero(grid.cols());
    const long n = path.n() >= 1 ? path.n() : 1;

    for (Eigen::Index g = 0; g < grid.cols(); ++g) {
        Vec th = grid.col(g);
        double acc = 0.0;
        for (long j = 0; j < n; ++j) {
            Vec z = path.states.col(j);
            switch (which) {
                case YField::y1: {
                    Mat c_star = eval_C(model, z, theta_star.theta1);
                    Mat c = eval_C(model, z, th);
                    Mat cinv = cholesky_inverse(c, "Y1: C(theta1)");
                    acc += -0.5 * ((cinv * c_star).trace() - d.d_x +
                                   logdet_psd(c, "Y1") - logdet_psd(c_star, "Y1"));
                    break;
                }
                case YField::yj1: {
                    SBlocks s_th = eval_S(model, z, th, theta_star.theta3);
                    SBlocks s_st = eval_S(model, z, theta_star.theta1, theta_star.theta3);
                    // (S(th)^{-1} - S(*)^{-1})[S(*)] = Tr(S(th)^{-1} S(*)) - d_Z
                    double tr = (s_th.assembled_inverse() * s_st.assembled()).trace();
                    acc += -0.5 * (tr - d.d_z() + s_th.logdet_S - s_st.logdet_S);
                    break;
                }
                case YField::y2: {
                    Mat cinv = cholesky_inverse(eval_C(model, z, theta_star.theta1), "Y2: C");
                    Vec da = eval_drift(model, z, th) - eval_drift(model, z, theta_star.theta2);
                    acc += -0.5 * da.dot(cinv * da);
                    break;
                }
                case YField::y3: {
                    Mat vinv = cholesky_inverse(eval_V(model, z, theta_star.theta1, th), "Y3: V");
                    Vec dh = eval_smooth_drift(model, z, th) -
                             eval_smooth_drift(model, z, theta_star.theta3);
                    acc += -6.0 * dh.dot(vinv * dh);
                    break;
                }
            }
        }
        curve.values[g] = acc / static_cast<double>(n);
    }
    return curve;
}

} // namespace hypoql
