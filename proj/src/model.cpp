#include "hypoql/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace hypoql {

Vec eval_drift(const ModelSpec& m, const Vec& z, const Vec& th2) {
    Vec out;
    m.drift(z.head(m.dims.d_x), z.tail(m.dims.d_y), th2, out);
    return out;
}
Mat eval_diffusion(const ModelSpec& m, const Vec& z, const Vec& th1) {
    Mat out;
    m.diffusion(z.head(m.dims.d_x), z.tail(m.dims.d_y), th1, out);
    return out;
}
Vec eval_smooth_drift(const ModelSpec& m, const Vec& z, const Vec& th3) {
    Vec out;
    m.smooth_drift(z.head(m.dims.d_x), z.tail(m.dims.d_y), th3, out);
    return out;
}
Mat eval_smooth_dx(const ModelSpec& m, const Vec& z, const Vec& th3) {
    Mat out;
    m.smooth_dx(z.head(m.dims.d_x), z.tail(m.dims.d_y), th3, out);
    return out;
}
std::vector<Mat> eval_smooth_dxx(const ModelSpec& m, const Vec& z, const Vec& th3) {
    std::vector<Mat> out;
    m.smooth_dxx(z.head(m.dims.d_x), z.tail(m.dims.d_y), th3, out);
    return out;
}
Mat eval_smooth_dy(const ModelSpec& m, const Vec& z, const Vec& th3) {
    Mat out;
    m.smooth_dy(z.head(m.dims.d_x), z.tail(m.dims.d_y), th3, out);
    return out;
}
std::vector<Mat> eval_cov_d1(const ModelSpec& m, const Vec& z, const Vec& th1) {
    std::vector<Mat> out;
    m.cov_d1(z.head(m.dims.d_x), z.tail(m.dims.d_y), th1, out);
    return out;
}
Mat eval_drift_d2(const ModelSpec& m, const Vec& z, const Vec& th2) {
    Mat out;
    m.drift_d2(z.head(m.dims.d_x), z.tail(m.dims.d_y), th2, out);
    return out;
}
Mat eval_smooth_d3(const ModelSpec& m, const Vec& z, const Vec& th3) {
    Mat out;
    m.smooth_d3(z.head(m.dims.d_x), z.tail(m.dims.d_y), th3, out);
    return out;
}

ModelSpec builtin_linear() {
    ModelSpec m;
    m.name = "linear";
    m.dims = Dimensions{1, 1, 1, 1, 2, 1};
    m.boxes = {ParamBox::cube(1, 1e-4, 10.0), ParamBox::cube(2, 1e-4, 10.0),
               ParamBox::cube(1, 1e-4, 10.0)};
    m.diffusion_state_independent = true;
    m.hx_state_independent = true;

    m.drift = [](ConstVecRef x, ConstVecRef, const Vec& th2, Vec& out) {
        out.resize(1);
        out[0] = -th2[0] * x[0] - th2[1];
    };
    m.diffusion = [](ConstVecRef, ConstVecRef, const Vec& th1, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = th1[0];
    };
    m.smooth_drift = [](ConstVecRef x, ConstVecRef, const Vec& th3, Vec& out) {
        out.resize(1);
        out[0] = th3[0] * x[0];
    };
    m.smooth_dx = [](ConstVecRef, ConstVecRef, const Vec& th3, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = th3[0];
    };
    m.smooth_dxx = [](ConstVecRef, ConstVecRef, const Vec&, std::vector<Mat>& out) {
        out.assign(1, Mat::Zero(1, 1));
    };
    m.smooth_dy = [](ConstVecRef, ConstVecRef, const Vec&, Mat& out) {
        out = Mat::Zero(1, 1);
    };
    m.cov_d1 = [](ConstVecRef, ConstVecRef, const Vec& th1, std::vector<Mat>& out) {
        out.assign(1, Mat::Constant(1, 1, 2.0 * th1[0]));
    };
    m.drift_d2 = [](ConstVecRef x, ConstVecRef, const Vec&, Mat& out) {
        out.resize(1, 2);
        out(0, 0) = -x[0];
        out(0, 1) = -1.0;
    };
    m.smooth_d3 = [](ConstVecRef x, ConstVecRef, const Vec&, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = x[0];
    };
    return m;
}

ModelSpec builtin_fhn() {
    ModelSpec m;
    m.name = "fhn";
    m.dims = Dimensions{1, 1, 1, 1, 2, 2};
    // s is signed; every other coordinate is positive.
    Vec lo3(2), up3(2);
    lo3 << 1e-4, -10.0;
    up3 << 10.0, 10.0;
    m.boxes = {ParamBox::cube(1, 1e-4, 10.0), ParamBox::cube(2, 1e-4, 10.0),
               ParamBox(lo3, up3)};
    m.diffusion_state_independent = true;
    m.hx_state_independent = true;

    m.drift = [](ConstVecRef x, ConstVecRef y, const Vec& th2, Vec& out) {
        out.resize(1);
        out[0] = th2[0] * y[0] - x[0] + th2[1];
    };
    m.diffusion = [](ConstVecRef, ConstVecRef, const Vec& th1, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = th1[0];
    };
    // The smooth equation couples back to the rough coordinate: the cubic
    // recovery variable y is driven by (y - y^3 - x + s)/eps.
    m.smooth_drift = [](ConstVecRef x, ConstVecRef y, const Vec& th3, Vec& out) {
        out.resize(1);
        out[0] = (y[0] - y[0] * y[0] * y[0] - x[0] + th3[1]) / th3[0];
    };
    m.smooth_dx = [](ConstVecRef, ConstVecRef, const Vec& th3, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = -1.0 / th3[0];
    };
    m.smooth_dxx = [](ConstVecRef, ConstVecRef, const Vec&, std::vector<Mat>& out) {
        out.assign(1, Mat::Zero(1, 1));
    };
    m.smooth_dy = [](ConstVecRef, ConstVecRef y, const Vec& th3, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = (1.0 - 3.0 * y[0] * y[0]) / th3[0];
    };
    m.cov_d1 = [](ConstVecRef, ConstVecRef, const Vec& th1, std::vector<Mat>& out) {
        out.assign(1, Mat::Constant(1, 1, 2.0 * th1[0]));
    };
    m.drift_d2 = [](ConstVecRef, ConstVecRef y, const Vec&, Mat& out) {
        out.resize(1, 2);
        out(0, 0) = y[0];
        out(0, 1) = 1.0;
    };
    m.smooth_d3 = [](ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out) {
        out.resize(1, 2);
        double h = (y[0] - y[0] * y[0] * y[0] - x[0] + th3[1]) / th3[0];
        out(0, 0) = -h / th3[0];
        out(0, 1) = 1.0 / th3[0];
    };
    return m;
}

ModelSpec model_by_name(const std::string& name) {
    if (name == "linear") return builtin_linear();
    if (name == "fhn") return builtin_fhn();
    throw InvalidArgumentError("unknown model '" + name + "' (known: linear, fhn)");
}

std::vector<std::string> model_names() { return {"linear", "fhn"}; }

namespace {

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

} // namespace

void attach_fd_derivatives(ModelSpec& model) {
    const Dimensions d = model.dims;
    bool added = false;

    if (!model.smooth_dx) {
        added = true;
        auto h = model.smooth_drift;
        model.smooth_dx = [h, d](ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out) {
            out.resize(d.d_y, d.d_x);
            Vec hp, hm;
            Vec xp(x), xm(x);
            for (int k = 0; k < d.d_x; ++k) {
                double s = fd_step(x[k]);
                xp[k] = x[k] + s;
                xm[k] = x[k] - s;
                h(xp, y, th3, hp);
                h(xm, y, th3, hm);
                out.col(k) = (hp - hm) / (2.0 * s);
                xp[k] = x[k];
                xm[k] = x[k];
            }
        };
    }
    if (!model.smooth_dxx) {
        added = true;
        auto hx = model.smooth_dx;
        model.smooth_dxx = [hx, d](ConstVecRef x, ConstVecRef y, const Vec& th3,
                                   std::vector<Mat>& out) {
            out.assign(d.d_y, Mat::Zero(d.d_x, d.d_x));
            Mat gp, gm;
            Vec xp(x), xm(x);
            for (int k = 0; k < d.d_x; ++k) {
                double s = fd_step(x[k]);
                xp[k] = x[k] + s;
                xm[k] = x[k] - s;
                hx(xp, y, th3, gp);
                hx(xm, y, th3, gm);
                Mat col = (gp - gm) / (2.0 * s); // d_y x d_x
                for (int i = 0; i < d.d_y; ++i) out[i].col(k) = col.row(i).transpose();
                xp[k] = x[k];
                xm[k] = x[k];
            }
        };
    }
    if (!model.smooth_dy) {
        added = true;
        auto h = model.smooth_drift;
        model.smooth_dy = [h, d](ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out) {
            out.resize(d.d_y, d.d_y);
            Vec hp, hm;
            Vec yp(y), ym(y);
            for (int k = 0; k < d.d_y; ++k) {
                double s = fd_step(y[k]);
                yp[k] = y[k] + s;
                ym[k] = y[k] - s;
                h(x, yp, th3, hp);
                h(x, ym, th3, hm);
                out.col(k) = (hp - hm) / (2.0 * s);
                yp[k] = y[k];
                ym[k] = y[k];
            }
        };
    }
    if (!model.cov_d1) {
        added = true;
        auto b = model.diffusion;
        model.cov_d1 = [b, d](ConstVecRef x, ConstVecRef y, const Vec& th1,
                              std::vector<Mat>& out) {
            out.assign(d.p1, Mat(d.d_x, d.d_x));
            Mat bp, bm;
            Vec tp, tm;
            for (int k = 0; k < d.p1; ++k) {
                double s = fd_step(th1[k]);
                tp = th1;
                tm = th1;
                tp[k] += s;
                tm[k] -= s;
                b(x, y, tp, bp);
                b(x, y, tm, bm);
                out[k] = (bp * bp.transpose() - bm * bm.transpose()) / (2.0 * s);
            }
        };
    }
    if (!model.drift_d2) {
        added = true;
        auto a = model.drift;
        model.drift_d2 = [a, d](ConstVecRef x, ConstVecRef y, const Vec& th2, Mat& out) {
            out.resize(d.d_x, d.p2);
            Vec ap, am, tp, tm;
            for (int k = 0; k < d.p2; ++k) {
                double s = fd_step(th2[k]);
                tp = th2;
                tm = th2;
                tp[k] += s;
                tm[k] -= s;
                a(x, y, tp, ap);
                a(x, y, tm, am);
                out.col(k) = (ap - am) / (2.0 * s);
            }
        };
    }
    if (!model.smooth_d3) {
        added = true;
        auto h = model.smooth_drift;
        model.smooth_d3 = [h, d](ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out) {
            out.resize(d.d_y, d.p3);
            Vec hp, hm, tp, tm;
            for (int k = 0; k < d.p3; ++k) {
                double s = fd_step(th3[k]);
                tp = th3;
                tm = th3;
                tp[k] += s;
                tm[k] -= s;
                h(x, y, tp, hp);
                h(x, y, tm, hm);
                out.col(k) = (hp - hm) / (2.0 * s);
            }
        };
    }
    if (added) model.fd_derivatives = true;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.pass ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) os << " (" << c.detail << ")";
        os << '\n';
    }
    return os.str();
}

namespace {

bool spd_ok(const Mat& a, double sym_tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    if ((a - a.transpose()).cwiseAbs().maxCoeff() >
        sym_tol * std::max(1.0, a.cwiseAbs().maxCoeff()))
        return false;
    Eigen::LLT<Mat> llt(a);
    return llt.info() == Eigen::Success;
}

double rel_dev(double analytic, double fd) {
    double denom = std::max({1.0, std::abs(analytic), std::abs(fd)});
    return std::abs(analytic - fd) / denom;
}

// Central difference of a vector/matrix valued function along coordinate k of
// its perturbed argument, with the step rule 1e-6*(1+|value|).
template <typename F>
Mat central_diff(F&& f, Vec arg, Eigen::Index k) {
    double step = 1e-6 * (1.0 + std::abs(arg[k]));
    Vec lo = arg, hi = arg;
    hi[k] += step;
    lo[k] -= step;
    return (f(hi) - f(lo)) / (2.0 * step);
}

} // namespace

ValidationReport validate_model(const ModelSpec& model, const Mat& probe_states,
                                const ThetaBlocks& theta) {
    if (probe_states.cols() == 0)
        throw InvalidArgumentError("validate_model: need at least one probe state");
    const auto& d = model.dims;
    d.validate();
    if (probe_states.rows() != d.d_z())
        throw InvalidArgumentError("validate_model: probe state length != d_z");

    ValidationReport rep;
    auto add = [&rep](const std::string& name, bool pass, const std::string& detail = "") {
        rep.checks.push_back({name, pass, detail});
    };

    // Shape conformance at the first probe.
    {
        Vec z = probe_states.col(0);
        std::ostringstream bad;
        auto shape = [&bad](const std::string& what, long r0, long c0, long r1, long c1) {
            if (r0 != r1 || c0 != c1)
                bad << what << " got " << r0 << "x" << c0 << " want " << r1 << "x" << c1 << "; ";
        };
        Vec a = eval_drift(model, z, theta.theta2);
        shape("A", a.size(), 1, d.d_x, 1);
        Mat b = eval_diffusion(model, z, theta.theta1);
        shape("B", b.rows(), b.cols(), d.d_x, d.r);
        Vec h = eval_smooth_drift(model, z, theta.theta3);
        shape("H", h.size(), 1, d.d_y, 1);
        Mat hx = eval_smooth_dx(model, z, theta.theta3);
        shape("H_x", hx.rows(), hx.cols(), d.d_y, d.d_x);
        auto hxx = eval_smooth_dxx(model, z, theta.theta3);
        if (static_cast<int>(hxx.size()) != d.d_y)
            bad << "H_xx slice count " << hxx.size() << " want " << d.d_y << "; ";
        else
            for (const auto& s : hxx) shape("H_xx slice", s.rows(), s.cols(), d.d_x, d.d_x);
        Mat hy = eval_smooth_dy(model, z, theta.theta3);
        shape("H_y", hy.rows(), hy.cols(), d.d_y, d.d_y);
        auto dc = eval_cov_d1(model, z, theta.theta1);
        if (static_cast<int>(dc.size()) != d.p1)
            bad << "dC/dtheta1 slice count " << dc.size() << " want " << d.p1 << "; ";
        else
            for (const auto& s : dc) shape("dC/dtheta1 slice", s.rows(), s.cols(), d.d_x, d.d_x);
        Mat da = eval_drift_d2(model, z, theta.theta2);
        shape("dA/dtheta2", da.rows(), da.cols(), d.d_x, d.p2);
        Mat dh = eval_smooth_d3(model, z, theta.theta3);
        shape("dH/dtheta3", dh.rows(), dh.cols(), d.d_y, d.p3);
        add("shapes", bad.str().empty(), bad.str());
    }
    if (!rep.checks.back().pass) return rep; // ShapeMismatch: stop early

    // Positive definiteness of C and V at every probe.
    {
        bool ok_c = true, ok_v = true;
        std::string det_c, det_v;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            Mat b = eval_diffusion(model, z, theta.theta1);
            Mat c = b * b.transpose();
            if (!spd_ok(c)) {
                ok_c = false;
                det_c = "C not SPD at probe " + std::to_string(p);
                break;
            }
            Mat hx = eval_smooth_dx(model, z, theta.theta3);
            Mat v = hx * c * hx.transpose();
            if (!spd_ok(v)) {
                ok_v = false;
                det_v = "V not SPD at probe " + std::to_string(p);
                break;
            }
        }
        add("positive_definite_C", ok_c, det_c);
        add("positive_definite_V", ok_v, det_v);
    }

    // Finite-difference consistency, worst probe reported.
    const double tol = 1e-4;
    {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            Mat hx = eval_smooth_dx(model, z, theta.theta3);
            for (int k = 0; k < d.d_x; ++k) {
                Mat fd = central_diff(
                    [&](const Vec& zz) -> Mat { return eval_smooth_drift(model, zz, theta.theta3); },
                    z, k);
                for (int i = 0; i < d.d_y; ++i)
                    worst = std::max(worst, rel_dev(hx(i, k), fd(i, 0)));
            }
        }
        add("derivative_Hx_vs_H", worst <= tol, "max rel dev " + std::to_string(worst));
    }
    {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            auto hxx = eval_smooth_dxx(model, z, theta.theta3);
            for (int k = 0; k < d.d_x; ++k) {
                Mat fd = central_diff(
                    [&](const Vec& zz) -> Mat { return eval_smooth_dx(model, zz, theta.theta3); },
                    z, k);
                for (int i = 0; i < d.d_y; ++i)
                    for (int l = 0; l < d.d_x; ++l)
                        worst = std::max(worst, rel_dev(hxx[i](l, k), fd(i, l)));
            }
        }
        add("derivative_Hxx_vs_Hx", worst <= tol, "max rel dev " + std::to_string(worst));
    }
    {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            Mat hy = eval_smooth_dy(model, z, theta.theta3);
            for (int k = 0; k < d.d_y; ++k) {
                Mat fd = central_diff(
                    [&](const Vec& zz) -> Mat { return eval_smooth_drift(model, zz, theta.theta3); },
                    z, d.d_x + k);
                for (int i = 0; i < d.d_y; ++i)
                    worst = std::max(worst, rel_dev(hy(i, k), fd(i, 0)));
            }
        }
        add("derivative_Hy_vs_H", worst <= tol, "max rel dev " + std::to_string(worst));
    }
    {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            Mat da = eval_drift_d2(model, z, theta.theta2);
            for (int k = 0; k < d.p2; ++k) {
                Mat fd = central_diff(
                    [&](const Vec& t2) -> Mat { return eval_drift(model, z, t2); },
                    theta.theta2, k);
                for (int i = 0; i < d.d_x; ++i)
                    worst = std::max(worst, rel_dev(da(i, k), fd(i, 0)));
            }
        }
        add("derivative_A_vs_theta2", worst <= tol, "max rel dev " + std::to_string(worst));
    }
    {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            Mat dh = eval_smooth_d3(model, z, theta.theta3);
            for (int k = 0; k < d.p3; ++k) {
                Mat fd = central_diff(
                    [&](const Vec& t3) -> Mat { return eval_smooth_drift(model, z, t3); },
                    theta.theta3, k);
                for (int i = 0; i < d.d_y; ++i)
                    worst = std::max(worst, rel_dev(dh(i, k), fd(i, 0)));
            }
        }
        add("derivative_H_vs_theta3", worst <= tol, "max rel dev " + std::to_string(worst));
    }
    {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < probe_states.cols(); ++p) {
            Vec z = probe_states.col(p);
            auto dc = eval_cov_d1(model, z, theta.theta1);
            for (int k = 0; k < d.p1; ++k) {
                Mat fd = central_diff(
                    [&](const Vec& t1) -> Mat {
                        Mat b = eval_diffusion(model, z, t1);
                        return Mat(b * b.transpose());
                    },
                    theta.theta1, k);
                for (int i = 0; i < d.d_x; ++i)
                    for (int l = 0; l < d.d_x; ++l)
                        worst = std::max(worst, rel_dev(dc[k](i, l), fd(i, l)));
            }
        }
        add("derivative_C_vs_theta1", worst <= tol, "max rel dev " + std::to_string(worst));
    }

    // Structure hints, spot-checked on two probes when claimed.
    if ((model.diffusion_state_independent || model.hx_state_independent) &&
        probe_states.cols() >= 2) {
        Vec z0 = probe_states.col(0), z1 = probe_states.col(1);
        if (model.diffusion_state_independent) {
            Mat b0 = eval_diffusion(model, z0, theta.theta1);
            Mat b1 = eval_diffusion(model, z1, theta.theta1);
            add("hint_diffusion_state_independent", (b0 - b1).cwiseAbs().maxCoeff() == 0.0);
        }
        if (model.hx_state_independent) {
            Mat h0 = eval_smooth_dx(model, z0, theta.theta3);
            Mat h1 = eval_smooth_dx(model, z1, theta.theta3);
            add("hint_hx_state_independent", (h0 - h1).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    if (model.fd_derivatives)
        add("analytic_derivatives", true, "derivatives generated by finite differences");

    return rep;
}

} // namespace hypoql
