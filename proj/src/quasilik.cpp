#include "hypoql/quasilik.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace hypoql {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog12 = std::log(12.0);

double logdet_from_llt(const Eigen::LLT<Mat>& llt) {
    // 2 * sum log diag(L); the packed storage diagonal is L's diagonal.
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace

Mat SBlocks::assembled() const {
    const long dx = C.rows(), dy = V.rows();
    Mat s(dx + dy, dx + dy);
    s.topLeftCorner(dx, dx) = C;
    s.topRightCorner(dx, dy) = off;
    s.bottomLeftCorner(dy, dx) = off.transpose();
    s.bottomRightCorner(dy, dy) = V / 3.0;
    return s;
}

Mat SBlocks::assembled_inverse() const {
    const long dx = C.rows(), dy = V.rows();
    Mat s(dx + dy, dx + dy);
    s.topLeftCorner(dx, dx) = S11;
    s.topRightCorner(dx, dy) = S12;
    s.bottomLeftCorner(dy, dx) = S21;
    s.bottomRightCorner(dy, dy) = S22;
    return s;
}

Mat eval_C(const ModelSpec& model, const Vec& z, const Vec& theta1) {
    Mat b = eval_diffusion(model, z, theta1);
    return b * b.transpose();
}

Mat eval_V(const ModelSpec& model, const Vec& z, const Vec& theta1, const Vec& theta3) {
    Mat c = eval_C(model, z, theta1);
    Mat hx = eval_smooth_dx(model, z, theta3);
    return hx * c * hx.transpose();
}

SBlocks make_sblocks(const Mat& C, const Mat& Hx) {
    SBlocks s;
    s.C = C;
    Eigen::LLT<Mat> cllt(C);
    if (cllt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("S: block C is not positive definite");
    s.V = Hx * C * Hx.transpose();
    Eigen::LLT<Mat> vllt(s.V);
    if (vllt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("S: block V is not positive definite");
    s.off = C * Hx.transpose() / 2.0;

    const long dx = C.rows(), dy = s.V.rows();
    Mat cinv = cllt.solve(Mat::Identity(dx, dx));
    Mat vinv = vllt.solve(Mat::Identity(dy, dy));
    Mat hxt_vinv = Hx.transpose() * vinv;
    s.S11 = cinv + 3.0 * hxt_vinv * Hx;
    s.S12 = -6.0 * hxt_vinv;
    s.S21 = s.S12.transpose();
    s.S22 = 12.0 * vinv;
    // Schur identity: det S = det C * det V / 12^{d_Y}
    s.logdet_S = logdet_from_llt(cllt) + logdet_from_llt(vllt) - dy * kLog12;
    return s;
}

SBlocks eval_S(const ModelSpec& model, const Vec& z, const Vec& theta1, const Vec& theta3) {
    Mat c = eval_C(model, z, theta1);
    Mat hx = eval_smooth_dx(model, z, theta3);
    return make_sblocks(c, hx);
}

Vec eval_LH(const ModelSpec& model, const Vec& z, const Vec& theta1, const Vec& theta2,
            const Vec& theta3) {
    const auto& d = model.dims;
    Vec a = eval_drift(model, z, theta2);
    Mat c = eval_C(model, z, theta1);
    Vec h = eval_smooth_drift(model, z, theta3);
    Mat hx = eval_smooth_dx(model, z, theta3);
    auto hxx = eval_smooth_dxx(model, z, theta3);
    Mat hy = eval_smooth_dy(model, z, theta3);

    Vec out = hx * a;
    for (int i = 0; i < d.d_y; ++i) out[i] += 0.5 * (hxx[i].array() * c.array()).sum();
    out.noalias() += hy * h;
    return out;
}

Vec eval_Gn(const ModelSpec& model, const Vec& z, double h, const Vec& theta1,
            const Vec& theta2, const Vec& theta3) {
    if (!(h > 0.0)) throw InvalidArgumentError("eval_Gn: h must be positive");
    return eval_smooth_drift(model, z, theta3) +
           (h / 2.0) * eval_LH(model, z, theta1, theta2, theta3);
}

std::vector<Increment> increments(const SamplePath& path, const ModelSpec& model,
                                  const Vec& theta1, const Vec& theta2, const Vec& theta3) {
    if (path.n() < 1) throw InvalidArgumentError("increments: need n >= 1");
    const auto& d = model.dims;
    const double h = path.h;
    const double s1 = 1.0 / std::sqrt(h);
    const double s3 = s1 / h;

    std::vector<Increment> out;
    out.reserve(path.n());
    for (long j = 1; j <= path.n(); ++j) {
        Vec zp = path.states.col(j - 1);
        Increment inc;
        inc.j = j;
        Vec a = eval_drift(model, zp, theta2);
        Vec g = eval_Gn(model, zp, h, theta1, theta2, theta3);
        inc.dx = s1 * (path.states.col(j).head(d.d_x) - zp.head(d.d_x) - h * a);
        inc.dy = s3 * (path.states.col(j).tail(d.d_y) - zp.tail(d.d_y) - h * g);
        out.push_back(std::move(inc));
    }
    return out;
}

// ---------------------------------------------------------------------------
// QLField
// ---------------------------------------------------------------------------

QLField::QLField(Block block, ParamBox box, std::function<double(const Vec&)> fn,
                 Bindings bindings)
    : block_(block), box_(std::move(box)), fn_(std::move(fn)), bindings_(std::move(bindings)) {}

double QLField::operator()(const Vec& theta) const {
    counters_->evals.fetch_add(1, std::memory_order_relaxed);
    if (!box_.contains(theta)) return kNegInf;
    return fn_(theta);
}

const char* block_name(QLField::Block b) {
    switch (b) {
        case QLField::Block::theta1_initial: return "theta1_initial";
        case QLField::Block::theta2: return "theta2";
        case QLField::Block::theta3: return "theta3";
        case QLField::Block::theta1_improved: return "theta1_improved";
    }
    return "?";
}

// Internal builder giving closures access to the shared pd-failure counter.
struct FieldBuilder {
    static QLField build(QLField::Block block, ParamBox box, QLField::Bindings bindings,
                         std::function<double(const Vec&, std::atomic<long>&)> inner) {
        QLField f;
        f.block_ = block;
        f.box_ = std::move(box);
        f.bindings_ = std::move(bindings);
        auto counters = f.counters_;
        f.fn_ = [inner = std::move(inner), counters](const Vec& th) {
            return inner(th, counters->pd_failures);
        };
        return f;
    }
};

namespace {

// Snapshot of the path shared by the field closures.
struct PathData {
    Mat states;  // d_z x (n+1)
    Mat dX;      // d_x x n
    Mat dY;      // d_y x n
    double h = 0.0;
    long n = 0;
    Dimensions dims;
};

std::shared_ptr<const PathData> snapshot(const SamplePath& path, const ModelSpec& model) {
    if (path.n() < 1) throw InvalidArgumentError("quasi-likelihood field: need n >= 1");
    if (path.d_z() != model.dims.d_z())
        throw InvalidArgumentError("quasi-likelihood field: path dimension != model d_z");
    auto pd = std::make_shared<PathData>();
    pd->states = path.states;
    pd->h = path.h;
    pd->n = path.n();
    pd->dims = model.dims;
    const auto& d = model.dims;
    pd->dX = path.states.block(0, 1, d.d_x, pd->n) - path.states.block(0, 0, d.d_x, pd->n);
    pd->dY = path.states.block(d.d_x, 1, d.d_y, pd->n) - path.states.block(d.d_x, 0, d.d_y, pd->n);
    return pd;
}

} // namespace

QLField field_theta1_initial(const SamplePath& path, const ModelSpec& model) {
    auto pd = snapshot(path, model);
    const auto& d = model.dims;

    if (model.diffusion_state_independent) {
        // C is constant along the path: the sum collapses to
        // -1/2 { C^{-1}[Qsum] + n log det C },  Qsum = sum_j h^{-1} dX dX^T.
        Mat qsum = Mat::Zero(d.d_x, d.d_x);
        for (long j = 0; j < pd->n; ++j)
            qsum.noalias() += pd->dX.col(j) * pd->dX.col(j).transpose();
        qsum /= pd->h;
        auto inner = [pd, qsum, model](const Vec& th1, std::atomic<long>& pdfail) -> double {
            Mat b, c;
            model.diffusion(pd->states.col(0).head(pd->dims.d_x),
                            pd->states.col(0).tail(pd->dims.d_y), th1, b);
            c.noalias() = b * b.transpose();
            Eigen::LLT<Mat> llt(c);
            if (llt.info() != Eigen::Success) {
                pdfail.fetch_add(1, std::memory_order_relaxed);
                return kNegInf;
            }
            double quad = llt.solve(qsum).trace();
            return -0.5 * (quad + static_cast<double>(pd->n) * logdet_from_llt(llt));
        };
        return FieldBuilder::build(QLField::Block::theta1_initial, model.box1(), {}, inner);
    }

    auto inner = [pd, model](const Vec& th1, std::atomic<long>& pdfail) -> double {
        const auto& d = pd->dims;
        Mat b(d.d_x, d.r), c(d.d_x, d.d_x);
        Eigen::LLT<Mat> llt;
        Vec sol(d.d_x);
        double acc = 0.0;
        for (long j = 0; j < pd->n; ++j) {
            model.diffusion(pd->states.col(j).head(d.d_x), pd->states.col(j).tail(d.d_y), th1, b);
            c.noalias() = b * b.transpose();
            llt.compute(c);
            if (llt.info() != Eigen::Success) {
                pdfail.fetch_add(1, std::memory_order_relaxed);
                return kNegInf;
            }
            sol = llt.solve(pd->dX.col(j));
            acc += pd->dX.col(j).dot(sol) / pd->h + logdet_from_llt(llt);
        }
        return -0.5 * acc;
    };
    return FieldBuilder::build(QLField::Block::theta1_initial, model.box1(), {}, inner);
}

QLField field_theta2(const SamplePath& path, const ModelSpec& model, const Vec& theta1_hat) {
    auto pd = snapshot(path, model);
    const auto& d = model.dims;
    if (!model.box1().contains(theta1_hat))
        throw InvalidArgumentError("field_theta2: theta1_hat outside its closed box");

    // C(., theta1_hat) is fixed; cache its Cholesky-based inverse per state.
    bool cache_ok = true;
    std::vector<Mat> cinv;
    try {
        long m = model.diffusion_state_independent ? 1 : pd->n;
        cinv.resize(m);
        Mat b, c;
        for (long j = 0; j < m; ++j) {
            model.diffusion(pd->states.col(j).head(d.d_x), pd->states.col(j).tail(d.d_y),
                            theta1_hat, b);
            c.noalias() = b * b.transpose();
            Eigen::LLT<Mat> llt(c);
            if (llt.info() != Eigen::Success)
                throw NotPositiveDefiniteError("field_theta2: C(theta1_hat) not PD");
            cinv[j] = llt.solve(Mat::Identity(d.d_x, d.d_x));
        }
    } catch (const NotPositiveDefiniteError&) {
        cache_ok = false;
    }

    QLField::Bindings bind;
    bind.theta1 = theta1_hat;
    auto cache = std::make_shared<const std::vector<Mat>>(std::move(cinv));
    auto inner = [pd, model, cache, cache_ok](const Vec& th2, std::atomic<long>& pdfail) -> double {
        if (!cache_ok) {
            pdfail.fetch_add(1, std::memory_order_relaxed);
            return kNegInf;
        }
        const auto& d = pd->dims;
        const bool hoist = cache->size() == 1;
        Vec a(d.d_x), r(d.d_x), sol(d.d_x);
        double acc = 0.0;
        for (long j = 0; j < pd->n; ++j) {
            model.drift(pd->states.col(j).head(d.d_x), pd->states.col(j).tail(d.d_y), th2, a);
            r = pd->dX.col(j) - pd->h * a;
            sol.noalias() = (*cache)[hoist ? 0 : j] * r;
            acc += r.dot(sol);
        }
        return -0.5 * acc / pd->h;
    };
    return FieldBuilder::build(QLField::Block::theta2, model.box2(), std::move(bind), inner);
}

namespace {

// Per-state data that fields over theta3 / improved theta1 both need.
struct JointCache {
    std::shared_ptr<const PathData> pd;
    Mat A;    // d_x x n, drift at theta2_hat
    Mat Dx;   // d_x x n, h^{-1/2}(dX - h A): independent of theta1/theta3
    bool ok = true;
};

JointCache joint_cache(const SamplePath& path, const ModelSpec& model, const Vec& theta2_hat) {
    JointCache jc;
    jc.pd = snapshot(path, model);
    const auto& d = model.dims;
    jc.A.resize(d.d_x, jc.pd->n);
    Vec a(d.d_x);
    for (long j = 0; j < jc.pd->n; ++j) {
        model.drift(jc.pd->states.col(j).head(d.d_x), jc.pd->states.col(j).tail(d.d_y),
                    theta2_hat, a);
        jc.A.col(j) = a;
    }
    jc.Dx = (jc.pd->dX - jc.pd->h * jc.A) / std::sqrt(jc.pd->h);
    return jc;
}

// Workspace for the closed-form quadratic form
//   D^T S^{-1} D = Dx^T C^{-1} Dx + 3 u^T V^{-1} u - 12 u^T V^{-1} Dy
//                  + 12 Dy^T V^{-1} Dy,   u = Hx Dx.
struct SWork {
    Eigen::LLT<Mat> cllt, vllt;
    Mat V;
    double logdet = 0.0;

    // Recompute factors for new C/Hx; false on PD failure.
    bool compute(const Mat& C, const Mat& Hx) {
        cllt.compute(C);
        if (cllt.info() != Eigen::Success) return false;
        V.noalias() = Hx * (C * Hx.transpose());
        vllt.compute(V);
        if (vllt.info() != Eigen::Success) return false;
        logdet = logdet_from_llt(cllt) + logdet_from_llt(vllt) -
                 static_cast<double>(V.rows()) * kLog12;
        return true;
    }

    double quad_form(const Mat& Hx, ConstVecRef dx, ConstVecRef dy, Vec& u, Vec& tx,
                     Vec& ty) const {
        u.noalias() = Hx * dx;
        tx = cllt.solve(dx);
        double qf = dx.dot(tx);
        ty = vllt.solve(u);
        qf += 3.0 * u.dot(ty);
        ty = vllt.solve(dy);
        qf += (12.0 * dy - 12.0 * u).dot(ty);
        return qf;
    }
};

} // namespace

QLField field_theta3(const SamplePath& path, const ModelSpec& model, const Vec& theta1_hat,
                     const Vec& theta2_hat) {
    if (!model.box1().contains(theta1_hat) || !model.box2().contains(theta2_hat))
        throw InvalidArgumentError("field_theta3: nuisance estimate outside its closed box");
    auto jc = std::make_shared<JointCache>(joint_cache(path, model, theta2_hat));
    const auto& d = model.dims;

    // C at theta1_hat, per state (single slot when B ignores the state). A
    // non-PD C here surfaces as a -inf field value via SWork, not a throw.
    auto cmats = std::make_shared<std::vector<Mat>>();
    {
        long m = model.diffusion_state_independent ? 1 : jc->pd->n;
        cmats->resize(m);
        Mat b;
        for (long j = 0; j < m; ++j) {
            model.diffusion(jc->pd->states.col(j).head(d.d_x), jc->pd->states.col(j).tail(d.d_y),
                            theta1_hat, b);
            (*cmats)[j].noalias() = b * b.transpose();
        }
    }

    QLField::Bindings bind;
    bind.theta1 = theta1_hat;
    bind.theta2 = theta2_hat;

    auto inner = [jc, cmats, model](const Vec& th3, std::atomic<long>& pdfail) -> double {
        const auto& pd = *jc->pd;
        const auto& d = pd.dims;
        const bool c_hoisted = cmats->size() == 1;
        const bool s_hoisted = c_hoisted && model.hx_state_independent;
        const double h = pd.h;
        const double s3 = 1.0 / (h * std::sqrt(h));

        SWork sw;
        Mat hx(d.d_y, d.d_x), hy(d.d_y, d.d_y);
        std::vector<Mat> hxx;
        Vec hvec(d.d_y), lh(d.d_y), dy(d.d_y), u(d.d_y), tx(d.d_x), ty(d.d_y);
        double acc = 0.0;

        if (s_hoisted) {
            model.smooth_dx(pd.states.col(0).head(d.d_x), pd.states.col(0).tail(d.d_y), th3, hx);
            if (!sw.compute((*cmats)[0], hx)) {
                pdfail.fetch_add(1, std::memory_order_relaxed);
                return kNegInf;
            }
        }

        for (long j = 0; j < pd.n; ++j) {
            auto x = pd.states.col(j).head(d.d_x);
            auto y = pd.states.col(j).tail(d.d_y);
            const Mat& c = (*cmats)[c_hoisted ? 0 : j];
            if (!s_hoisted) {
                model.smooth_dx(x, y, th3, hx);
                if (!sw.compute(c, hx)) {
                    pdfail.fetch_add(1, std::memory_order_relaxed);
                    return kNegInf;
                }
            }
            model.smooth_drift(x, y, th3, hvec);
            model.smooth_dy(x, y, th3, hy);
            lh.noalias() = hx * jc->A.col(j);
            lh.noalias() += hy * hvec;
            if (!model.hx_state_independent) {
                // hx varying in the state: include the 1/2 H_xx[C] term
                model.smooth_dxx(x, y, th3, hxx);
                for (int i = 0; i < d.d_y; ++i)
                    lh[i] += 0.5 * (hxx[i].array() * c.array()).sum();
            }
            // G_n = H + (h/2) L_H; Dy = h^{-3/2}(dY - h G_n)
            dy = s3 * (pd.dY.col(j) - h * (hvec + 0.5 * h * lh));
            double qf = sw.quad_form(hx, jc->Dx.col(j), dy, u, tx, ty);
            acc += qf + sw.logdet;
        }
        return -0.5 * acc;
    };
    return FieldBuilder::build(QLField::Block::theta3, model.box3(), std::move(bind), inner);
}

QLField field_theta1_improved(const SamplePath& path, const ModelSpec& model,
                              const Vec& theta2_hat, const Vec& theta3_hat) {
    if (!model.box2().contains(theta2_hat) || !model.box3().contains(theta3_hat))
        throw InvalidArgumentError("field_theta1_improved: nuisance estimate outside its closed box");
    auto jc = std::make_shared<JointCache>(joint_cache(path, model, theta2_hat));
    const auto& d = model.dims;

    // Everything tied to theta3_hat is fixed: H, Hx, Hxx, Hy and the pieces
    // of L_H that do not involve C(theta1).
    struct Theta3Cache {
        Mat H;                  // d_y x n
        Mat Hx0;                // hoisted Hx when state-independent
        std::vector<Mat> Hx;    // per state otherwise
        std::vector<std::vector<Mat>> Hxx; // per state, d_y slices (empty when hoisted)
        Mat lh_fixed;           // d_y x n, Hx[A] + Hy[H]
    };
    auto tc = std::make_shared<Theta3Cache>();
    {
        tc->H.resize(d.d_y, jc->pd->n);
        tc->lh_fixed.resize(d.d_y, jc->pd->n);
        Vec hvec(d.d_y);
        Mat hx(d.d_y, d.d_x), hy(d.d_y, d.d_y);
        if (model.hx_state_independent) {
            model.smooth_dx(jc->pd->states.col(0).head(d.d_x), jc->pd->states.col(0).tail(d.d_y),
                            theta3_hat, tc->Hx0);
        } else {
            tc->Hx.resize(jc->pd->n);
            tc->Hxx.resize(jc->pd->n);
        }
        for (long j = 0; j < jc->pd->n; ++j) {
            auto x = jc->pd->states.col(j).head(d.d_x);
            auto y = jc->pd->states.col(j).tail(d.d_y);
            model.smooth_drift(x, y, theta3_hat, hvec);
            tc->H.col(j) = hvec;
            model.smooth_dy(x, y, theta3_hat, hy);
            if (model.hx_state_independent) {
                tc->lh_fixed.col(j) = tc->Hx0 * jc->A.col(j) + hy * hvec;
            } else {
                model.smooth_dx(x, y, theta3_hat, hx);
                tc->Hx[j] = hx;
                model.smooth_dxx(x, y, theta3_hat, tc->Hxx[j]);
                tc->lh_fixed.col(j) = hx * jc->A.col(j) + hy * hvec;
            }
        }
    }

    QLField::Bindings bind;
    bind.theta2 = theta2_hat;
    bind.theta3 = theta3_hat;

    auto inner = [jc, tc, model](const Vec& th1, std::atomic<long>& pdfail) -> double {
        const auto& pd = *jc->pd;
        const auto& d = pd.dims;
        const bool c_hoisted = model.diffusion_state_independent;
        const bool s_hoisted = c_hoisted && model.hx_state_independent;
        const double h = pd.h;
        const double s3 = 1.0 / (h * std::sqrt(h));

        SWork sw;
        Mat b(d.d_x, d.r), c(d.d_x, d.d_x);
        Vec lh(d.d_y), dy(d.d_y), u(d.d_y), tx(d.d_x), ty(d.d_y);
        double acc = 0.0;

        if (s_hoisted) {
            model.diffusion(pd.states.col(0).head(d.d_x), pd.states.col(0).tail(d.d_y), th1, b);
            c.noalias() = b * b.transpose();
            if (!sw.compute(c, tc->Hx0)) {
                pdfail.fetch_add(1, std::memory_order_relaxed);
                return kNegInf;
            }
        }

        for (long j = 0; j < pd.n; ++j) {
            auto x = pd.states.col(j).head(d.d_x);
            auto y = pd.states.col(j).tail(d.d_y);
            const Mat& hx = model.hx_state_independent ? tc->Hx0 : tc->Hx[j];
            if (!s_hoisted) {
                if (!c_hoisted || j == 0) {
                    model.diffusion(x, y, th1, b);
                    c.noalias() = b * b.transpose();
                }
                if (!sw.compute(c, hx)) {
                    pdfail.fetch_add(1, std::memory_order_relaxed);
                    return kNegInf;
                }
            }
            lh = tc->lh_fixed.col(j);
            if (!model.hx_state_independent) {
                const auto& hxx = tc->Hxx[j];
                for (int i = 0; i < d.d_y; ++i)
                    lh[i] += 0.5 * (hxx[i].array() * c.array()).sum();
            }
            dy = s3 * (pd.dY.col(j) - h * (tc->H.col(j) + 0.5 * h * lh));
            double qf = sw.quad_form(hx, jc->Dx.col(j), dy, u, tx, ty);
            acc += qf + sw.logdet;
        }
        return -0.5 * acc;
    };
    return FieldBuilder::build(QLField::Block::theta1_improved, model.box1(), std::move(bind),
                               inner);
}

} // namespace hypoql
