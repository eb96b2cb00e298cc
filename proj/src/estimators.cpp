#include "hypoql/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hypoql/rng.hpp"

namespace hypoql {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Scheme Scheme::parse(const std::string& s) {
    if (s.size() != 4)
        throw InvalidArgumentError("scheme must be 4 letters of {M,B}, e.g. BBBB, got '" + s + "'");
    auto kind = [&s](int i) {
        if (s[i] == 'M') return EstimatorKind::qmle;
        if (s[i] == 'B') return EstimatorKind::qbe;
        throw InvalidArgumentError("scheme letter must be M or B, got '" + s + "'");
    };
    Scheme sch;
    sch.a0 = kind(0);
    sch.a2 = kind(1);
    sch.a3 = kind(2);
    sch.a1 = kind(3);
    return sch;
}

std::string Scheme::str() const {
    return {static_cast<char>(a0), static_cast<char>(a2), static_cast<char>(a3),
            static_cast<char>(a1)};
}

void MHConfig::validate(int dim) const {
    if (chain_length < 100)
        throw InvalidArgumentError("MH chain_length must be >= 100");
    if (!(burn_in_fraction > 0.0 && burn_in_fraction < 1.0))
        throw InvalidArgumentError("MH burn_in_fraction must lie in (0,1)");
    if (proposal_scale.size()) {
        if (proposal_scale.size() != dim || (proposal_scale.array() <= 0.0).any())
            throw InvalidArgumentError("MH proposal_scale must be positive per coordinate");
    }
    if (initial_point.size() && initial_point.size() != dim)
        throw InvalidArgumentError("MH initial point has the wrong dimension");
}

// ---------------------------------------------------------------------------
// QMLE: multi-start Nelder-Mead clipped into the box
// ---------------------------------------------------------------------------

namespace {

struct BestTracker {
    const QLField& field;
    Vec best_x;
    double best_v = kNegInf;
    long evals = 0;

    double eval(const Vec& p) {
        double v = field(p);
        ++evals;
        if (v > best_v) { // strict: ties keep the earlier point
            best_v = v;
            best_x = p;
        }
        return v;
    }
};

void nelder_mead(BestTracker& bt, const ParamBox& box, const Vec& x0, long budget) {
    const int d = box.dim();
    const Vec width = box.width();
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<Vec> xs(d + 1);
    std::vector<double> fs(d + 1);
    xs[0] = box.clip(x0);
    fs[0] = bt.eval(xs[0]);
    for (int k = 0; k < d; ++k) {
        Vec v = xs[0];
        v[k] += 0.05 * width[k];
        v = box.clip(v);
        if ((v - xs[0]).cwiseAbs().maxCoeff() == 0.0) {
            v[k] -= 0.05 * width[k];
            v = box.clip(v);
        }
        xs[k + 1] = v;
        fs[k + 1] = bt.eval(v);
        if (bt.evals >= budget) return;
    }

    std::vector<int> ord(d + 1);
    while (bt.evals < budget) {
        for (int i = 0; i <= d; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&fs](int a, int b) { return fs[a] > fs[b]; });

        // coordinate-wise simplex extent relative to the box width
        double diam = 0.0;
        for (int k = 0; k < d; ++k) {
            double lo = xs[0][k], hi = xs[0][k];
            for (int i = 1; i <= d; ++i) {
                lo = std::min(lo, xs[i][k]);
                hi = std::max(hi, xs[i][k]);
            }
            diam = std::max(diam, (hi - lo) / width[k]);
        }
        if (diam <= 1e-6) return;

        const int iw = ord[d]; // worst vertex
        Vec centroid = Vec::Zero(d);
        for (int i = 0; i < d; ++i) centroid += xs[ord[i]];
        centroid /= static_cast<double>(d);

        Vec xr = box.clip(centroid + alpha * (centroid - xs[iw]));
        double fr = bt.eval(xr);
        if (fr > fs[ord[0]]) {
            Vec xe = box.clip(centroid + gamma * (centroid - xs[iw]));
            if (bt.evals >= budget) {
                xs[iw] = xr;
                fs[iw] = fr;
                continue;
            }
            double fe = bt.eval(xe);
            if (fe > fr) {
                xs[iw] = xe;
                fs[iw] = fe;
            } else {
                xs[iw] = xr;
                fs[iw] = fr;
            }
        } else if (fr > fs[ord[d - 1]]) {
            xs[iw] = xr;
            fs[iw] = fr;
        } else {
            Vec xc = box.clip(centroid + rho * (xs[iw] - centroid));
            double fc = bt.eval(xc);
            if (fc > fs[iw]) {
                xs[iw] = xc;
                fs[iw] = fc;
            } else {
                const Vec& xbest = xs[ord[0]];
                for (int i = 1; i <= d; ++i) {
                    int idx = ord[i];
                    xs[idx] = box.clip(xbest + sigma * (xs[idx] - xbest));
                    fs[idx] = bt.eval(xs[idx]);
                    if (bt.evals >= budget) return;
                }
            }
        }
    }
}

} // namespace

StageResult qmle(const QLField& field, const ParamBox& box, long budget, std::uint64_t seed) {
    const int d = box.dim();
    if (budget < 100L * d)
        throw InvalidArgumentError("qmle: evaluation budget must be >= 100 * dimension");

    auto t0 = std::chrono::steady_clock::now();
    // all starts are drawn up front so the draw sequence is budget-independent
    Rng rng(seed);
    std::vector<Vec> starts;
    starts.push_back(box.center());
    for (int s = 0; s < 4; ++s) {
        Vec v(d);
        for (int k = 0; k < d; ++k)
            v[k] = box.lower[k] + rng.uniform() * (box.upper[k] - box.lower[k]);
        starts.push_back(v);
    }

    BestTracker bt{field};
    const long per_start = budget / static_cast<long>(starts.size());
    long used = 0;
    for (const auto& x0 : starts) {
        long allowance = std::min(per_start, budget - used);
        if (allowance <= 0) break;
        long before = bt.evals;
        nelder_mead(bt, box, x0, bt.evals + allowance);
        used += bt.evals - before;
    }

    if (!std::isfinite(bt.best_v))
        throw AllEvaluationsRejectedError("qmle: field evaluated to -inf at every probe");

    StageResult res;
    res.kind = EstimatorKind::qmle;
    res.estimate = bt.best_x;
    res.objective = bt.best_v;
    res.evaluations = bt.evals;
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// QBE by quadrature
// ---------------------------------------------------------------------------

namespace {

// The modification rule: a posterior mean outside the open box is replaced
// by the prescribed interior fallback (box center).
void apply_modification(StageResult& res, const ParamBox& box) {
    if (!box.interior(res.estimate)) {
        res.estimate = box.center();
        res.modified = true;
    }
}

} // namespace

StageResult qbe_quadrature(const QLField& field, const PriorSpec& prior, int grid_per_dim) {
    const ParamBox& box = field.box();
    const int d = box.dim();
    if (d > 2)
        throw DimensionTooHighError("qbe_quadrature: block dimension must be <= 2");
    if (grid_per_dim < 51)
        throw InvalidArgumentError("qbe_quadrature: grid_per_dim must be >= 51");

    auto t0 = std::chrono::steady_clock::now();
    const long g = grid_per_dim;
    auto coord = [&box, g](int k, long i) {
        return box.lower[k] + (box.upper[k] - box.lower[k]) * static_cast<double>(i) /
                                  static_cast<double>(g - 1);
    };
    auto trapw = [g](long i) { return (i == 0 || i == g - 1) ? 0.5 : 1.0; };

    const long total = d == 1 ? g : g * g;
    std::vector<double> logval(total);
    double vmax = kNegInf;
    Vec th(d);
    for (long idx = 0; idx < total; ++idx) {
        if (d == 1) {
            th[0] = coord(0, idx);
        } else {
            th[0] = coord(0, idx / g);
            th[1] = coord(1, idx % g);
        }
        double v = field(th);
        logval[idx] = v;
        if (v > vmax) vmax = v;
    }
    if (!std::isfinite(vmax))
        throw DegenerateMassError("qbe_quadrature: field is -inf on the whole grid");

    double denom = 0.0;
    Vec num = Vec::Zero(d);
    for (long idx = 0; idx < total; ++idx) {
        if (!std::isfinite(logval[idx])) continue;
        double w;
        if (d == 1) {
            th[0] = coord(0, idx);
            w = trapw(idx);
        } else {
            th[0] = coord(0, idx / g);
            th[1] = coord(1, idx % g);
            w = trapw(idx / g) * trapw(idx % g);
        }
        w *= std::exp(logval[idx] - vmax) * prior(th);
        denom += w;
        num += w * th;
    }
    if (denom <= 0.0) throw DegenerateMassError("qbe_quadrature: zero posterior mass");

    StageResult res;
    res.kind = EstimatorKind::qbe;
    res.estimate = num / denom;
    apply_modification(res, box);
    res.objective = field(res.estimate);
    res.evaluations = total + 1;
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// QBE by random-walk Metropolis-Hastings
// ---------------------------------------------------------------------------

StageResult qbe_metropolis(const QLField& field, const PriorSpec& prior, const MHConfig& cfg) {
    const ParamBox& box = field.box();
    const int d = box.dim();
    cfg.validate(d);

    auto t0 = std::chrono::steady_clock::now();
    Vec x = cfg.initial_point.size() ? cfg.initial_point : box.center();
    auto log_target = [&](const Vec& p) -> double {
        double f = field(p);
        if (!std::isfinite(f)) return kNegInf;
        double pr = prior(p);
        if (!(pr > 0.0)) return kNegInf;
        return f + std::log(pr);
    };
    double fx = log_target(x);
    if (!std::isfinite(fx))
        throw BadInitialPointError("qbe_metropolis: initial point has -inf target");

    Vec base_scale = cfg.proposal_scale.size() ? cfg.proposal_scale : Vec(0.02 * box.width());
    double log_factor = 0.0; // adapted during burn-in only, frozen afterwards

    const long burn = std::lround(cfg.burn_in_fraction * static_cast<double>(cfg.chain_length));
    const long n_post = cfg.chain_length - burn;
    const int n_batches = 20;

    Rng rng(cfg.seed);
    Vec prop(d);
    Vec sum = Vec::Zero(d);
    Mat batch_sums = Mat::Zero(d, n_batches);
    long accepted_post = 0, accepted_window = 0;
    const long window = 50;

    for (long t = 0; t < cfg.chain_length; ++t) {
        double factor = std::exp(log_factor);
        for (int k = 0; k < d; ++k) prop[k] = x[k] + factor * base_scale[k] * rng.normal();
        bool accept = false;
        if (box.interior(prop)) {
            double fp = log_target(prop);
            if (std::isfinite(fp)) {
                double logu = std::log(1.0 - rng.uniform()); // uniform in (0, 1]
                if (logu <= fp - fx) {
                    x = prop;
                    fx = fp;
                    accept = true;
                }
            }
        }
        if (t < burn) {
            if (accept) ++accepted_window;
            if (cfg.adapt && (t + 1) % window == 0) {
                double rate = static_cast<double>(accepted_window) / window;
                log_factor += 0.7 * (rate - 0.3);
                log_factor = std::clamp(log_factor, std::log(1e-6), std::log(1e3));
                accepted_window = 0;
            }
        } else {
            if (accept) ++accepted_post;
            sum += x;
            long b = (t - burn) * n_batches / n_post;
            batch_sums.col(b) += x;
        }
    }

    double acc_rate = static_cast<double>(accepted_post) / static_cast<double>(n_post);
    if (acc_rate < 0.01)
        throw PathologicalChainError("qbe_metropolis: acceptance rate " +
                                     std::to_string(acc_rate) + " after burn-in");

    StageResult res;
    res.kind = EstimatorKind::qbe;
    res.estimate = sum / static_cast<double>(n_post);
    res.accept_rate = acc_rate;
    res.proposal_scale_used = std::exp(log_factor) * base_scale;

    // batch-means Monte Carlo standard error of the chain mean
    res.mc_se = Vec::Zero(d);
    const double per_batch = static_cast<double>(n_post) / n_batches;
    for (int k = 0; k < d; ++k) {
        double mean = res.estimate[k];
        double var = 0.0;
        for (int b = 0; b < n_batches; ++b) {
            double bm = batch_sums(k, b) / per_batch;
            var += (bm - mean) * (bm - mean);
        }
        var /= (n_batches - 1);
        res.mc_se[k] = std::sqrt(var / n_batches);
    }

    apply_modification(res, box);
    res.objective = field(res.estimate);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// The adaptive pipeline
// ---------------------------------------------------------------------------

namespace {

StageResult run_stage(const QLField& field, EstimatorKind kind, const PriorSpec& prior,
                      const EstimateOptions& opt, int stage_index, const char* block) {
    auto t0 = std::chrono::steady_clock::now();
    const ParamBox& box = field.box();
    const int dim = box.dim();
    std::uint64_t stage_seed = derive_seed(opt.seed, 1000u + static_cast<unsigned>(stage_index));

    StageResult res;
    if (kind == EstimatorKind::qmle) {
        res = qmle(field, box, opt.stage_budget(dim), stage_seed);
    } else {
        MHConfig mh;
        mh.chain_length = opt.mh_length;
        mh.burn_in_fraction = opt.mh_burn_in_fraction;
        mh.adapt = opt.mh_adapt;
        mh.seed = stage_seed;
        mh.proposal_scale = opt.mh_proposal_frac * box.width();
        if (opt.warm_start) {
            StageResult warm =
                qmle(field, box, opt.stage_warm_budget(dim), derive_seed(stage_seed, 1));
            mh.initial_point = warm.estimate;
        }
        res = qbe_metropolis(field, prior, mh);
    }
    res.block = block;
    res.evaluations = field.evaluations();
    res.pd_failures = field.pd_failures();
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // interior PD rejections above 0.1% of evaluations invalidate the stage
    if (res.pd_failures > 0 &&
        static_cast<double>(res.pd_failures) > 1e-3 * static_cast<double>(res.evaluations))
        throw NotPositiveDefiniteError(std::string(block) +
                                       ": non-PD rejections exceed 0.1% of evaluations");
    return res;
}

} // namespace

AdaptiveReport run_adaptive(const SamplePath& path, const ModelSpec& model,
                            const EstimateOptions& options) {
    if (path.n() < 2) throw InvalidArgumentError("run_adaptive: need n >= 2");

    AdaptiveReport rep;
    rep.options = options;
    rep.n = path.n();
    rep.h = path.h;
    {
        SamplingDesign echo;
        echo.n = path.n();
        echo.h = path.h;
        rep.design_regime_ok = echo.regime_ok();
    }

    auto guard = [](int stage, auto&& fn) {
        try {
            return fn();
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(stage, e.what());
        }
    };

    // Step 1: initial theta1 from the X increments only
    QLField f1 = guard(1, [&] { return field_theta1_initial(path, model); });
    rep.stages[0] = guard(1, [&] {
        return run_stage(f1, options.scheme.a0, options.prior1, options, 1, "theta1_initial");
    });
    if (options.quad_cross_grid > 0 && model.dims.p1 <= 2) {
        rep.quad_cross_check = guard(1, [&] {
            StageResult r = qbe_quadrature(f1, options.prior1, options.quad_cross_grid);
            r.block = "theta1_initial_quad";
            return r;
        });
    }

    // Step 2: theta2 with step 1 plugged in
    QLField f2 = guard(2, [&] { return field_theta2(path, model, rep.stages[0].estimate); });
    rep.stages[1] = guard(2, [&] {
        return run_stage(f2, options.scheme.a2, options.prior2, options, 2, "theta2");
    });

    // Step 3: theta3 with steps 1-2 plugged in
    QLField f3 = guard(3, [&] {
        return field_theta3(path, model, rep.stages[0].estimate, rep.stages[1].estimate);
    });
    rep.stages[2] = guard(3, [&] {
        return run_stage(f3, options.scheme.a3, options.prior3, options, 3, "theta3");
    });

    // Step 4: improved theta1 with steps 2-3 plugged in
    QLField f4 = guard(4, [&] {
        return field_theta1_improved(path, model, rep.stages[1].estimate, rep.stages[2].estimate);
    });
    rep.stages[3] = guard(4, [&] {
        return run_stage(f4, options.scheme.a1, options.prior1, options, 4, "theta1");
    });

    // Step 5: the final theta2 is step 2's estimate
    rep.stages[4] = rep.stages[1];
    rep.stages[4].block = "theta2_final";
    rep.stages[4].wall_seconds = 0.0;

    rep.final_estimate =
        ThetaBlocks{rep.stages[3].estimate, rep.stages[1].estimate, rep.stages[2].estimate};

    try {
        rep.gammas = gamma_blocks(path, model, rep.final_estimate);
        RateMatrix rates{rep.n, rep.h};
        rep.cis = confidence_intervals(rep.final_estimate, &rep.stages[0].estimate, rep.gammas,
                                       rates, options.ci_level);
        rep.gammas_ok = true;
    } catch (const Error& e) {
        rep.gammas_ok = false;
        rep.gammas_error = e.what();
    }
    return rep;
}

} // namespace hypoql
