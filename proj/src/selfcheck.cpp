#include "hypoql/selfcheck.hpp"

#include <Eigen/Dense>
#include <sstream>

#include "hypoql/asymptotics.hpp"
#include "hypoql/csv.hpp"
#include "hypoql/quasilik.hpp"
#include "hypoql/rng.hpp"
#include "hypoql/simulate.hpp"

namespace hypoql {

Mat random_spd(int dim, Rng& rng) {
    Mat a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ();
    Vec ev(dim);
    for (int i = 0; i < dim; ++i) ev[i] = 0.5 + 1.5 * rng.uniform();
    return q * ev.asDiagonal() * q.transpose();
}

Mat random_full_rank(int rows, int cols, Rng& rng) {
    while (true) {
        Mat h(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) h(i, j) = rng.normal();
        Eigen::JacobiSVD<Mat> svd(h);
        if (svd.singularValues().minCoeff() > 0.1) return h;
    }
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace

SelfCheck check_s_inverse_identity(int instances, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int it = 0; it < instances; ++it) {
        int dx = 1 + static_cast<int>(rng.uniform() * 4);
        int dy = 1 + static_cast<int>(rng.uniform() * std::min(dx, 3));
        SBlocks s = make_sblocks(random_spd(dx, rng), random_full_rank(dy, dx, rng));
        Mat res = s.assembled() * s.assembled_inverse() - Mat::Identity(dx + dy, dx + dy);
        worst = std::max(worst, res.cwiseAbs().maxCoeff());
    }
    return {"s_inverse_identity", worst <= 1e-10,
            "max |S S^-1 - I| = " + fmt(worst) + " over " + std::to_string(instances)};
}

SelfCheck check_det_factorization(int instances, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int it = 0; it < instances; ++it) {
        int dx = 1 + static_cast<int>(rng.uniform() * 4);
        int dy = 1 + static_cast<int>(rng.uniform() * std::min(dx, 3));
        Mat c = random_spd(dx, rng);
        SBlocks s = make_sblocks(c, random_full_rank(dy, dx, rng));
        double generic = s.assembled().determinant();
        double factored = c.determinant() * s.V.determinant() / std::pow(12.0, dy);
        worst = std::max(worst, std::abs(generic - factored) / std::abs(generic));
    }
    return {"det_factorization", worst <= 1e-10,
            "max relative error = " + fmt(worst) + " over " + std::to_string(instances)};
}

namespace {

// Assembles a parameter-free probe model around fixed (B0, Hx0) so the
// variance-comparison checker can be reused on random instances.
ModelSpec probe_model(const Mat& b0, const Mat& hx0) {
    ModelSpec m;
    m.dims = Dimensions{static_cast<int>(b0.rows()), static_cast<int>(hx0.rows()),
                        static_cast<int>(b0.cols()), 1, 1, 1};
    m.boxes = {ParamBox::cube(1, 0.1, 5.0), ParamBox::cube(1, 0.1, 5.0),
               ParamBox::cube(1, 0.1, 5.0)};
    m.diffusion = [b0](ConstVecRef, ConstVecRef, const Vec& th1, Mat& out) { out = th1[0] * b0; };
    m.smooth_dx = [hx0](ConstVecRef, ConstVecRef, const Vec&, Mat& out) { out = hx0; };
    m.cov_d1 = [b0](ConstVecRef, ConstVecRef, const Vec& th1, std::vector<Mat>& out) {
        out.assign(1, Mat(2.0 * th1[0] * b0 * b0.transpose()));
    };
    return m;
}

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

} // namespace

SelfCheck check_trace_inequality(int instances, std::uint64_t seed) {
    Rng rng(seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < instances; ++it) {
        int dx = 2 + static_cast<int>(rng.uniform() * 3);           // 2..4
        int dy = 1 + static_cast<int>(rng.uniform() * (dx - 1));    // < d_x
        ModelSpec m = probe_model(random_full_rank(dx, dx + 1, rng),
                                  random_full_rank(dy, dx, rng));
        auto rep = check_variance_improvement(m, Mat::Zero(dx + dy, 1),
                                              vec1(0.5 + rng.uniform()), vec1(1.0));
        for (const auto& e : rep.entries) worst = std::max(worst, e.max_violation);
        if (!rep.all_hold())
            return {"trace_inequality", false, "violated by " + fmt(worst)};
    }
    return {"trace_inequality", true,
            "max lhs-rhs = " + fmt(worst) + " over " + std::to_string(instances)};
}

SelfCheck check_trace_equality_square(int instances, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int it = 0; it < instances; ++it) {
        int d = 1 + static_cast<int>(rng.uniform() * 3); // 1..3, square and invertible
        ModelSpec m = probe_model(random_full_rank(d, d + 1, rng), random_full_rank(d, d, rng));
        auto rep = check_variance_improvement(m, Mat::Zero(2 * d, 1), vec1(0.5 + rng.uniform()),
                                              vec1(1.0));
        for (const auto& e : rep.entries) worst = std::max(worst, std::abs(e.max_violation));
    }
    return {"trace_equality_square", worst <= 1e-10,
            "max |lhs-rhs| = " + fmt(worst) + " over " + std::to_string(instances)};
}

SelfCheck check_builtin_model(const std::string& name, int draws, std::uint64_t seed) {
    ModelSpec m = model_by_name(name);
    Rng rng(seed);
    for (int k = 0; k < draws; ++k) {
        Mat probe(m.dims.d_z(), 2);
        for (int i = 0; i < probe.size(); ++i) probe(i) = 2.0 * rng.normal();
        ThetaBlocks th;
        auto draw = [&rng](const ParamBox& b, double floor_val) {
            Vec v(b.dim());
            for (int i = 0; i < b.dim(); ++i) {
                v[i] = b.lower[i] + rng.uniform() * (b.upper[i] - b.lower[i]);
                if (b.lower[i] >= 0.0) v[i] = std::max(v[i], floor_val);
            }
            return v;
        };
        // keep positive parameters away from the 1e-4 edge: the derivative
        // step rule loses accuracy where C ~ 1e-8
        th.theta1 = draw(m.box1(), 0.05);
        th.theta2 = draw(m.box2(), 0.05);
        th.theta3 = draw(m.box3(), 0.05);
        auto rep = validate_model(m, probe, th);
        if (!rep.ok())
            return {"model_validation_" + name, false,
                    "draw " + std::to_string(k) + ": " + rep.summary()};
    }
    return {"model_validation_" + name, true, std::to_string(draws) + " random draws"};
}

SelfCheck check_y_field_zeros(std::uint64_t seed, const std::string& csv_prefix) {
    ModelSpec m = builtin_linear();
    ThetaBlocks star;
    star.theta1 = vec1(1.0);
    star.theta2 = Vec::Ones(2);
    star.theta3 = vec1(1.0);

    SamplingDesign d;
    d.n = 200;
    d.h = 0.1;
    d.substeps = 20;
    d.burn_in = 20.0;
    d.seed = seed;
    SamplePath p = simulate_path(m, star, d);

    auto sweep = [&](int block_dim, const Vec& center, int coord) {
        Mat grid(block_dim, 101);
        for (int i = 0; i < 101; ++i) {
            grid.col(i) = center;
            grid(coord, i) = 1e-4 + (10.0 - 1e-4) * i / 100.0;
        }
        return grid;
    };

    double worst_at_star = 0.0;
    double worst_positive = -std::numeric_limits<double>::infinity();
    struct Item {
        YField which;
        Mat grid;
        Vec at_star;
        const char* tag;
    };
    std::vector<Item> items = {
        {YField::y1, sweep(1, star.theta1, 0), star.theta1, "y1"},
        {YField::yj1, sweep(1, star.theta1, 0), star.theta1, "yj1"},
        {YField::y2, sweep(2, star.theta2, 0), star.theta2, "y2"},
        {YField::y3, sweep(1, star.theta3, 0), star.theta3, "y3"},
    };
    for (const auto& item : items) {
        YFieldCurve at = eval_y_field(p, m, star, item.which, item.at_star);
        worst_at_star = std::max(worst_at_star, std::abs(at.values[0]));
        YFieldCurve curve = eval_y_field(p, m, star, item.which, item.grid);
        worst_positive = std::max(worst_positive, curve.values.maxCoeff());
        if (!csv_prefix.empty())
            write_y_curve_csv(csv_prefix + "_" + item.tag + ".csv", curve);
    }
    bool ok = worst_at_star <= 1e-12 && worst_positive <= 1e-12;
    return {"y_field_zeros", ok,
            "max |Y(theta*)| = " + fmt(worst_at_star) + ", max on grid = " + fmt(worst_positive)};
}

std::vector<SelfCheck> run_selfchecks(std::uint64_t seed, const std::string& y_csv_prefix) {
    std::vector<SelfCheck> out;
    out.push_back(check_builtin_model("linear", 100, derive_seed(seed, 11)));
    out.push_back(check_builtin_model("fhn", 100, derive_seed(seed, 12)));
    out.push_back(check_s_inverse_identity(1000, derive_seed(seed, 13)));
    out.push_back(check_det_factorization(1000, derive_seed(seed, 14)));
    out.push_back(check_trace_inequality(100, derive_seed(seed, 15)));
    out.push_back(check_trace_equality_square(100, derive_seed(seed, 16)));
    out.push_back(check_y_field_zeros(derive_seed(seed, 17), y_csv_prefix));
    return out;
}

bool all_pass(const std::vector<SelfCheck>& checks) {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

} // namespace hypoql
