#include <doctest.h>

#include <array>
#include <atomic>
#include <cmath>
#include <thread>

#include "hypoql/asymptotics.hpp"
#include "hypoql/estimators.hpp"
#include "hypoql/rng.hpp"
#include "hypoql/simulate.hpp"

using namespace hypoql;

namespace {

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}
Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

ThetaBlocks theta_linear() { return {vec1(1.0), vec2(1.0, 1.0), vec1(1.0)}; }

SamplePath long_linear_path(long n = 50000, double h = 0.1, std::uint64_t seed = 8080) {
    SamplingDesign d;
    d.n = n;
    d.h = h;
    d.substeps = 10;
    d.burn_in = 50.0;
    d.seed = seed;
    return simulate_path(builtin_linear(), theta_linear(), d);
}

// Random d_x=3, d_y=2 model for the trace-inequality corpus; only diffusion,
// smooth_dx and cov_d1 matter there.
ModelSpec random_trace_model(Rng& rng, int d_x, int d_y) {
    ModelSpec m;
    m.dims = Dimensions{d_x, d_y, d_x + 1, 1, 1, 1};
    m.boxes = {ParamBox::cube(1, 0.1, 5.0), ParamBox::cube(1, 0.1, 5.0),
               ParamBox::cube(1, 0.1, 5.0)};
    // B: fixed well-conditioned matrix scaled by theta1
    Mat b0(d_x, d_x + 1);
    for (int i = 0; i < d_x; ++i)
        for (int j = 0; j < d_x + 1; ++j) b0(i, j) = rng.normal();
    b0 += 2.0 * Mat::Identity(d_x, d_x + 1);
    Mat hx0(d_y, d_x);
    for (int i = 0; i < d_y; ++i)
        for (int j = 0; j < d_x; ++j) hx0(i, j) = rng.normal();
    m.diffusion = [b0](ConstVecRef, ConstVecRef, const Vec& th1, Mat& out) {
        out = th1[0] * b0;
    };
    m.smooth_dx = [hx0](ConstVecRef, ConstVecRef, const Vec&, Mat& out) { out = hx0; };
    m.cov_d1 = [b0](ConstVecRef, ConstVecRef, const Vec& th1, std::vector<Mat>& out) {
        out.assign(1, Mat(2.0 * th1[0] * b0 * b0.transpose()));
    };
    return m;
}

} // namespace

TEST_CASE("rate matrix ordering") {
    RateMatrix r{1000, 0.1};
    CHECK(r.s1() == doctest::Approx(1.0 / std::sqrt(1000.0)));
    CHECK(r.s2() == doctest::Approx(1.0 / std::sqrt(100.0)));
    CHECK(r.s3() == doctest::Approx(std::sqrt(0.1 / 1000.0)));
    CHECK(r.s3() < r.s2());
    CHECK(r.s3() < r.s1()); // theta3 is the fastest block when h < 1
}

TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-7));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963985).epsilon(1e-7));
    CHECK_THROWS_AS(normal_quantile(0.0), InvalidArgumentError);
}

TEST_CASE("gamma blocks: constant integrands are exact for the linear model") {
    // C = theta1^2, d1C = 2 theta1, Hx = theta3: at theta = 1s the integrands
    // are state-free: Gamma1_init = 1/2 * 2^2 = 2, Gamma11 = 2 + 2 = 4.
    SamplePath p = long_linear_path(200, 0.1, 5);
    GammaBlocks g = gamma_blocks(p, builtin_linear(), theta_linear());
    CHECK(g.gamma1_init(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(g.gamma11(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    // square invertible Hx: the improved information doubles the initial one
    CHECK(g.gamma11(0, 0) == doctest::Approx(2.0 * g.gamma1_init(0, 0)).epsilon(1e-12));
}

TEST_CASE("gamma blocks: state averages match the OU stationary moments") {
    // OU oracle: E X = -1, E X^2 = 1.5
    //   Gamma22 = E [ (-x,-1)^T (-x,-1) ] = [[1.5, -1], [-1, 1]]
    //   Gamma33 = 12 E[x^2] / (theta1^2 theta3^2) = 18
    SamplePath p = long_linear_path();
    GammaBlocks g = gamma_blocks(p, builtin_linear(), theta_linear());
    CHECK(std::abs(g.gamma22(0, 0) - 1.5) < 0.075);
    CHECK(std::abs(g.gamma22(0, 1) - (-1.0)) < 0.05);
    CHECK(std::abs(g.gamma22(1, 0) - (-1.0)) < 0.05);
    CHECK(std::abs(g.gamma22(1, 1) - 1.0) < 1e-12);
    CHECK(std::abs(g.gamma33(0, 0) - 18.0) < 0.9);

    SUBCASE("symmetry and positive semidefiniteness") {
        for (const Mat* m : {&g.gamma1_init, &g.gamma11, &g.gamma22, &g.gamma33}) {
            CHECK((*m - m->transpose()).cwiseAbs().maxCoeff() <= 1e-12);
            Eigen::SelfAdjointEigenSolver<Mat> es(*m);
            CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        }
    }
}

TEST_CASE("confidence intervals") {
    GammaBlocks g;
    g.gamma1_init = Mat::Constant(1, 1, 2.0);
    g.gamma11 = Mat::Constant(1, 1, 4.0);
    g.gamma22 = Mat::Identity(2, 2);
    g.gamma33 = Mat::Identity(1, 1);
    ThetaBlocks th{vec1(1.0), vec2(1.0, 1.0), vec1(1.0)};

    SUBCASE("frozen example: Gamma11 = 4, n = 1000, 95%") {
        RateMatrix r{1000, 0.1};
        auto cis = confidence_intervals(th, nullptr, g, r, 0.95);
        REQUIRE(cis.size() == 4);
        CHECK(cis[0].block == "theta1");
        CHECK(cis[0].half_width == doctest::Approx(1.959964 / std::sqrt(1000.0) / 2.0)
                                       .epsilon(1e-6)); // ~0.031
        CHECK(std::abs(cis[0].half_width - 0.031) < 2e-4);
    }
    SUBCASE("unit case: half-width equals the z quantile") {
        RateMatrix r{1, 1.0};
        ThetaBlocks th1{vec1(0.0), vec2(0.0, 0.0), vec1(0.0)};
        auto cis = confidence_intervals(th1, nullptr, g, r, 0.95);
        // theta3 row: gamma = 1, s3 = 1
        CHECK(cis.back().half_width == doctest::Approx(normal_quantile(0.975)).epsilon(1e-12));
    }
    SUBCASE("level monotonicity") {
        RateMatrix r{1000, 0.1};
        auto lo = confidence_intervals(th, nullptr, g, r, 0.5);
        auto hi = confidence_intervals(th, nullptr, g, r, 0.95);
        for (std::size_t i = 0; i < lo.size(); ++i) CHECK(lo[i].half_width < hi[i].half_width);
    }
    SUBCASE("initial theta1 uses its own information") {
        RateMatrix r{1000, 0.1};
        Vec init = vec1(1.0);
        auto cis = confidence_intervals(th, &init, g, r, 0.95);
        REQUIRE(cis.size() == 5);
        CHECK(cis[0].block == "theta1_initial");
        // Gamma^{(1)} = 2 < Gamma11 = 4: wider interval for the initial estimator
        CHECK(cis[0].half_width > cis[1].half_width);
    }
    SUBCASE("singular information") {
        GammaBlocks bad = g;
        bad.gamma22 = Mat::Zero(2, 2);
        RateMatrix r{1000, 0.1};
        CHECK_THROWS_AS(confidence_intervals(th, nullptr, bad, r, 0.95), SingularGammaError);
    }
}

TEST_CASE("variance-improvement inequality") {
    SUBCASE("square invertible Hx gives equality") {
        ModelSpec m = builtin_linear();
        Mat states(2, 3);
        states << 0.0, 1.0, -2.0, 0.0, 0.5, 1.0;
        auto rep = check_variance_improvement(m, states, vec1(1.3), vec1(0.8));
        CHECK(rep.all_hold());
        for (const auto& e : rep.entries) CHECK(std::abs(e.max_violation) <= 1e-10);
    }
    SUBCASE("random rectangular corpus") {
        Rng rng(22);
        for (int it = 0; it < 100; ++it) {
            ModelSpec m = random_trace_model(rng, 3, 2);
            Mat states = Mat::Zero(5, 1);
            auto rep = check_variance_improvement(m, states, vec1(0.5 + rng.uniform()),
                                                  vec1(1.0));
            REQUIRE(rep.all_hold());
        }
    }
    SUBCASE("rank-deficient Hx is refused") {
        Rng rng(23);
        ModelSpec m = random_trace_model(rng, 3, 2);
        m.smooth_dx = [](ConstVecRef, ConstVecRef, const Vec&, Mat& out) {
            out.resize(2, 3);
            out.row(0) << 1.0, 2.0, 3.0;
            out.row(1) << 2.0, 4.0, 6.0; // collinear
        };
        Mat states = Mat::Zero(5, 1);
        CHECK_THROWS_AS(check_variance_improvement(m, states, vec1(1.0), vec1(1.0)),
                        RankDeficientHxError);
    }
    SUBCASE("d_y > d_x is refused") {
        ModelSpec m;
        m.dims = Dimensions{1, 2, 1, 1, 1, 1};
        CHECK_THROWS_AS(check_variance_improvement(m, Mat::Zero(3, 1), vec1(1.0), vec1(1.0)),
                        InvalidArgumentError);
    }
}

TEST_CASE("identifiability fields") {
    ModelSpec m = builtin_linear();
    SamplePath p = long_linear_path(500, 0.1, 99);
    ThetaBlocks star = theta_linear();

    SUBCASE("every field vanishes at its own true value") {
        CHECK(std::abs(eval_y_field(p, m, star, YField::y1, star.theta1).values[0]) <= 1e-12);
        CHECK(std::abs(eval_y_field(p, m, star, YField::yj1, star.theta1).values[0]) <= 1e-12);
        CHECK(std::abs(eval_y_field(p, m, star, YField::y2, star.theta2).values[0]) <= 1e-12);
        CHECK(std::abs(eval_y_field(p, m, star, YField::y3, star.theta3).values[0]) <= 1e-12);
    }

    SUBCASE("fields are nonpositive on a grid") {
        Mat grid1(1, 101);
        for (int i = 0; i < 101; ++i) grid1(0, i) = 1e-4 + (10.0 - 1e-4) * i / 100.0;
        for (YField w : {YField::y1, YField::yj1, YField::y3}) {
            Vec vals = eval_y_field(p, m, star, w, grid1).values;
            for (int i = 0; i < vals.size(); ++i) CHECK(vals[i] <= 1e-12);
        }
        Mat grid2(2, 101);
        for (int i = 0; i < 101; ++i) {
            grid2(0, i) = 1e-4 + (10.0 - 1e-4) * i / 100.0;
            grid2(1, i) = 1.0;
        }
        Vec vals = eval_y_field(p, m, star, YField::y2, grid2).values;
        for (int i = 0; i < vals.size(); ++i) CHECK(vals[i] <= 0.0);
    }

    SUBCASE("empty grid is fine") {
        CHECK(eval_y_field(p, m, star, YField::y1, Mat(1, 0)).values.size() == 0);
    }

    SUBCASE("Y2 curvature equals the Gamma22 quadratic form") {
        // Y2 is exactly quadratic for the linear model; its second difference
        // along a direction u equals -u' Gamma22 u on the same path.
        GammaBlocks g = gamma_blocks(p, m, star);
        for (Vec u : {vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(1.0, 1.0)}) {
            double delta = 0.1;
            Mat grid(2, 3);
            grid.col(0) = star.theta2 - delta * u;
            grid.col(1) = star.theta2;
            grid.col(2) = star.theta2 + delta * u;
            Vec v = eval_y_field(p, m, star, YField::y2, grid).values;
            double second_diff = (v[0] - 2.0 * v[1] + v[2]) / (delta * delta);
            CHECK(second_diff == doctest::Approx(-u.dot(g.gamma22 * u)).epsilon(1e-9));
        }
    }
}

TEST_CASE("95% intervals for theta2 cover the truth at the nominal rate") {
    // 200 replicates, QMLE pipeline, per-coordinate coverage in [88%, 99%]
    ModelSpec m = builtin_linear();
    ThetaBlocks star = theta_linear();
    const int reps = 200;
    std::array<std::atomic<int>, 2> covered{0, 0};
    std::atomic<int> next{0};

    auto worker = [&]() {
        while (true) {
            int k = next.fetch_add(1);
            if (k >= reps) return;
            SamplingDesign d;
            d.n = 1000;
            d.h = 0.1;
            d.substeps = 20;
            d.burn_in = 50.0;
            d.seed = derive_seed(414243, static_cast<std::uint64_t>(k));
            SamplePath p = simulate_path(m, star, d);
            EstimateOptions opt;
            opt.scheme = Scheme::parse("MMMM");
            opt.seed = derive_seed(515253, static_cast<std::uint64_t>(k));
            AdaptiveReport rep = run_adaptive(p, m, opt);
            REQUIRE(rep.gammas_ok);
            for (const auto& ci : rep.cis)
                if (ci.block == "theta2" && ci.lo <= 1.0 && 1.0 <= ci.hi)
                    covered[ci.coord].fetch_add(1);
        }
    };
    std::thread t1(worker), t2(worker);
    t1.join();
    t2.join();

    for (int c = 0; c < 2; ++c) {
        double rate = covered[c] / static_cast<double>(reps);
        INFO("theta2 coordinate ", c, " coverage ", rate);
        CHECK(rate >= 0.88);
        CHECK(rate <= 0.99);
    }
}
