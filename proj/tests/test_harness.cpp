#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hypoql/cli.hpp"
#include "hypoql/csv.hpp"
#include "hypoql/mc.hpp"
#include "hypoql/report.hpp"
#include "hypoql/selfcheck.hpp"

using namespace hypoql;

namespace {

std::string tmp_file(const std::string& name) { return "/tmp/hypoql_test_" + name; }

std::string slurp(const std::string& file) {
    std::ifstream is(file);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void spit(const std::string& file, const std::string& text) {
    std::ofstream os(file);
    os << text;
}

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

const char* kSmallConfig = R"(
# linear smoke experiment
[model]
name = "linear"
theta1 = [1.0]
theta2 = [1.0, 1.0]
theta3 = [1.0]

[design]
n = 60
h = 0.1
substeps = 10
burn_in = 5.0

[estimators]
scheme = "MMMM"
qmle_budget = 400

[mc]
replicates = 4
base_seed = 7
threads = 2
)";

} // namespace

TEST_CASE("path csv round trip") {
    ModelSpec m = builtin_linear();
    ThetaBlocks th{vec1(1.0), Vec::Ones(2), vec1(1.0)};
    SamplingDesign d;
    d.n = 37;
    d.h = 0.05;
    d.substeps = 5;
    d.burn_in = 1.0;
    d.seed = 3;
    SamplePath p = simulate_path(m, th, d);

    std::string file = tmp_file("roundtrip.csv");
    write_path_csv(file, p, 1, 1);
    PathCsv back = read_path_csv(file);
    CHECK(back.d_x == 1);
    CHECK(back.d_y == 1);
    CHECK(back.path.n() == p.n());
    CHECK(back.path.h == doctest::Approx(p.h).epsilon(1e-15));
    CHECK((back.path.states - p.states).cwiseAbs().maxCoeff() == 0.0); // 17 digits round-trip

    SUBCASE("second write produces identical bytes") {
        std::string file2 = tmp_file("roundtrip2.csv");
        write_path_csv(file2, p, 1, 1);
        CHECK(slurp(file) == slurp(file2));
    }
}

TEST_CASE("path csv accepts multivariate headers") {
    std::string file = tmp_file("multi.csv");
    spit(file,
         "t,x1,x2,y1\n"
         "0,1,2,3\n"
         "0.5,4,5,6\n"
         "1,7,8,9\n");
    PathCsv got = read_path_csv(file);
    CHECK(got.d_x == 2);
    CHECK(got.d_y == 1);
    CHECK(got.path.states(1, 2) == 8.0);
}

TEST_CASE("path csv error cases") {
    SUBCASE("malformed header") {
        std::string file = tmp_file("badheader.csv");
        spit(file, "time,x1,y1\n0,1,2\n");
        CHECK_THROWS_AS(read_path_csv(file), MalformedHeaderError);
        spit(file, "t,x1,z1\n0,1,2\n");
        CHECK_THROWS_AS(read_path_csv(file), MalformedHeaderError);
    }
    SUBCASE("shuffled rows are non-equispaced") {
        std::string file = tmp_file("shuffled.csv");
        spit(file, "t,x1,y1\n0,1,2\n0.2,3,4\n0.1,5,6\n");
        CHECK_THROWS_AS(read_path_csv(file), NonEquispacedError);
    }
    SUBCASE("non-numeric cell names row and column") {
        std::string file = tmp_file("nonnum.csv");
        spit(file, "t,x1,y1\n0,1,2\n0.1,oops,4\n");
        try {
            read_path_csv(file);
            FAIL("expected NonNumericCellError");
        } catch (const NonNumericCellError& e) {
            CHECK(e.row == 2);
            CHECK(e.col == 1);
        }
    }
}

TEST_CASE("config parsing") {
    SUBCASE("full config") {
        MCConfig cfg = parse_mc_config_text(kSmallConfig);
        CHECK(cfg.model_name == "linear");
        CHECK(cfg.theta_star.theta2.size() == 2);
        CHECK(cfg.design.n == 60);
        CHECK(cfg.design.h == doctest::Approx(0.1));
        CHECK(cfg.options.scheme.str() == "MMMM");
        CHECK(cfg.options.qmle_budget == 400);
        CHECK(cfg.replicates == 4);
        CHECK(cfg.base_seed == 7);
        CHECK(cfg.threads == 2);
    }
    SUBCASE("missing file names the file") {
        try {
            parse_mc_config_file("/tmp/does_not_exist_hypoql.toml");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("does_not_exist_hypoql.toml") != std::string::npos);
        }
    }
    SUBCASE("unknown keys and sections are rejected") {
        CHECK_THROWS_AS(parse_mc_config_text("[mc]\nbogus = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_mc_config_text("[nope]\na = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_mc_config_text("a = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_mc_config_text("[mc]\nreplicates = ten\n"), ConfigError);
    }
    SUBCASE("raw layer handles comments and quoting") {
        RawConfig raw = parse_raw_config("[s]\nkey = \"a # b\" # trailing\n");
        CHECK(raw["s"]["key"] == "\"a # b\"");
    }
}

TEST_CASE("monte carlo driver") {
    MCConfig cfg = parse_mc_config_text(kSmallConfig);
    cfg.out_rows = tmp_file("rows.csv");
    cfg.out_summary = tmp_file("summary.csv");

    MCResult res = run_mc(cfg);
    CHECK(res.rows.size() == 4);
    CHECK(res.failure_fraction() == 0.0);
    for (const auto& r : res.rows) {
        CHECK(r.ok);
        CHECK(r.th1_init.size() == 1);
        CHECK(r.th2.size() == 2);
        CHECK(r.th3.size() == 1);
        CHECK(r.th1_impr.size() == 1);
    }

    SUBCASE("summary: theta1_initial, theta2 x2, theta3, theta1") {
        CHECK(res.summary.size() == 5);
        for (const auto& s : res.summary) CHECK(s.n_ok == 4);
    }

    SUBCASE("summary is recomputable from the written rows") {
        auto rows = read_mc_rows_csv(cfg.out_rows);
        REQUIRE(rows.size() == res.rows.size());
        auto summary2 = summarize(rows);
        REQUIRE(summary2.size() == res.summary.size());
        for (std::size_t i = 0; i < summary2.size(); ++i) {
            CHECK(summary2[i].estimator == res.summary[i].estimator);
            CHECK(summary2[i].mean == doctest::Approx(res.summary[i].mean).epsilon(1e-12));
            CHECK(summary2[i].sd == doctest::Approx(res.summary[i].sd).epsilon(1e-12));
        }
    }

    SUBCASE("byte-deterministic outputs") {
        std::string rows1 = slurp(cfg.out_rows), summary1 = slurp(cfg.out_summary);
        MCConfig again = cfg;
        again.threads = 1; // scheduling must not matter
        again.out_rows = tmp_file("rows_again.csv");
        again.out_summary = tmp_file("summary_again.csv");
        run_mc(again);
        CHECK(slurp(again.out_rows) == rows1);
        CHECK(slurp(again.out_summary) == summary1);
    }

    SUBCASE("single replicate reports sd 0 with n_ok flag 1") {
        MCConfig one = cfg;
        one.replicates = 1;
        one.out_rows.clear();
        one.out_summary.clear();
        MCResult r1 = run_mc(one);
        for (const auto& s : r1.summary) {
            CHECK(s.sd == 0.0);
            CHECK(s.n_ok == 1);
        }
    }
}

TEST_CASE("monte carlo failure handling") {
    // a model that blows up for most seeds: exponential growth in x
    ModelSpec bad = builtin_linear();
    bad.drift = [](ConstVecRef x, ConstVecRef, const Vec&, Vec& out) {
        out.resize(1);
        out[0] = x[0] * x[0] * x[0];
    };
    MCConfig cfg = parse_mc_config_text(kSmallConfig);
    cfg.design.z0 = Vec::Zero(2);
    cfg.design.z0[0] = 2.0;
    cfg.design.burn_in = 0.0;
    cfg.out_rows = tmp_file("failrows.csv");
    cfg.out_summary.clear();

    CHECK_THROWS_AS(run_mc(cfg, &bad), TooManyFailuresError);
    // failures were still recorded in the rows file before the throw
    std::string rows = slurp(cfg.out_rows);
    CHECK(rows.find("failed") != std::string::npos);
    CHECK(rows.find("blow-up") != std::string::npos);
}

TEST_CASE("report json contains the documented sections") {
    ModelSpec m = builtin_linear();
    ThetaBlocks th{vec1(1.0), Vec::Ones(2), vec1(1.0)};
    SamplingDesign d;
    d.n = 80;
    d.h = 0.1;
    d.substeps = 10;
    d.burn_in = 5.0;
    d.seed = 4;
    SamplePath p = simulate_path(m, th, d);

    EstimateOptions opt;
    opt.scheme = Scheme::parse("MMMM");
    AdaptiveReport rep = run_adaptive(p, m, opt);
    std::string js = report_to_json(rep, "linear");
    for (const char* key :
         {"\"meta\"", "\"version\"", "\"config\"", "\"seeds\"", "\"stages\"", "\"final\"",
          "\"gammas\"", "\"cis\"", "\"theta1\"", "\"theta2\"", "\"theta3\""})
        CHECK(js.find(key) != std::string::npos);

    std::string file = tmp_file("report.json");
    write_report_json(file, rep, "linear");
    CHECK(slurp(file) == js);
}

TEST_CASE("self-check suite passes") {
    auto checks = run_selfchecks(42);
    for (const auto& c : checks) {
        INFO(c.name, ": ", c.detail);
        CHECK(c.pass);
    }
    CHECK(all_pass(checks));
}

TEST_CASE("cli end to end") {
    std::string data = tmp_file("cli_path.csv");
    std::string report = tmp_file("cli_report.json");

    SUBCASE("simulate then estimate") {
        int rc = run_cli({"simulate", "--model", "linear", "--theta1", "1", "--theta2", "1,1",
                          "--theta3", "1", "--n", "60", "--h", "0.1", "--substeps", "10",
                          "--burn-in", "5", "--seed", "7", "--out", data});
        CHECK(rc == 0);
        PathCsv back = read_path_csv(data);
        CHECK(back.path.n() == 60);

        rc = run_cli({"estimate", "--data", data, "--model", "linear", "--scheme", "MMMM",
                      "--budget", "400", "--report", report});
        CHECK(rc == 0);
        std::string js = slurp(report);
        CHECK(js.find("\"final\"") != std::string::npos);
    }
    SUBCASE("usage errors exit 1") {
        CHECK(run_cli({"simulate", "--model", "linear"}) == 1);          // missing required
        CHECK(run_cli({"mc", "--config", "/tmp/missing_hypoql.toml"}) == 1);
        CHECK(run_cli({}) == 1);
        CHECK(run_cli({"bogus_subcommand"}) == 1);
    }
    SUBCASE("runtime errors exit 2") {
        spit(data, "t,x1,y1\n0,1,2\n0.1,3,4\n");
        // 2-row path: pipeline needs n >= 2
        CHECK(run_cli({"estimate", "--data", data, "--model", "linear", "--scheme", "MMMM"}) == 2);
        // unknown model
        CHECK(run_cli({"estimate", "--data", data, "--model", "nope"}) == 2);
    }
    SUBCASE("help exits 0") {
        CHECK(run_cli({"--help"}) == 0);
    }
    SUBCASE("check subcommand runs the invariant suite") {
        CHECK(run_cli({"check", "--seed", "5",
                       "--y-curves-out", tmp_file("curves")}) == 0);
        CHECK(slurp(tmp_file("curves") + "_y2.csv").find("value") != std::string::npos);
    }
}
