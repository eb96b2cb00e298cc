#include "hypoql/cli.hpp"

#include <CLI11.hpp>
#include <iostream>

#include "hypoql/csv.hpp"
#include "hypoql/mc.hpp"
#include "hypoql/report.hpp"
#include "hypoql/selfcheck.hpp"

namespace hypoql {

namespace {

Vec parse_comma_list(const std::string& s, const std::string& flag) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const char* b = item.c_str();
        char* e = nullptr;
        double v = std::strtod(b, &e);
        if (e == b || *e != '\0')
            throw CLI::ValidationError(flag, "expected a comma list of numbers, got '" + s + "'");
        vals.push_back(v);
    }
    if (vals.empty())
        throw CLI::ValidationError(flag, "expected a comma list of numbers, got '" + s + "'");
    Vec out(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) out[i] = vals[i];
    return out;
}

struct SimulateArgs {
    std::string model = "linear";
    std::string theta1, theta2, theta3;
    long n = 1000;
    double h = 0.1;
    int substeps = 100;
    double burn_in = 100.0;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    ModelSpec model = model_by_name(a.model);
    ThetaBlocks theta;
    theta.theta1 = parse_comma_list(a.theta1, "--theta1");
    theta.theta2 = parse_comma_list(a.theta2, "--theta2");
    theta.theta3 = parse_comma_list(a.theta3, "--theta3");

    SamplingDesign d;
    d.n = a.n;
    d.h = a.h;
    d.substeps = a.substeps;
    d.burn_in = a.burn_in;
    d.seed = a.seed;
    if (!d.regime_ok())
        std::cerr << "warning: n*h^2 = " << static_cast<double>(a.n) * a.h * a.h
                  << " >= 1; outside the rapidly-increasing-design regime\n";

    SamplePath p = simulate_path(model, theta, d);
    write_path_csv(a.out, p, model.dims.d_x, model.dims.d_y);
    std::cout << "wrote " << (p.n() + 1) << " rows to " << a.out << "\n";
    return 0;
}

struct EstimateArgs {
    std::string data;
    std::string model = "linear";
    std::string scheme = "BBBB";
    long mh_length = 5000;
    int grid = 0;
    long budget = 0;
    double level = 0.95;
    std::uint64_t seed = 1;
    std::string report;
};

int cmd_estimate(const EstimateArgs& a) {
    ModelSpec model = model_by_name(a.model);
    PathCsv in = read_path_csv(a.data);
    if (in.d_x != model.dims.d_x || in.d_y != model.dims.d_y)
        throw Error("data dimensions (" + std::to_string(in.d_x) + "," + std::to_string(in.d_y) +
                    ") do not match model '" + a.model + "'");

    EstimateOptions opt;
    opt.scheme = Scheme::parse(a.scheme);
    opt.mh_length = a.mh_length;
    opt.quad_cross_grid = a.grid;
    opt.qmle_budget = a.budget;
    opt.ci_level = a.level;
    opt.seed = a.seed;

    AdaptiveReport rep = run_adaptive(in.path, model, opt);

    auto print_block = [](const char* name, const Vec& v) {
        std::cout << name << " =";
        for (Eigen::Index i = 0; i < v.size(); ++i) std::cout << " " << v[i];
        std::cout << "\n";
    };
    print_block("theta1", rep.final_estimate.theta1);
    print_block("theta2", rep.final_estimate.theta2);
    print_block("theta3", rep.final_estimate.theta3);
    if (!a.report.empty()) {
        write_report_json(a.report, rep, a.model);
        std::cout << "report written to " << a.report << "\n";
    }
    return 0;
}

struct McArgs {
    std::string config;
    std::string out_rows;
    std::string out_summary;
};

int cmd_mc(const McArgs& a) {
    MCConfig cfg = parse_mc_config_file(a.config);
    if (!a.out_rows.empty()) cfg.out_rows = a.out_rows;
    if (!a.out_summary.empty()) cfg.out_summary = a.out_summary;

    MCResult res = run_mc(cfg);
    std::cout << "replicates: " << res.rows.size() << ", failed: "
              << static_cast<long>(res.failure_fraction() * static_cast<double>(res.rows.size()) +
                                   0.5)
              << "\n";
    for (const auto& s : res.summary)
        std::cout << s.estimator << "[" << (s.coord + 1) << "]: mean " << s.mean << ", sd " << s.sd
                  << " (n=" << s.n_ok << ")\n";
    return 0;
}

struct CheckArgs {
    std::uint64_t seed = 1;
    std::string y_curves_out;
};

int cmd_check(const CheckArgs& a) {
    auto checks = run_selfchecks(a.seed, a.y_curves_out);
    for (const auto& c : checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    if (!all_pass(checks)) throw Error("self-check suite failed");
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"adaptive quasi-likelihood estimation for degenerate diffusions"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "simulate a path and write it as CSV");
    c_sim->set_help_flag("--help", "print this help message"); // frees -h for --h below
    c_sim->add_option("--model", sim.model, "model name (linear, fhn)");
    c_sim->add_option("--theta1", sim.theta1, "comma list")->required();
    c_sim->add_option("--theta2", sim.theta2, "comma list")->required();
    c_sim->add_option("--theta3", sim.theta3, "comma list")->required();
    c_sim->add_option("--n", sim.n, "observed increments");
    c_sim->add_option("--h", sim.h, "observation step");
    c_sim->add_option("--substeps", sim.substeps, "fine Euler steps per observation");
    c_sim->add_option("--burn-in", sim.burn_in, "discarded time before recording");
    c_sim->add_option("--seed", sim.seed, "RNG seed");
    c_sim->add_option("--out", sim.out, "output CSV")->required();

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "run the adaptive pipeline on a path CSV");
    c_est->add_option("--data", est.data, "input path CSV")->required();
    c_est->add_option("--model", est.model, "model name");
    c_est->add_option("--scheme", est.scheme, "estimator kinds, e.g. BBBB or MMMM");
    c_est->add_option("--mh-length", est.mh_length, "Metropolis-Hastings chain length");
    c_est->add_option("--grid", est.grid, "quadrature cross-check grid (0 = off)");
    c_est->add_option("--budget", est.budget, "QMLE evaluation budget per stage");
    c_est->add_option("--level", est.level, "confidence level");
    c_est->add_option("--seed", est.seed, "RNG seed");
    c_est->add_option("--report", est.report, "output report JSON");

    McArgs mc;
    auto* c_mc = app.add_subcommand("mc", "Monte Carlo study from a config file");
    c_mc->add_option("--config", mc.config, "experiment config (TOML-style)")->required();
    c_mc->add_option("--out-rows", mc.out_rows, "per-replicate CSV (overrides config)");
    c_mc->add_option("--out-summary", mc.out_summary, "summary CSV (overrides config)");

    CheckArgs chk;
    auto* c_chk = app.add_subcommand("check", "model validation and algebraic invariant suite");
    c_chk->add_option("--seed", chk.seed, "RNG seed");
    c_chk->add_option("--y-curves-out", chk.y_curves_out, "CSV prefix for diagnostic curves");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_est->parsed()) return cmd_estimate(est);
        if (c_mc->parsed()) return cmd_mc(mc);
        if (c_chk->parsed()) return cmd_check(chk);
    } catch (const ConfigError& e) {
        // bad or missing experiment configs are usage errors
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace hypoql
