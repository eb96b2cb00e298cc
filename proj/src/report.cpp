#include "hypoql/report.hpp"

#include <fstream>

#include <json.hpp>

#include "hypoql/rng.hpp"

namespace hypoql {

namespace {

using nlohmann::json;

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json mat_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json stage_json(const StageResult& s) {
    json d;
    d["objective"] = s.objective;
    d["evaluations"] = s.evaluations;
    d["pd_failures"] = s.pd_failures;
    d["wall_seconds"] = s.wall_seconds;
    if (s.kind == EstimatorKind::qbe) {
        d["accept_rate"] = s.accept_rate;
        d["mc_se"] = vec_json(s.mc_se);
        d["modified"] = s.modified;
        if (s.proposal_scale_used.size()) d["proposal_scale"] = vec_json(s.proposal_scale_used);
    }
    json out;
    out["block"] = s.block;
    out["kind"] = std::string(1, static_cast<char>(s.kind));
    out["estimate"] = vec_json(s.estimate);
    out["diagnostics"] = d;
    return out;
}

} // namespace

std::string report_to_json(const AdaptiveReport& rep, const std::string& model_name) {
    json j;

    json cfg;
    cfg["model"] = model_name;
    cfg["n"] = rep.n;
    cfg["h"] = rep.h;
    cfg["design_regime_ok"] = rep.design_regime_ok;
    cfg["scheme"] = rep.options.scheme.str();
    cfg["qmle_budget"] = rep.options.qmle_budget;
    cfg["mh_length"] = rep.options.mh_length;
    cfg["mh_burn_in_fraction"] = rep.options.mh_burn_in_fraction;
    cfg["mh_proposal_frac"] = rep.options.mh_proposal_frac;
    cfg["mh_adapt"] = rep.options.mh_adapt;
    cfg["warm_start"] = rep.options.warm_start;
    cfg["warm_budget"] = rep.options.warm_budget;
    cfg["quad_cross_grid"] = rep.options.quad_cross_grid;
    cfg["ci_level"] = rep.options.ci_level;

    json seeds;
    seeds["base"] = rep.options.seed;
    json stage_seeds = json::array();
    for (int s = 1; s <= 4; ++s)
        stage_seeds.push_back(derive_seed(rep.options.seed, 1000u + static_cast<unsigned>(s)));
    seeds["stages"] = stage_seeds;

    j["meta"] = {{"version", kVersion}, {"config", cfg}, {"seeds", seeds}};

    json stages = json::array();
    for (const auto& s : rep.stages) stages.push_back(stage_json(s));
    if (rep.quad_cross_check) stages.push_back(stage_json(*rep.quad_cross_check));
    j["stages"] = stages;

    j["final"] = {{"theta1", vec_json(rep.final_estimate.theta1)},
                  {"theta2", vec_json(rep.final_estimate.theta2)},
                  {"theta3", vec_json(rep.final_estimate.theta3)}};

    json gam;
    gam["ok"] = rep.gammas_ok;
    if (rep.gammas_ok) {
        gam["gamma1_init"] = mat_json(rep.gammas.gamma1_init);
        gam["gamma11"] = mat_json(rep.gammas.gamma11);
        gam["gamma22"] = mat_json(rep.gammas.gamma22);
        gam["gamma33"] = mat_json(rep.gammas.gamma33);
    } else {
        gam["error"] = rep.gammas_error;
    }
    j["gammas"] = gam;

    json cis = json::object();
    for (const auto& ci : rep.cis) {
        cis[ci.block].push_back({{"coord", ci.coord + 1},
                                 {"estimate", ci.estimate},
                                 {"half_width", ci.half_width},
                                 {"lo", ci.lo},
                                 {"hi", ci.hi}});
    }
    j["cis"] = cis;

    return j.dump(2) + "\n";
}

void write_report_json(const std::string& file, const AdaptiveReport& report,
                       const std::string& model_name) {
    std::ofstream os(file);
    if (!os) throw Error("cannot open '" + file + "' for writing");
    os << report_to_json(report, model_name);
}

} // namespace hypoql
