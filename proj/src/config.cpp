#include "hypoql/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace hypoql {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

double to_number(const std::string& key, const std::string& v) {
    const char* b = v.c_str();
    char* e = nullptr;
    double x = std::strtod(b, &e);
    if (e == b || *e != '\0')
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    return x;
}

long to_integer(const std::string& key, const std::string& v) {
    double x = to_number(key, v);
    long i = static_cast<long>(x);
    if (static_cast<double>(i) != x)
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    return i;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string to_string_val(const std::string& key, const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    throw ConfigError("config key '" + key + "': expected a \"quoted string\", got '" + v + "'");
}

Vec to_vector(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw ConfigError("config key '" + key + "': expected [a, b, ...], got '" + v + "'");
    std::string body = v.substr(1, v.size() - 2);
    std::vector<double> vals;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        vals.push_back(to_number(key, item));
    }
    if (vals.empty()) throw ConfigError("config key '" + key + "': empty array");
    Vec out(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) out[i] = vals[i];
    return out;
}

struct Section {
    const std::map<std::string, std::string>* kv = nullptr;
    std::string name;
    mutable std::set<std::string> seen;

    bool has(const std::string& key) const {
        if (!kv) return false;
        return kv->count(key) > 0;
    }
    std::string get(const std::string& key) const {
        seen.insert(key);
        return kv->at(key);
    }
    void check_no_unknown() const {
        if (!kv) return;
        for (const auto& [k, v] : *kv)
            if (!seen.count(k))
                throw ConfigError("unknown config key '" + name + "." + k + "'");
    }
};

} // namespace

RawConfig parse_raw_config(const std::string& text) {
    RawConfig out;
    std::string section;
    std::istringstream is(text);
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            out[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
        if (!out[section].emplace(key, value).second)
            throw ConfigError("duplicate config key '" + section + "." + key + "'");
    }
    return out;
}

MCConfig parse_mc_config_text(const std::string& text) {
    RawConfig raw = parse_raw_config(text);
    for (const auto& [name, kv] : raw) {
        if (name != "model" && name != "design" && name != "estimators" && name != "mc")
            throw ConfigError("unknown config section '[" + name + "]'");
    }
    auto section = [&raw](const char* name) {
        Section s;
        s.name = name;
        auto it = raw.find(name);
        if (it != raw.end()) s.kv = &it->second;
        return s;
    };

    MCConfig cfg;

    Section model = section("model");
    if (!model.has("name")) throw ConfigError("missing config key 'model.name'");
    cfg.model_name = to_string_val("model.name", model.get("name"));
    if (!model.has("theta1") || !model.has("theta2") || !model.has("theta3"))
        throw ConfigError("missing config keys 'model.theta1/theta2/theta3'");
    cfg.theta_star.theta1 = to_vector("model.theta1", model.get("theta1"));
    cfg.theta_star.theta2 = to_vector("model.theta2", model.get("theta2"));
    cfg.theta_star.theta3 = to_vector("model.theta3", model.get("theta3"));
    model.check_no_unknown();

    Section design = section("design");
    if (design.has("n")) cfg.design.n = to_integer("design.n", design.get("n"));
    if (design.has("h")) cfg.design.h = to_number("design.h", design.get("h"));
    if (design.has("substeps"))
        cfg.design.substeps = static_cast<int>(to_integer("design.substeps", design.get("substeps")));
    if (design.has("burn_in")) cfg.design.burn_in = to_number("design.burn_in", design.get("burn_in"));
    if (design.has("z0")) cfg.design.z0 = to_vector("design.z0", design.get("z0"));
    design.check_no_unknown();

    Section est = section("estimators");
    if (est.has("scheme"))
        cfg.options.scheme = Scheme::parse(to_string_val("estimators.scheme", est.get("scheme")));
    if (est.has("mh_length"))
        cfg.options.mh_length = to_integer("estimators.mh_length", est.get("mh_length"));
    if (est.has("mh_burn_in_fraction"))
        cfg.options.mh_burn_in_fraction =
            to_number("estimators.mh_burn_in_fraction", est.get("mh_burn_in_fraction"));
    if (est.has("mh_proposal_frac"))
        cfg.options.mh_proposal_frac =
            to_number("estimators.mh_proposal_frac", est.get("mh_proposal_frac"));
    if (est.has("mh_adapt"))
        cfg.options.mh_adapt = to_bool("estimators.mh_adapt", est.get("mh_adapt"));
    if (est.has("qmle_budget"))
        cfg.options.qmle_budget = to_integer("estimators.qmle_budget", est.get("qmle_budget"));
    if (est.has("warm_start"))
        cfg.options.warm_start = to_bool("estimators.warm_start", est.get("warm_start"));
    if (est.has("warm_budget"))
        cfg.options.warm_budget = to_integer("estimators.warm_budget", est.get("warm_budget"));
    if (est.has("quad_cross_grid"))
        cfg.options.quad_cross_grid =
            static_cast<int>(to_integer("estimators.quad_cross_grid", est.get("quad_cross_grid")));
    if (est.has("ci_level"))
        cfg.options.ci_level = to_number("estimators.ci_level", est.get("ci_level"));
    est.check_no_unknown();

    Section mc = section("mc");
    if (mc.has("replicates")) cfg.replicates = to_integer("mc.replicates", mc.get("replicates"));
    if (mc.has("base_seed"))
        cfg.base_seed = static_cast<std::uint64_t>(to_integer("mc.base_seed", mc.get("base_seed")));
    if (mc.has("threads"))
        cfg.threads = static_cast<int>(to_integer("mc.threads", mc.get("threads")));
    if (mc.has("out_rows")) cfg.out_rows = to_string_val("mc.out_rows", mc.get("out_rows"));
    if (mc.has("out_summary"))
        cfg.out_summary = to_string_val("mc.out_summary", mc.get("out_summary"));
    mc.check_no_unknown();

    return cfg;
}

MCConfig parse_mc_config_file(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("config file not found: " + file);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_mc_config_text(ss.str());
}

void MCConfig::validate(const ModelSpec& model) const {
    if (replicates < 1) throw ConfigError("mc.replicates must be >= 1");
    design.validate();
    if (!model.theta_in_boxes(theta_star))
        throw ConfigError("model.theta* outside the model's parameter boxes");
    if (theta_star.theta1.size() != model.dims.p1 || theta_star.theta2.size() != model.dims.p2 ||
        theta_star.theta3.size() != model.dims.p3)
        throw ConfigError("model.theta* dimensions do not match the model");
}

} // namespace hypoql
