#include "hypoql/mc.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "hypoql/rng.hpp"

namespace hypoql {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void accumulate(std::vector<SummaryRow>& out, const std::string& name,
                const std::vector<ReplicateRow>& rows, const Vec ReplicateRow::*member) {
    long n_ok = 0;
    int dim = 0;
    for (const auto& r : rows) {
        if (r.ok && (r.*member).size()) {
            dim = static_cast<int>((r.*member).size());
            ++n_ok;
        }
    }
    if (dim == 0) return;
    for (int k = 0; k < dim; ++k) {
        double mean = 0.0;
        for (const auto& r : rows)
            if (r.ok && (r.*member).size()) mean += (r.*member)[k];
        mean /= static_cast<double>(n_ok);
        double ss = 0.0;
        for (const auto& r : rows)
            if (r.ok && (r.*member).size()) {
                double dlt = (r.*member)[k] - mean;
                ss += dlt * dlt;
            }
        SummaryRow s;
        s.estimator = name;
        s.coord = k;
        s.mean = mean;
        s.sd = n_ok > 1 ? std::sqrt(ss / static_cast<double>(n_ok - 1)) : 0.0;
        s.n_ok = n_ok;
        out.push_back(s);
    }
}

} // namespace

double MCResult::failure_fraction() const {
    if (rows.empty()) return 0.0;
    long failed = 0;
    for (const auto& r : rows)
        if (!r.ok) ++failed;
    return static_cast<double>(failed) / static_cast<double>(rows.size());
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows) {
    std::vector<SummaryRow> out;
    accumulate(out, "theta1_initial", rows, &ReplicateRow::th1_init);
    accumulate(out, "theta1_initial_quad", rows, &ReplicateRow::th1_init_quad);
    accumulate(out, "theta2", rows, &ReplicateRow::th2);
    accumulate(out, "theta3", rows, &ReplicateRow::th3);
    accumulate(out, "theta1", rows, &ReplicateRow::th1_impr);
    return out;
}

MCResult run_mc(const MCConfig& config, const ModelSpec* model_override) {
    const ModelSpec model = model_override ? *model_override : model_by_name(config.model_name);
    config.validate(model);

    MCResult result;
    result.rows.resize(config.replicates);

    int threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    threads = static_cast<int>(std::min<long>(threads, config.replicates));

    std::atomic<long> next{0};
    auto worker = [&]() {
        while (true) {
            long k = next.fetch_add(1);
            if (k >= config.replicates) return;
            ReplicateRow& row = result.rows[k];
            row.replicate = k;
            row.seed = derive_seed(config.base_seed, static_cast<std::uint64_t>(k));
            try {
                SamplingDesign design = config.design;
                design.seed = derive_seed(row.seed, 1); // simulation stream
                SamplePath path = simulate_path(model, config.theta_star, design);

                EstimateOptions opt = config.options;
                opt.seed = derive_seed(row.seed, 2); // estimation stream
                AdaptiveReport rep = run_adaptive(path, model, opt);

                row.th1_init = rep.stages[0].estimate;
                row.th2 = rep.stages[1].estimate;
                row.th3 = rep.stages[2].estimate;
                row.th1_impr = rep.stages[3].estimate;
                if (rep.quad_cross_check) row.th1_init_quad = rep.quad_cross_check->estimate;
                row.ok = true;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    result.summary = summarize(result.rows);

    if (!config.out_rows.empty()) write_mc_rows_csv(config.out_rows, result);
    if (!config.out_summary.empty()) write_mc_summary_csv(config.out_summary, result);

    if (result.failure_fraction() > 0.05) {
        long failed = 0;
        std::string first;
        for (const auto& r : result.rows)
            if (!r.ok) {
                ++failed;
                if (first.empty()) first = r.error;
            }
        throw TooManyFailuresError(std::to_string(failed) + "/" +
                                   std::to_string(config.replicates) +
                                   " replicates failed (first: " + first + ")");
    }
    return result;
}

namespace {

void write_vec_cells(std::ostream& os, const Vec& v, int dim) {
    for (int k = 0; k < dim; ++k) {
        os << ",";
        if (v.size()) os << fmt17(v[k]);
    }
}

} // namespace

void write_mc_rows_csv(const std::string& file, const MCResult& result) {
    std::ofstream os(file);
    if (!os) throw Error("cannot open '" + file + "' for writing");

    // column dimensions from the first successful row
    int p1 = 0, p2 = 0, p3 = 0;
    bool quad = false;
    for (const auto& r : result.rows)
        if (r.ok) {
            p1 = static_cast<int>(r.th1_init.size());
            p2 = static_cast<int>(r.th2.size());
            p3 = static_cast<int>(r.th3.size());
            quad = r.th1_init_quad.size() > 0;
            break;
        }

    os << "replicate,seed,status,error";
    for (int k = 1; k <= p1; ++k) os << ",th1_init_" << k;
    if (quad)
        for (int k = 1; k <= p1; ++k) os << ",th1_init_quad_" << k;
    for (int k = 1; k <= p2; ++k) os << ",th2_" << k;
    for (int k = 1; k <= p3; ++k) os << ",th3_" << k;
    for (int k = 1; k <= p1; ++k) os << ",th1_" << k;
    os << "\n";

    for (const auto& r : result.rows) {
        std::string err = r.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        os << r.replicate << "," << r.seed << "," << (r.ok ? "ok" : "failed") << "," << err;
        write_vec_cells(os, r.th1_init, p1);
        if (quad) write_vec_cells(os, r.th1_init_quad, p1);
        write_vec_cells(os, r.th2, p2);
        write_vec_cells(os, r.th3, p3);
        write_vec_cells(os, r.th1_impr, p1);
        os << "\n";
    }
}

void write_mc_summary_csv(const std::string& file, const MCResult& result) {
    std::ofstream os(file);
    if (!os) throw Error("cannot open '" + file + "' for writing");
    os << "estimator,coord,mean,sd,n_ok\n";
    for (const auto& s : result.summary)
        os << s.estimator << "," << (s.coord + 1) << "," << fmt17(s.mean) << "," << fmt17(s.sd)
           << "," << s.n_ok << "\n";
}

std::vector<ReplicateRow> read_mc_rows_csv(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw Error("cannot open '" + file + "' for reading");
    std::string line;
    if (!std::getline(is, line)) throw Error("empty rows file: " + file);

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto count_prefix = [&header](const std::string& p) {
        int n = 0;
        for (const auto& h : header)
            if (h.rfind(p, 0) == 0 && h.size() > p.size() &&
                h.find('_', p.size()) == std::string::npos)
                ++n;
        return n;
    };
    int p1 = count_prefix("th1_init_");
    int pq = count_prefix("th1_init_quad_");
    int p2 = count_prefix("th2_");
    int p3 = count_prefix("th3_");
    int p1i = count_prefix("th1_");

    std::vector<ReplicateRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < header.size()) cells.push_back("");

        ReplicateRow r;
        std::size_t i = 0;
        r.replicate = std::strtol(cells[i++].c_str(), nullptr, 10);
        r.seed = std::strtoull(cells[i++].c_str(), nullptr, 10);
        r.ok = cells[i++] == "ok";
        r.error = cells[i++];
        auto take = [&cells, &i](int dim) {
            Vec v(dim);
            bool any = false;
            for (int k = 0; k < dim; ++k) {
                const std::string& c = cells[i++];
                if (!c.empty()) {
                    v[k] = std::strtod(c.c_str(), nullptr);
                    any = true;
                }
            }
            return any ? v : Vec();
        };
        r.th1_init = take(p1);
        if (pq) r.th1_init_quad = take(pq);
        r.th2 = take(p2);
        r.th3 = take(p3);
        r.th1_impr = take(p1i);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace hypoql
