#include "hfde/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace hfde {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json param_json(const ParamPoint& p) { return json{{"alpha", p.alpha}, {"beta", p.beta}}; }

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    ExperimentConfig c;
    if (j.contains("model")) {
        c.model.name = j["model"].value("name", "ou");
        if (j["model"].contains("fixed") && j["model"]["fixed"].contains("m0"))
            c.model.m0 = j["model"]["fixed"]["m0"].get<double>();
    }
    if (j.contains("theta0"))
        c.theta0 = ParamPoint{j["theta0"].value("alpha", 1.0), j["theta0"].value("beta", 1.0)};
    c.estimator = j.value("estimator", c.estimator);
    if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        c.sampling = SamplingRule(s.value("c", 1.0), s.value("rho", 0.6));
        if (s.contains("n")) c.n = s["n"].get<std::size_t>();
        if (s.contains("n_list")) c.n_list = s["n_list"].get<std::vector<std::size_t>>();
    }
    c.replications = j.value("replications", c.replications);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.scheme = j.value("scheme", c.scheme);
    c.substeps = j.value("substeps", c.substeps);
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        if (s.contains("start") && s["start"].is_array())
            c.start = ParamPoint{s["start"][0].get<double>(), s["start"][1].get<double>()};
        c.multistart = s.value("multistart", c.multistart);
        c.tol_g = s.value("tol_g", c.tol_g);
        c.max_iter = s.value("max_iter", c.max_iter);
    }
    c.workers = j.value("workers", c.workers);
    c.out_dir = j.value("out_dir", c.out_dir);

    if (c.replications < 1) throw ConfigError("config: replications must be >= 1");
    if (!c.n_list.empty())
        for (std::size_t i = 1; i < c.n_list.size(); ++i)
            if (c.n_list[i] <= c.n_list[i - 1])
                throw ConfigError("config: n_list must be strictly increasing");
    return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["model"] = {{"name", model.name}, {"fixed", json::object()}};
    if (model.name == "cir") j["model"]["fixed"]["m0"] = model.m0;
    j["theta0"] = param_json(theta0);
    j["estimator"] = estimator;
    j["sampling"] = {{"c", sampling.c}, {"rho", sampling.rho}, {"n", n}};
    if (!n_list.empty()) j["sampling"]["n_list"] = n_list;
    j["replications"] = replications;
    j["master_seed"] = master_seed;
    j["scheme"] = scheme;
    j["substeps"] = substeps;
    j["solver"] = {{"start", {start.alpha, start.beta}},
                   {"multistart", multistart},
                   {"tol_g", tol_g},
                   {"max_iter", max_iter}};
    // workers and out_dir are execution parameters, not experiment identity;
    // leaving them out keeps summaries byte-identical across worker counts
    return j.dump(2);
}

MomentSummary summarize(const std::vector<ReplicationRecord>& records) {
    MomentSummary s;
    s.m_total = static_cast<int>(records.size());
    std::vector<double> ea, eb;
    for (const auto& r : records) {
        if (!r.converged) continue;
        ea.push_back(r.std_err_alpha_scaled);
        eb.push_back(r.std_err_beta_scaled);
    }
    s.m_converged = static_cast<int>(ea.size());
    if (s.m_converged < 2) return s;

    const double n = static_cast<double>(ea.size());
    auto mean = [n](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        return m / n;
    };
    const double ma = mean(ea), mb = mean(eb);
    double va = 0.0, vb = 0.0, cab = 0.0;
    double s3a = 0.0, s4a = 0.0, s3b = 0.0, s4b = 0.0;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        const double da = ea[i] - ma, db = eb[i] - mb;
        va += da * da;
        vb += db * db;
        cab += da * db;
        s3a += da * da * da;
        s4a += da * da * da * da;
        s3b += db * db * db;
        s4b += db * db * db * db;
    }
    s.var_alpha_scaled = va / (n - 1);
    s.var_beta_scaled = vb / (n - 1);
    const double sda = std::sqrt(va / n), sdb = std::sqrt(vb / n);
    if (va > 0 && vb > 0) s.correlation = (cab / n) / (sda * sdb);
    if (sda > 0) {
        s.skew_alpha = (s3a / n) / (sda * sda * sda);
        s.kurt_alpha = (s4a / n) / (sda * sda * sda * sda) - 3.0;
    }
    if (sdb > 0) {
        s.skew_beta = (s3b / n) / (sdb * sdb * sdb);
        s.kurt_beta = (s4b / n) / (sdb * sdb * sdb * sdb) - 3.0;
    }
    return s;
}

std::string records_csv(const std::vector<ReplicationRecord>& records) {
    std::string out = "rep,seed,converged,alpha_hat,beta_hat,std_err_alpha_scaled,"
                      "std_err_beta_scaled\n";
    for (const auto& r : records) {
        out += std::to_string(r.index);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += r.converged ? '1' : '0';
        out += ',';
        out += fmt_double(r.theta_hat.alpha);
        out += ',';
        out += fmt_double(r.theta_hat.beta);
        out += ',';
        out += r.converged ? fmt_double(r.std_err_alpha_scaled) : "";
        out += ',';
        out += r.converged ? fmt_double(r.std_err_beta_scaled) : "";
        out += '\n';
    }
    return out;
}

namespace {

std::vector<ReplicationRecord> run_replications(const ExperimentConfig& cfg, ModelPtr model,
                                                const EstimatingFunction& ef, std::size_t n,
                                                double delta) {
    std::vector<ReplicationRecord> records(cfg.replications);
    std::atomic<int> next{0};

    SolveSettings base = cfg.multistart ? SolveSettings::defaults(cfg.start)
                                        : SolveSettings{};
    if (!cfg.multistart) base.multistart = {cfg.start};
    base.tol_g = cfg.tol_g;
    base.max_iter = cfg.max_iter;

    auto work = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= cfg.replications) return;
            ReplicationRecord rec;
            rec.index = i;
            rec.seed = cfg.master_seed;
            SimulateOptions opts;
            opts.substeps = cfg.substeps;
            opts.stream = static_cast<std::uint64_t>(i);
            try {
                const SamplePath path =
                    simulate_path(model, cfg.theta0, n, delta, cfg.master_seed, cfg.scheme, opts);
                const Estimate est = solve_estimating_equation(ef, path, base);
                rec.converged = est.converged;
                rec.g_norm = est.g_norm;
                rec.theta_hat = est.theta_hat;
                if (est.converged) {
                    const double nd = static_cast<double>(n) * delta;
                    rec.std_err_alpha_scaled =
                        std::sqrt(nd) * (est.theta_hat.alpha - cfg.theta0.alpha);
                    rec.std_err_beta_scaled = std::sqrt(static_cast<double>(n)) *
                                              (est.theta_hat.beta - cfg.theta0.beta);
                }
            } catch (const std::exception&) {
                rec.converged = false;
            }
            records[static_cast<std::size_t>(i)] = rec;
        }
    };

    int workers = cfg.workers > 0 ? cfg.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, cfg.replications);
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return records;
}

void persist(const MCReport& rep, const std::vector<ReplicationRecord>& records) {
    const std::string dir = rep.config.out_dir;
    {
        std::ofstream csv(dir + "/records.csv", std::ios::binary);
        if (!csv) throw std::runtime_error("run_experiment: cannot write records.csv in " + dir);
        csv << records_csv(records);
    }
    {
        std::ofstream js(dir + "/summary.json", std::ios::binary);
        if (!js) throw std::runtime_error("run_experiment: cannot write summary.json in " + dir);
        js << rep.to_json() << "\n";
    }
}

void fill_theory(MCReport& rep, ModelPtr model, const EstimatingFunction& ef,
                 const ParamPoint& theta0) {
    const AsymptoticsReport th = theoretical_asymptotics(ef, model, theta0, theta0);
    rep.theory_var_alpha = th.cov_rate_optimal(0, 0);
    rep.theory_var_beta = th.cov_rate_optimal(1, 1);
    rep.sigma_alpha = th.sigma_bound(0, 0);
    rep.sigma_beta = th.sigma_bound(1, 1);
    if (rep.moments.var_alpha_scaled)
        rep.ratio_alpha = *rep.moments.var_alpha_scaled / rep.theory_var_alpha;
    if (rep.moments.var_beta_scaled)
        rep.ratio_beta = *rep.moments.var_beta_scaled / rep.theory_var_beta;
}

}  // namespace

MCReport run_experiment(const ExperimentConfig& cfg) {
    ModelPtr model = cfg.model.build();
    const EstimatingFunction ef = catalog_ef(cfg.estimator, model);
    const double delta = sampling_schedule(cfg.sampling, cfg.n);

    auto records = run_replications(cfg, model, ef, cfg.n, delta);

    int failed = 0;
    for (const auto& r : records) failed += r.converged ? 0 : 1;
    const double frac = static_cast<double>(failed) / records.size();
    if (frac > 0.20)
        throw NoConvergenceError("run_experiment: " + std::to_string(failed) + "/" +
                                 std::to_string(records.size()) + " replications failed");
    if (frac > 0.02)
        std::fprintf(stderr, "hfde warning: %d of %zu replications did not converge\n", failed,
                     records.size());

    MCReport rep;
    rep.config = cfg;
    rep.moments = summarize(records);
    fill_theory(rep, model, ef, cfg.theta0);
    persist(rep, records);
    return rep;
}

MCReport rate_scan(const ExperimentConfig& cfg) {
    if (cfg.n_list.size() < 4) throw ConfigError("rate_scan: need at least 4 n values");
    ModelPtr model = cfg.model.build();
    const EstimatingFunction ef = catalog_ef(cfg.estimator, model);

    MCReport rep;
    rep.config = cfg;

    std::vector<ReplicationRecord> all_records;
    std::vector<double> log_n, log_sda, log_sdb;
    for (std::size_t n : cfg.n_list) {
        const double delta = sampling_schedule(cfg.sampling, n);
        auto records = run_replications(cfg, model, ef, n, delta);
        const double nd = static_cast<double>(n) * delta;

        double sa = 0.0, sb = 0.0, ma = 0.0, mb = 0.0;
        int m = 0;
        for (const auto& r : records) {
            if (!r.converged) continue;
            ++m;
            ma += r.theta_hat.alpha;
            mb += r.theta_hat.beta;
        }
        if (m < 2) throw NoConvergenceError("rate_scan: too few converged replications");
        ma /= m;
        mb /= m;
        for (const auto& r : records) {
            if (!r.converged) continue;
            sa += (r.theta_hat.alpha - ma) * (r.theta_hat.alpha - ma);
            sb += (r.theta_hat.beta - mb) * (r.theta_hat.beta - mb);
        }
        RateScanPoint pt;
        pt.n = n;
        pt.delta = delta;
        pt.sd_alpha = std::sqrt(sa / (m - 1));
        pt.sd_beta = std::sqrt(sb / (m - 1));
        pt.m_converged = m;
        rep.scan.push_back(pt);
        log_n.push_back(std::log(static_cast<double>(n)));
        log_sda.push_back(std::log(pt.sd_alpha));
        log_sdb.push_back(std::log(pt.sd_beta));
        (void)nd;
        for (const auto& r : records) all_records.push_back(r);
    }
    rep.scan_slope_alpha = fit_slope(log_n, log_sda);
    rep.scan_slope_beta = fit_slope(log_n, log_sdb);
    rep.moments = summarize(all_records);
    fill_theory(rep, model, ef, cfg.theta0);
    persist(rep, all_records);
    return rep;
}

std::string MCReport::to_json() const {
    json j;
    j["config"] = json::parse(config.to_json());
    j["m_total"] = moments.m_total;
    j["m_converged"] = moments.m_converged;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("var_alpha_scaled", moments.var_alpha_scaled);
    put("var_beta_scaled", moments.var_beta_scaled);
    put("correlation", moments.correlation);
    put("skew_alpha", moments.skew_alpha);
    put("kurt_alpha", moments.kurt_alpha);
    put("skew_beta", moments.skew_beta);
    put("kurt_beta", moments.kurt_beta);
    j["theory"] = {{"var_alpha_rate_optimal", theory_var_alpha},
                   {"var_beta_rate_optimal", theory_var_beta},
                   {"sigma_alpha", sigma_alpha},
                   {"sigma_beta", sigma_beta}};
    put("ratio_alpha", ratio_alpha);
    put("ratio_beta", ratio_beta);
    if (!scan.empty()) {
        json s = json::array();
        for (const auto& p : scan)
            s.push_back({{"n", p.n},
                         {"delta", p.delta},
                         {"sd_alpha", p.sd_alpha},
                         {"sd_beta", p.sd_beta},
                         {"m_converged", p.m_converged}});
        j["scan"] = s;
        if (scan_slope_alpha) j["scan_slope_alpha"] = *scan_slope_alpha;
        if (scan_slope_beta) j["scan_slope_beta"] = *scan_slope_beta;
    }
    return j.dump(2);
}

}  // namespace hfde
