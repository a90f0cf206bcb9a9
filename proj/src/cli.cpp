#include "hetcggm/cli.hpp"

#include "hetcggm/em.hpp"
#include "hetcggm/io.hpp"
#include "hetcggm/metrics.hpp"
#include "hetcggm/simulate.hpp"
#include "hetcggm/tuning.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

namespace hetcggm::cli {

namespace fs = std::filesystem;

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HETCGGM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace {

SimSetting parse_setting(const std::string& s) {
    if (s == "s1" || s == "S1") return SimSetting::S1;
    if (s == "s2" || s == "S2") return SimSetting::S2;
    if (s == "s3" || s == "S3") return SimSetting::S3;
    throw std::invalid_argument("unknown setting '" + s + "' (expected s1, s2 or s3)");
}

std::vector<std::string> numbered_header(const std::string& prefix, Index count) {
    std::vector<std::string> h(count);
    for (Index j = 0; j < count; ++j) h[j] = prefix + std::to_string(j + 1);
    return h;
}

void write_edge_files(const std::string& dir, const FitResult<double>& fr) {
    for (int c = 0; c < fr.k_hat; ++c) {
        const auto& th = fr.merged_groups[c].theta;
        std::string out = "j,m,theta\n";
        for (Index j = 0; j < th.rows(); ++j)
            for (Index m = j + 1; m < th.cols(); ++m)
                if (th(j, m) != 0)
                    out += std::to_string(j) + "," + std::to_string(m) + "," +
                           io::format_double(th(j, m)) + "\n";
        io::write_text(dir + "/edges_" + std::to_string(c) + ".csv", out);
    }
}

void write_result_files(const std::string& dir, const io::FitRecord& rec) {
    fs::create_directories(dir);
    io::write_json_file(dir + "/result.json", io::fit_record_to_json(rec));
    write_edge_files(dir, rec.result);
}

struct ReplicateOutcome {
    bool failed = false;
    std::string error;
    LambdaTriple<double> lambda;
    double rmse_theta = 0, rmse_gamma = 0;
    double tpr_theta = 0, fpr_theta = 0, tpr_gamma = 0, fpr_gamma = 0;
    double ari = 0, rand = 0;
    int k_hat = 0;
};

struct MetricAggregate {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
};

MetricAggregate aggregate(const std::vector<double>& values) {
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    MetricAggregate a;
    if (finite.empty()) return a;
    double sum = 0;
    for (double v : finite) sum += v;
    a.mean = sum / finite.size();
    if (finite.size() == 1) {
        a.sd = 0;
        return a;
    }
    double ss = 0;
    for (double v : finite) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / (finite.size() - 1));
    return a;
}

std::string table_cell(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f(%.3f)", mean, sd);
    return buf;
}

}  // namespace

Hyperparams<double> load_hyperparams(const std::string& config_path) {
    Hyperparams<double> hp;
    if (config_path.empty()) return hp;
    const io::json j = io::read_json_file(config_path);
    for (const auto& [key, value] : j.items()) {
        if (key == "lambda1") hp.lambda1 = value.get<double>();
        else if (key == "lambda2") hp.lambda2 = value.get<double>();
        else if (key == "lambda3") hp.lambda3 = value.get<double>();
        else if (key == "a") hp.a = value.get<double>();
        else if (key == "kappa") hp.kappa = value.get<double>();
        else if (key == "kappa_prime") hp.kappa_prime = value.get<double>();
        else if (key == "K") hp.K = value.get<int>();
        else if (key == "em_tol") hp.em_tol = value.get<double>();
        else if (key == "admm_tol") hp.admm_tol = value.get<double>();
        else if (key == "sama_tol") hp.sama_tol = value.get<double>();
        else if (key == "em_max_iter") hp.em_max_iter = value.get<int>();
        else if (key == "admm_max_iter") hp.admm_max_iter = value.get<int>();
        else if (key == "sama_max_iter") hp.sama_max_iter = value.get<int>();
        else if (key == "lqa_floor") hp.lqa_floor = value.get<double>();
        else if (key == "merge_tol") hp.merge_tol = value.get<double>();
        else if (key == "gamma_sweeps") hp.gamma_sweeps = value.get<int>();
        else throw std::invalid_argument("config: unknown Hyperparams field '" + key + "'");
    }
    return hp;
}

int run_simulate(const SimulateOptions& opt) {
    SimSpec spec;
    spec.setting = parse_setting(opt.setting);
    spec.p = opt.p;
    spec.q = opt.q;
    spec.group_sizes = opt.sizes;
    spec.K0 = static_cast<int>(opt.sizes.size());
    spec.seed = opt.seed;
    spec.validate();

    const GroundTruth<double> truth = gen_truth<double>(spec);
    const Dataset<double> ds = sample_dataset(truth, spec);

    fs::create_directories(opt.out_dir);
    io::write_matrix_csv(opt.out_dir + "/Y.csv", ds.Y, numbered_header("y", ds.p));
    io::write_matrix_csv(opt.out_dir + "/X.csv", ds.X.rightCols(ds.q),
                         numbered_header("x", ds.q));
    io::write_labels_csv(opt.out_dir + "/labels.csv", truth.labels);
    io::write_json_file(opt.out_dir + "/truth.json", io::truth_to_json(truth, spec.p, spec.q));
    io::json manifest{{"format_version", "1"}, {"setting", opt.setting},
                      {"p", spec.p},           {"q", spec.q},
                      {"sizes", spec.group_sizes}, {"seed", spec.seed},
                      {"k0", spec.K0}};
    io::write_json_file(opt.out_dir + "/manifest.json", manifest);
    return 0;
}

namespace {

Dataset<double> load_dataset(const std::string& y_path, const std::string& x_path) {
    const Matrix<double> Y = io::read_matrix_csv(y_path);
    const Matrix<double> X = io::read_matrix_csv(x_path);
    return validate_dataset(Y, X);
}

io::FitRecord make_record(const Dataset<double>& ds, const Hyperparams<double>& hp,
                          std::uint64_t seed, const FitResult<double>& fr, double wall_sec) {
    io::FitRecord rec;
    rec.result = fr;
    rec.p = ds.p;
    rec.q = ds.q;
    rec.n = ds.n;
    rec.k = hp.K;
    rec.lambda1 = hp.lambda1;
    rec.lambda2 = hp.lambda2;
    rec.lambda3 = hp.lambda3;
    rec.seed = seed;
    rec.wall_time_sec = wall_sec;
    if (!fr.em_converged)
        rec.warnings.push_back("EM did not converge within em_max_iter");
    if (!fr.admm_converged)
        rec.warnings.push_back("ADMM hit its iteration cap in at least one M-step");
    return rec;
}

}  // namespace

int run_fit(const FitOptions& opt) {
    if (opt.k < 1) throw std::invalid_argument("fit: --k must be >= 1");
    const Dataset<double> ds = load_dataset(opt.y_path, opt.x_path);
    Hyperparams<double> hp = load_hyperparams(opt.config_path);
    hp.K = opt.k;
    hp.lambda1 = opt.lambda1;
    hp.lambda2 = opt.lambda2;
    hp.lambda3 = opt.lambda3;

    const auto t0 = std::chrono::steady_clock::now();
    const FitResult<double> fr = fit_scored(ds, hp, opt.seed);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const io::FitRecord rec = make_record(ds, hp, opt.seed, fr, wall);
    write_result_files(opt.out_dir, rec);
    for (const auto& w : rec.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

std::vector<LambdaTriple<double>> build_grid(const GridOptions& g, Index p, Index q, Index n) {
    if (!g.grid_file.empty()) {
        const io::json j = io::read_json_file(g.grid_file);
        std::vector<LambdaTriple<double>> grid;
        for (const auto& row : j) {
            if (row.size() != 3)
                throw std::invalid_argument("grid file: each entry must be [l1, l2, l3]");
            grid.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
        }
        if (grid.empty()) throw std::invalid_argument("grid file: empty grid");
        return grid;
    }

    auto parse_span = [](const std::string& s, const char* name) {
        const auto c1 = s.find(':');
        const auto c2 = s.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument(std::string(name) + ": expected lo:hi:count");
        const double lo = std::stod(s.substr(0, c1));
        const double hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
        const int count = std::stoi(s.substr(c2 + 1));
        if (count < 1) throw std::invalid_argument(std::string(name) + ": count must be >= 1");
        return geometric_span(lo, hi, count);
    };

    const double s = std::sqrt(std::log(double(p + q)) / double(n));
    const auto g1 = g.grid1.empty() ? geometric_span(0.01 * s, s, 8) : parse_span(g.grid1, "--grid1");
    const auto g2 = g.grid2.empty() ? geometric_span(0.01 * s, s, 8) : parse_span(g.grid2, "--grid2");
    const auto g3 = g.grid3.empty() ? geometric_span(0.1 * s, 5 * s, 5) : parse_span(g.grid3, "--grid3");
    std::vector<LambdaTriple<double>> grid;
    grid.reserve(g1.size() * g2.size() * g3.size());
    for (double l1 : g1)
        for (double l2 : g2)
            for (double l3 : g3) grid.push_back({l1, l2, l3});
    return grid;
}

namespace {

void write_hqc_table(const std::string& path, const std::vector<GridPointRecord<double>>& table) {
    std::string out = "lambda1,lambda2,lambda3,hqc,k_hat,df,loglik\n";
    for (const auto& row : table) {
        out += io::format_double(row.lambda.lambda1) + "," +
               io::format_double(row.lambda.lambda2) + "," +
               io::format_double(row.lambda.lambda3) + ",";
        if (row.failed) {
            out += "nan,0,0,nan\n";
            continue;
        }
        out += io::format_double(row.hqc) + "," + std::to_string(row.k_hat) + "," +
               std::to_string(row.df) + "," + io::format_double(row.loglik) + "\n";
    }
    io::write_text(path, out);
}

}  // namespace

int run_tune(const TuneOptions& opt) {
    if (opt.k < 1) throw std::invalid_argument("tune: --k must be >= 1");
    const Dataset<double> ds = load_dataset(opt.y_path, opt.x_path);
    Hyperparams<double> hp = load_hyperparams(opt.config_path);
    hp.K = opt.k;

    const auto grid = build_grid(opt.grid, ds.p, ds.q, ds.n);
    const int threads = resolve_threads(opt.threads);

    const auto t0 = std::chrono::steady_clock::now();
    const GridSearchResult<double> gs = grid_search(ds, grid, hp, opt.seed, threads);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(opt.out_dir);
    write_hqc_table(opt.out_dir + "/hqc_table.csv", gs.table);

    Hyperparams<double> hp_best = hp;
    hp_best.lambda1 = gs.best_lambda.lambda1;
    hp_best.lambda2 = gs.best_lambda.lambda2;
    hp_best.lambda3 = gs.best_lambda.lambda3;
    const io::FitRecord rec = make_record(ds, hp_best, opt.seed, gs.best, wall);
    write_result_files(opt.out_dir + "/best", rec);
    for (const auto& w : rec.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int run_evaluate(const EvaluateOptions& opt) {
    const io::FitRecord rec = io::fit_record_from_json(io::read_json_file(opt.result_path));
    Index tp = 0, tq = 0;
    const GroundTruth<double> truth = io::truth_from_json(io::read_json_file(opt.truth_path), &tp, &tq);
    const std::vector<int> labels = io::read_labels_csv(opt.labels_path);

    if (tp != rec.p || tq != rec.q)
        throw std::invalid_argument("evaluate: result and truth dimensions differ");
    if (labels.size() != rec.result.assignment.size())
        throw std::invalid_argument("evaluate: labels length " + std::to_string(labels.size()) +
                                    " does not match assignment length " +
                                    std::to_string(rec.result.assignment.size()));

    const auto& est = rec.result.merged_groups;
    const auto matching = evaluation_matching(est, truth.params);
    const auto [tpr_t, fpr_t] = tpr_fpr_theta(est, truth.params, matching);
    const auto [tpr_g, fpr_g] = tpr_fpr_gamma(est, truth.params, matching);

    io::json out{{"format_version", "1"},
                 {"rmse_theta", rmse_theta(est, truth.params, matching)},
                 {"rmse_gamma", rmse_gamma(est, truth.params, matching)},
                 {"tpr_theta", tpr_t},
                 {"fpr_theta", fpr_t},
                 {"tpr_gamma", tpr_g},
                 {"fpr_gamma", fpr_g},
                 {"ari", adjusted_rand_index(rec.result.assignment, labels)},
                 {"rand_index", rand_index(rec.result.assignment, labels)},
                 {"k_hat", rec.result.k_hat}};
    io::write_json_file(opt.out_path, out);
    return 0;
}

int run_benchmark(const BenchmarkOptions& opt) {
    if (opt.replicates < 1) throw std::invalid_argument("benchmark: --replicates must be >= 1");
    if (opt.k < 1) throw std::invalid_argument("benchmark: --k must be >= 1");

    SimSpec base;
    base.setting = parse_setting(opt.setting);
    base.p = opt.p;
    base.q = opt.q;
    base.group_sizes = opt.sizes;
    base.K0 = static_cast<int>(opt.sizes.size());
    base.validate();

    Hyperparams<double> hp = load_hyperparams(opt.config_path);
    hp.K = opt.k;

    const int threads = resolve_threads(opt.threads);
    const int R = opt.replicates;
    std::vector<ReplicateOutcome> outcomes(R);

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= R) return;
            ReplicateOutcome& oc = outcomes[r];
            try {
                SimSpec spec = base;
                spec.seed = detail::mix_seed(opt.seed, static_cast<std::uint64_t>(r));
                const GroundTruth<double> truth = gen_truth<double>(spec);
                const Dataset<double> ds = sample_dataset(truth, spec);
                const auto grid = build_grid(opt.grid, ds.p, ds.q, ds.n);
                const std::uint64_t fit_seed = detail::mix_seed(spec.seed, 0xf17u);
                const GridSearchResult<double> gs = grid_search(ds, grid, hp, fit_seed, 1);

                const auto& est = gs.best.merged_groups;
                const auto matching = evaluation_matching(est, truth.params);
                oc.lambda = gs.best_lambda;
                oc.rmse_theta = rmse_theta(est, truth.params, matching);
                oc.rmse_gamma = rmse_gamma(est, truth.params, matching);
                std::tie(oc.tpr_theta, oc.fpr_theta) = tpr_fpr_theta(est, truth.params, matching);
                std::tie(oc.tpr_gamma, oc.fpr_gamma) = tpr_fpr_gamma(est, truth.params, matching);
                oc.ari = adjusted_rand_index(gs.best.assignment, truth.labels);
                oc.rand = rand_index(gs.best.assignment, truth.labels);
                oc.k_hat = gs.best.k_hat;
            } catch (const std::exception& e) {
                oc.failed = true;
                oc.error = e.what();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    fs::create_directories(opt.out_dir);

    std::string reps = "replicate,status,lambda1,lambda2,lambda3,rmse_theta,rmse_gamma,"
                       "tpr_theta,fpr_theta,tpr_gamma,fpr_gamma,ari,rand_index,k_hat,error\n";
    for (int r = 0; r < R; ++r) {
        const auto& oc = outcomes[r];
        reps += std::to_string(r) + "," + (oc.failed ? "failed" : "ok") + ",";
        if (oc.failed) {
            reps += ",,,,,,,,,,," + oc.error + "\n";
            continue;
        }
        reps += io::format_double(oc.lambda.lambda1) + "," + io::format_double(oc.lambda.lambda2) +
                "," + io::format_double(oc.lambda.lambda3) + "," +
                io::format_double(oc.rmse_theta) + "," + io::format_double(oc.rmse_gamma) + "," +
                io::format_double(oc.tpr_theta) + "," + io::format_double(oc.fpr_theta) + "," +
                io::format_double(oc.tpr_gamma) + "," + io::format_double(oc.fpr_gamma) + "," +
                io::format_double(oc.ari) + "," + io::format_double(oc.rand) + "," +
                std::to_string(oc.k_hat) + ",\n";
    }
    io::write_text(opt.out_dir + "/replicates.csv", reps);

    const auto metric_values = [&](auto getter) {
        std::vector<double> v;
        for (const auto& oc : outcomes)
            if (!oc.failed) v.push_back(getter(oc));
        return v;
    };
    struct Row {
        const char* name;
        std::vector<double> values;
    };
    const std::vector<Row> rows = {
        {"rmse_theta", metric_values([](const ReplicateOutcome& o) { return o.rmse_theta; })},
        {"rmse_gamma", metric_values([](const ReplicateOutcome& o) { return o.rmse_gamma; })},
        {"tpr_theta", metric_values([](const ReplicateOutcome& o) { return o.tpr_theta; })},
        {"fpr_theta", metric_values([](const ReplicateOutcome& o) { return o.fpr_theta; })},
        {"tpr_gamma", metric_values([](const ReplicateOutcome& o) { return o.tpr_gamma; })},
        {"fpr_gamma", metric_values([](const ReplicateOutcome& o) { return o.fpr_gamma; })},
        {"ari", metric_values([](const ReplicateOutcome& o) { return o.ari; })},
        {"rand_index", metric_values([](const ReplicateOutcome& o) { return o.rand; })},
        {"k_hat", metric_values([](const ReplicateOutcome& o) { return double(o.k_hat); })},
    };
    int failed = 0;
    for (const auto& oc : outcomes) failed += oc.failed ? 1 : 0;

    std::string out = "metric,mean,sd,cell\n";
    for (const auto& row : rows) {
        const MetricAggregate a = aggregate(row.values);
        out += std::string(row.name) + "," + io::format_double(a.mean) + "," +
               io::format_double(a.sd) + "," + table_cell(a.mean, a.sd) + "\n";
    }
    out += "replicates_ok," + std::to_string(R - failed) + ",0," +
           table_cell(double(R - failed), 0) + "\n";
    out += "replicates_failed," + std::to_string(failed) + ",0," + table_cell(double(failed), 0) +
           "\n";
    io::write_text(opt.out_dir + "/summary.csv", out);

    if (failed > 0)
        std::cerr << "warning: " << failed << " of " << R << " replicates failed\n";
    return 0;
}

}  // namespace hetcggm::cli
