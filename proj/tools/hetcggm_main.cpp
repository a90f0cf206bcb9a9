#include "hetcggm/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Heterogeneity analysis by mixtures of conditional Gaussian graphical models "
                 "with sparsity and group-fusion penalties"};
    app.require_subcommand(1);

    hetcggm::cli::SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic dataset (settings s1/s2/s3)");
    c_sim->add_option("--setting", sim.setting, "s1, s2 or s3")->required();
    c_sim->add_option("--p", sim.p, "number of responses")->required()->check(CLI::PositiveNumber);
    c_sim->add_option("--q", sim.q, "number of raw regulators")->required()
        ->check(CLI::NonNegativeNumber);
    c_sim->add_option("--sizes", sim.sizes, "group sizes, e.g. 100,100,100")->required()
        ->delimiter(',');
    c_sim->add_option("--seed", sim.seed, "RNG seed")->default_val(0);
    c_sim->add_option("--out", sim.out_dir, "output directory")->required();

    hetcggm::cli::FitOptions fit;
    auto* c_fit = app.add_subcommand("fit", "Fit the mixture at fixed penalty levels");
    c_fit->add_option("--y", fit.y_path, "Y.csv path")->required();
    c_fit->add_option("--x", fit.x_path, "X.csv path (raw regulators, no intercept)")->required();
    c_fit->add_option("--k", fit.k, "group upper bound K")->required()->check(CLI::PositiveNumber);
    c_fit->add_option("--lambda1", fit.lambda1, "theta sparsity level")->required();
    c_fit->add_option("--lambda2", fit.lambda2, "gamma sparsity level")->required();
    c_fit->add_option("--lambda3", fit.lambda3, "fusion level")->required();
    c_fit->add_option("--config", fit.config_path, "JSON overriding Hyperparams fields");
    c_fit->add_option("--seed", fit.seed, "RNG seed")->default_val(0);
    c_fit->add_option("--out", fit.out_dir, "output directory")->required();

    hetcggm::cli::TuneOptions tune;
    auto* c_tune = app.add_subcommand("tune", "Grid search over penalty levels by HQC");
    c_tune->add_option("--y", tune.y_path, "Y.csv path")->required();
    c_tune->add_option("--x", tune.x_path, "X.csv path")->required();
    c_tune->add_option("--k", tune.k, "group upper bound K")->required()->check(CLI::PositiveNumber);
    c_tune->add_option("--grid1", tune.grid.grid1, "lambda1 span lo:hi:count (geometric)");
    c_tune->add_option("--grid2", tune.grid.grid2, "lambda2 span lo:hi:count (geometric)");
    c_tune->add_option("--grid3", tune.grid.grid3, "lambda3 span lo:hi:count (geometric)");
    c_tune->add_option("--grid-file", tune.grid.grid_file, "JSON list of [l1,l2,l3] triples");
    c_tune->add_option("--config", tune.config_path, "JSON overriding Hyperparams fields");
    c_tune->add_option("--seed", tune.seed, "RNG seed")->default_val(0);
    c_tune->add_option("--threads", tune.threads, "worker count (default: HETCGGM_THREADS or all cores)");
    c_tune->add_option("--out", tune.out_dir, "output directory")->required();

    hetcggm::cli::EvaluateOptions ev;
    auto* c_eval = app.add_subcommand("evaluate", "Score a fit against simulation truth");
    c_eval->add_option("--result", ev.result_path, "result.json path")->required();
    c_eval->add_option("--truth", ev.truth_path, "truth.json path")->required();
    c_eval->add_option("--labels", ev.labels_path, "labels.csv path")->required();
    c_eval->add_option("--out", ev.out_path, "metrics.json output path");

    hetcggm::cli::BenchmarkOptions bench;
    auto* c_bench = app.add_subcommand("benchmark", "Replicated simulate -> tune -> evaluate");
    c_bench->add_option("--setting", bench.setting, "s1, s2 or s3")->required();
    c_bench->add_option("--p", bench.p, "number of responses")->required()->check(CLI::PositiveNumber);
    c_bench->add_option("--q", bench.q, "number of raw regulators")->required()
        ->check(CLI::NonNegativeNumber);
    c_bench->add_option("--sizes", bench.sizes, "group sizes")->required()->delimiter(',');
    c_bench->add_option("--replicates", bench.replicates, "replicate count")->required()
        ->check(CLI::PositiveNumber);
    c_bench->add_option("--seed", bench.seed, "RNG seed")->default_val(0);
    c_bench->add_option("--k", bench.k, "group upper bound K")->default_val(6)
        ->check(CLI::PositiveNumber);
    c_bench->add_option("--grid1", bench.grid.grid1, "lambda1 span lo:hi:count");
    c_bench->add_option("--grid2", bench.grid.grid2, "lambda2 span lo:hi:count");
    c_bench->add_option("--grid3", bench.grid.grid3, "lambda3 span lo:hi:count");
    c_bench->add_option("--grid-file", bench.grid.grid_file, "JSON list of [l1,l2,l3] triples");
    c_bench->add_option("--config", bench.config_path, "JSON overriding Hyperparams fields");
    c_bench->add_option("--threads", bench.threads, "worker count");
    c_bench->add_option("--out", bench.out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_sim->parsed()) return hetcggm::cli::run_simulate(sim);
        if (c_fit->parsed()) return hetcggm::cli::run_fit(fit);
        if (c_tune->parsed()) return hetcggm::cli::run_tune(tune);
        if (c_eval->parsed()) return hetcggm::cli::run_evaluate(ev);
        if (c_bench->parsed()) return hetcggm::cli::run_benchmark(bench);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
