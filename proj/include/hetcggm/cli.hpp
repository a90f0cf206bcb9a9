#ifndef HETCGGM_CLI_HPP
#define HETCGGM_CLI_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/tuning.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Command implementations behind the CLI front end. Each runner
// throws on error and returns 0 on success; non-convergence is a
// warning recorded in result.json, never a failure.

namespace hetcggm::cli {

/// --threads fallback chain: explicit value, HETCGGM_THREADS, then
/// hardware concurrency.
int resolve_threads(int requested);

struct SimulateOptions {
    std::string setting = "s1";
    Index p = 0, q = 0;
    std::vector<Index> sizes;
    std::uint64_t seed = 0;
    std::string out_dir;
};
int run_simulate(const SimulateOptions& opt);

struct FitOptions {
    std::string y_path, x_path;
    std::string config_path;  // optional JSON overriding Hyperparams fields
    std::string out_dir;
    int k = 1;
    double lambda1 = 0, lambda2 = 0, lambda3 = 0;
    std::uint64_t seed = 0;
};
int run_fit(const FitOptions& opt);

struct GridOptions {
    std::string grid1, grid2, grid3;  // "lo:hi:count", geometric
    std::string grid_file;            // JSON list of [l1, l2, l3]
};
std::vector<LambdaTriple<double>> build_grid(const GridOptions& g, Index p, Index q, Index n);

struct TuneOptions {
    std::string y_path, x_path;
    std::string config_path;
    std::string out_dir;
    int k = 1;
    std::uint64_t seed = 0;
    GridOptions grid;
    int threads = 0;  // 0 = resolve automatically
};
int run_tune(const TuneOptions& opt);

struct EvaluateOptions {
    std::string result_path, truth_path, labels_path;
    std::string out_path = "metrics.json";
};
int run_evaluate(const EvaluateOptions& opt);

struct BenchmarkOptions {
    std::string setting = "s1";
    Index p = 0, q = 0;
    std::vector<Index> sizes;
    int replicates = 0;
    std::uint64_t seed = 0;
    GridOptions grid;
    std::string config_path;
    std::string out_dir;
    int k = 6;
    int threads = 0;
};
int run_benchmark(const BenchmarkOptions& opt);

/// Hyperparams from defaults, then config-file overrides (unknown
/// keys rejected).
Hyperparams<double> load_hyperparams(const std::string& config_path);

}  // namespace hetcggm::cli

#endif  // HETCGGM_CLI_HPP
