#ifndef HETCGGM_TUNING_HPP
#define HETCGGM_TUNING_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/em.hpp"
#include "hetcggm/likelihood.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

// Hannan-Quinn criterion and the (lambda1, lambda2, lambda3) grid
// search. Grid points are fitted independently with derived seeds, so
// the search result does not depend on the worker count.

namespace hetcggm {

/// Degrees of freedom of one merged group: nonzero gamma entries plus
/// nonzero theta diagonal entries plus nonzero upper-triangle
/// off-diagonal theta entries (symmetric pairs are tied, counted once).
template <typename Scalar>
Index count_df(const GroupParams<Scalar>& g) {
    Index df = 0;
    for (Index j = 0; j < g.gamma.rows(); ++j)
        for (Index m = 0; m < g.gamma.cols(); ++m)
            if (g.gamma(j, m) != 0) ++df;
    for (Index j = 0; j < g.theta.rows(); ++j)
        if (g.theta(j, j) != 0) ++df;
    for (Index j = 0; j < g.theta.rows(); ++j)
        for (Index m = j + 1; m < g.theta.cols(); ++m)
            if (g.theta(j, m) != 0) ++df;
    return df;
}

/// Total mixture log-likelihood of the merged fit (not the mean).
template <typename Scalar>
Scalar merged_loglik_total(const Dataset<Scalar>& ds, const FitResult<Scalar>& fr) {
    MixtureState<Scalar> st;
    st.groups = fr.merged_groups;
    st.pi = fr.merged_pi;
    return mixture_loglik_mean(ds, st) * ds.n;
}

/// HQC = -2 sum_i log[sum_k pi_k f_k(y_i; x_i)] + log(log n) sum_k df_k,
/// over the merged groups. Rejects n <= 3 (log log undefined/negative).
template <typename Scalar>
Scalar hqc(const Dataset<Scalar>& ds, const FitResult<Scalar>& fr) {
    if (ds.n <= 3) throw std::invalid_argument("hqc: requires n > 3");
    Index df = 0;
    for (const auto& g : fr.merged_groups) df += count_df(g);
    const Scalar loglog_n = std::log(std::log(Scalar(ds.n)));
    return -2 * merged_loglik_total(ds, fr) + loglog_n * Scalar(df);
}

/// fit() plus HQC scoring (NaN when n <= 3, where HQC is undefined).
template <typename Scalar>
FitResult<Scalar> fit_scored(const Dataset<Scalar>& ds, const Hyperparams<Scalar>& hp,
                             std::uint64_t seed) {
    FitResult<Scalar> fr = fit(ds, hp, seed);
    if (ds.n > 3) fr.hqc = hqc(ds, fr);
    return fr;
}

template <typename Scalar = double>
struct LambdaTriple {
    Scalar lambda1 = 0, lambda2 = 0, lambda3 = 0;
};

template <typename Scalar = double>
struct GridPointRecord {
    LambdaTriple<Scalar> lambda;
    Scalar hqc = std::numeric_limits<Scalar>::quiet_NaN();
    int k_hat = 0;
    Index df = 0;
    Scalar loglik = std::numeric_limits<Scalar>::quiet_NaN();
    bool failed = false;
    std::string error;
};

template <typename Scalar = double>
struct GridSearchResult {
    FitResult<Scalar> best;
    LambdaTriple<Scalar> best_lambda;
    std::vector<GridPointRecord<Scalar>> table;
};

/// Geometric sequence of `count` points from lo to hi (inclusive).
template <typename Scalar>
std::vector<Scalar> geometric_span(Scalar lo, Scalar hi, int count) {
    if (count < 1) throw std::invalid_argument("geometric_span: count must be >= 1");
    std::vector<Scalar> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const Scalar step = std::pow(hi / lo, Scalar(1) / Scalar(count - 1));
    Scalar v = lo;
    for (int i = 0; i < count; ++i, v *= step) out[i] = v;
    return out;
}

/// Default grid: lambda1, lambda2 over 8 geometric points in
/// [0.01, 1] * s and lambda3 over 5 geometric points in [0.1, 5] * s,
/// s = sqrt(log(p+q)/n).
template <typename Scalar>
std::vector<LambdaTriple<Scalar>> default_grid(Index p, Index q, Index n) {
    const Scalar s = std::sqrt(std::log(Scalar(p + q)) / Scalar(n));
    const auto g12 = geometric_span<Scalar>(Scalar(0.01) * s, s, 8);
    const auto g3 = geometric_span<Scalar>(Scalar(0.1) * s, Scalar(5) * s, 5);
    std::vector<LambdaTriple<Scalar>> grid;
    grid.reserve(g12.size() * g12.size() * g3.size());
    for (Scalar l1 : g12)
        for (Scalar l2 : g12)
            for (Scalar l3 : g3) grid.push_back({l1, l2, l3});
    return grid;
}

/// Fits every grid point (parallel across points, seeds derived as
/// seed + index) and returns the HQC argmin. Ties prefer larger
/// lambda3, then lambda1, then lambda2. Throws only when every point
/// failed, with the per-point diagnostics aggregated.
template <typename Scalar>
GridSearchResult<Scalar> grid_search(const Dataset<Scalar>& ds,
                                     const std::vector<LambdaTriple<Scalar>>& grid,
                                     const Hyperparams<Scalar>& hp_base, std::uint64_t seed,
                                     int threads = 1) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    const std::size_t npts = grid.size();
    std::vector<GridPointRecord<Scalar>> table(npts);
    std::vector<FitResult<Scalar>> fits(npts);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= npts) return;
            Hyperparams<Scalar> hp = hp_base;
            hp.lambda1 = grid[i].lambda1;
            hp.lambda2 = grid[i].lambda2;
            hp.lambda3 = grid[i].lambda3;
            table[i].lambda = grid[i];
            try {
                fits[i] = fit_scored(ds, hp, seed + static_cast<std::uint64_t>(i));
                table[i].hqc = fits[i].hqc;
                table[i].k_hat = fits[i].k_hat;
                table[i].loglik = merged_loglik_total(ds, fits[i]);
                Index df = 0;
                for (const auto& g : fits[i].merged_groups) df += count_df(g);
                table[i].df = df;
            } catch (const std::exception& e) {
                table[i].failed = true;
                table[i].error = e.what();
            }
        }
    };
    const int nw = std::max(1, threads);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::size_t best = npts;
    for (std::size_t i = 0; i < npts; ++i) {
        if (table[i].failed || !std::isfinite(table[i].hqc)) continue;
        if (best == npts) {
            best = i;
            continue;
        }
        const auto& a = table[i];
        const auto& b = table[best];
        bool better = a.hqc < b.hqc;
        if (a.hqc == b.hqc) {
            const std::array<Scalar, 3> ka{a.lambda.lambda3, a.lambda.lambda1, a.lambda.lambda2};
            const std::array<Scalar, 3> kb{b.lambda.lambda3, b.lambda.lambda1, b.lambda.lambda2};
            better = ka > kb;  // prefer sparser/more fused
        }
        if (better) best = i;
    }
    if (best == npts) {
        std::string msg = "grid_search: all grid points failed:";
        for (std::size_t i = 0; i < npts; ++i)
            msg += "\n  point " + std::to_string(i) + ": " + table[i].error;
        throw std::runtime_error(msg);
    }

    GridSearchResult<Scalar> out;
    out.best = fits[best];
    out.best_lambda = grid[best];
    out.table = std::move(table);
    return out;
}

}  // namespace hetcggm

#endif  // HETCGGM_TUNING_HPP
