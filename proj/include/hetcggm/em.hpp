#ifndef HETCGGM_EM_HPP
#define HETCGGM_EM_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/gamma_update.hpp"
#include "hetcggm/likelihood.hpp"
#include "hetcggm/penalty.hpp"
#include "hetcggm/theta_update.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

// EM orchestration: seeded k-means/ridge initialization, the outer
// loop (E-step, pi update, Gamma LQA sweep, Theta ADMM), convergence
// detection, and post-hoc merging of fused groups.

namespace hetcggm {

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer over seed ^ rotated salt
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

template <typename Scalar>
Matrix<Scalar> standardize_columns(const Matrix<Scalar>& a) {
    Matrix<Scalar> z = a;
    for (Index j = 0; j < z.cols(); ++j) {
        const Scalar mean = z.col(j).mean();
        z.col(j).array() -= mean;
        const Scalar sd = std::sqrt(z.col(j).squaredNorm() / z.rows());
        if (sd > Scalar(1e-12)) z.col(j) /= sd;  // constant columns stay centered at 0
    }
    return z;
}

template <typename Scalar>
std::vector<int> kmeans_once(const Matrix<Scalar>& z, int K, std::mt19937_64& rng, Scalar* sse_out) {
    const Index n = z.rows();
    Matrix<Scalar> centers(K, z.cols());
    // k-means++ seeding
    std::uniform_int_distribution<Index> first(0, n - 1);
    centers.row(0) = z.row(first(rng));
    Vector<Scalar> d2 = (z.rowwise() - centers.row(0)).rowwise().squaredNorm();
    std::uniform_real_distribution<Scalar> unif(0, 1);
    for (int c = 1; c < K; ++c) {
        const Scalar total = d2.sum();
        Index pick = 0;
        if (total > 0) {
            const Scalar target = unif(rng) * total;
            Scalar acc = 0;
            for (Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) { pick = i; break; }
            }
        } else {
            pick = first(rng);
        }
        centers.row(c) = z.row(pick);
        d2 = d2.cwiseMin((z.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> labels(n, -1);
    Vector<Scalar> dist(n);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            int best = 0;
            Scalar best_d = (z.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < K; ++c) {
                const Scalar d = (z.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) { best_d = d; best = c; }
            }
            dist[i] = best_d;
            if (labels[i] != best) { labels[i] = best; changed = true; }
        }
        std::vector<Index> counts(K, 0);
        for (Index i = 0; i < n; ++i) ++counts[labels[i]];
        for (int c = 0; c < K; ++c) {
            if (counts[c] > 0) continue;
            // empty cluster: move in the farthest sample from a non-singleton cluster
            Index far = -1;
            Scalar far_d = -1;
            for (Index i = 0; i < n; ++i)
                if (counts[labels[i]] > 1 && dist[i] > far_d) { far_d = dist[i]; far = i; }
            --counts[labels[far]];
            labels[far] = c;
            counts[c] = 1;
            changed = true;
        }
        centers.setZero();
        for (Index i = 0; i < n; ++i) centers.row(labels[i]) += z.row(i);
        for (int c = 0; c < K; ++c) centers.row(c) /= Scalar(counts[c]);
        if (!changed) break;
    }
    Scalar sse = 0;
    for (Index i = 0; i < n; ++i) sse += (z.row(i) - centers.row(labels[i])).squaredNorm();
    if (sse_out) *sse_out = sse;
    return labels;
}

template <typename Scalar>
std::vector<int> kmeans(const Matrix<Scalar>& z, int K, std::uint64_t seed, int restarts = 10) {
    std::vector<int> best_labels;
    Scalar best_sse = std::numeric_limits<Scalar>::infinity();
    for (int r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
        Scalar sse = 0;
        std::vector<int> labels = kmeans_once(z, K, rng, &sse);
        if (sse < best_sse) {
            best_sse = sse;
            best_labels = std::move(labels);
        }
    }
    return best_labels;
}

}  // namespace detail

/// Seeded initializer: multi-start k-means on the standardized [Y | X]
/// rows, then per-cluster ridge coefficients (ridge 1e-3), diagonal
/// precision from residual variances (+1e-3), pi from cluster
/// proportions floored at 1/(10K), one-hot responsibilities.
template <typename Scalar>
MixtureState<Scalar> initialize(const Dataset<Scalar>& ds, int K, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("initialize: K must be >= 1");
    if (K > ds.n) throw std::invalid_argument("initialize: K exceeds sample count");

    Matrix<Scalar> z(ds.n, ds.p + ds.q + 1);
    z << ds.Y, ds.X;
    z = detail::standardize_columns(z);
    const std::vector<int> labels =
        K == 1 ? std::vector<int>(ds.n, 0) : detail::kmeans(z, K, seed);

    const Scalar ridge = Scalar(1e-3);
    MixtureState<Scalar> state;
    state.groups.resize(K);
    state.pi.resize(K);
    state.resp = Matrix<Scalar>::Zero(ds.n, K);
    for (int c = 0; c < K; ++c) {
        std::vector<Index> idx;
        for (Index i = 0; i < ds.n; ++i)
            if (labels[i] == c) idx.push_back(i);
        Matrix<Scalar> xc(idx.size(), ds.q + 1), yc(idx.size(), ds.p);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            xc.row(r) = ds.X.row(idx[r]);
            yc.row(r) = ds.Y.row(idx[r]);
        }
        Matrix<Scalar> gram = xc.transpose() * xc +
                              ridge * Matrix<Scalar>::Identity(ds.q + 1, ds.q + 1);
        Matrix<Scalar> gamma_t = gram.ldlt().solve(xc.transpose() * yc);  // (q+1) x p
        auto& g = state.groups[c];
        g.gamma = gamma_t.transpose();
        const Matrix<Scalar> resid = yc - xc * gamma_t;
        Vector<Scalar> var = resid.colwise().squaredNorm().transpose() /
                             Scalar(std::max<std::size_t>(idx.size(), 1));
        g.theta = Matrix<Scalar>::Zero(ds.p, ds.p);
        for (Index j = 0; j < ds.p; ++j) g.theta(j, j) = 1 / (var[j] + ridge);
        state.pi[c] = Scalar(idx.size()) / Scalar(ds.n);
        for (Index i : idx) state.resp(i, c) = 1;
    }
    const Scalar floor = Scalar(1) / Scalar(10 * K);
    for (int c = 0; c < K; ++c) state.pi[c] = std::max(state.pi[c], floor);
    state.pi /= state.pi.sum();
    return state;
}

/// Single-linkage merge of the K fitted groups at the given cut: two
/// groups join when their combined parameter distance is within
/// merge_tol (NaN selects 1e-2 * sqrt(p(q+1)+p^2) * mean|param|,
/// floored at 1e-4). Merged parameters are pi-weighted averages.
template <typename Scalar>
FitResult<Scalar> merge_groups(const MixtureState<Scalar>& state, const Hyperparams<Scalar>& hp) {
    const Index K = state.num_groups();
    const Index p = state.groups[0].theta.rows();
    const Index qp1 = state.groups[0].gamma.cols();

    Scalar cut = hp.merge_tol;
    if (std::isnan(cut)) {
        const Scalar dim = Scalar(p * qp1 + p * p);
        Scalar abs_sum = 0;
        for (const auto& g : state.groups)
            abs_sum += g.gamma.cwiseAbs().sum() + g.theta.cwiseAbs().sum();
        const Scalar mean_abs = abs_sum / (Scalar(K) * dim);
        cut = std::max(Scalar(1e-2) * std::sqrt(dim) * mean_abs, Scalar(1e-4));
    }

    // connected components of the threshold graph = single-linkage cut
    std::vector<Index> comp(K);
    std::iota(comp.begin(), comp.end(), Index(0));
    auto find = [&](Index x) {
        while (comp[x] != x) x = comp[x] = comp[comp[x]];
        return x;
    };
    for (Index l = 0; l < K; ++l)
        for (Index lp = l + 1; lp < K; ++lp)
            if (param_distance(state.groups[l], state.groups[lp]) <= cut) {
                const Index a = find(l), b = find(lp);
                if (a != b) comp[std::max(a, b)] = std::min(a, b);
            }

    std::vector<Index> roots;
    std::vector<int> cluster_of(K);
    for (Index l = 0; l < K; ++l) {
        const Index r = find(l);
        auto it = std::find(roots.begin(), roots.end(), r);
        if (it == roots.end()) {
            roots.push_back(r);
            it = roots.end() - 1;
        }
        cluster_of[l] = static_cast<int>(it - roots.begin());
    }
    const int k_hat = static_cast<int>(roots.size());

    FitResult<Scalar> fr;
    fr.k_hat = k_hat;
    fr.merged_pi = Vector<Scalar>::Zero(k_hat);
    fr.merged_groups.resize(k_hat);
    for (int c = 0; c < k_hat; ++c) {
        auto& g = fr.merged_groups[c];
        g.gamma = Matrix<Scalar>::Zero(p, qp1);
        g.theta = Matrix<Scalar>::Zero(p, p);
    }
    for (Index l = 0; l < K; ++l) {
        const int c = cluster_of[l];
        fr.merged_pi[c] += state.pi[l];
        fr.merged_groups[c].gamma += state.pi[l] * state.groups[l].gamma;
        fr.merged_groups[c].theta += state.pi[l] * state.groups[l].theta;
    }
    for (int c = 0; c < k_hat; ++c) {
        if (fr.merged_pi[c] > 0) {
            fr.merged_groups[c].gamma /= fr.merged_pi[c];
            fr.merged_groups[c].theta /= fr.merged_pi[c];
        } else {
            // zero-mass cluster: plain average of its members
            int cnt = 0;
            fr.merged_groups[c].gamma.setZero();
            fr.merged_groups[c].theta.setZero();
            for (Index l = 0; l < K; ++l)
                if (cluster_of[l] == c) {
                    fr.merged_groups[c].gamma += state.groups[l].gamma;
                    fr.merged_groups[c].theta += state.groups[l].theta;
                    ++cnt;
                }
            fr.merged_groups[c].gamma /= Scalar(cnt);
            fr.merged_groups[c].theta /= Scalar(cnt);
        }
    }

    Matrix<Scalar> merged_resp = Matrix<Scalar>::Zero(state.resp.rows(), k_hat);
    for (Index l = 0; l < K; ++l) merged_resp.col(cluster_of[l]) += state.resp.col(l);
    fr.assignment.resize(merged_resp.rows());
    for (Index i = 0; i < merged_resp.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < k_hat; ++c)
            if (merged_resp(i, c) > merged_resp(i, best)) best = c;
        fr.assignment[i] = best;
    }

    fr.edge_sets.resize(k_hat);
    fr.regulation_sets.resize(k_hat);
    for (int c = 0; c < k_hat; ++c) {
        const auto& g = fr.merged_groups[c];
        for (Index j = 0; j < p; ++j)
            for (Index m = 0; m < p; ++m)
                if (j != m && g.theta(j, m) != 0) fr.edge_sets[c].emplace_back(j, m);
        for (Index j = 0; j < p; ++j)
            for (Index m = 0; m < qp1; ++m)
                if (g.gamma(j, m) != 0) fr.regulation_sets[c].emplace_back(j, m);
    }
    return fr;
}

/// Full EM fit. Outer convergence on the relative combined parameter
/// change max_l (||dGamma|| + ||dTheta||) / (1 + ||Gamma|| + ||Theta||).
/// Components whose effective size drops below 1e-8 n are frozen for
/// the iteration (kept, excluded from that iteration's subproblems).
template <typename Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& ds, const Hyperparams<Scalar>& hp,
                      std::uint64_t seed) {
    hp.validate();
    const Index K = hp.K;
    MixtureState<Scalar> state = initialize(ds, hp.K, seed);

    FitResult<Scalar> fr;
    bool admm_ok = true;
    std::vector<Scalar> trace;
    trace.push_back(penalized_objective(ds, state, hp));
    if (!std::isfinite(trace.back()))
        throw std::runtime_error("fit: non-finite objective at initialization");

    bool converged = false;
    int iterations = 0;
    for (int t = 1; t <= hp.em_max_iter; ++t) {
        iterations = t;
        state.resp = e_step(ds, state);
        state.pi = update_pi(state.resp);

        std::vector<Index> active;
        for (Index l = 0; l < K; ++l)
            if (state.resp.col(l).sum() >= Scalar(1e-8) * ds.n) active.push_back(l);

        const std::vector<GroupParams<Scalar>> prev_groups = state.groups;

        if (!active.empty()) {
            std::vector<GroupParams<Scalar>> sub(active.size());
            std::vector<WeightedMoments<Scalar>> mom(active.size());
            for (std::size_t s = 0; s < active.size(); ++s) {
                sub[s] = state.groups[active[s]];
                mom[s] = weighted_moments(ds, Vector<Scalar>(state.resp.col(active[s])));
            }

            for (int sweep = 0; sweep < hp.gamma_sweeps; ++sweep) {
                LqaWorkspace<Scalar> ws = make_lqa_workspace(ds, sub, mom, hp);
                const std::vector<Matrix<Scalar>> new_gamma = update_gamma_all(ds, ws, hp);
                for (std::size_t s = 0; s < sub.size(); ++s) sub[s].gamma = new_gamma[s];
            }

            AdmmState<Scalar> admm;
            admm.s_gamma.resize(sub.size());
            admm.n_l.resize(sub.size());
            admm.eta = Matrix<Scalar>::Zero(sub.size(), sub.size());
            for (std::size_t s = 0; s < sub.size(); ++s) {
                admm.s_gamma[s] = residual_covariance(mom[s], sub[s].gamma);
                // n_l/(2n) puts the likelihood block on the objective's
                // scale, so the Theta step ascends the same penalized
                // objective the trace records
                admm.n_l[s] = mom[s].n_l / (2 * ds.n);
            }
            for (std::size_t s = 0; s < sub.size(); ++s)
                for (std::size_t sp = s + 1; sp < sub.size(); ++sp)
                    admm.eta(s, sp) = admm.eta(sp, s) =
                        (sub[s].gamma - sub[sp].gamma).squaredNorm();
            ThetaUpdateResult<Scalar> tu = update_theta_all(admm, hp);
            admm_ok = admm_ok && tu.converged;
            for (std::size_t s = 0; s < sub.size(); ++s) sub[s].theta = tu.xi[s];

            for (std::size_t s = 0; s < active.size(); ++s) state.groups[active[s]] = sub[s];
        }

        trace.push_back(penalized_objective(ds, state, hp));
        if (!std::isfinite(trace.back()))
            throw std::runtime_error("fit: non-finite objective at iteration " + std::to_string(t));

        Scalar rel = 0;
        for (Index l = 0; l < K; ++l) {
            const Scalar num = (state.groups[l].gamma - prev_groups[l].gamma).norm() +
                               (state.groups[l].theta - prev_groups[l].theta).norm();
            const Scalar den = 1 + prev_groups[l].gamma.norm() + prev_groups[l].theta.norm();
            rel = std::max(rel, num / den);
        }
        if (rel < hp.em_tol) {
            converged = true;
            break;
        }
    }

    state.resp = e_step(ds, state);  // sync responsibilities with the final parameters

    fr = merge_groups(state, hp);
    fr.objective_trace = trace;
    fr.em_converged = converged;
    fr.admm_converged = admm_ok;
    fr.em_iterations = iterations;
    return fr;
}

}  // namespace hetcggm

#endif  // HETCGGM_EM_HPP
