#ifndef HETCGGM_SIMULATE_HPP
#define HETCGGM_SIMULATE_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/em.hpp"  // detail::mix_seed

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

// Seeded generators for the three simulation settings: tridiagonal
// precision networks (S1), mutual-nearest-neighbor module networks
// (S2), and S1 truth with categorical regulators (S3).

namespace hetcggm {

enum class SimSetting { S1, S2, S3 };

struct SimSpec {
    SimSetting setting = SimSetting::S1;
    Index p = 0, q = 0;
    std::vector<Index> group_sizes;  // length K0
    std::uint64_t seed = 0;
    int K0 = 3;

    Index total_n() const {
        return std::accumulate(group_sizes.begin(), group_sizes.end(), Index(0));
    }
    void validate() const {
        if (p < 2 || q < 0) throw std::invalid_argument("SimSpec: need p >= 2, q >= 0");
        if (static_cast<int>(group_sizes.size()) != K0)
            throw std::invalid_argument("SimSpec: group_sizes length must equal K0");
        for (Index s : group_sizes)
            if (s < 1) throw std::invalid_argument("SimSpec: group sizes must be >= 1");
        if (setting == SimSetting::S2 && p % 10 != 0)
            throw std::invalid_argument("SimSpec: p must be divisible by 10 for S2");
        if (setting == SimSetting::S2 && K0 != 3)
            throw std::invalid_argument("SimSpec: S2 module layout is defined for K0 = 3");
    }
};

template <typename Scalar = double>
struct GroundTruth {
    std::vector<GroupParams<Scalar>> params;
    std::vector<int> labels;  // length n, seeded shuffle of the group blocks
};

namespace detail {

// Sparse coefficients: each entry independently nonzero with
// probability min(1, 1/q), values from Unif(-1.5,-1) U Unif(1, 1.5).
template <typename Scalar>
Matrix<Scalar> draw_sparse_gamma(Index p, Index q, std::mt19937_64& rng) {
    std::uniform_real_distribution<Scalar> unif(0, 1);
    std::uniform_real_distribution<Scalar> mag(1, Scalar(1.5));
    const Scalar prob = q > 0 ? std::min(Scalar(1), Scalar(1) / Scalar(q)) : Scalar(1);
    Matrix<Scalar> g = Matrix<Scalar>::Zero(p, q + 1);
    for (Index j = 0; j < p; ++j)
        for (Index m = 0; m < q + 1; ++m) {
            if (unif(rng) >= prob) continue;
            const Scalar v = mag(rng);
            g(j, m) = unif(rng) < Scalar(0.5) ? v : -v;
        }
    return g;
}

inline std::vector<int> shuffled_labels(const SimSpec& spec) {
    std::vector<int> labels;
    for (int k = 0; k < spec.K0; ++k)
        labels.insert(labels.end(), spec.group_sizes[k], k);
    std::mt19937_64 rng(mix_seed(spec.seed, 0x5ab5u));
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

// Mutual 2-nearest-neighbor network on `size` points drawn on the unit
// square; returns the symmetric adjacency with signed weights from
// Unif(-0.4,-0.1) U Unif(0.1, 0.4), unit diagonal, then shrinks the
// off-diagonals by 0.9 until the smallest eigenvalue reaches 0.05.
template <typename Scalar>
Matrix<Scalar> draw_nn_module(Index size, std::mt19937_64& rng) {
    std::uniform_real_distribution<Scalar> unif(0, 1);
    Matrix<Scalar> pts(size, 2);
    for (Index i = 0; i < size; ++i) {
        pts(i, 0) = unif(rng);
        pts(i, 1) = unif(rng);
    }
    const int m = 2;
    std::vector<std::vector<Index>> nearest(size);
    for (Index i = 0; i < size; ++i) {
        std::vector<std::pair<Scalar, Index>> d;
        for (Index j = 0; j < size; ++j)
            if (j != i) d.push_back({(pts.row(i) - pts.row(j)).squaredNorm(), j});
        std::sort(d.begin(), d.end());
        for (int t = 0; t < m && t < static_cast<int>(d.size()); ++t)
            nearest[i].push_back(d[t].second);
    }
    auto is_near = [&](Index i, Index j) {
        return std::find(nearest[i].begin(), nearest[i].end(), j) != nearest[i].end();
    };
    Matrix<Scalar> block = Matrix<Scalar>::Identity(size, size);
    std::uniform_real_distribution<Scalar> mag(Scalar(0.1), Scalar(0.4));
    for (Index i = 0; i < size; ++i)
        for (Index j = i + 1; j < size; ++j) {
            if (!(is_near(i, j) && is_near(j, i))) continue;
            const Scalar v = mag(rng);
            block(i, j) = block(j, i) = unif(rng) < Scalar(0.5) ? v : -v;
        }
    for (;;) {
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(block, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() >= Scalar(0.05)) break;
        for (Index i = 0; i < size; ++i)
            for (Index j = 0; j < size; ++j)
                if (i != j) block(i, j) *= Scalar(0.9);
    }
    return block;
}

}  // namespace detail

/// S1 truth: tridiagonal precisions (diagonal 1, off-diagonals 0.2,
/// 0.3, 0.4 per group) and independently drawn sparse coefficient
/// matrices; exact coefficient collisions between groups are redrawn.
template <typename Scalar = double>
GroundTruth<Scalar> gen_s1_truth(const SimSpec& spec) {
    spec.validate();
    GroundTruth<Scalar> truth;
    std::mt19937_64 rng(detail::mix_seed(spec.seed, 0x51u));
    const Scalar rhos[3] = {Scalar(0.2), Scalar(0.3), Scalar(0.4)};
    truth.params.resize(spec.K0);
    for (int k = 0; k < spec.K0; ++k) {
        auto& g = truth.params[k];
        g.theta = Matrix<Scalar>::Identity(spec.p, spec.p);
        const Scalar rho = rhos[k % 3];
        for (Index j = 0; j + 1 < spec.p; ++j) g.theta(j, j + 1) = g.theta(j + 1, j) = rho;
        g.gamma = detail::draw_sparse_gamma<Scalar>(spec.p, spec.q, rng);
    }
    for (int k = 1; k < spec.K0; ++k)
        for (int kp = 0; kp < k; ++kp)
            while (truth.params[k].gamma == truth.params[kp].gamma)
                truth.params[k].gamma = detail::draw_sparse_gamma<Scalar>(spec.p, spec.q, rng);
    truth.labels = detail::shuffled_labels(spec);
    return truth;
}

/// S2 truth: each group's precision is block diagonal over 10 modules
/// of size p/10. Blocks 0..7 are shared by all groups; block 8 is
/// shared by groups 1 and 2, block 9 by groups 1 and 3; groups 2 and
/// 3 each get a unique module in the remaining slot (12 distinct
/// modules in total). Coefficients follow the S1 law.
template <typename Scalar = double>
GroundTruth<Scalar> gen_s2_truth(const SimSpec& spec) {
    spec.validate();
    if (spec.setting != SimSetting::S2)
        throw std::invalid_argument("gen_s2_truth: spec.setting must be S2");
    const Index bs = spec.p / 10;
    GroundTruth<Scalar> truth;
    std::mt19937_64 rng(detail::mix_seed(spec.seed, 0x52u));

    std::vector<Matrix<Scalar>> modules(12);
    for (auto& mmat : modules) mmat = detail::draw_nn_module<Scalar>(bs, rng);
    // modules[0..7] shared; [8] = A (groups 0,1); [9] = B (groups 0,2);
    // [10] unique to group 1; [11] unique to group 2
    std::vector<std::array<int, 10>> layout(3);
    for (int b = 0; b < 8; ++b) layout[0][b] = layout[1][b] = layout[2][b] = b;
    layout[0][8] = 8;  layout[0][9] = 9;
    layout[1][8] = 8;  layout[1][9] = 10;
    layout[2][8] = 11; layout[2][9] = 9;

    truth.params.resize(3);
    for (int k = 0; k < 3; ++k) {
        auto& g = truth.params[k];
        g.theta = Matrix<Scalar>::Zero(spec.p, spec.p);
        for (int b = 0; b < 10; ++b)
            g.theta.block(b * bs, b * bs, bs, bs) = modules[layout[k][b]];
        g.gamma = detail::draw_sparse_gamma<Scalar>(spec.p, spec.q, rng);
    }
    for (int k = 1; k < 3; ++k)
        for (int kp = 0; kp < k; ++kp)
            while (truth.params[k].gamma == truth.params[kp].gamma)
                truth.params[k].gamma = detail::draw_sparse_gamma<Scalar>(spec.p, spec.q, rng);
    truth.labels = detail::shuffled_labels(spec);
    return truth;
}

/// S3 reuses the S1 truth; only the regulator distribution differs
/// (applied in sample_dataset).
template <typename Scalar = double>
GroundTruth<Scalar> gen_s3_truth(const SimSpec& spec) {
    SimSpec s1 = spec;
    s1.setting = SimSetting::S1;
    GroundTruth<Scalar> truth = gen_s1_truth<Scalar>(s1);
    return truth;
}

template <typename Scalar = double>
GroundTruth<Scalar> gen_truth(const SimSpec& spec) {
    switch (spec.setting) {
        case SimSetting::S1: return gen_s1_truth<Scalar>(spec);
        case SimSetting::S2: return gen_s2_truth<Scalar>(spec);
        case SimSetting::S3: return gen_s3_truth<Scalar>(spec);
    }
    throw std::logic_error("gen_truth: unknown setting");
}

/// Draws the dataset: per sample, regulators from N(0, I_q) (S1/S2)
/// or uniform {0,1,2} (S3), responses y = Gamma_k x + eps with
/// eps ~ N(0, Theta_k^{-1}) sampled through the Cholesky factor of
/// Theta_k. Sample order follows the shuffled labels in the truth.
template <typename Scalar = double>
Dataset<Scalar> sample_dataset(const GroundTruth<Scalar>& truth, const SimSpec& spec) {
    spec.validate();
    const Index n = spec.total_n();
    if (static_cast<Index>(truth.labels.size()) != n)
        throw std::invalid_argument("sample_dataset: labels/sizes mismatch");

    std::vector<Eigen::LLT<Matrix<Scalar>>> chol;
    chol.reserve(truth.params.size());
    for (const auto& g : truth.params) {
        chol.emplace_back(g.theta);
        if (chol.back().info() != Eigen::Success)
            throw std::runtime_error("sample_dataset: truth precision not positive definite");
    }

    std::mt19937_64 rng(detail::mix_seed(spec.seed, 0xda7au));
    std::normal_distribution<Scalar> normal(0, 1);
    std::uniform_int_distribution<int> cat(0, 2);

    Matrix<Scalar> Y(n, spec.p), Xraw(n, spec.q);
    Vector<Scalar> x(spec.q + 1), z(spec.p);
    for (Index i = 0; i < n; ++i) {
        x[0] = 1;
        for (Index j = 0; j < spec.q; ++j) {
            const Scalar xv = spec.setting == SimSetting::S3 ? Scalar(cat(rng))
                                                             : normal(rng);
            Xraw(i, j) = xv;
            x[j + 1] = xv;
        }
        for (Index j = 0; j < spec.p; ++j) z[j] = normal(rng);
        const int k = truth.labels[i];
        // eps = L^-T z has covariance (L L^T)^-1 = Theta^-1
        const Vector<Scalar> eps = chol[k].matrixL().transpose().solve(z);
        Y.row(i) = (truth.params[k].gamma * x + eps).transpose();
    }
    return validate_dataset<Scalar>(Y, Xraw);
}

}  // namespace hetcggm

#endif  // HETCGGM_SIMULATE_HPP
