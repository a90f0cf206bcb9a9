#ifndef HETCGGM_LIKELIHOOD_HPP
#define HETCGGM_LIKELIHOOD_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/penalty.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

// Conditional Gaussian density, mixture log-likelihood, E-step and
// pi update, weighted second moments, and the penalized objective.
// All density work is done in log space with log-sum-exp.

namespace hetcggm {

template <typename Scalar = double>
struct WeightedMoments {
    Matrix<Scalar> C_y;   // p x p
    Matrix<Scalar> C_yx;  // p x (q+1)
    Matrix<Scalar> C_x;   // (q+1) x (q+1)
    Scalar n_l = 0;       // effective group size, sum of the weight column
};

/// Cached Cholesky pieces for repeated density evaluation of one group.
template <typename Scalar>
struct DensityCache {
    Eigen::LLT<Matrix<Scalar>> llt;
    Scalar half_logdet = 0;

    explicit DensityCache(const Matrix<Scalar>& theta) : llt(theta) {
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("DensityCache: precision matrix is not positive definite");
        half_logdet = Matrix<Scalar>(llt.matrixL()).diagonal().array().log().sum();
    }

    /// log f(y; x) = -(p/2)log(2pi) + (1/2)log det Theta - (1/2) r' Theta r.
    Scalar log_density(const Vector<Scalar>& resid) const {
        static const Scalar log2pi = std::log(Scalar(2) * Scalar(EIGEN_PI));
        const Scalar quad = (llt.matrixL().transpose() * resid).squaredNorm();
        return -Scalar(0.5) * resid.size() * log2pi + half_logdet - Scalar(0.5) * quad;
    }
};

template <typename Scalar>
Scalar log_cond_density(const Vector<Scalar>& y, const Vector<Scalar>& x,
                        const GroupParams<Scalar>& g) {
    DensityCache<Scalar> cache(g.theta);
    return cache.log_density(Vector<Scalar>(y - g.gamma * x));
}

/// n x K matrix of per-sample per-group log densities.
template <typename Scalar>
Matrix<Scalar> log_density_matrix(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state) {
    const Index K = state.num_groups();
    Matrix<Scalar> logf(ds.n, K);
    for (Index l = 0; l < K; ++l) {
        DensityCache<Scalar> cache(state.groups[l].theta);
        const Matrix<Scalar> resid = ds.Y - ds.X * state.groups[l].gamma.transpose();
        for (Index i = 0; i < ds.n; ++i)
            logf(i, l) = cache.log_density(Vector<Scalar>(resid.row(i).transpose()));
    }
    return logf;
}

/// Responsibilities L_il = pi_l f_l / sum_l' pi_l' f_l', stabilized by
/// subtracting the row max before exponentiating. Rows sum to 1.
template <typename Scalar>
Matrix<Scalar> e_step(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state) {
    const Index K = state.num_groups();
    Matrix<Scalar> logpost = log_density_matrix(ds, state);
    for (Index l = 0; l < K; ++l) {
        const Scalar logpi = state.pi[l] > 0 ? std::log(state.pi[l])
                                             : -std::numeric_limits<Scalar>::infinity();
        logpost.col(l).array() += logpi;
    }
    Matrix<Scalar> resp(ds.n, K);
    for (Index i = 0; i < ds.n; ++i) {
        const Scalar mx = logpost.row(i).maxCoeff();
        if (!std::isfinite(mx))
            throw std::runtime_error("e_step: non-finite posterior row at sample " + std::to_string(i));
        Vector<Scalar> ex = (logpost.row(i).array() - mx).exp().matrix().transpose();
        resp.row(i) = ex.transpose() / ex.sum();
    }
    return resp;
}

/// pi_l = column means of the responsibility matrix.
template <typename Scalar>
Vector<Scalar> update_pi(const Matrix<Scalar>& resp) {
    return resp.colwise().mean().transpose();
}

/// Weighted second-moment matrices for one group, normalized by the
/// effective size n_l = sum_i w_i. Throws when the component emptied
/// (n_l at machine-epsilon scale); the caller decides how to proceed.
template <typename Scalar>
WeightedMoments<Scalar> weighted_moments(const Dataset<Scalar>& ds, const Vector<Scalar>& resp_col) {
    if (resp_col.size() != ds.n)
        throw std::invalid_argument("weighted_moments: weight length mismatch");
    WeightedMoments<Scalar> mom;
    mom.n_l = resp_col.sum();
    if (!(mom.n_l > std::numeric_limits<Scalar>::epsilon() * ds.n))
        throw std::runtime_error("weighted_moments: emptied component (n_l ~ 0)");
    const Matrix<Scalar> Yw = resp_col.asDiagonal() * ds.Y;
    mom.C_y = ds.Y.transpose() * Yw / mom.n_l;
    mom.C_yx = Yw.transpose() * ds.X / mom.n_l;
    mom.C_x = ds.X.transpose() * (resp_col.asDiagonal() * ds.X) / mom.n_l;
    mom.C_y = ((mom.C_y + mom.C_y.transpose()) / 2).eval();
    mom.C_x = ((mom.C_x + mom.C_x.transpose()) / 2).eval();
    return mom;
}

/// Total MCP penalty of Eq-style objective: off-diagonal theta entries
/// (both ordered pairs), all gamma entries, and pairwise group fusion
/// on the combined parameter distance.
template <typename Scalar>
Scalar penalty_total(const std::vector<GroupParams<Scalar>>& groups, const Hyperparams<Scalar>& hp) {
    const McpSpec<Scalar> m1{hp.lambda1, hp.a}, m2{hp.lambda2, hp.a}, m3{hp.lambda3, hp.a};
    Scalar total = 0;
    const Index K = static_cast<Index>(groups.size());
    for (Index l = 0; l < K; ++l) {
        const auto& th = groups[l].theta;
        for (Index j = 0; j < th.rows(); ++j)
            for (Index m = 0; m < th.cols(); ++m)
                if (j != m) total += mcp_value(std::abs(th(j, m)), m1);
        const auto& ga = groups[l].gamma;
        for (Index j = 0; j < ga.rows(); ++j)
            for (Index m = 0; m < ga.cols(); ++m) total += mcp_value(std::abs(ga(j, m)), m2);
    }
    for (Index l = 0; l < K; ++l)
        for (Index lp = l + 1; lp < K; ++lp)
            total += mcp_value(param_distance(groups[l], groups[lp]), m3);
    return total;
}

/// Mean mixture log-likelihood (1/n) sum_i log sum_l pi_l f_l(y_i; x_i).
template <typename Scalar>
Scalar mixture_loglik_mean(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state) {
    const Index K = state.num_groups();
    Matrix<Scalar> logf = log_density_matrix(ds, state);
    for (Index l = 0; l < K; ++l) {
        const Scalar logpi = state.pi[l] > 0 ? std::log(state.pi[l])
                                             : -std::numeric_limits<Scalar>::infinity();
        logf.col(l).array() += logpi;
    }
    Scalar total = 0;
    for (Index i = 0; i < ds.n; ++i) {
        const Scalar mx = logf.row(i).maxCoeff();
        total += mx + std::log((logf.row(i).array() - mx).exp().sum());
    }
    return total / ds.n;
}

/// The penalized objective: mean mixture log-likelihood minus the
/// sparsity and fusion penalties. This is the maximization target the
/// EM trace records.
template <typename Scalar>
Scalar penalized_objective(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state,
                           const Hyperparams<Scalar>& hp) {
    return mixture_loglik_mean(ds, state) - penalty_total(state.groups, hp);
}

/// Expected complete-data log-likelihood
/// H_n = (1/n) sum_i sum_l L_il [log pi_l + log f_l(y_i; x_i)].
template <typename Scalar>
Scalar expected_complete_loglik(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state,
                                const Matrix<Scalar>& resp) {
    const Index K = state.num_groups();
    const Matrix<Scalar> logf = log_density_matrix(ds, state);
    Scalar total = 0;
    for (Index l = 0; l < K; ++l) {
        const Scalar logpi = state.pi[l] > 0 ? std::log(state.pi[l])
                                             : -std::numeric_limits<Scalar>::infinity();
        for (Index i = 0; i < ds.n; ++i) {
            if (resp(i, l) == 0) continue;  // 0 * (-inf) convention
            total += resp(i, l) * (logpi + logf(i, l));
        }
    }
    return total / ds.n;
}

/// d H_n / d Gamma_l = (1/n) sum_i L_il Theta_l (y_i - Gamma_l x_i) x_i'.
template <typename Scalar>
Matrix<Scalar> grad_hn_gamma(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state,
                             const Matrix<Scalar>& resp, Index l) {
    const auto& g = state.groups[l];
    const Matrix<Scalar> resid = ds.Y - ds.X * g.gamma.transpose();  // n x p
    const Matrix<Scalar> wr = resp.col(l).asDiagonal() * resid;
    return g.theta * (wr.transpose() * ds.X) / ds.n;
}

/// d H_n / d Theta_l over symmetric matrices:
/// (n_l / 2n) (Theta_l^{-1} - S_Gamma,l), with S from the weighted moments.
template <typename Scalar>
Matrix<Scalar> grad_hn_theta(const Dataset<Scalar>& ds, const MixtureState<Scalar>& state,
                             const Matrix<Scalar>& resp, Index l) {
    const auto& g = state.groups[l];
    const WeightedMoments<Scalar> mom = weighted_moments<Scalar>(ds, resp.col(l));
    Matrix<Scalar> s = mom.C_y - mom.C_yx * g.gamma.transpose() - g.gamma * mom.C_yx.transpose() +
                       g.gamma * mom.C_x * g.gamma.transpose();
    const Matrix<Scalar> theta_inv =
        g.theta.llt().solve(Matrix<Scalar>::Identity(g.theta.rows(), g.theta.cols()));
    return (mom.n_l / (2 * ds.n)) * (theta_inv - s);
}

}  // namespace hetcggm

#endif  // HETCGGM_LIKELIHOOD_HPP
