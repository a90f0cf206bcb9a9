#ifndef HETCGGM_THETA_UPDATE_HPP
#define HETCGGM_THETA_UPDATE_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/likelihood.hpp"
#include "hetcggm/penalty.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

// Precision-matrix update: ADMM splits the smooth likelihood block
// (Theta, eigen-decomposition closed form) from the sparsity-plus-
// fusion block (Xi, solved by an inner S-AMA loop over the p^2
// coordinate problems and the K(K-1)/2 pairwise difference problems).
// The reported estimate is Xi, which carries exact zeros.

namespace hetcggm {

template <typename Scalar = double>
struct AdmmState {
    std::vector<Matrix<Scalar>> theta;    // dense eigen iterates
    std::vector<Matrix<Scalar>> xi;       // sparse split copies
    std::vector<Matrix<Scalar>> psi;      // scaled duals
    std::vector<Matrix<Scalar>> s_gamma;  // residual covariances S_Gamma,l
    std::vector<Scalar> n_l;              // likelihood weights (the EM driver passes n_l/(2n))
    Matrix<Scalar> eta;  // K x K, ||Gamma_l - Gamma_l'||_F^2 offsets
};

template <typename Scalar = double>
struct SamaState {
    std::vector<Vector<Scalar>> v;       // edge differences, length p^2
    std::vector<Vector<Scalar>> delta;   // duals, length p^2
    std::vector<std::pair<Index, Index>> edges;  // ordered pairs l < l'
};

/// S_Gamma = C_y - C_yx G' - G C_yx' + G C_x G', symmetrized by
/// averaging with its transpose to kill round-off.
template <typename Scalar>
Matrix<Scalar> residual_covariance(const WeightedMoments<Scalar>& mom, const Matrix<Scalar>& gamma) {
    Matrix<Scalar> s = mom.C_y - mom.C_yx * gamma.transpose() - gamma * mom.C_yx.transpose() +
                       gamma * mom.C_x * gamma.transpose();
    return (s + s.transpose()) / 2;
}

/// Minimizer of n_l[-log det T + tr(S T)] + (kappa/2)||T - Xi + Psi||_F^2:
/// eigen-decompose M = S - kappa*Xi/n_l + kappa*Psi/n_l = U D U' and set
/// T = U Dt U' with Dt_jj = n_l[-D_jj + sqrt(D_jj^2 + 4 kappa/n_l)]/(2 kappa).
/// Dt_jj > 0 for any real D_jj, so the result is always SPD.
template <typename Scalar>
Matrix<Scalar> theta_eigen_update(const Matrix<Scalar>& s_gamma, const Matrix<Scalar>& xi,
                                  const Matrix<Scalar>& psi, Scalar n_l, Scalar kappa) {
    Matrix<Scalar> m = s_gamma - (kappa / n_l) * xi + (kappa / n_l) * psi;
    m = ((m + m.transpose()) / 2).eval();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("theta_eigen_update: eigen-decomposition failed");
    const Vector<Scalar> d = es.eigenvalues();
    Vector<Scalar> dt(d.size());
    for (Index j = 0; j < d.size(); ++j)
        dt[j] = n_l * (-d[j] + std::sqrt(d[j] * d[j] + 4 * kappa / n_l)) / (2 * kappa);
    return es.eigenvectors() * dt.asDiagonal() * es.eigenvectors().transpose();
}

/// For each off-diagonal pair keep the entry of smaller magnitude
/// (ties keep the (j,m), j < m entry). Never increases any |theta_jm|.
template <typename Scalar>
Matrix<Scalar> symmetrize_min_magnitude(const Matrix<Scalar>& theta) {
    Matrix<Scalar> out = theta;
    for (Index j = 0; j < out.rows(); ++j)
        for (Index m = j + 1; m < out.cols(); ++m) {
            const Scalar keep =
                std::abs(out(j, m)) <= std::abs(out(m, j)) ? out(j, m) : out(m, j);
            out(j, m) = out(m, j) = keep;
        }
    return out;
}

namespace detail {

template <typename Scalar>
Vector<Scalar> vec(const Matrix<Scalar>& m) {
    return Eigen::Map<const Vector<Scalar>>(m.data(), m.size());
}

template <typename Scalar>
Matrix<Scalar> unvec(const Vector<Scalar>& v, Index p) {
    return Eigen::Map<const Matrix<Scalar>>(v.data(), p, p);
}

}  // namespace detail

/// Xi block of S-AMA: the prox target is u_l = Z_l + (1/kappa) * sum of
/// signed dual reshapes over the edges touching l. Off-diagonal
/// coordinates go through the scalar MCP prox at level lambda1;
/// diagonal coordinates pass through unpenalized.
template <typename Scalar>
std::vector<Matrix<Scalar>> sama_xi_update(const std::vector<Matrix<Scalar>>& z,
                                           const SamaState<Scalar>& sama,
                                           const Hyperparams<Scalar>& hp) {
    const Index K = static_cast<Index>(z.size());
    const Index p = z.empty() ? 0 : z[0].rows();
    std::vector<Matrix<Scalar>> u = z;
    for (std::size_t r = 0; r < sama.edges.size(); ++r) {
        const Matrix<Scalar> dmat = detail::unvec(sama.delta[r], p);
        u[sama.edges[r].first] += dmat / hp.kappa;
        u[sama.edges[r].second] -= dmat / hp.kappa;
    }
    std::vector<Matrix<Scalar>> xi(K);
    for (Index l = 0; l < K; ++l) {
        xi[l] = u[l];
        for (Index j = 0; j < p; ++j)
            for (Index m = 0; m < p; ++m)
                if (j != m) xi[l](j, m) = mcp_prox_scalar(u[l](j, m), hp.lambda1, hp.a, hp.kappa);
    }
    return xi;
}

/// V block: each edge solves the group-MCP prox of the current Xi
/// difference with offset eta_r, at the S-AMA step kappa'.
template <typename Scalar>
void sama_v_update(const std::vector<Matrix<Scalar>>& xi, SamaState<Scalar>& sama,
                   const Matrix<Scalar>& eta, const Hyperparams<Scalar>& hp) {
    for (std::size_t r = 0; r < sama.edges.size(); ++r) {
        const auto [l, lp] = sama.edges[r];
        const Vector<Scalar> w =
            detail::vec(xi[l]) - detail::vec(xi[lp]) - sama.delta[r] / hp.kappa_prime;
        sama.v[r] = group_mcp_prox(w, eta(l, lp), hp.lambda3, hp.a, hp.kappa_prime);
    }
}

/// Dual ascent, gated: edges whose v_r fused to zero freeze their dual.
template <typename Scalar>
void sama_delta_update(SamaState<Scalar>& sama, const std::vector<Matrix<Scalar>>& xi,
                       Scalar kappa_prime) {
    for (std::size_t r = 0; r < sama.edges.size(); ++r) {
        if (sama.v[r].norm() == 0) continue;
        const auto [l, lp] = sama.edges[r];
        sama.delta[r] += kappa_prime * (sama.v[r] - detail::vec(xi[l]) + detail::vec(xi[lp]));
    }
}

template <typename Scalar>
struct ThetaUpdateResult {
    std::vector<Matrix<Scalar>> xi;
    bool converged = false;
    int iterations = 0;
};

/// Full ADMM loop, cold-started at Theta = I, Xi = Psi = 0. Converges
/// on the relative change of the dense Theta iterates across all
/// groups; returns the sparse Xi iterates as the precision estimates.
/// Hitting the iteration cap is reported via the flag, not an error.
template <typename Scalar>
ThetaUpdateResult<Scalar> update_theta_all(AdmmState<Scalar>& admm, const Hyperparams<Scalar>& hp) {
    const Index K = static_cast<Index>(admm.s_gamma.size());
    if (K == 0) return {};
    const Index p = admm.s_gamma[0].rows();

    admm.theta.assign(K, Matrix<Scalar>::Identity(p, p));
    admm.xi.assign(K, Matrix<Scalar>::Zero(p, p));
    admm.psi.assign(K, Matrix<Scalar>::Zero(p, p));

    SamaState<Scalar> sama;
    for (Index l = 0; l < K; ++l)
        for (Index lp = l + 1; lp < K; ++lp) sama.edges.emplace_back(l, lp);
    sama.v.assign(sama.edges.size(), Vector<Scalar>::Zero(p * p));
    sama.delta.assign(sama.edges.size(), Vector<Scalar>::Zero(p * p));

    ThetaUpdateResult<Scalar> out;
    std::vector<Matrix<Scalar>> z(K);
    for (int m = 1; m <= hp.admm_max_iter; ++m) {
        const std::vector<Matrix<Scalar>> theta_prev = admm.theta;
        for (Index l = 0; l < K; ++l) {
            admm.theta[l] = theta_eigen_update(admm.s_gamma[l], admm.xi[l], admm.psi[l],
                                               admm.n_l[l], hp.kappa);
            admm.theta[l] = symmetrize_min_magnitude(admm.theta[l]);
        }

        for (Index l = 0; l < K; ++l) z[l] = admm.theta[l] + admm.psi[l];
        for (int s = 0; s < hp.sama_max_iter; ++s) {
            const std::vector<Vector<Scalar>> v_prev = sama.v;
            admm.xi = sama_xi_update(z, sama, hp);
            sama_v_update(admm.xi, sama, admm.eta, hp);
            sama_delta_update(sama, admm.xi, hp.kappa_prime);
            Scalar dv = 0;
            for (std::size_t r = 0; r < sama.v.size(); ++r)
                dv = std::max(dv, (sama.v[r] - v_prev[r]).template lpNorm<Eigen::Infinity>());
            if (dv < hp.sama_tol) break;
        }

        for (Index l = 0; l < K; ++l) admm.psi[l] += admm.theta[l] - admm.xi[l];

        out.iterations = m;
        Scalar rel = 0;
        for (Index l = 0; l < K; ++l) {
            const Scalar denom = std::max(theta_prev[l].norm(),
                                          std::numeric_limits<Scalar>::min());
            rel = std::max(rel, (admm.theta[l] - theta_prev[l]).norm() / denom);
        }
        if (rel < hp.admm_tol) {
            out.converged = true;
            break;
        }
    }
    out.xi = admm.xi;
    return out;
}

}  // namespace hetcggm

#endif  // HETCGGM_THETA_UPDATE_HPP
