#ifndef HETCGGM_GAMMA_UPDATE_HPP
#define HETCGGM_GAMMA_UPDATE_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/likelihood.hpp"
#include "hetcggm/penalty.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

// Coefficient-matrix update by local quadratic approximation. Each
// sweep is Jacobi: every entry is recomputed from iteration-(t-1)
// values only, so visit order does not affect the result.

namespace hetcggm {

/// Per-sweep anchor state: previous parameters, fusion distances and
/// weights, weighted moments, and the cached matrix products the entry
/// update reads.
template <typename Scalar = double>
struct LqaWorkspace {
    std::vector<Matrix<Scalar>> prev_gamma;
    std::vector<Matrix<Scalar>> prev_theta;
    Matrix<Scalar> tau;  // K x K fusion distances, zero diagonal
    std::vector<WeightedMoments<Scalar>> moments;
    Scalar n = 0;  // total sample count

    // Derived, filled by make_lqa_workspace.
    Matrix<Scalar> fusion_w;                    // p'(tau, lambda3)/max(tau, floor)
    std::vector<Matrix<Scalar>> theta_cyx;      // Theta_l * C_yx,l
    std::vector<Matrix<Scalar>> theta_gamma_cx; // Theta_l * Gamma_l * C_x,l
};

/// W_ll' = p'(tau_ll', lambda3) / max(tau_ll', lqa_floor) off the
/// diagonal, zero on it. Symmetric; all partners l' != l contribute
/// (the l < l' form reads as unordered pairs).
template <typename Scalar>
Matrix<Scalar> fusion_weights(const LqaWorkspace<Scalar>& ws, const Hyperparams<Scalar>& hp) {
    const Index K = ws.tau.rows();
    const McpSpec<Scalar> m3{hp.lambda3, hp.a};
    Matrix<Scalar> w = Matrix<Scalar>::Zero(K, K);
    for (Index l = 0; l < K; ++l)
        for (Index lp = 0; lp < K; ++lp) {
            if (l == lp) continue;
            w(l, lp) = mcp_deriv(ws.tau(l, lp), m3) / std::max(ws.tau(l, lp), hp.lqa_floor);
        }
    return w;
}

template <typename Scalar>
LqaWorkspace<Scalar> make_lqa_workspace(const Dataset<Scalar>& ds,
                                        const std::vector<GroupParams<Scalar>>& groups,
                                        const std::vector<WeightedMoments<Scalar>>& moments,
                                        const Hyperparams<Scalar>& hp) {
    const Index K = static_cast<Index>(groups.size());
    LqaWorkspace<Scalar> ws;
    ws.n = static_cast<Scalar>(ds.n);
    ws.moments = moments;
    ws.prev_gamma.reserve(K);
    ws.prev_theta.reserve(K);
    for (const auto& g : groups) {
        ws.prev_gamma.push_back(g.gamma);
        ws.prev_theta.push_back(g.theta);
    }
    ws.tau = Matrix<Scalar>::Zero(K, K);
    for (Index l = 0; l < K; ++l)
        for (Index lp = l + 1; lp < K; ++lp)
            ws.tau(l, lp) = ws.tau(lp, l) = param_distance(groups[l], groups[lp]);
    ws.fusion_w = fusion_weights(ws, hp);
    ws.theta_cyx.resize(K);
    ws.theta_gamma_cx.resize(K);
    for (Index l = 0; l < K; ++l) {
        ws.theta_cyx[l] = groups[l].theta * moments[l].C_yx;
        ws.theta_gamma_cx[l] = groups[l].theta * groups[l].gamma * moments[l].C_x;
    }
    return ws;
}

/// One coordinate of the LQA closed form:
///   gamma_jm_l = (h + n*vtilde) / (n*vhat + n_l*theta_jj*C_x,mm + n*p'(|prev|,l2)/|prev|)
/// with h = n_l[(Theta C_yx)_jm - (Theta Gamma C_x)_jm + theta_jj*prev_jm*C_x,mm],
/// vtilde the fusion-weighted neighbor values and vhat the weight sum.
/// Entries whose previous value sits below lqa_floor are absorbed to
/// exact zero whenever lambda2 > 0.
template <typename Scalar>
Scalar update_gamma_entry(Index j, Index m, Index l, const LqaWorkspace<Scalar>& ws,
                          const Hyperparams<Scalar>& hp) {
    const Scalar prev = ws.prev_gamma[l](j, m);
    const Scalar abs_prev = std::abs(prev);
    if (hp.lambda2 > 0 && abs_prev < hp.lqa_floor) return Scalar(0);

    const Scalar n_l = ws.moments[l].n_l;
    const Scalar cxmm = ws.moments[l].C_x(m, m);
    const Scalar theta_jj = ws.prev_theta[l](j, j);
    const Scalar h = n_l * (ws.theta_cyx[l](j, m) - ws.theta_gamma_cx[l](j, m) +
                            theta_jj * prev * cxmm);

    Scalar vtilde = 0, vhat = 0;
    const Index K = static_cast<Index>(ws.prev_gamma.size());
    for (Index lp = 0; lp < K; ++lp) {
        if (lp == l) continue;
        vtilde += ws.fusion_w(l, lp) * ws.prev_gamma[lp](j, m);
        vhat += ws.fusion_w(l, lp);
    }

    const McpSpec<Scalar> m2{hp.lambda2, hp.a};
    const Scalar lqa_ratio =
        hp.lambda2 > 0 ? mcp_deriv(abs_prev, m2) / std::max(abs_prev, hp.lqa_floor) : Scalar(0);

    const Scalar denom = ws.n * vhat + n_l * theta_jj * cxmm + ws.n * lqa_ratio;
    const Scalar value = (h + ws.n * vtilde) / denom;
    if (!std::isfinite(value))
        throw std::runtime_error("update_gamma_entry: non-finite ratio at (" + std::to_string(j) +
                                 "," + std::to_string(m) + "," + std::to_string(l) + ")");
    return value;
}

/// One full Jacobi sweep over all (j, m, l) in row-major order.
template <typename Scalar>
std::vector<Matrix<Scalar>> update_gamma_all(const Dataset<Scalar>& ds,
                                             const LqaWorkspace<Scalar>& ws,
                                             const Hyperparams<Scalar>& hp) {
    (void)ds;
    const Index K = static_cast<Index>(ws.prev_gamma.size());
    std::vector<Matrix<Scalar>> out(K);
    for (Index l = 0; l < K; ++l) {
        out[l] = ws.prev_gamma[l];
        const Index p = out[l].rows(), qp1 = out[l].cols();
        for (Index j = 0; j < p; ++j)
            for (Index m = 0; m < qp1; ++m) out[l](j, m) = update_gamma_entry(j, m, l, ws, hp);
    }
    return out;
}

}  // namespace hetcggm

#endif  // HETCGGM_GAMMA_UPDATE_HPP
