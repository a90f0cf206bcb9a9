#ifndef HETCGGM_CORE_HPP
#define HETCGGM_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Heterogeneous conditional Gaussian graphical model estimation:
// finite mixture of per-group regression + precision-matrix pairs
// (Gamma_l, Theta_l), with MCP sparsity on both and a pairwise
// group-fusion penalty that decides the number of groups.

namespace hetcggm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Paired response/regulator data. X carries a leading all-ones
/// intercept column, so X is n x (q+1) for q raw regulators.
template <typename Scalar = double>
struct Dataset {
    Matrix<Scalar> Y;  // n x p responses
    Matrix<Scalar> X;  // n x (q+1), column 0 identically 1
    Index n = 0, p = 0, q = 0;
};

/// One mixture component: coefficient matrix (p x (q+1)) and
/// precision matrix (p x p, symmetric positive definite).
template <typename Scalar = double>
struct GroupParams {
    Matrix<Scalar> gamma;
    Matrix<Scalar> theta;
};

/// Full mixture: K components, mixing probabilities, and the
/// n x K responsibility matrix from the last E-step.
template <typename Scalar = double>
struct MixtureState {
    std::vector<GroupParams<Scalar>> groups;
    Vector<Scalar> pi;
    Matrix<Scalar> resp;

    Index num_groups() const { return static_cast<Index>(groups.size()); }
};

/// Penalty levels, MCP shape, ADMM/S-AMA parameters and iteration
/// controls. aκ > 1 and aκ′ > 1 are required by the MCP prox
/// closed forms (they divide by 1 − 1/(aκ)).
template <typename Scalar = double>
struct Hyperparams {
    Scalar lambda1 = 0;       // off-diagonal theta sparsity
    Scalar lambda2 = 0;       // gamma sparsity
    Scalar lambda3 = 0;       // pairwise group fusion
    Scalar a = 3;             // MCP concavity
    Scalar kappa = 1;         // ADMM penalty
    Scalar kappa_prime = 1;   // S-AMA step
    int K = 1;                // group upper bound
    Scalar em_tol = 1e-3;
    Scalar admm_tol = 1e-2;
    Scalar sama_tol = 1e-4;
    int em_max_iter = 100;
    int admm_max_iter = 100;
    int sama_max_iter = 50;
    Scalar lqa_floor = 1e-6;
    // NaN selects the data-dependent default rule in merge_groups
    Scalar merge_tol = std::numeric_limits<Scalar>::quiet_NaN();
    int gamma_sweeps = 1;     // Jacobi sweeps per M-step

    void validate() const {
        if (!(K >= 1)) throw std::invalid_argument("Hyperparams: K must be >= 1");
        if (!(lambda1 >= 0 && lambda2 >= 0 && lambda3 >= 0))
            throw std::invalid_argument("Hyperparams: penalty levels must be nonnegative");
        if (!(a > 1)) throw std::invalid_argument("Hyperparams: MCP shape a must exceed 1");
        if (!(kappa > 0 && kappa_prime > 0))
            throw std::invalid_argument("Hyperparams: kappa and kappa_prime must be positive");
        if (!(a * kappa > 1) || !(a * kappa_prime > 1))
            throw std::invalid_argument("Hyperparams: a*kappa and a*kappa_prime must exceed 1");
        if (!(em_tol > 0 && admm_tol > 0 && sama_tol > 0 && lqa_floor > 0))
            throw std::invalid_argument("Hyperparams: tolerances must be positive");
        if (!std::isnan(merge_tol) && merge_tol < 0)
            throw std::invalid_argument("Hyperparams: merge_tol must be nonnegative");
        if (em_max_iter < 1 || admm_max_iter < 1 || sama_max_iter < 1 || gamma_sweeps < 1)
            throw std::invalid_argument("Hyperparams: iteration caps must be positive");
    }
};

/// Fit output after post-hoc merging of fused groups.
template <typename Scalar = double>
struct FitResult {
    std::vector<GroupParams<Scalar>> merged_groups;
    Vector<Scalar> merged_pi;
    std::vector<int> assignment;          // argmax merged responsibility, in [0, k_hat)
    int k_hat = 0;
    std::vector<Scalar> objective_trace;  // penalized objective, entry 0 = at init
    Scalar hqc = std::numeric_limits<Scalar>::quiet_NaN();
    std::vector<std::vector<std::pair<Index, Index>>> edge_sets;        // nonzero off-diag theta, both orders
    std::vector<std::vector<std::pair<Index, Index>>> regulation_sets;  // nonzero gamma entries
    bool em_converged = false;
    bool admm_converged = true;  // false if any ADMM call hit its cap
    int em_iterations = 0;
};

/// True iff symmetric within 1e-10 (absolute, entrywise) and the
/// smallest eigenvalue is strictly positive.
template <typename Derived>
bool check_spd(const Eigen::MatrixBase<Derived>& theta) {
    using Scalar = typename Derived::Scalar;
    if (theta.rows() != theta.cols() || theta.rows() == 0) return false;
    if (!theta.allFinite()) return false;
    const Scalar sym_tol = Scalar(1e-10);
    if (((theta - theta.transpose()).cwiseAbs().maxCoeff()) > sym_tol) return false;
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(theta, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    return es.eigenvalues().minCoeff() > Scalar(0);
}

/// Builds a Dataset from responses and raw regulators (no intercept);
/// prepends the intercept column and checks finiteness and shape.
template <typename Scalar>
Dataset<Scalar> validate_dataset(const Matrix<Scalar>& Y, const Matrix<Scalar>& X_raw) {
    if (Y.rows() != X_raw.rows())
        throw std::invalid_argument("validate_dataset: row count mismatch between Y (" +
                                    std::to_string(Y.rows()) + ") and X (" +
                                    std::to_string(X_raw.rows()) + ")");
    if (Y.rows() < 2) throw std::invalid_argument("validate_dataset: need n >= 2 samples");
    if (Y.cols() < 2) throw std::invalid_argument("validate_dataset: need p >= 2 responses");
    for (Index j = 0; j < Y.cols(); ++j)
        for (Index i = 0; i < Y.rows(); ++i)
            if (!std::isfinite(Y(i, j)))
                throw std::invalid_argument("validate_dataset: non-finite entry at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ") in Y");
    for (Index j = 0; j < X_raw.cols(); ++j)
        for (Index i = 0; i < X_raw.rows(); ++i)
            if (!std::isfinite(X_raw(i, j)))
                throw std::invalid_argument("validate_dataset: non-finite entry at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ") in X");
    Dataset<Scalar> ds;
    ds.n = Y.rows();
    ds.p = Y.cols();
    ds.q = X_raw.cols();
    ds.Y = Y;
    ds.X.resize(ds.n, ds.q + 1);
    ds.X.col(0).setOnes();
    if (ds.q > 0) ds.X.rightCols(ds.q) = X_raw;
    return ds;
}

/// Round-trippable flat layout of (Gamma, Theta): Gamma row-major,
/// then Theta row-major.
template <typename Scalar>
Vector<Scalar> vectorize_params(const GroupParams<Scalar>& g) {
    const Index pg = g.gamma.size(), pt = g.theta.size();
    Vector<Scalar> v(pg + pt);
    Index k = 0;
    for (Index j = 0; j < g.gamma.rows(); ++j)
        for (Index m = 0; m < g.gamma.cols(); ++m) v[k++] = g.gamma(j, m);
    for (Index j = 0; j < g.theta.rows(); ++j)
        for (Index m = 0; m < g.theta.cols(); ++m) v[k++] = g.theta(j, m);
    return v;
}

template <typename Scalar>
GroupParams<Scalar> devectorize_params(const Vector<Scalar>& v, Index p, Index q) {
    if (v.size() != p * (q + 1) + p * p)
        throw std::invalid_argument("devectorize_params: length mismatch");
    GroupParams<Scalar> g;
    g.gamma.resize(p, q + 1);
    g.theta.resize(p, p);
    Index k = 0;
    for (Index j = 0; j < p; ++j)
        for (Index m = 0; m < q + 1; ++m) g.gamma(j, m) = v[k++];
    for (Index j = 0; j < p; ++j)
        for (Index m = 0; m < p; ++m) g.theta(j, m) = v[k++];
    return g;
}

/// Combined parameter distance used by the fusion penalty and by
/// group merging: (||Theta_l - Theta_l'||_F^2 + ||Gamma_l - Gamma_l'||_F^2)^(1/2).
template <typename Scalar>
Scalar param_distance(const GroupParams<Scalar>& a, const GroupParams<Scalar>& b) {
    const Scalar dt = (a.theta - b.theta).squaredNorm();
    const Scalar dg = (a.gamma - b.gamma).squaredNorm();
    return std::sqrt(dt + dg);
}

}  // namespace hetcggm

#endif  // HETCGGM_CORE_HPP
