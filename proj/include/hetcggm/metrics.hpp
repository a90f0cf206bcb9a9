#ifndef HETCGGM_METRICS_HPP
#define HETCGGM_METRICS_HPP

#include "hetcggm/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

// Evaluation measures: adjusted/plain Rand index, group matching,
// group-matched RMSE and TPR/FPR for both the precision and the
// coefficient matrices.

namespace hetcggm {

namespace detail {

inline double comb2(double m) { return m * (m - 1) / 2; }

inline std::vector<std::vector<Index>> contingency(const std::vector<int>& a,
                                                   const std::vector<int>& b) {
    const int ka = *std::max_element(a.begin(), a.end()) + 1;
    const int kb = *std::max_element(b.begin(), b.end()) + 1;
    std::vector<std::vector<Index>> cnt(ka, std::vector<Index>(kb, 0));
    for (std::size_t i = 0; i < a.size(); ++i) ++cnt[a[i]][b[i]];
    return cnt;
}

}  // namespace detail

/// Adjusted Rand index from the contingency table; 1 for identical
/// partitions, 0 when the index equals its chance expectation.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("adjusted_rand_index: need n >= 2");
    const auto cnt = detail::contingency(a, b);
    double sum_ij = 0, sum_a = 0, sum_b = 0;
    for (const auto& row : cnt) {
        double rs = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            sum_ij += detail::comb2(double(row[j]));
            rs += double(row[j]);
        }
        sum_a += detail::comb2(rs);
    }
    for (std::size_t j = 0; j < cnt[0].size(); ++j) {
        double cs = 0;
        for (const auto& row : cnt) cs += double(row[j]);
        sum_b += detail::comb2(cs);
    }
    const double expected = sum_a * sum_b / detail::comb2(double(a.size()));
    const double maximum = (sum_a + sum_b) / 2;
    if (maximum == expected) return 0.0;
    return (sum_ij - expected) / (maximum - expected);
}

/// Plain Rand index: fraction of sample pairs on which the two
/// partitions agree.
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("rand_index: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("rand_index: need n >= 2");
    const std::size_t n = a.size();
    double agree = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            agree += ((a[i] == a[j]) == (b[i] == b[j])) ? 1 : 0;
    return agree / detail::comb2(double(n));
}

/// Combined squared parameter distance used for matching.
template <typename Scalar>
Scalar match_distance2(const GroupParams<Scalar>& est, const GroupParams<Scalar>& truth) {
    return (est.theta - truth.theta).squaredNorm() + (est.gamma - truth.gamma).squaredNorm();
}

/// For each estimated group, the index of the nearest true group under
/// the combined squared Frobenius distance; ties pick the smaller index.
template <typename Scalar>
std::vector<int> match_groups(const std::vector<GroupParams<Scalar>>& est,
                              const std::vector<GroupParams<Scalar>>& truth) {
    if (est.empty() || truth.empty())
        throw std::invalid_argument("match_groups: empty group list");
    if (est[0].theta.rows() != truth[0].theta.rows() ||
        est[0].gamma.cols() != truth[0].gamma.cols())
        throw std::invalid_argument("match_groups: dimension mismatch");
    std::vector<int> match(est.size(), 0);
    for (std::size_t l = 0; l < est.size(); ++l) {
        Scalar best = match_distance2(est[l], truth[0]);
        for (std::size_t k = 1; k < truth.size(); ++k) {
            const Scalar d = match_distance2(est[l], truth[k]);
            if (d < best) {
                best = d;
                match[l] = static_cast<int>(k);
            }
        }
    }
    return match;
}

/// Bijective alignment minimizing the total combined squared distance;
/// exact search over permutations (group counts are small).
template <typename Scalar>
std::vector<int> optimal_matching(const std::vector<GroupParams<Scalar>>& est,
                                  const std::vector<GroupParams<Scalar>>& truth) {
    const std::size_t k = est.size();
    if (k != truth.size())
        throw std::invalid_argument("optimal_matching: group counts differ");
    if (k > 10) throw std::invalid_argument("optimal_matching: more than 10 groups");
    Matrix<Scalar> d2(k, k);
    for (std::size_t l = 0; l < k; ++l)
        for (std::size_t m = 0; m < k; ++m) d2(l, m) = match_distance2(est[l], truth[m]);
    std::vector<int> perm(k), best_perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    best_perm = perm;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    do {
        Scalar total = 0;
        for (std::size_t l = 0; l < k; ++l) total += d2(l, perm[l]);
        if (total < best) {
            best = total;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best_perm;
}

/// Mean matched Frobenius error of the precision matrices.
template <typename Scalar>
Scalar rmse_theta(const std::vector<GroupParams<Scalar>>& est,
                  const std::vector<GroupParams<Scalar>>& truth,
                  const std::vector<int>& matching) {
    Scalar total = 0;
    for (std::size_t l = 0; l < est.size(); ++l)
        total += (est[l].theta - truth[matching[l]].theta).norm();
    return total / Scalar(est.size());
}

template <typename Scalar>
Scalar rmse_gamma(const std::vector<GroupParams<Scalar>>& est,
                  const std::vector<GroupParams<Scalar>>& truth,
                  const std::vector<int>& matching) {
    Scalar total = 0;
    for (std::size_t l = 0; l < est.size(); ++l)
        total += (est[l].gamma - truth[matching[l]].gamma).norm();
    return total / Scalar(est.size());
}

namespace detail {

// Averages per-group rates, skipping groups with an empty reference
// set; NaN when every group is degenerate.
template <typename Scalar>
std::pair<Scalar, Scalar> average_rates(const std::vector<Scalar>& tpr_num,
                                        const std::vector<Scalar>& tpr_den,
                                        const std::vector<Scalar>& fpr_num,
                                        const std::vector<Scalar>& fpr_den) {
    Scalar tpr = 0, fpr = 0;
    int nt = 0, nf = 0;
    for (std::size_t l = 0; l < tpr_num.size(); ++l) {
        if (tpr_den[l] > 0) {
            tpr += tpr_num[l] / tpr_den[l];
            ++nt;
        }
        if (fpr_den[l] > 0) {
            fpr += fpr_num[l] / fpr_den[l];
            ++nf;
        }
    }
    const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
    return {nt ? tpr / nt : nan, nf ? fpr / nf : nan};
}

}  // namespace detail

/// (TPR, FPR) for the precision-matrix supports over the upper
/// triangle j < m. Nonzero means exactly nonzero. Groups with no true
/// nonzeros (or no true zeros) are excluded from the respective
/// average; all-excluded yields NaN.
template <typename Scalar>
std::pair<Scalar, Scalar> tpr_fpr_theta(const std::vector<GroupParams<Scalar>>& est,
                                        const std::vector<GroupParams<Scalar>>& truth,
                                        const std::vector<int>& matching) {
    const std::size_t L = est.size();
    std::vector<Scalar> tn(L, 0), td(L, 0), fn(L, 0), fd(L, 0);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& t = truth[matching[l]].theta;
        const auto& e = est[l].theta;
        for (Index j = 0; j < t.rows(); ++j)
            for (Index m = j + 1; m < t.cols(); ++m) {
                if (t(j, m) != 0) {
                    td[l] += 1;
                    if (e(j, m) != 0) tn[l] += 1;
                } else {
                    fd[l] += 1;
                    if (e(j, m) != 0) fn[l] += 1;
                }
            }
    }
    return detail::average_rates(tn, td, fn, fd);
}

/// (TPR, FPR) for the coefficient-matrix supports over the full
/// index grid.
template <typename Scalar>
std::pair<Scalar, Scalar> tpr_fpr_gamma(const std::vector<GroupParams<Scalar>>& est,
                                        const std::vector<GroupParams<Scalar>>& truth,
                                        const std::vector<int>& matching) {
    const std::size_t L = est.size();
    std::vector<Scalar> tn(L, 0), td(L, 0), fn(L, 0), fd(L, 0);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& t = truth[matching[l]].gamma;
        const auto& e = est[l].gamma;
        for (Index j = 0; j < t.rows(); ++j)
            for (Index m = 0; m < t.cols(); ++m) {
                if (t(j, m) != 0) {
                    td[l] += 1;
                    if (e(j, m) != 0) tn[l] += 1;
                } else {
                    fd[l] += 1;
                    if (e(j, m) != 0) fn[l] += 1;
                }
            }
    }
    return detail::average_rates(tn, td, fn, fd);
}

/// Matching per the evaluation rule: bijective optimal alignment when
/// the group counts agree, nearest-truth matching otherwise.
template <typename Scalar>
std::vector<int> evaluation_matching(const std::vector<GroupParams<Scalar>>& est,
                                     const std::vector<GroupParams<Scalar>>& truth) {
    if (est.size() == truth.size()) return optimal_matching(est, truth);
    return match_groups(est, truth);
}

}  // namespace hetcggm

#endif  // HETCGGM_METRICS_HPP
