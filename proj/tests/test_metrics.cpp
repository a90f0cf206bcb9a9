#include "hetcggm/metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace hetcggm;

namespace {

GroupParams<double> scalar_group(double gamma, double theta) {
    GroupParams<double> g;
    g.gamma = Matrix<double>::Constant(1, 1, gamma);
    g.theta = Matrix<double>::Constant(1, 1, theta);
    return g;
}

}  // namespace

TEST_CASE("adjusted_rand_index worked examples") {
    const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));
    const std::vector<int> ones{0, 0, 0, 0}, singletons{0, 1, 2, 3};
    CHECK(adjusted_rand_index(ones, singletons) == 0.0);
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::ari_pairwise(a, b)));
    CHECK_THROWS_AS(adjusted_rand_index({0}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0}), std::invalid_argument);
}

TEST_CASE("adjusted_rand_index equals pair counting on all partitions of n <= 5") {
    for (int n = 2; n <= 5; ++n) {
        const auto parts = oracle::all_partitions(n);
        for (const auto& a : parts)
            for (const auto& b : parts) {
                const double got = adjusted_rand_index(a, b);
                const double want = oracle::ari_pairwise(a, b);
                CHECK(got == doctest::Approx(want).epsilon(1e-12));
                CHECK(rand_index(a, b) ==
                      doctest::Approx(oracle::rand_pairwise(a, b)).epsilon(1e-12));
            }
    }
}

TEST_CASE("adjusted_rand_index is invariant under relabeling") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> a(10), b(10);
        for (int i = 0; i < 10; ++i) {
            a[i] = static_cast<int>(rng() % 3);
            b[i] = static_cast<int>(rng() % 3);
        }
        std::vector<int> a_relabeled(10);
        const int perm[3] = {2, 0, 1};
        for (int i = 0; i < 10; ++i) a_relabeled[i] = perm[a[i]];
        CHECK(adjusted_rand_index(a, b) ==
              doctest::Approx(adjusted_rand_index(a_relabeled, b)).epsilon(1e-12));
    }
}

TEST_CASE("match_groups worked examples") {
    std::vector<GroupParams<double>> truth = {scalar_group(0, 1), scalar_group(5, 1),
                                              scalar_group(10, 1)};
    CHECK(match_groups(truth, truth) == std::vector<int>{0, 1, 2});

    std::vector<GroupParams<double>> reversed = {truth[2], truth[1], truth[0]};
    CHECK(match_groups(reversed, truth) == std::vector<int>{2, 1, 0});

    // equidistant estimate: tie goes to the smaller index
    std::vector<GroupParams<double>> mid = {scalar_group(2.5, 1)};
    CHECK(match_groups(mid, truth) == std::vector<int>{0});
}

TEST_CASE("rmse worked examples") {
    std::vector<GroupParams<double>> truth = {scalar_group(0, 1), scalar_group(5, 2),
                                              scalar_group(10, 3)};
    const auto id = match_groups(truth, truth);
    CHECK(rmse_theta(truth, truth, id) == 0.0);
    CHECK(rmse_gamma(truth, truth, id) == 0.0);

    // single group with a Frobenius-2 perturbation
    std::vector<GroupParams<double>> est = {scalar_group(0, 3)};  // |3 - 1| = 2
    CHECK(rmse_theta(est, {truth[0]}, {0}) == doctest::Approx(2.0));

    // k_hat = 2 vs K0 = 3 with hand-built 1x1 matrices: enumerate matches
    std::vector<GroupParams<double>> est2 = {scalar_group(0.4, 1.1), scalar_group(9.3, 2.8)};
    const auto matching = match_groups(est2, truth);
    CHECK(matching == std::vector<int>{0, 2});
    const double want =
        ((est2[0].theta - truth[0].theta).norm() + (est2[1].theta - truth[2].theta).norm()) / 2;
    CHECK(rmse_theta(est2, truth, matching) == doctest::Approx(want).epsilon(1e-14));
    const double want_g =
        ((est2[0].gamma - truth[0].gamma).norm() + (est2[1].gamma - truth[2].gamma).norm()) / 2;
    CHECK(rmse_gamma(est2, truth, matching) == doctest::Approx(want_g).epsilon(1e-14));
}

TEST_CASE("optimal_matching beats greedy nearest on a crossing configuration") {
    // est0 is nearest to truth1 and est1 nearest to truth1 as well; the
    // optimal bijection must split them.
    std::vector<GroupParams<double>> truth = {scalar_group(0, 1), scalar_group(4, 1)};
    std::vector<GroupParams<double>> est = {scalar_group(3, 1), scalar_group(4.5, 1)};
    const auto perm = optimal_matching(est, truth);
    CHECK(perm == std::vector<int>{0, 1});
    CHECK(perm != match_groups(est, truth));  // greedy would send both to truth 1
}

TEST_CASE("tpr_fpr worked examples") {
    GroupParams<double> t;
    t.gamma = Matrix<double>::Zero(3, 2);
    t.gamma(0, 0) = 1;
    t.theta = Matrix<double>::Identity(3, 3);
    t.theta(0, 1) = t.theta(1, 0) = 0.5;  // one true edge among C(3,2) = 3 slots

    // identical support: (1, 0)
    auto [tpr0, fpr0] = tpr_fpr_theta<double>({t}, {t}, {0});
    CHECK(tpr0 == 1.0);
    CHECK(fpr0 == 0.0);
    auto [tprg, fprg] = tpr_fpr_gamma<double>({t}, {t}, {0});
    CHECK(tprg == 1.0);
    CHECK(fprg == 0.0);

    // dense estimate: (1, 1)
    GroupParams<double> dense = t;
    dense.theta.setOnes();
    dense.gamma.setOnes();
    auto [tpr1, fpr1] = tpr_fpr_theta<double>({dense}, {t}, {0});
    CHECK(tpr1 == 1.0);
    CHECK(fpr1 == 1.0);

    // the true edge plus one false edge: (1, 1/2)
    GroupParams<double> est = t;
    est.theta(1, 2) = est.theta(2, 1) = 0.3;
    auto [tpr2, fpr2] = tpr_fpr_theta<double>({est}, {t}, {0});
    CHECK(tpr2 == 1.0);
    CHECK(fpr2 == doctest::Approx(0.5));
}

TEST_CASE("tpr_fpr degenerate denominators are excluded or NaN") {
    GroupParams<double> diag;
    diag.gamma = Matrix<double>::Zero(2, 2);
    diag.theta = Matrix<double>::Identity(2, 2);  // no true edges
    GroupParams<double> est = diag;
    est.theta(0, 1) = est.theta(1, 0) = 0.2;
    auto [tpr, fpr] = tpr_fpr_theta<double>({est}, {diag}, {0});
    CHECK(std::isnan(tpr));  // no true nonzeros anywhere
    CHECK(fpr == doctest::Approx(1.0));

    GroupParams<double> full = diag;
    full.theta.setConstant(1.0);  // no true zeros
    auto [tpr2, fpr2] = tpr_fpr_theta<double>({est}, {full}, {0});
    CHECK(std::isnan(fpr2));
    CHECK(tpr2 == doctest::Approx(1.0));
}

TEST_CASE("rates stay within [0, 1] on random supports") {
    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> unif(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        auto random_group = [&]() {
            GroupParams<double> g;
            g.gamma = Matrix<double>::Zero(3, 2);
            g.theta = Matrix<double>::Identity(3, 3);
            for (Index i = 0; i < g.gamma.size(); ++i)
                if (unif(rng) < 0.5) g.gamma(i) = unif(rng);
            for (Index j = 0; j < 3; ++j)
                for (Index m = j + 1; m < 3; ++m)
                    if (unif(rng) < 0.5) g.theta(j, m) = g.theta(m, j) = unif(rng);
            return g;
        };
        std::vector<GroupParams<double>> est = {random_group(), random_group()};
        std::vector<GroupParams<double>> truth = {random_group(), random_group()};
        const auto matching = evaluation_matching(est, truth);
        const auto [tpr, fpr] = tpr_fpr_theta(est, truth, matching);
        if (!std::isnan(tpr)) {
            CHECK(tpr >= 0.0);
            CHECK(tpr <= 1.0);
        }
        if (!std::isnan(fpr)) {
            CHECK(fpr >= 0.0);
            CHECK(fpr <= 1.0);
        }
    }
}
