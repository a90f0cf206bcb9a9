#include "hetcggm/gamma_update.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace hetcggm;

namespace {

// X with exactly orthonormal-scaled columns: C_x = X'X/n = I.
Dataset<double> orthonormal_design_dataset(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0, 1);
    Vector<double> x(n);
    for (Index i = 0; i < n; ++i) x[i] = normal(rng);
    x.array() -= x.mean();
    x *= std::sqrt(double(n)) / x.norm();
    Dataset<double> ds;
    ds.n = n;
    ds.p = p;
    ds.q = 1;
    ds.X.resize(n, 2);
    ds.X.col(0).setOnes();
    ds.X.col(1) = x;
    ds.Y.resize(n, p);
    for (Index i = 0; i < ds.Y.size(); ++i) ds.Y(i) = normal(rng);
    return ds;
}

std::vector<WeightedMoments<double>> uniform_moments(const Dataset<double>& ds, int K) {
    const Vector<double> w = Vector<double>::Constant(ds.n, 1.0 / K);
    std::vector<WeightedMoments<double>> mom(K);
    for (int l = 0; l < K; ++l) mom[l] = weighted_moments(ds, w);
    return mom;
}

double group_quadratic_loss(const Dataset<double>& ds, const Matrix<double>& resp,
                            const std::vector<GroupParams<double>>& groups) {
    double total = 0;
    for (std::size_t l = 0; l < groups.size(); ++l) {
        const Matrix<double> resid = ds.Y - ds.X * groups[l].gamma.transpose();
        for (Index i = 0; i < ds.n; ++i)
            total += resp(i, l) *
                     (resid.row(i) * groups[l].theta * resid.row(i).transpose()).value();
    }
    return total / (2 * ds.n);
}

}  // namespace

TEST_CASE("fusion_weights worked examples") {
    Hyperparams<double> hp;
    hp.K = 2;
    hp.lambda3 = 1.0;

    GroupParams<double> g;
    g.gamma = Matrix<double>::Zero(2, 2);
    g.theta = Matrix<double>::Identity(2, 2);
    Dataset<double> ds = orthonormal_design_dataset(10, 2, 1);
    const auto mom = uniform_moments(ds, 2);

    // identical groups: tau = 0, floored at lqa_floor
    LqaWorkspace<double> ws = make_lqa_workspace(ds, {g, g}, mom, hp);
    CHECK(ws.fusion_w(0, 1) == doctest::Approx(1.0 / hp.lqa_floor).epsilon(1e-12));
    CHECK(ws.fusion_w(0, 0) == 0.0);
    CHECK(ws.fusion_w(0, 1) == ws.fusion_w(1, 0));

    // tau beyond the MCP plateau: weight 0
    GroupParams<double> far = g;
    far.gamma.array() += 10.0 / std::sqrt(double(far.gamma.size()));
    LqaWorkspace<double> ws2 = make_lqa_workspace(ds, {g, far}, mom, hp);
    CHECK(ws2.tau(0, 1) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(ws2.fusion_w(0, 1) == 0.0);

    // lambda3 = 0: no fusion anywhere
    Hyperparams<double> hp0 = hp;
    hp0.lambda3 = 0;
    LqaWorkspace<double> ws3 = make_lqa_workspace(ds, {g, far}, mom, hp0);
    CHECK(ws3.fusion_w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("update_gamma_entry: orthonormal design reduces to the normal equations") {
    const Dataset<double> ds = orthonormal_design_dataset(20, 2, 42);
    Hyperparams<double> hp;
    hp.K = 1;

    GroupParams<double> g;
    g.gamma = Matrix<double>::Zero(2, 2);
    g.theta = Matrix<double>::Identity(2, 2);
    const Vector<double> w = Vector<double>::Ones(ds.n);
    std::vector<WeightedMoments<double>> mom = {weighted_moments(ds, w)};
    LqaWorkspace<double> ws = make_lqa_workspace(ds, {g}, mom, hp);

    const Matrix<double> ols =
        ((ds.X.transpose() * ds.X).ldlt().solve(ds.X.transpose() * ds.Y)).transpose();
    for (Index j = 0; j < 2; ++j)
        for (Index m = 0; m < 2; ++m)
            CHECK(update_gamma_entry(j, m, 0, ws, hp) == doctest::Approx(ols(j, m)).epsilon(1e-8));
}

TEST_CASE("update_gamma_entry absorbing state and intercept-only mean") {
    // previous value 0 with lambda2 > 0 stays at exact zero
    const Dataset<double> ds = orthonormal_design_dataset(20, 2, 7);
    Hyperparams<double> hp;
    hp.K = 1;
    hp.lambda2 = 0.5;
    GroupParams<double> g;
    g.gamma = Matrix<double>::Zero(2, 2);
    g.theta = Matrix<double>::Identity(2, 2);
    const Vector<double> w = Vector<double>::Ones(ds.n);
    std::vector<WeightedMoments<double>> mom = {weighted_moments(ds, w)};
    LqaWorkspace<double> ws = make_lqa_workspace(ds, {g}, mom, hp);
    CHECK(update_gamma_entry(0, 0, 0, ws, hp) == 0.0);
    CHECK(update_gamma_entry(1, 1, 0, ws, hp) == 0.0);

    // p = 1, q = 0: the update is the weighted mean of y
    Dataset<double> d1;
    d1.n = 5;
    d1.p = 1;
    d1.q = 0;
    d1.Y.resize(5, 1);
    d1.Y << 1, 2, 3, 4, 10;
    d1.X = Matrix<double>::Ones(5, 1);
    Hyperparams<double> hp0;
    hp0.K = 1;
    GroupParams<double> g1;
    g1.gamma = Matrix<double>::Zero(1, 1);
    g1.theta = Matrix<double>::Identity(1, 1);
    std::vector<WeightedMoments<double>> mom1 = {
        weighted_moments(d1, Vector<double>(Vector<double>::Ones(5)))};
    LqaWorkspace<double> ws1 = make_lqa_workspace(d1, {g1}, mom1, hp0);
    CHECK(update_gamma_entry(0, 0, 0, ws1, hp0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("update_gamma_all decreases the quadratic loss with all penalties off") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0, 1);
    const Dataset<double> ds = orthonormal_design_dataset(40, 3, 5);
    Hyperparams<double> hp;
    hp.K = 1;
    GroupParams<double> g;
    g.gamma.resize(3, 2);
    for (Index i = 0; i < g.gamma.size(); ++i) g.gamma(i) = normal(rng);
    g.theta = Matrix<double>::Identity(3, 3);
    const Matrix<double> resp = Matrix<double>::Ones(ds.n, 1);
    std::vector<WeightedMoments<double>> mom = {
        weighted_moments(ds, Vector<double>(resp.col(0)))};
    LqaWorkspace<double> ws = make_lqa_workspace(ds, {g}, mom, hp);
    const auto out = update_gamma_all(ds, ws, hp);
    std::vector<GroupParams<double>> after = {g};
    after[0].gamma = out[0];
    CHECK(group_quadratic_loss(ds, resp, after) < group_quadratic_loss(ds, resp, {g}));
}

TEST_CASE("update_gamma_all: huge fusion pulls two groups strictly closer") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0, 1);
    const Dataset<double> ds = orthonormal_design_dataset(40, 3, 19);
    Hyperparams<double> hp;
    hp.K = 2;
    hp.lambda3 = 1e6;
    std::vector<GroupParams<double>> gs(2);
    for (auto& g : gs) {
        g.gamma.resize(3, 2);
        for (Index i = 0; i < g.gamma.size(); ++i) g.gamma(i) = normal(rng);
        g.theta = Matrix<double>::Identity(3, 3);
    }
    const auto mom = uniform_moments(ds, 2);
    LqaWorkspace<double> ws = make_lqa_workspace(ds, gs, mom, hp);
    const auto out = update_gamma_all(ds, ws, hp);
    const double before = (gs[0].gamma - gs[1].gamma).norm();
    const double after = (out[0] - out[1]).norm();
    CHECK(after < before);
}

TEST_CASE("update_gamma_all: zero data with lambda2 > 0 is a fixed point") {
    Dataset<double> ds = orthonormal_design_dataset(20, 2, 3);
    ds.Y.setZero();
    Hyperparams<double> hp;
    hp.K = 1;
    hp.lambda2 = 0.3;
    GroupParams<double> g;
    g.gamma = Matrix<double>::Zero(2, 2);
    g.theta = Matrix<double>::Identity(2, 2);
    std::vector<WeightedMoments<double>> mom = {
        weighted_moments(ds, Vector<double>(Vector<double>::Ones(ds.n)))};
    LqaWorkspace<double> ws = make_lqa_workspace(ds, {g}, mom, hp);
    const auto out = update_gamma_all(ds, ws, hp);
    CHECK(out[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Jacobi sweep is independent of coordinate visit order") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal(0, 1);
    const Dataset<double> ds = orthonormal_design_dataset(25, 3, 77);
    Hyperparams<double> hp;
    hp.K = 2;
    hp.lambda2 = 0.1;
    hp.lambda3 = 0.2;
    std::vector<GroupParams<double>> gs(2);
    for (auto& g : gs) {
        g.gamma.resize(3, 2);
        for (Index i = 0; i < g.gamma.size(); ++i) g.gamma(i) = normal(rng);
        g.theta = Matrix<double>::Identity(3, 3);
        g.theta(0, 1) = g.theta(1, 0) = 0.3;
    }
    const auto mom = uniform_moments(ds, 2);
    LqaWorkspace<double> ws = make_lqa_workspace(ds, gs, mom, hp);
    const auto sweep = update_gamma_all(ds, ws, hp);

    struct Coord {
        Index j, m, l;
    };
    std::vector<Coord> coords;
    for (Index l = 0; l < 2; ++l)
        for (Index j = 0; j < 3; ++j)
            for (Index m = 0; m < 2; ++m) coords.push_back({j, m, l});
    std::shuffle(coords.begin(), coords.end(), rng);
    std::vector<Matrix<double>> scrambled = {gs[0].gamma, gs[1].gamma};
    for (const Coord& c : coords)
        scrambled[c.l](c.j, c.m) = update_gamma_entry(c.j, c.m, c.l, ws, hp);
    CHECK(scrambled[0] == sweep[0]);
    CHECK(scrambled[1] == sweep[1]);
}

TEST_CASE("iterated sweeps converge to OLS with penalties off") {
    const Dataset<double> ds = orthonormal_design_dataset(30, 2, 55);
    // replace the regressor with a correlated (non-orthogonal) column
    Dataset<double> d = ds;
    d.X(3, 1) += 0.8;
    d.X(7, 1) -= 1.1;
    Hyperparams<double> hp;
    hp.K = 1;
    GroupParams<double> g;
    g.gamma = Matrix<double>::Zero(2, 2);
    g.theta = Matrix<double>::Identity(2, 2);
    std::vector<WeightedMoments<double>> mom = {
        weighted_moments(d, Vector<double>(Vector<double>::Ones(d.n)))};
    std::vector<GroupParams<double>> cur = {g};
    for (int sweep = 0; sweep < 200; ++sweep) {
        LqaWorkspace<double> ws = make_lqa_workspace(d, cur, mom, hp);
        cur[0].gamma = update_gamma_all(d, ws, hp)[0];
    }
    const Matrix<double> ols =
        ((d.X.transpose() * d.X).ldlt().solve(d.X.transpose() * d.Y)).transpose();
    CHECK((cur[0].gamma - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sweep does not increase the LQA-majorized objective") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        const Dataset<double> ds = orthonormal_design_dataset(40, 3, 1000 + trial);
        Hyperparams<double> hp;
        hp.K = 2;
        hp.lambda2 = 0.05;
        hp.lambda3 = 0.1;
        std::vector<GroupParams<double>> gs(2);
        for (auto& g : gs) {
            g.gamma.resize(3, 2);
            for (Index i = 0; i < g.gamma.size(); ++i) g.gamma(i) = normal(rng) + 2;  // above floor
            g.theta = Matrix<double>::Identity(3, 3);
        }
        const auto mom = uniform_moments(ds, 2);
        const Matrix<double> resp = Matrix<double>::Constant(ds.n, 2, 0.5);
        LqaWorkspace<double> ws = make_lqa_workspace(ds, gs, mom, hp);
        const auto out = update_gamma_all(ds, ws, hp);

        auto surrogate = [&](const std::vector<Matrix<double>>& gamma) {
            std::vector<GroupParams<double>> tmp = gs;
            tmp[0].gamma = gamma[0];
            tmp[1].gamma = gamma[1];
            double val = group_quadratic_loss(ds, resp, tmp);
            const McpSpec<double> m2{hp.lambda2, hp.a};
            for (int l = 0; l < 2; ++l)
                for (Index i = 0; i < gamma[l].size(); ++i) {
                    const double prev = std::abs(gs[l].gamma(i));
                    val += 0.5 * (mcp_deriv(prev, m2) / std::max(prev, hp.lqa_floor)) *
                           gamma[l](i) * gamma[l](i);
                }
            val += 0.5 * ws.fusion_w(0, 1) * (gamma[0] - gamma[1]).squaredNorm();
            return val;
        };
        const double before = surrogate({gs[0].gamma, gs[1].gamma});
        const double after = surrogate(out);
        CHECK(after <= before + 1e-10);
    }
}
