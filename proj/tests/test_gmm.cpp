#include <catch2/catch_amalgamated.hpp>

#include "ctxguard/gmm.hpp"

using namespace ctxguard;

namespace {

MatrixXd gaussian_cloud(int n, const VectorXd& mu, double sd, Rng& rng) {
    MatrixXd X(n, mu.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < mu.size(); ++j) X(i, j) = mu(j) + sd * rng.normal();
    return X;
}

GmmModel manual_model(std::vector<double> w, std::vector<VectorXd> mu,
                      std::vector<MatrixXd> cov) {
    GmmModel m;
    m.weights = std::move(w);
    m.means = std::move(mu);
    m.covariances = std::move(cov);
    m.preprocessing = PcaTransform::identity(static_cast<int>(m.means[0].size()));
    m.prepare();
    return m;
}

}  // namespace

TEST_CASE("closed-form score of a standard normal component") {
    // log N(0; 0, 1) = -0.5 log(2 pi) and log N(2; 0, 1) = -0.5 log(2 pi) - 2
    const GmmModel m = manual_model({1.0}, {VectorXd::Zero(1)},
                                    {MatrixXd::Identity(1, 1)});
    const double log_norm = -0.5 * std::log(2.0 * 3.14159265358979323846);
    CHECK(m.score_reduced(VectorXd::Zero(1)) == Catch::Approx(log_norm).epsilon(1e-12));
    VectorXd x(1);
    x << 2.0;
    CHECK(m.score_reduced(x) == Catch::Approx(log_norm - 2.0).epsilon(1e-12));
}

TEST_CASE("closed-form score of an equal two-component mixture") {
    VectorXd mu1(1), mu2(1), x(1);
    mu1 << -2.0;
    mu2 << 2.0;
    x << 2.0;
    const GmmModel m = manual_model(
        {0.5, 0.5}, {mu1, mu2},
        {MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)});
    // 0.5 N(2; -2, 1) + 0.5 N(2; 2, 1), independently computed
    const double expect =
        std::log(0.5 * std::exp(-0.5 * 16.0) / std::sqrt(2.0 * M_PI) +
                 0.5 / std::sqrt(2.0 * M_PI));
    CHECK(m.score_reduced(x) == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("closed-form score with anisotropic covariance") {
    VectorXd mu(2), x(2);
    mu << 1.0, -1.0;
    x << 2.0, 0.0;
    MatrixXd cov(2, 2);
    cov << 4.0, 0.0, 0.0, 0.25;
    const GmmModel m = manual_model({1.0}, {mu}, {cov});
    // -0.5 (2 log 2pi + log|Sigma| + d' Sigma^-1 d), d = (1, 1)
    const double expect =
        -0.5 * (2.0 * std::log(2.0 * M_PI) + std::log(1.0) + (0.25 + 4.0));
    CHECK(m.score_reduced(x) == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fit recovers two well-separated components") {
    Rng rng(11);
    VectorXd a(2), b(2);
    a << -5.0, 0.0;
    b << 5.0, 0.0;
    MatrixXd X(1200, 2);
    X << gaussian_cloud(600, a, 1.0, rng), gaussian_cloud(600, b, 1.0, rng);

    const GmmModel m = fit_gmm(X, 2, 7);
    REQUIRE(m.k() == 2);
    std::vector<VectorXd> mus = m.means;
    std::sort(mus.begin(), mus.end(),
              [](const VectorXd& u, const VectorXd& v) { return u(0) < v(0); });
    CHECK((mus[0] - a).norm() < 0.2);
    CHECK((mus[1] - b).norm() < 0.2);
    for (double w : m.weights) CHECK(w == Catch::Approx(0.5).margin(0.05));
    for (const auto& cov : m.covariances) {
        CHECK(cov(0, 0) == Catch::Approx(1.0).margin(0.25));
        CHECK(cov(1, 1) == Catch::Approx(1.0).margin(0.25));
    }
}

TEST_CASE("training log-likelihood trace is non-decreasing") {
    Rng rng(21);
    VectorXd c = VectorXd::Zero(3);
    MatrixXd X(500, 3);
    X << gaussian_cloud(250, c, 1.0, rng),
        gaussian_cloud(250, VectorXd::Ones(3) * 3.0, 0.5, rng);
    const GmmModel m = fit_gmm(X, 3, 13);
    REQUIRE(m.loglik_trace.size() >= 2);
    for (std::size_t i = 1; i < m.loglik_trace.size(); ++i)
        CHECK(m.loglik_trace[i] >= m.loglik_trace[i - 1] - 1e-9);
}

TEST_CASE("weights sum to one and covariances stay positive definite") {
    Rng rng(31);
    const MatrixXd X = gaussian_cloud(400, VectorXd::Zero(4), 1.0, rng);
    const GmmModel m = fit_gmm(X, 8, 5);
    double wsum = 0.0;
    for (double w : m.weights) {
        CHECK(w > 0.0);
        wsum += w;
    }
    CHECK(wsum == Catch::Approx(1.0).epsilon(1e-9));
    for (const auto& cov : m.covariances) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("same seed gives a bit-identical fit") {
    Rng rng(41);
    const MatrixXd X = gaussian_cloud(300, VectorXd::Zero(3), 1.0, rng);
    const GmmModel a = fit_gmm(X, 4, 99);
    const GmmModel b = fit_gmm(X, 4, 99);
    REQUIRE(a.k() == b.k());
    for (int j = 0; j < a.k(); ++j) {
        CHECK(a.weights[j] == b.weights[j]);
        CHECK(a.means[j] == b.means[j]);
        CHECK(a.covariances[j] == b.covariances[j]);
    }
}

TEST_CASE("ridge keeps near-singular clusters scoreable") {
    // points almost on a line in 2-d: covariance is near-singular without
    // regularization
    Rng rng(51);
    MatrixXd X(200, 2);
    for (int i = 0; i < 200; ++i) {
        const double t = rng.normal();
        X(i, 0) = t;
        X(i, 1) = 2.0 * t + 1e-9 * rng.normal();
    }
    const GmmModel m = fit_gmm(X, 1, 3);
    CHECK(std::isfinite(m.score_reduced(VectorXd::Zero(2))));
}

TEST_CASE("input validation errors") {
    Rng rng(61);
    const MatrixXd X = gaussian_cloud(10, VectorXd::Zero(2), 1.0, rng);
    CHECK_THROWS_AS(fit_gmm(X, 0, 1), NumericError);
    CHECK_THROWS_AS(fit_gmm(X, 11, 1), NumericError);
    MatrixXd bad = X;
    bad(3, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit_gmm(bad, 2, 1), NumericError);
}

TEST_CASE("scoring an unprepared model throws") {
    GmmModel m;
    m.weights = {1.0};
    m.means = {VectorXd::Zero(2)};
    m.covariances = {MatrixXd::Identity(2, 2)};
    CHECK_THROWS_AS(m.score_reduced(VectorXd::Zero(2)), NumericError);
}
