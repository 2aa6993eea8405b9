#include <doctest.h>

#include <cmath>

#include "anchorci/pcorr.hpp"
#include "anchorci/sem.hpp"
#include "support.hpp"

using namespace anchorci;

TEST_CASE("random_dag degenerate cases") {
    Rng rng(1);
    CHECK(random_dag(5, 0.0, rng).edges().empty());
    CHECK(random_dag(1, 3.0, rng).edges().empty());
    // d = p-1 saturates the edge probability at one
    CHECK(random_dag(4, 3.0, rng).edges().size() == 6);
}

TEST_CASE("random_dag mean edge count matches the binomial mean") {
    Rng rng(2024);
    double total = 0.0;
    const int draws = 10000;
    for (int t = 0; t < draws; ++t)
        total += static_cast<double>(random_dag(10, 3.0, rng).edges().size());
    const double mean = total / draws;
    CHECK(mean == doctest::Approx(15.0).epsilon(0.5 / 15.0));  // 15 +- 0.5
}

TEST_CASE("random_sem weight and mean contracts") {
    Rng rng(5);
    const Dag empty(3);
    const SemParams trivial = random_sem(empty, rng);
    CHECK(trivial.weights.isZero(0.0));
    // with B = 0 the noise mean is the implied mean itself
    const MomentPair mom = implied_moments(trivial);
    CHECK((mom.mean - trivial.noise_mean).cwiseAbs().maxCoeff() < 1e-14);

    for (int trial = 0; trial < 20; ++trial) {
        const Dag g = random_dag(8, 3.0, rng);
        const SemParams sem = random_sem(g, rng);
        for (const auto& [a, b] : g.edges()) {
            CHECK(std::fabs(sem.weights(a, b)) >= 0.25);
            CHECK(std::fabs(sem.weights(a, b)) <= 1.0);
        }
        // pi was solved from the drawn target means: the implied mean must
        // reproduce them inside the sampling box, consistent to 1e-10
        const MomentPair m = implied_moments(sem);
        const Eigen::VectorXd back =
            (Eigen::MatrixXd::Identity(8, 8) - sem.weights).transpose() * m.mean;
        CHECK((back - sem.noise_mean).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(m.mean.minCoeff() >= 0.0);
        CHECK(m.mean.maxCoeff() <= 3.0);
    }
}

TEST_CASE("implied moments closed forms") {
    // B = 0: Sigma = Omega, mu = pi
    Dag flat(2);
    SemParams sem{flat, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
                  Eigen::VectorXd::Ones(2)};
    sem.noise_mean << 1.5, -2.0;
    sem.noise_var << 2.0, 3.0;
    const MomentPair m = implied_moments(sem);
    CHECK((m.mean - sem.noise_mean).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(m.covariance(0, 0) == doctest::Approx(2.0));
    CHECK(m.covariance(1, 1) == doctest::Approx(3.0));
    CHECK(m.covariance(0, 1) == doctest::Approx(0.0));

    // two-node chain with weight b: Sigma = [[1, b], [b, 1 + b^2]]
    const double b = 0.6;
    Dag chain(2, {{0, 1}});
    SemParams chain_sem{chain, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
                        Eigen::VectorXd::Ones(2)};
    chain_sem.weights(0, 1) = b;
    const MomentPair cm = implied_moments(chain_sem);
    CHECK(cm.covariance(0, 0) == doctest::Approx(1.0));
    CHECK(cm.covariance(0, 1) == doctest::Approx(b));
    CHECK(cm.covariance(1, 1) == doctest::Approx(1.0 + b * b));
}

TEST_CASE("implied moments are symmetric positive definite") {
    Rng rng(9);
    for (int trial = 0; trial < 25; ++trial) {
        const Dag g = random_dag(7, 3.0, rng);
        const MomentPair m = implied_moments(random_sem(g, rng));
        CHECK((m.covariance - m.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.covariance);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("sampled covariance matches the implied covariance") {
    Rng rng(17);
    const Dag g = random_dag(4, 2.0, rng);
    const SemParams sem = random_sem(g, rng);
    const MomentPair m = implied_moments(sem);
    const Eigen::MatrixXd z = sample_sem(sem, 1000000, rng);
    const Eigen::VectorXd mean = z.colwise().mean();
    const Eigen::MatrixXd centered = z.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / z.rows();
    CHECK(testsupport::max_abs_diff(cov, m.covariance) < 0.01);
    CHECK((mean - m.mean).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("moment errors shrink at the root-n rate") {
    Rng rng(23);
    double cov_err_small = 0.0, cov_err_large = 0.0;
    double mean_err_small = 0.0, mean_err_large = 0.0;
    const int seeds = 30;
    for (int s = 0; s < seeds; ++s) {
        const Dag g = random_dag(5, 2.0, rng);
        const SemParams sem = random_sem(g, rng);
        const MomentPair m = implied_moments(sem);
        const Eigen::MatrixXd z = sample_sem(sem, 32000, rng);
        auto errors_at = [&](long n) {
            const Eigen::MatrixXd head = z.topRows(n);
            const Eigen::VectorXd mean = head.colwise().mean();
            const Eigen::MatrixXd centered = head.rowwise() - mean.transpose();
            const Eigen::MatrixXd cov = (centered.transpose() * centered) / n;
            return std::pair{(mean - m.mean).cwiseAbs().maxCoeff(),
                             testsupport::max_abs_diff(cov, m.covariance)};
        };
        const auto [mean_small, cov_small] = errors_at(2000);
        const auto [mean_large, cov_large] = errors_at(32000);
        mean_err_small += mean_small;
        mean_err_large += mean_large;
        cov_err_small += cov_small;
        cov_err_large += cov_large;
    }
    // sqrt(16) = 4 expected; the factor-1.5 slack per quadrupling compounds
    const double cov_ratio = cov_err_small / cov_err_large;
    CHECK(cov_ratio > 4.0 / 2.0);
    CHECK(cov_ratio < 4.0 * 2.0);
    const double mean_ratio = mean_err_small / mean_err_large;
    CHECK(mean_ratio > 4.0 / 2.0);
    CHECK(mean_ratio < 4.0 * 2.0);
}

TEST_CASE("standard normal sampling passes a KS check") {
    Dag flat(2);
    SemParams sem{flat, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
                  Eigen::VectorXd::Ones(2)};
    Rng rng(31);
    const Eigen::MatrixXd z = sample_sem(sem, 100000, rng);
    for (int c = 0; c < 2; ++c) {
        std::vector<double> xs(z.rows());
        for (long r = 0; r < z.rows(); ++r) xs[r] = z(r, c);
        std::sort(xs.begin(), xs.end());
        double ks = 0.0;
        for (std::size_t r = 0; r < xs.size(); ++r) {
            const double cdf = 0.5 * std::erfc(-xs[r] / std::sqrt(2.0));
            const double hi = static_cast<double>(r + 1) / xs.size();
            const double lo = static_cast<double>(r) / xs.size();
            ks = std::max({ks, std::fabs(cdf - hi), std::fabs(cdf - lo)});
        }
        // K-alpha for p = 0.001 is 1.95; reject only below that p-value
        CHECK(ks < 1.95 / std::sqrt(static_cast<double>(xs.size())));
    }
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    Rng rng_a(77), rng_b(77);
    const Dag g(3, {{0, 1}, {1, 2}});
    Rng setup(5);
    const SemParams sem = random_sem(g, setup);
    const Eigen::MatrixXd a = sample_sem(sem, 50, rng_a);
    const Eigen::MatrixXd b = sample_sem(sem, 50, rng_b);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("faithfulness probe: zero partial correlations are exactly the d-separations") {
    Rng rng(101);
    for (int p = 2; p <= 4; ++p) {
        for (int trial = 0; trial < 10; ++trial) {
            const Dag g = random_dag(p, 2.0, rng);
            const MomentPair m = implied_moments(random_sem(g, rng));
            for (int i = 0; i < p; ++i) {
                for (int j = i + 1; j < p; ++j) {
                    std::vector<int> rest;
                    for (int v = 0; v < p; ++v)
                        if (v != i && v != j) rest.push_back(v);
                    for (int mask = 0; mask < (1 << rest.size()); ++mask) {
                        std::vector<int> cond;
                        for (std::size_t t = 0; t < rest.size(); ++t)
                            if (mask & (1 << t)) cond.push_back(rest[t]);
                        const double rho =
                            partial_correlation_oracle(m.covariance, i, j, cond);
                        if (d_separated(g, i, j, cond)) {
                            CHECK(std::fabs(rho) < 1e-10);
                        } else {
                            CHECK(std::fabs(rho) > 1e-10);
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("sem json round trip") {
    Rng rng(3);
    const Dag g = random_dag(5, 2.0, rng);
    const SemParams sem = random_sem(g, rng);
    const SemParams back = SemParams::from_json(sem.to_json());
    CHECK((back.weights - sem.weights).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((back.noise_mean - sem.noise_mean).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(back.graph.edges() == sem.graph.edges());
}

TEST_CASE("sem json golden fixture") {
    const SemParams sem = SemParams::from_json(R"({
        "p": 2,
        "edges": [[0, 1]],
        "B": [[0.0, 0.6], [0.0, 0.0]],
        "pi": [0.0, 0.0],
        "omega": [1.0, 1.0]
    })");
    const MomentPair m = implied_moments(sem);
    CHECK(m.covariance(0, 1) == doctest::Approx(0.6));
    CHECK(m.covariance(1, 1) == doctest::Approx(1.36));
}
