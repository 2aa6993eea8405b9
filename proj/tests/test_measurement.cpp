#include <doctest.h>

#include <cmath>

#include "anchorci/measurement.hpp"
#include "anchorci/moments.hpp"
#include "support.hpp"

using namespace anchorci;

TEST_CASE("apply_dropout basics") {
    Rng rng(3);
    Eigen::MatrixXd z(4, 2);
    z << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0;

    Eigen::VectorXd keep = Eigen::VectorXd::Ones(2);
    CHECK((apply_dropout(z, keep, rng) - z).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd bad(2);
    bad << 0.5, 0.0;
    CHECK_THROWS_AS(apply_dropout(z, bad, rng), std::invalid_argument);

    // fixed seed determinism
    Rng a(9), b(9);
    Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
    CHECK((apply_dropout(z, half, a) - apply_dropout(z, half, b)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("dropout zero fraction and first moment") {
    Rng rng(41);
    const int n = 100000;
    Eigen::MatrixXd z(n, 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int r = 0; r < n; ++r) {
        z(r, 0) = 2.0 + gauss(rng);
        z(r, 1) = -1.0 + gauss(rng);
    }
    Eigen::VectorXd q(2);
    q << 0.5, 0.8;
    const Eigen::MatrixXd x = apply_dropout(z, q, rng);

    int zeros = 0;
    for (int r = 0; r < n; ++r)
        if (x(r, 0) == 0.0) ++zeros;
    CHECK(static_cast<double>(zeros) / n == doctest::Approx(0.5).epsilon(0.02));

    // E[X_i] = q_i mu_i within three standard errors
    for (int c = 0; c < 2; ++c) {
        const double mu = c == 0 ? 2.0 : -1.0;
        const double expected = q[c] * mu;
        const double got = x.col(c).mean();
        const double second = q[c] * (1.0 + mu * mu);
        const double se = std::sqrt((second - expected * expected) / n);
        CHECK(std::fabs(got - expected) < 3.0 * se);
    }

    // masks of different columns are independent
    double m00 = 0, m01 = 0, m11 = 0;
    for (int r = 0; r < n; ++r) {
        const double a = x(r, 0) == 0.0 ? 0.0 : 1.0;
        const double b = x(r, 1) == 0.0 ? 0.0 : 1.0;
        m00 += a;
        m11 += b;
        m01 += a * b;
    }
    m00 /= n;
    m11 /= n;
    m01 /= n;
    CHECK(std::fabs(m01 - m00 * m11) < 0.005);
}

TEST_CASE("dropout moment map is the direct inversion") {
    MomentVector nu;
    nu.sample_count = 10;
    nu.m1 = Eigen::VectorXd::Constant(1, 1.0);
    nu.m2 = Eigen::MatrixXd::Constant(1, 1, 3.0);
    Eigen::VectorXd q(1);
    q << 0.5;
    const DropoutModel model(q);
    CHECK(model.latent_mean(0, nu) == 2.0);        // 1 / 0.5
    CHECK(model.latent_second(0, 0, nu) == 6.0);   // 3 / 0.5
}

TEST_CASE("dropout moment maps invert exact moments") {
    // exact observed moments from analytic dropout scaling
    Rng rng(59);
    const Eigen::MatrixXd sigma = testsupport::random_spd(4, rng);
    Eigen::VectorXd mu(4);
    mu << 0.5, 1.5, 0.0, 2.5;
    Eigen::VectorXd q(4);
    q << 0.3, 0.9, 0.55, 1.0;

    MomentVector nu;
    nu.sample_count = 1000;
    nu.m1 = q.cwiseProduct(mu);
    nu.m2.resize(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double second = sigma(i, j) + mu[i] * mu[j];
            nu.m2(i, j) = i == j ? q[i] * second : q[i] * q[j] * second;
        }

    const DropoutModel model(q);
    const LatentMoments lm = latent_covariance(nu, model);
    CHECK((lm.mu - mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(testsupport::max_abs_diff(lm.sigma, sigma) < 1e-12);

    // q = 1 reduces the maps to the identity
    const IdentityModel identity(4);
    MomentVector plain = nu;
    plain.m1 = mu;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) plain.m2(i, j) = sigma(i, j) + mu[i] * mu[j];
    const LatentMoments lid = latent_covariance(plain, identity);
    CHECK(testsupport::max_abs_diff(lid.sigma, sigma) < 1e-12);
}

namespace {

// Independent reference for the mean-link inversion.
double bisect_reference(double target, double lambda) {
    double lo = 0.0, hi = 10.0;
    while ((1.0 - std::exp(-lambda * hi * hi)) * hi < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((1.0 - std::exp(-lambda * mid * mid)) * mid < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("dropout parameter estimation") {
    // zero mean column: mu = 0, q clamped to the floor
    Eigen::VectorXd means(3);
    means << 0.0, 0.5, 2.0;
    const DropoutEstimate est = estimate_dropout_params_from_means(means, 1.0);
    CHECK(est.mu[0] == 0.0);
    CHECK(est.q[0] == kRetentionFloor);

    // lambda = 1, m = 0.5 against the reference bisection
    CHECK(est.mu[1] == doctest::Approx(bisect_reference(0.5, 1.0)).epsilon(1e-9));

    // large lambda makes q ~ 1 and mu ~ m
    const DropoutEstimate sat = estimate_dropout_params_from_means(means, 50.0);
    CHECK(std::fabs(sat.mu[2] - 2.0) < 1e-6);
    CHECK(sat.q[2] == doctest::Approx(1.0).epsilon(1e-9));

    Eigen::VectorXd negative(1);
    negative << -0.1;
    CHECK_THROWS_AS(estimate_dropout_params_from_means(negative, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_dropout_params_from_means(means, 0.0),
                    std::invalid_argument);
}

TEST_CASE("mean-link inversion is monotone") {
    for (double lambda : {0.3, 1.0, 4.0}) {
        double previous = -1.0;
        for (double m = 0.0; m <= 5.0; m += 0.25) {
            Eigen::VectorXd means(1);
            means << m;
            const double mu = estimate_dropout_params_from_means(means, lambda).mu[0];
            CHECK(mu >= previous);
            previous = mu;
        }
    }
}

TEST_CASE("select_lambda basics and optimality") {
    Rng rng(71);
    // simulate with a known lambda link
    const double lambda_true = 0.8;
    const int p = 5, n = 4000;
    const Dag g = random_dag(p, 2.0, rng);
    const SemParams sem = random_sem(g, rng, 0.25, 1.0, 0.5, 2.5);
    const MomentPair m = implied_moments(sem);
    Eigen::VectorXd q(p);
    for (int i = 0; i < p; ++i)
        q[i] = std::clamp(1.0 - std::exp(-lambda_true * m.mean[i] * m.mean[i]),
                          kRetentionFloor, 1.0);
    const Eigen::MatrixXd z = sample_sem(sem, n, rng);
    const Eigen::MatrixXd x = apply_dropout(z, q, rng);

    // singleton grid returns its element
    CHECK(select_lambda(x, {0.37}) == 0.37);

    const std::vector<double> grid{0.2, 0.4, 0.8, 1.6, 3.2};
    const double chosen = select_lambda(x, grid);
    // infeasible lambdas (mapped variance not positive) count as unbounded
    // shrinkage and can never win
    auto alpha_for = [&](double lambda) -> double {
        try {
            const DropoutEstimate est = estimate_dropout_params(x, lambda);
            const LatentMoments lm = latent_covariance(x, DropoutModel(est.q));
            return shrink_psd(lm.sigma, lm.observed_cov).second;
        } catch (const std::invalid_argument&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    const double chosen_alpha = alpha_for(chosen);
    CHECK(std::isfinite(chosen_alpha));
    for (double lambda : grid) CHECK(chosen_alpha <= alpha_for(lambda) + 1e-12);

    CHECK_THROWS_AS(select_lambda(x, {}), std::invalid_argument);
}

TEST_CASE("select_lambda tie-break picks the smallest lambda") {
    // clean data, no dropout: every lambda gives alpha* = 0
    Rng rng(83);
    Dag flat(3);
    const SemParams sem = random_sem(flat, rng, 0.25, 1.0, 1.0, 3.0);
    const Eigen::MatrixXd z = sample_sem(sem, 5000, rng);
    const double chosen = select_lambda(z, {2.0, 1.0, 3.0});
    CHECK(chosen == 1.0);
}
