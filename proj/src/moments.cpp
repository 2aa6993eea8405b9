#include "anchorci/moments.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace anchorci {

double min_eigenvalue(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym,
                                                          Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> map_latent_moments(
    const MomentVector& nu, const MeasurementModel& model) {
    const int p = static_cast<int>(nu.m1.size());
    if (model.dim() != p)
        throw std::invalid_argument("map_latent_moments: model dimension mismatch");
    Eigen::VectorXd mu(p);
    for (int i = 0; i < p; ++i) mu[i] = model.latent_mean(i, nu);
    Eigen::MatrixXd sigma(p, p);
    for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
            const double value = model.latent_second(i, j, nu) - mu[i] * mu[j];
            sigma(i, j) = value;
            sigma(j, i) = value;
        }
    }
    return {std::move(mu), std::move(sigma)};
}

LatentMoments latent_covariance(const MomentVector& nu, const MeasurementModel& model) {
    const int p = static_cast<int>(nu.m1.size());
    if (nu.sample_count < 2)
        throw std::invalid_argument("latent_covariance: need at least two samples");

    LatentMoments lm;
    lm.nu = nu;
    lm.observed_cov = nu.m2 - nu.m1 * nu.m1.transpose();
    for (int i = 0; i < p; ++i) {
        if (lm.observed_cov(i, i) <= 1e-12) {
            throw std::invalid_argument(
                "latent_covariance: observed column " + std::to_string(i) +
                " has zero variance");
        }
    }

    std::tie(lm.mu, lm.sigma) = map_latent_moments(nu, model);
    for (int i = 0; i < p; ++i) {
        if (lm.sigma(i, i) <= 1e-12) {
            throw std::invalid_argument(
                "latent_covariance: mapped variance of column " + std::to_string(i) +
                " is not positive; correlations are undefined");
        }
    }
    return lm;
}

LatentMoments latent_covariance(const Eigen::MatrixXd& samples,
                                const MeasurementModel& model) {
    return latent_covariance(MomentVector::from_samples(samples), model);
}

namespace {

// Feasibility threshold: essentially-PSD up to a scale-aware rounding slack.
bool essentially_psd(const Eigen::MatrixXd& m, double scale) {
    return min_eigenvalue(m) >= -1e-12 * scale;
}

std::pair<Eigen::MatrixXd, double> bisect_combination(const Eigen::MatrixXd& sigma,
                                                      const Eigen::MatrixXd& target) {
    const double scale =
        std::max(1.0, std::max(sigma.cwiseAbs().maxCoeff(), target.cwiseAbs().maxCoeff()));
    if (essentially_psd(sigma, scale)) return {sigma, 0.0};
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::MatrixXd combo = (1.0 - mid) * sigma + mid * target;
        if (essentially_psd(combo, scale)) hi = mid;
        else lo = mid;
    }
    return {(1.0 - hi) * sigma + hi * target, hi};
}

}  // namespace

std::pair<Eigen::MatrixXd, double> shrink_psd(const Eigen::MatrixXd& sigma,
                                              const Eigen::MatrixXd& observed_cov) {
    if (sigma.rows() != sigma.cols() || observed_cov.rows() != observed_cov.cols() ||
        sigma.rows() != observed_cov.rows())
        throw std::invalid_argument("shrink_psd: shape mismatch");
    const double scale = std::max(1.0, observed_cov.cwiseAbs().maxCoeff());
    if (min_eigenvalue(observed_cov) <= 1e-10 * scale) {
        return ledoit_identity_shrink(sigma);
    }
    return bisect_combination(sigma, observed_cov);
}

std::pair<Eigen::MatrixXd, double> ledoit_identity_shrink(const Eigen::MatrixXd& sigma,
                                                          double target_floor) {
    if (sigma.rows() != sigma.cols())
        throw std::invalid_argument("ledoit_identity_shrink: matrix must be square");
    const int p = static_cast<int>(sigma.rows());
    double diag_scale = sigma.diagonal().cwiseAbs().mean();
    if (diag_scale <= 0.0) diag_scale = 1.0;
    const Eigen::MatrixXd target =
        diag_scale * Eigen::MatrixXd::Identity(p, p);

    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if (min_eigenvalue(sigma) >= target_floor - 1e-12 * scale) return {sigma, 0.0};
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::MatrixXd combo = (1.0 - mid) * sigma + mid * target;
        if (min_eigenvalue(combo) >= target_floor - 1e-12 * scale) hi = mid;
        else lo = mid;
    }
    return {(1.0 - hi) * sigma + hi * target, hi};
}

LatentMoments estimate_latent_moments(const Eigen::MatrixXd& samples,
                                      const MeasurementModel& model) {
    LatentMoments lm = latent_covariance(samples, model);
    auto [shrunk, alpha] = shrink_psd(lm.sigma, lm.observed_cov);
    lm.shrunk = std::move(shrunk);
    lm.alpha_star = alpha;
    lm.shrunk_set = true;
    return lm;
}

}  // namespace anchorci
