#pragma once

#include <utility>

#include <Eigen/Dense>

#include "anchorci/measurement.hpp"

namespace anchorci {

/// Latent moment estimates recovered from corrupted observations:
/// moment-mapped mean and covariance, the plain observed covariance, and
/// (after shrinkage) the PSD matrix actually used downstream.
struct LatentMoments {
    Eigen::VectorXd mu;           // moment-mapped latent mean
    Eigen::MatrixXd sigma;        // moment-mapped latent covariance, symmetric
    Eigen::MatrixXd observed_cov; // plain covariance of the observed columns
    Eigen::MatrixXd shrunk;       // PSD combination, set by shrinkage
    double alpha_star = 0.0;      // shrinkage coefficient in [0,1]
    MomentVector nu;              // sample moments everything was mapped from
    bool shrunk_set = false;
};

/// Raw moment map: latent mean and covariance from observed sample
/// moments, with no validity checks on the result.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> map_latent_moments(
    const MomentVector& nu, const MeasurementModel& model);

/// Moment-map estimation of the latent mean and covariance. Throws
/// std::invalid_argument when an observed column has (numerically) zero
/// variance or a mapped diagonal entry is not positive.
LatentMoments latent_covariance(const MomentVector& nu, const MeasurementModel& model);
LatentMoments latent_covariance(const Eigen::MatrixXd& samples,
                                const MeasurementModel& model);

/// Minimal convex combination (1-a) Sigma + a S that is PSD, found by
/// bisection on a to width 1e-6. Requires S positive definite; falls back
/// to ledoit_identity_shrink otherwise.
std::pair<Eigen::MatrixXd, double> shrink_psd(const Eigen::MatrixXd& sigma,
                                              const Eigen::MatrixXd& observed_cov);

/// Minimal convex combination with a scaled identity reaching the given
/// eigenvalue floor. The identity is scaled by the mean absolute diagonal.
std::pair<Eigen::MatrixXd, double> ledoit_identity_shrink(const Eigen::MatrixXd& sigma,
                                                          double target_floor = 0.0);

/// Full pipeline step: latent_covariance followed by shrink_psd.
LatentMoments estimate_latent_moments(const Eigen::MatrixXd& samples,
                                      const MeasurementModel& model);

double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace anchorci
