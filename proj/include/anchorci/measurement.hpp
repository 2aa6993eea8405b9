#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "anchorci/sem.hpp"

namespace anchorci {

/// First- and second-order sample moments of the observed columns,
/// m1[i] = mean(X_i) and m2(i,j) = mean(X_i X_j). All downstream moment
/// maps and plug-in variance formulas are evaluated from these.
struct MomentVector {
    Eigen::VectorXd m1;
    Eigen::MatrixXd m2;
    long sample_count = 0;

    static MomentVector from_samples(const Eigen::MatrixXd& samples);
};

/// Measurement-error abstraction: maps exact observed moments of the
/// per-node monomials back to latent first and second moments. The maps
/// must be continuously differentiable and invert the corruption exactly
/// on exact inputs.
class MeasurementModel {
public:
    virtual ~MeasurementModel() = default;
    virtual int dim() const = 0;
    virtual double latent_mean(int i, const MomentVector& nu) const = 0;
    virtual double latent_second(int i, int j, const MomentVector& nu) const = 0;
};

/// Identity measurement (no corruption): latent moments equal observed.
class IdentityModel final : public MeasurementModel {
public:
    explicit IdentityModel(int p) : p_(p) {}
    int dim() const override { return p_; }
    double latent_mean(int i, const MomentVector& nu) const override { return nu.m1[i]; }
    double latent_second(int i, int j, const MomentVector& nu) const override {
        return nu.m2(i, j);
    }

private:
    int p_;
};

/// Multiplicative Bernoulli dropout: each observation keeps its value with
/// probability q_i and is zeroed otherwise. Moment maps are
/// E[Z_i] = E[X_i]/q_i, E[Z_i^2] = E[X_i^2]/q_i, E[Z_iZ_j] = E[X_iX_j]/(q_iq_j).
class DropoutModel final : public MeasurementModel {
public:
    explicit DropoutModel(Eigen::VectorXd retention);

    int dim() const override { return static_cast<int>(q_.size()); }
    double latent_mean(int i, const MomentVector& nu) const override {
        return nu.m1[i] / q_[i];
    }
    double latent_second(int i, int j, const MomentVector& nu) const override {
        return i == j ? nu.m2(i, i) / q_[i] : nu.m2(i, j) / (q_[i] * q_[j]);
    }
    const Eigen::VectorXd& retention() const { return q_; }

private:
    Eigen::VectorXd q_;
};

inline constexpr double kRetentionFloor = 0.01;

/// Apply dropout corruption cellwise: keep with probability q_i, else zero.
Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& samples,
                              const Eigen::VectorXd& q, Rng& rng);

struct DropoutEstimate {
    Eigen::VectorXd mu;
    Eigen::VectorXd q;
};

/// Joint estimation of latent means and retention probabilities under the
/// mean-dropout link q_i = 1 - exp(-lambda mu_i^2): for each column solve
/// mean(X_i) = (1 - exp(-lambda mu^2)) mu for mu >= 0 by bracketed
/// bisection (tolerance 1e-10), then clamp q to [kRetentionFloor, 1].
DropoutEstimate estimate_dropout_params(const Eigen::MatrixXd& samples, double lambda);
DropoutEstimate estimate_dropout_params_from_means(const Eigen::VectorXd& column_means,
                                                   double lambda);

/// Pick the grid lambda whose fitted dropout model needs the least
/// shrinkage to make the latent covariance PSD; ties go to the smaller
/// lambda.
double select_lambda(const Eigen::MatrixXd& samples, const std::vector<double>& grid);

}  // namespace anchorci
