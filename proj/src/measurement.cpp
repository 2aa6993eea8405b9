#include "anchorci/measurement.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "anchorci/moments.hpp"
#include "anchorci/numeric.hpp"

namespace anchorci {

MomentVector MomentVector::from_samples(const Eigen::MatrixXd& samples) {
    const long n = samples.rows();
    if (n < 1) throw std::invalid_argument("MomentVector: empty sample");
    MomentVector nu;
    nu.sample_count = n;
    nu.m1 = samples.colwise().mean();
    nu.m2 = (samples.transpose() * samples) / static_cast<double>(n);
    nu.m2 = 0.5 * (nu.m2 + nu.m2.transpose()).eval();
    return nu;
}

DropoutModel::DropoutModel(Eigen::VectorXd retention) : q_(std::move(retention)) {
    for (int i = 0; i < q_.size(); ++i) {
        if (!(q_[i] > 0.0 && q_[i] <= 1.0))
            throw std::invalid_argument("DropoutModel: retention must lie in (0,1]");
    }
}

Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& samples,
                              const Eigen::VectorXd& q, Rng& rng) {
    if (q.size() != samples.cols())
        throw std::invalid_argument("apply_dropout: retention length mismatch");
    for (int i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0 && q[i] <= 1.0))
            throw std::invalid_argument("apply_dropout: retention must lie in (0,1]");
    }
    Eigen::MatrixXd out = samples;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    // Row-major traversal so masks stay independent per cell and per seed.
    for (long r = 0; r < out.rows(); ++r) {
        for (long c = 0; c < out.cols(); ++c) {
            if (unif(rng) >= q[c]) out(r, c) = 0.0;
        }
    }
    return out;
}

namespace {

double dropout_mean_link(double mu, double lambda) {
    return (1.0 - std::exp(-lambda * mu * mu)) * mu;
}

// Solve (1 - exp(-lambda mu^2)) mu = target for mu >= 0. The left side is
// continuous, zero at zero and strictly increasing, so a sign bracket
// always exists.
double solve_latent_mean(double target, double lambda) {
    constexpr double kTol = 1e-10;
    if (target == 0.0) return 0.0;
    double lo = 0.0;
    double hi = std::max(10.0 * target, 10.0);
    int expansions = 0;
    while (dropout_mean_link(hi, lambda) < target) {
        hi *= 2.0;
        if (++expansions > 200)
            throw NumericalError("estimate_dropout_params: no bracket found");
    }
    while (hi - lo > kTol) {
        const double mid = 0.5 * (lo + hi);
        if (dropout_mean_link(mid, lambda) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

DropoutEstimate estimate_dropout_params_from_means(const Eigen::VectorXd& column_means,
                                                   double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("estimate_dropout_params: lambda must be positive");
    const int p = static_cast<int>(column_means.size());
    DropoutEstimate est{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)};
    for (int i = 0; i < p; ++i) {
        const double m = column_means[i];
        if (m < 0.0) {
            throw std::invalid_argument(
                "estimate_dropout_params: negative column mean at column " +
                std::to_string(i));
        }
        est.mu[i] = solve_latent_mean(m, lambda);
        const double q = 1.0 - std::exp(-lambda * est.mu[i] * est.mu[i]);
        est.q[i] = std::clamp(q, kRetentionFloor, 1.0);
    }
    return est;
}

DropoutEstimate estimate_dropout_params(const Eigen::MatrixXd& samples, double lambda) {
    return estimate_dropout_params_from_means(samples.colwise().mean(), lambda);
}

double select_lambda(const Eigen::MatrixXd& samples, const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
    const MomentVector nu = MomentVector::from_samples(samples);
    double best_lambda = std::numeric_limits<double>::quiet_NaN();
    double best_alpha = std::numeric_limits<double>::infinity();
    std::exception_ptr first_failure;
    for (double lambda : grid) {
        double alpha;
        try {
            const DropoutEstimate est =
                estimate_dropout_params_from_means(nu.m1, lambda);
            const DropoutModel model(est.q);
            LatentMoments lm = latent_covariance(nu, model);
            alpha = shrink_psd(lm.sigma, lm.observed_cov).second;
        } catch (const std::invalid_argument&) {
            // A lambda whose fitted q cannot produce usable variances needs
            // unbounded shrinkage; it loses to every viable candidate.
            if (!first_failure) first_failure = std::current_exception();
            continue;
        }
        if (alpha < best_alpha - 1e-15 ||
            (std::abs(alpha - best_alpha) <= 1e-15 && lambda < best_lambda)) {
            best_alpha = alpha;
            best_lambda = lambda;
        }
    }
    if (std::isnan(best_lambda)) {
        if (first_failure) std::rethrow_exception(first_failure);
        throw NumericalError("select_lambda: no viable lambda in grid");
    }
    return best_lambda;
}

}  // namespace anchorci
