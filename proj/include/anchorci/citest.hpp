#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "anchorci/numeric.hpp"
#include "anchorci/pcorr.hpp"

namespace anchorci {

// Plug-in asymptotic variance of a partial correlation came out nonpositive.
class DegenerateVarianceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

enum class CiStatKind { kGaussian, kDropoutStabilizing, kDropoutNormalizing };

/// Fisher z-transform, (1/2) log((1+rho)/(1-rho)). Requires |rho| < 1.
double fisher_z(double rho);

/// Two-sided decision at level alpha: independent iff |T| <= Phi^-1(1-alpha/2).
bool ci_decide(double statistic, double alpha);

/// sqrt(n) z_f(rho_hat); with dof_correction the classical sqrt(n-|K|-3)
/// factor is used instead (comparison mode only).
double gaussian_ci_stat(double rho_hat, long n, int cond_size = 0,
                        bool dof_correction = false);

/// Asymptotic variance of a sqrt(n)-scaled correlation estimated under
/// dropout with zero latent means and no conditioning, as a function of the
/// correlation alone.
double dropout_tau_tilde(double rho, double q_i, double q_j);

/// Variance stabilizing transform for dropout correlations:
/// z(rho) = int_0^rho dt / sqrt(tau_tilde(t)), evaluated by adaptive
/// quadrature (absolute tolerance 1e-9). At q_i = q_j = 1 this is exactly
/// the Fisher z-transform and is evaluated in closed form.
class StabilizingTransform {
public:
    StabilizingTransform(double q_i, double q_j);

    double operator()(double rho) const;

    /// Grid-cached variant for hot loops; interpolation error stays below
    /// 1e-7 and values outside the cached range fall back to quadrature.
    void enable_cache();

    double q_i() const { return q_i_; }
    double q_j() const { return q_j_; }

private:
    double evaluate_exact(double rho_abs) const;

    double q_i_, q_j_;
    bool is_identity_q_;  // q == 1, Fisher-z closed form
    std::optional<MonotoneCubic> cache_;
    double cache_edge_ = 0.0;
    double cache_edge_value_ = 0.0;
};

/// sqrt(n) z(rho_hat) with the stabilizing transform of the tested pair.
double dropout_stat_stabilizing(double rho_hat, long n,
                                const StabilizingTransform& transform);
double dropout_stat_stabilizing(double rho_hat, long n, double q_i, double q_j);

/// Asymptotic covariance entries of sqrt(n)-scaled latent correlations
/// under the dropout model, obtained by the delta method applied to the
/// CLT for the observed monomial moments. The evaluation point is the
/// moment vector implied by (mu, sigma, q); alpha > 0 accounts for
/// correlations taken from the shrunk matrix (1-alpha) Sigma_hat + alpha S_hat.
class DropoutAsymCov {
public:
    DropoutAsymCov(Eigen::VectorXd mu, Eigen::MatrixXd sigma, Eigen::VectorXd q,
                   double alpha = 0.0);

    /// Covariance of sqrt(n) rho_ab and sqrt(n) rho_cd (a!=b, c!=d).
    double entry(int a, int b, int c, int d) const;

    /// Matrix over all unordered pairs of `nodes` in pair-index order.
    Eigen::MatrixXd base_matrix(const std::vector<int>& nodes) const;

    double alpha() const { return alpha_; }

private:
    struct PairGradient {
        // d w_ab / d (m_a, m_b, m_aa, m_bb, m_ab) at the evaluation point.
        double da, db, daa, dbb, dab;
    };
    PairGradient gradient(int a, int b) const;
    double monomial_cov(int u1, int u2, int v1, int v2) const;  // -1 marks "absent"

    Eigen::VectorXd mu_;
    Eigen::MatrixXd sigma_;
    Eigen::VectorXd q_;
    double alpha_;
};

/// Base-case entry at conditioning level zero (alpha = 0 path).
double base_asym_cov(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                     const Eigen::VectorXd& q, std::pair<int, int> pair1,
                     std::pair<int, int> pair2);

/// Base-case entry adjusted for a fixed shrinkage coefficient.
double shrink_adjusted_base_cov(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                const Eigen::VectorXd& q, double alpha_shrink,
                                std::pair<int, int> pair1, std::pair<int, int> pair2);

/// Propagate a base covariance matrix through the partial-correlation
/// recursion to the asymptotic variance of sqrt(n) rho_hat_{ij.K}.
/// `base` must cover the pairs of {i,j} u K (relabeled, pair-index order)
/// and `table` supplies the correlations the recursion coefficients are
/// evaluated at.
double propagate_asym_cov(const CorrelationTable& table, const Eigen::MatrixXd& base,
                          int i, int j, const std::vector<int>& cond);

/// Evaluation context for the normalizing statistic: latent moment
/// estimates, retention probabilities, the shrinkage coefficient in
/// effect, and the correlation table queried by the recursion.
struct CiContext {
    long n = 0;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;  // operative latent covariance (shrunk when alpha>0)
    Eigen::VectorXd q;
    double alpha_shrink = 0.0;
    CorrelationTable rho;
};

/// Normalizing statistic engine: precomputes the base covariance matrix
/// over all node pairs once, then serves per-query variances and
/// statistics T = sqrt(n) rho_hat / sqrt(tau_{ij.K}).
class NormalizingStat {
public:
    explicit NormalizingStat(CiContext context);

    double tau(int i, int j, const std::vector<int>& cond) const;
    double statistic(double rho_hat, int i, int j, const std::vector<int>& cond) const;
    const CiContext& context() const { return context_; }

private:
    CiContext context_;
    Eigen::MatrixXd full_base_;
};

double dropout_stat_normalizing(double rho_hat, const CiContext& context, int i, int j,
                                const std::vector<int>& cond);

}  // namespace anchorci
