#include "anchorci/citest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anchorci {

double fisher_z(double rho) {
    if (!(std::fabs(rho) < 1.0))
        throw std::invalid_argument("fisher_z: |rho| must be below one");
    return 0.5 * std::log((1.0 + rho) / (1.0 - rho));
}

bool ci_decide(double statistic, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("ci_decide: alpha must lie in (0,1)");
    return std::fabs(statistic) <= normal_quantile(1.0 - 0.5 * alpha);
}

double gaussian_ci_stat(double rho_hat, long n, int cond_size, bool dof_correction) {
    const double effective =
        dof_correction ? static_cast<double>(n - cond_size - 3) : static_cast<double>(n);
    if (!(effective > 0.0))
        throw std::invalid_argument("gaussian_ci_stat: nonpositive effective sample count");
    return std::sqrt(effective) * fisher_z(rho_hat);
}

double dropout_tau_tilde(double rho, double q_i, double q_j) {
    const double r2 = rho * rho;
    return 1.0 / (q_i * q_j) + 2.0 * r2 / (q_i * q_j) - 2.25 * r2 / q_j -
           2.25 * r2 / q_i + 0.5 * r2 + r2 * r2;
}

namespace {

void check_retention(double q) {
    if (!(q > 0.0 && q <= 1.0))
        throw std::invalid_argument("retention probability must lie in (0,1]");
}

constexpr double kQuadTol = 1e-9;
constexpr double kCacheEdge = 0.9;
constexpr double kCacheStep = 5e-4;

}  // namespace

StabilizingTransform::StabilizingTransform(double q_i, double q_j)
    : q_i_(q_i), q_j_(q_j), is_identity_q_(q_i == 1.0 && q_j == 1.0) {
    check_retention(q_i);
    check_retention(q_j);
}

double StabilizingTransform::evaluate_exact(double rho_abs) const {
    const double qi = q_i_, qj = q_j_;
    return integrate(
        [qi, qj](double t) { return 1.0 / std::sqrt(dropout_tau_tilde(t, qi, qj)); }, 0.0,
        rho_abs, kQuadTol);
}

double StabilizingTransform::operator()(double rho) const {
    if (!(std::fabs(rho) < 1.0))
        throw std::invalid_argument("StabilizingTransform: |rho| must be below one");
    if (is_identity_q_) return fisher_z(rho);
    const double sign = rho < 0.0 ? -1.0 : 1.0;
    const double abs = std::fabs(rho);
    if (cache_) {
        if (abs <= cache_edge_) return sign * (*cache_)(abs);
        const double qi = q_i_, qj = q_j_;
        const double tail = integrate(
            [qi, qj](double t) { return 1.0 / std::sqrt(dropout_tau_tilde(t, qi, qj)); },
            cache_edge_, abs, kQuadTol);
        return sign * (cache_edge_value_ + tail);
    }
    return sign * evaluate_exact(abs);
}

void StabilizingTransform::enable_cache() {
    if (is_identity_q_ || cache_) return;
    const int knots = static_cast<int>(std::lround(kCacheEdge / kCacheStep)) + 1;
    std::vector<double> xs(knots), ys(knots);
    const double qi = q_i_, qj = q_j_;
    const auto integrand = [qi, qj](double t) {
        return 1.0 / std::sqrt(dropout_tau_tilde(t, qi, qj));
    };
    double acc = 0.0;
    xs[0] = 0.0;
    ys[0] = 0.0;
    for (int g = 1; g < knots; ++g) {
        const double lo = (g - 1) * kCacheStep;
        const double hi = g * kCacheStep;
        acc += integrate(integrand, lo, hi, 1e-13);
        xs[g] = hi;
        ys[g] = acc;
    }
    cache_edge_ = xs.back();
    cache_edge_value_ = ys.back();
    cache_.emplace(std::move(xs), std::move(ys));
}

double dropout_stat_stabilizing(double rho_hat, long n,
                                const StabilizingTransform& transform) {
    return std::sqrt(static_cast<double>(n)) * transform(rho_hat);
}

double dropout_stat_stabilizing(double rho_hat, long n, double q_i, double q_j) {
    return dropout_stat_stabilizing(rho_hat, n, StabilizingTransform(q_i, q_j));
}

namespace {

// Gaussian product moments up to order four, mean mu and covariance sigma.
struct GaussianMoments {
    const Eigen::VectorXd& mu;
    const Eigen::MatrixXd& sigma;

    double m1(int a) const { return mu[a]; }
    double m2(int a, int b) const { return sigma(a, b) + mu[a] * mu[b]; }
    double m3(int a, int b, int c) const {
        return mu[a] * mu[b] * mu[c] + mu[a] * sigma(b, c) + mu[b] * sigma(a, c) +
               mu[c] * sigma(a, b);
    }
    double m4(int a, int b, int c, int d) const {
        return sigma(a, b) * sigma(c, d) + sigma(a, c) * sigma(b, d) +
               sigma(a, d) * sigma(b, c) + mu[a] * mu[b] * sigma(c, d) +
               mu[a] * mu[c] * sigma(b, d) + mu[a] * mu[d] * sigma(b, c) +
               mu[b] * mu[c] * sigma(a, d) + mu[b] * mu[d] * sigma(a, c) +
               mu[c] * mu[d] * sigma(a, b) + mu[a] * mu[b] * mu[c] * mu[d];
    }

    double moment(const int* idx, int count) const {
        switch (count) {
            case 1: return m1(idx[0]);
            case 2: return m2(idx[0], idx[1]);
            case 3: return m3(idx[0], idx[1], idx[2]);
            case 4: return m4(idx[0], idx[1], idx[2], idx[3]);
            default: throw std::logic_error("GaussianMoments: unsupported order");
        }
    }
};

}  // namespace

DropoutAsymCov::DropoutAsymCov(Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                               Eigen::VectorXd q, double alpha)
    : mu_(std::move(mu)), sigma_(std::move(sigma)), q_(std::move(q)), alpha_(alpha) {
    const auto p = mu_.size();
    if (sigma_.rows() != p || sigma_.cols() != p || q_.size() != p)
        throw std::invalid_argument("DropoutAsymCov: dimension mismatch");
    for (int i = 0; i < p; ++i) check_retention(q_[i]);
    if (!(alpha_ >= 0.0 && alpha_ <= 1.0))
        throw std::invalid_argument("DropoutAsymCov: alpha must lie in [0,1]");
}

// Covariance of the observed monomials X_{u1} (or X_{u1}X_{u2}) and
// X_{v1} (or X_{v1}X_{v2}). Dropout makes every observed product moment a
// q-scaled Gaussian moment, with each distinct node's q counted once.
double DropoutAsymCov::monomial_cov(int u1, int u2, int v1, int v2) const {
    const GaussianMoments gm{mu_, sigma_};
    const auto x_moment = [&](const int* idx, int count) {
        double qprod = 1.0;
        for (int s = 0; s < count; ++s) {
            bool seen = false;
            for (int t = 0; t < s; ++t) seen = seen || idx[t] == idx[s];
            if (!seen) qprod *= q_[idx[s]];
        }
        return qprod * gm.moment(idx, count);
    };
    int joint[4];
    int jn = 0;
    int left[2];
    int ln = 0;
    int right[2];
    int rn = 0;
    for (int v : {u1, u2}) {
        if (v >= 0) {
            joint[jn++] = v;
            left[ln++] = v;
        }
    }
    for (int v : {v1, v2}) {
        if (v >= 0) {
            joint[jn++] = v;
            right[rn++] = v;
        }
    }
    return x_moment(joint, jn) - x_moment(left, ln) * x_moment(right, rn);
}

DropoutAsymCov::PairGradient DropoutAsymCov::gradient(int a, int b) const {
    // Correlation from the (possibly shrunk) covariance as a function of
    // the observed moments m_a, m_b, m_aa, m_bb, m_ab:
    //   u   = c_ab (m_ab - m_a m_b),      c_ab = (1-alpha)/(q_a q_b) + alpha
    //   v_a = e_a m_aa - f_a m_a^2,       e_a = (1-alpha)/q_a + alpha,
    //                                     f_a = (1-alpha)/q_a^2 + alpha
    //   w   = u / sqrt(v_a v_b)
    const double qa = q_[a], qb = q_[b];
    const double c_ab = (1.0 - alpha_) / (qa * qb) + alpha_;
    const double e_a = (1.0 - alpha_) / qa + alpha_;
    const double f_a = (1.0 - alpha_) / (qa * qa) + alpha_;
    const double e_b = (1.0 - alpha_) / qb + alpha_;
    const double f_b = (1.0 - alpha_) / (qb * qb) + alpha_;

    const double m_a = qa * mu_[a];
    const double m_b = qb * mu_[b];
    const double m_aa = qa * (sigma_(a, a) + mu_[a] * mu_[a]);
    const double m_bb = qb * (sigma_(b, b) + mu_[b] * mu_[b]);
    const double m_ab = qa * qb * (sigma_(a, b) + mu_[a] * mu_[b]);

    const double u = c_ab * (m_ab - m_a * m_b);
    const double v_a = e_a * m_aa - f_a * m_a * m_a;
    const double v_b = e_b * m_bb - f_b * m_b * m_b;
    if (!(v_a > 0.0 && v_b > 0.0))
        throw DegenerateVarianceError("DropoutAsymCov: nonpositive mapped variance");
    const double root = std::sqrt(v_a * v_b);

    PairGradient g;
    g.dab = c_ab / root;
    g.da = -c_ab * m_b / root + u * f_a * m_a / (v_a * root);
    g.db = -c_ab * m_a / root + u * f_b * m_b / (v_b * root);
    g.daa = -0.5 * u * e_a / (v_a * root);
    g.dbb = -0.5 * u * e_b / (v_b * root);
    return g;
}

double DropoutAsymCov::entry(int a, int b, int c, int d) const {
    const auto p = mu_.size();
    for (int v : {a, b, c, d}) {
        if (v < 0 || v >= p) throw std::out_of_range("DropoutAsymCov: node out of range");
    }
    if (a == b || c == d)
        throw std::invalid_argument("DropoutAsymCov: pairs need distinct nodes");

    const PairGradient g1 = gradient(a, b);
    const PairGradient g2 = gradient(c, d);
    // Monomial supports: (a), (b), (aa), (bb), (ab) and likewise for (c,d).
    const int mono1[5][2] = {{a, -1}, {b, -1}, {a, a}, {b, b}, {a, b}};
    const int mono2[5][2] = {{c, -1}, {d, -1}, {c, c}, {d, d}, {c, d}};
    const double grad1[5] = {g1.da, g1.db, g1.daa, g1.dbb, g1.dab};
    const double grad2[5] = {g2.da, g2.db, g2.daa, g2.dbb, g2.dab};

    double total = 0.0;
    for (int s = 0; s < 5; ++s) {
        if (grad1[s] == 0.0) continue;
        for (int t = 0; t < 5; ++t) {
            if (grad2[t] == 0.0) continue;
            total += grad1[s] * grad2[t] *
                     monomial_cov(mono1[s][0], mono1[s][1], mono2[t][0], mono2[t][1]);
        }
    }
    return total;
}

Eigen::MatrixXd DropoutAsymCov::base_matrix(const std::vector<int>& nodes) const {
    const int k = static_cast<int>(nodes.size());
    const int pairs = k * (k - 1) / 2;
    Eigen::MatrixXd base(pairs, pairs);
    // Pair-index layout over the relabeled node list.
    std::vector<std::pair<int, int>> order(pairs);
    for (int y = 1; y < k; ++y)
        for (int x = 0; x < y; ++x)
            order[CorrelationTable::pair_index(x, y)] = {nodes[x], nodes[y]};
    for (int s = 0; s < pairs; ++s) {
        for (int t = s; t < pairs; ++t) {
            const double value =
                entry(order[s].first, order[s].second, order[t].first, order[t].second);
            base(s, t) = value;
            base(t, s) = value;
        }
    }
    return base;
}

double base_asym_cov(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                     const Eigen::VectorXd& q, std::pair<int, int> pair1,
                     std::pair<int, int> pair2) {
    return DropoutAsymCov(mu, sigma, q, 0.0)
        .entry(pair1.first, pair1.second, pair2.first, pair2.second);
}

double shrink_adjusted_base_cov(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                const Eigen::VectorXd& q, double alpha_shrink,
                                std::pair<int, int> pair1, std::pair<int, int> pair2) {
    return DropoutAsymCov(mu, sigma, q, alpha_shrink)
        .entry(pair1.first, pair1.second, pair2.first, pair2.second);
}

double propagate_asym_cov(const CorrelationTable& table, const Eigen::MatrixXd& base,
                          int i, int j, const std::vector<int>& cond) {
    const int k = static_cast<int>(cond.size()) + 2;
    const int pairs = k * (k - 1) / 2;
    if (base.rows() != pairs || base.cols() != pairs)
        throw std::invalid_argument("propagate_asym_cov: base matrix size mismatch");
    if (cond.empty()) return base(0, 0);

    const PeelStack stack = build_peel_stack(table, i, j, cond);
    Eigen::MatrixXd cov = base;
    // Level m consumes the correlations conditioned on the nodes already
    // peeled (stack level k-m) and contracts with the sparse Jacobian rows
    //   a_xy at (x,y), b_xy,x at (x,m), b_xy,y at (y,m).
    for (int m = k; m >= 3; --m) {
        const std::vector<double>& rho = stack.levels[static_cast<std::size_t>(k - m)];
        const int rows = (m - 1) * (m - 2) / 2;
        const int cols = m * (m - 1) / 2;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, cols);
        for (int y = 2; y <= m - 1; ++y) {
            for (int x = 1; x < y; ++x) {
                const double r0 = rho[PeelStack::index(x, y)];
                const double r1 = rho[PeelStack::index(x, m)];
                const double r2 = rho[PeelStack::index(y, m)];
                const double dx = 1.0 - r1 * r1;
                const double dy = 1.0 - r2 * r2;
                if (dx < 1e-12 || dy < 1e-12) {
                    throw DegenerateCorrelationError(
                        "propagate_asym_cov: coefficient denominator underflow");
                }
                const auto row = static_cast<Eigen::Index>(PeelStack::index(x, y));
                jac(row, static_cast<Eigen::Index>(PeelStack::index(x, y))) =
                    1.0 / std::sqrt(dx * dy);
                jac(row, static_cast<Eigen::Index>(PeelStack::index(x, m))) =
                    (r0 * r1 - r2) / std::sqrt(dx * dx * dx * dy);
                jac(row, static_cast<Eigen::Index>(PeelStack::index(y, m))) =
                    (r0 * r2 - r1) / std::sqrt(dx * dy * dy * dy);
            }
        }
        cov = (jac * cov * jac.transpose()).eval();
    }
    return cov(0, 0);
}

NormalizingStat::NormalizingStat(CiContext context) : context_(std::move(context)) {
    const int p = static_cast<int>(context_.mu.size());
    std::vector<int> all(p);
    for (int v = 0; v < p; ++v) all[v] = v;
    const DropoutAsymCov model(context_.mu, context_.sigma, context_.q,
                               context_.alpha_shrink);
    full_base_ = model.base_matrix(all);
}

double NormalizingStat::tau(int i, int j, const std::vector<int>& cond) const {
    std::vector<int> sorted = cond;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> nodes{i, j};
    nodes.insert(nodes.end(), sorted.begin(), sorted.end());
    const int k = static_cast<int>(nodes.size());
    const int pairs = k * (k - 1) / 2;
    Eigen::MatrixXd base(pairs, pairs);
    for (int y = 1; y < k; ++y)
        for (int x = 0; x < y; ++x)
            for (int w = 1; w < k; ++w)
                for (int v = 0; v < w; ++v)
                    base(CorrelationTable::pair_index(x, y),
                         CorrelationTable::pair_index(v, w)) =
                        full_base_(CorrelationTable::pair_index(nodes[x], nodes[y]),
                                   CorrelationTable::pair_index(nodes[v], nodes[w]));
    return propagate_asym_cov(context_.rho, base, i, j, sorted);
}

double NormalizingStat::statistic(double rho_hat, int i, int j,
                                  const std::vector<int>& cond) const {
    const double variance = tau(i, j, cond);
    if (!(variance > 1e-12))
        throw DegenerateVarianceError("dropout_stat_normalizing: nonpositive variance");
    return std::sqrt(static_cast<double>(context_.n)) * rho_hat / std::sqrt(variance);
}

double dropout_stat_normalizing(double rho_hat, const CiContext& context, int i, int j,
                                const std::vector<int>& cond) {
    return NormalizingStat(context).statistic(rho_hat, i, j, cond);
}

}  // namespace anchorci
