#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "anchorci/numeric.hpp"

namespace anchorci {

// Intermediate correlation left a denominator 1 - rho^2 below tolerance.
class DegenerateCorrelationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Correlations of all unordered pairs, stored in pair-index order
/// (0-based pair (a,b), a<b, lives at a + b(b-1)/2). Values are clamped
/// to +-(1 - 1e-12) so the recursion below stays defined on noisy inputs.
class CorrelationTable {
public:
    CorrelationTable() = default;
    CorrelationTable(int p, std::vector<double> values);

    int node_count() const { return p_; }
    static std::size_t pair_index(int a, int b);
    double rho(int a, int b) const;

private:
    int p_ = 0;
    std::vector<double> values_;
};

/// rho_ij = Sigma_ij / sqrt(Sigma_ii Sigma_jj). Diagonal must be positive.
CorrelationTable correlations(const Eigen::MatrixXd& sigma);

/// Per-level tables of the recursive partial-correlation computation over
/// the working set {i,j} u K, relabeled i->1, j->2, K ascending -> 3..k.
/// levels[t] holds rho_{xy . S} for pairs over the first k-t relabeled
/// nodes after conditioning on the t largest relabeled nodes; the final
/// level is the single value rho_{ij.K}.
struct PeelStack {
    int k = 0;
    std::vector<std::vector<double>> levels;

    double result() const { return levels.back().front(); }
    static std::size_t index(int x, int y);  // 1-based relabeled pair, x<y
};

PeelStack build_peel_stack(const CorrelationTable& table, int i, int j,
                           std::vector<int> cond);

/// Partial correlation via the one-element-at-a-time recursion, peeling
/// conditioning nodes in ascending id order.
double partial_correlation(const CorrelationTable& table, int i, int j,
                           const std::vector<int>& cond);

/// Inversion-based reference: -P_ij / sqrt(P_ii P_jj) where P is the
/// inverse of the covariance restricted to {i,j} u K.
double partial_correlation_oracle(const Eigen::MatrixXd& sigma, int i, int j,
                                  const std::vector<int>& cond);

/// Batch cache for overlapping conditioning sets: memoizes, per sorted
/// conditioning set, the full table of partial correlations over the
/// remaining nodes. Intended for one discovery run; not thread safe.
class PcorrCache {
public:
    explicit PcorrCache(CorrelationTable table);

    double partial(int i, int j, const std::vector<int>& cond);
    const CorrelationTable& base() const { return table_; }
    void clear();

private:
    struct SetTable {
        // rho(a,b . K) for a,b outside K; indexed by full-size pair index.
        std::vector<double> values;
        std::vector<bool> valid;
    };
    const SetTable& table_for(const std::vector<int>& sorted_cond);

    CorrelationTable table_;
    std::map<std::vector<int>, SetTable> cache_;
};

}  // namespace anchorci
