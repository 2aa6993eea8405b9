#include "anchorci/pcorr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anchorci {

namespace {

constexpr double kClamp = 1.0 - 1e-12;
constexpr double kDenomFloor = 1e-12;

double clamp_rho(double value) { return std::clamp(value, -kClamp, kClamp); }

double peel(double rho_xy, double rho_xl, double rho_yl) {
    const double dx = 1.0 - rho_xl * rho_xl;
    const double dy = 1.0 - rho_yl * rho_yl;
    if (dx < kDenomFloor || dy < kDenomFloor) {
        throw DegenerateCorrelationError(
            "partial_correlation: denominator underflow, |rho| ~ 1");
    }
    return (rho_xy - rho_xl * rho_yl) / (std::sqrt(dx) * std::sqrt(dy));
}

void check_query(int p, int i, int j, const std::vector<int>& cond) {
    auto check = [&](int v) {
        if (v < 0 || v >= p) throw std::out_of_range("partial correlation: node out of range");
    };
    check(i);
    check(j);
    if (i == j) throw std::invalid_argument("partial correlation: i and j must differ");
    for (int v : cond) {
        check(v);
        if (v == i || v == j)
            throw std::invalid_argument("partial correlation: conditioning set hits endpoint");
    }
}

}  // namespace

CorrelationTable::CorrelationTable(int p, std::vector<double> values)
    : p_(p), values_(std::move(values)) {
    if (static_cast<std::size_t>(p_) * (p_ - 1) / 2 != values_.size())
        throw std::invalid_argument("CorrelationTable: value count mismatch");
    for (double& v : values_) v = clamp_rho(v);
}

std::size_t CorrelationTable::pair_index(int a, int b) {
    if (a > b) std::swap(a, b);
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(b) * (b - 1) / 2;
}

double CorrelationTable::rho(int a, int b) const {
    if (a == b) return 1.0;
    if (a < 0 || b < 0 || a >= p_ || b >= p_)
        throw std::out_of_range("CorrelationTable: node out of range");
    return values_[pair_index(a, b)];
}

CorrelationTable correlations(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols())
        throw std::invalid_argument("correlations: matrix must be square");
    const int p = static_cast<int>(sigma.rows());
    for (int i = 0; i < p; ++i) {
        if (!(sigma(i, i) > 0.0))
            throw std::invalid_argument("correlations: nonpositive diagonal entry");
    }
    std::vector<double> values(static_cast<std::size_t>(p) * (p - 1) / 2);
    for (int b = 1; b < p; ++b) {
        for (int a = 0; a < b; ++a) {
            values[CorrelationTable::pair_index(a, b)] =
                sigma(a, b) / std::sqrt(sigma(a, a) * sigma(b, b));
        }
    }
    return CorrelationTable(p, std::move(values));
}

std::size_t PeelStack::index(int x, int y) {
    // 1-based relabeled pair (x < y), same layout as CorrelationTable.
    return static_cast<std::size_t>(x - 1) + static_cast<std::size_t>(y - 1) * (y - 2) / 2;
}

PeelStack build_peel_stack(const CorrelationTable& table, int i, int j,
                           std::vector<int> cond) {
    check_query(table.node_count(), i, j, cond);
    std::sort(cond.begin(), cond.end());
    if (std::adjacent_find(cond.begin(), cond.end()) != cond.end())
        throw std::invalid_argument("partial correlation: duplicate conditioning node");

    const int k = static_cast<int>(cond.size()) + 2;
    std::vector<int> label(k);  // relabeled index (1-based) -> original node
    label[0] = i;
    label[1] = j;
    for (int t = 0; t < k - 2; ++t) label[2 + t] = cond[t];

    PeelStack stack;
    stack.k = k;
    std::vector<double> current(static_cast<std::size_t>(k) * (k - 1) / 2);
    for (int y = 2; y <= k; ++y)
        for (int x = 1; x < y; ++x)
            current[PeelStack::index(x, y)] = table.rho(label[x - 1], label[y - 1]);
    stack.levels.push_back(current);

    // Condition on relabeled nodes k, k-1, ..., 3 in turn; since the
    // relabeling is ascending this peels the smallest original id last.
    for (int m = k; m >= 3; --m) {
        std::vector<double> next(static_cast<std::size_t>(m - 1) * (m - 2) / 2);
        for (int y = 2; y <= m - 1; ++y) {
            for (int x = 1; x < y; ++x) {
                next[PeelStack::index(x, y)] =
                    peel(current[PeelStack::index(x, y)], current[PeelStack::index(x, m)],
                         current[PeelStack::index(y, m)]);
            }
        }
        stack.levels.push_back(next);
        current = std::move(next);
    }
    return stack;
}

double partial_correlation(const CorrelationTable& table, int i, int j,
                           const std::vector<int>& cond) {
    if (cond.empty()) {
        check_query(table.node_count(), i, j, cond);
        return table.rho(i, j);
    }
    return build_peel_stack(table, i, j, cond).result();
}

double partial_correlation_oracle(const Eigen::MatrixXd& sigma, int i, int j,
                                  const std::vector<int>& cond) {
    check_query(static_cast<int>(sigma.rows()), i, j, cond);
    std::vector<int> nodes{i, j};
    nodes.insert(nodes.end(), cond.begin(), cond.end());
    const int m = static_cast<int>(nodes.size());
    Eigen::MatrixXd sub(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) sub(a, b) = sigma(nodes[a], nodes[b]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (!lu.isInvertible())
        throw NumericalError("partial_correlation_oracle: singular restriction");
    const Eigen::MatrixXd precision = lu.inverse();
    return -precision(0, 1) / std::sqrt(precision(0, 0) * precision(1, 1));
}

PcorrCache::PcorrCache(CorrelationTable table) : table_(std::move(table)) {}

void PcorrCache::clear() { cache_.clear(); }

const PcorrCache::SetTable& PcorrCache::table_for(const std::vector<int>& sorted_cond) {
    auto found = cache_.find(sorted_cond);
    if (found != cache_.end()) return found->second;

    const int p = table_.node_count();
    const std::size_t pairs = static_cast<std::size_t>(p) * (p - 1) / 2;
    SetTable result;
    result.values.assign(pairs, 0.0);
    result.valid.assign(pairs, false);
    std::vector<bool> in_cond(p, false);
    for (int v : sorted_cond) in_cond[v] = true;

    if (sorted_cond.empty()) {
        for (int b = 1; b < p; ++b)
            for (int a = 0; a < b; ++a) {
                const std::size_t idx = CorrelationTable::pair_index(a, b);
                result.values[idx] = table_.rho(a, b);
                result.valid[idx] = true;
            }
    } else {
        const int l = sorted_cond.front();
        std::vector<int> rest(sorted_cond.begin() + 1, sorted_cond.end());
        const SetTable& prev = table_for(rest);
        for (int b = 1; b < p; ++b) {
            if (in_cond[b]) continue;
            for (int a = 0; a < b; ++a) {
                if (in_cond[a]) continue;
                const std::size_t idx = CorrelationTable::pair_index(a, b);
                result.values[idx] =
                    peel(prev.values[idx], prev.values[CorrelationTable::pair_index(a, l)],
                         prev.values[CorrelationTable::pair_index(b, l)]);
                result.valid[idx] = true;
            }
        }
    }
    return cache_.emplace(sorted_cond, std::move(result)).first->second;
}

double PcorrCache::partial(int i, int j, const std::vector<int>& cond) {
    check_query(table_.node_count(), i, j, cond);
    std::vector<int> sorted = cond;
    std::sort(sorted.begin(), sorted.end());
    const SetTable& t = table_for(sorted);
    const std::size_t idx = CorrelationTable::pair_index(i, j);
    if (!t.valid[idx]) throw std::logic_error("PcorrCache: invalid pair lookup");
    return t.values[idx];
}

}  // namespace anchorci
