#include "anchorci/discovery.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

namespace anchorci {

StatisticalOracle::StatisticalOracle(const LatentMoments& moments, long n,
                                     CiStatKind kind, double alpha,
                                     const Eigen::VectorXd& retention,
                                     bool dof_correction)
    : n_(n),
      kind_(kind),
      alpha_(alpha),
      q_(retention),
      dof_correction_(dof_correction),
      pcorr_(correlations(moments.shrunk_set ? moments.shrunk : moments.sigma)) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("StatisticalOracle: alpha must lie in (0,1)");
    if (kind_ == CiStatKind::kDropoutNormalizing) {
        CiContext context;
        context.n = n_;
        context.mu = moments.mu;
        context.sigma = moments.shrunk_set ? moments.shrunk : moments.sigma;
        context.q = q_;
        context.alpha_shrink = moments.shrunk_set ? moments.alpha_star : 0.0;
        context.rho = pcorr_.base();
        normalizing_ = std::make_unique<NormalizingStat>(std::move(context));
    }
}

int StatisticalOracle::node_count() const { return pcorr_.base().node_count(); }

const StabilizingTransform& StatisticalOracle::transform_for(int i, int j) {
    const auto key = std::minmax(i, j);
    auto found = transforms_.find(key);
    if (found == transforms_.end()) {
        StabilizingTransform transform(q_[key.first], q_[key.second]);
        transform.enable_cache();
        found = transforms_.emplace(key, std::move(transform)).first;
    }
    return found->second;
}

void StatisticalOracle::set_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("StatisticalOracle: alpha must lie in (0,1)");
    alpha_ = alpha;
}

double StatisticalOracle::statistic(int i, int j, const std::vector<int>& cond) {
    std::vector<int> sorted = cond;
    std::sort(sorted.begin(), sorted.end());
    // rho is symmetric in the pair, so the statistic is too.
    const auto key = std::make_tuple(std::min(i, j), std::max(i, j), sorted);
    const auto memo = stat_memo_.find(key);
    if (memo != stat_memo_.end()) return memo->second;
    const double rho_hat = pcorr_.partial(i, j, sorted);
    double value = 0.0;
    switch (kind_) {
        case CiStatKind::kGaussian:
            value = gaussian_ci_stat(rho_hat, n_, static_cast<int>(sorted.size()),
                                     dof_correction_);
            break;
        case CiStatKind::kDropoutStabilizing:
            value = dropout_stat_stabilizing(rho_hat, n_, transform_for(i, j));
            break;
        case CiStatKind::kDropoutNormalizing:
            value = normalizing_->statistic(rho_hat, i, j, sorted);
            break;
    }
    stat_memo_.emplace(key, value);
    return value;
}

bool StatisticalOracle::independent(int i, int j, const std::vector<int>& cond) {
    return ci_decide(statistic(i, j, cond), alpha_);
}

namespace {

// Lexicographically ordered size-l subsets of a sorted candidate list.
bool first_combination(std::vector<int>& pick, int l, int n) {
    if (l > n) return false;
    pick.resize(l);
    for (int t = 0; t < l; ++t) pick[t] = t;
    return true;
}

bool next_combination(std::vector<int>& pick, int n) {
    const int l = static_cast<int>(pick.size());
    for (int t = l - 1; t >= 0; --t) {
        if (pick[t] < n - (l - t)) {
            ++pick[t];
            for (int s = t + 1; s < l; ++s) pick[s] = pick[s - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

SkeletonResult pc_skeleton(CiOracle& oracle, int p, int max_cond) {
    if (p < 1) throw std::invalid_argument("pc_skeleton: p must be positive");
    if (oracle.node_count() != p)
        throw std::invalid_argument("pc_skeleton: oracle dimension mismatch");
    if (max_cond < 0) max_cond = std::max(0, p - 2);

    std::vector<std::vector<bool>> adj(p, std::vector<bool>(p, false));
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j) adj[i][j] = true;

    SkeletonResult result;
    auto neighbors_excluding = [&](int node, int excluded) {
        std::vector<int> out;
        for (int v = 0; v < p; ++v)
            if (v != node && v != excluded && adj[node][v]) out.push_back(v);
        return out;
    };

    for (int level = 0; level <= max_cond; ++level) {
        bool any_testable = false;
        for (int i = 0; i < p; ++i) {
            for (int j = i + 1; j < p; ++j) {
                if (!adj[i][j]) continue;
                bool removed = false;
                for (int side = 0; side < 2 && !removed; ++side) {
                    const int anchor = side == 0 ? i : j;
                    const int other = side == 0 ? j : i;
                    const std::vector<int> candidates =
                        neighbors_excluding(anchor, other);
                    const int n_cand = static_cast<int>(candidates.size());
                    if (n_cand < level) continue;
                    any_testable = true;
                    std::vector<int> pick;
                    if (!first_combination(pick, level, n_cand)) continue;
                    do {
                        std::vector<int> cond(level);
                        for (int t = 0; t < level; ++t) cond[t] = candidates[pick[t]];
                        if (oracle.independent(i, j, cond)) {
                            adj[i][j] = adj[j][i] = false;
                            result.sepsets[{i, j}] = cond;
                            removed = true;
                            break;
                        }
                    } while (next_combination(pick, n_cand));
                }
            }
        }
        if (!any_testable) break;
    }

    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (adj[i][j]) result.edges.push_back({i, j});
    return result;
}

Cpdag orient(int p, const SkeletonResult& skeleton,
             std::vector<std::string>* conflict_log) {
    std::vector<std::vector<bool>> adj(p, std::vector<bool>(p, false));
    for (const auto& [a, b] : skeleton.edges) adj[a][b] = adj[b][a] = true;

    std::vector<std::pair<int, int>> vstructs;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            if (adj[i][j]) continue;
            const auto sepset = skeleton.sepsets.find({i, j});
            if (sepset == skeleton.sepsets.end()) continue;
            for (int k = 0; k < p; ++k) {
                if (k == i || k == j || !adj[i][k] || !adj[j][k]) continue;
                if (std::find(sepset->second.begin(), sepset->second.end(), k) ==
                    sepset->second.end()) {
                    vstructs.push_back({i, k});
                    vstructs.push_back({j, k});
                }
            }
        }
    }
    return detail::close_pattern(p, skeleton.edges, vstructs, conflict_log);
}

DiscoveryResult anchored_causal_inference(const Eigen::MatrixXd& samples,
                                          const MeasurementModel& model,
                                          const PipelineOptions& options,
                                          const std::vector<std::string>* column_names) {
    const int p = static_cast<int>(samples.cols());
    if (p == 1) {
        return {Cpdag(1), 0.0, {}};
    }
    if (samples.rows() < 4)
        throw std::invalid_argument("anchored_causal_inference: need at least 4 samples");

    LatentMoments moments;
    try {
        moments = estimate_latent_moments(samples, model);
    } catch (const std::invalid_argument& err) {
        // Column diagnostics carry the index; attach the name when known.
        std::string message = err.what();
        if (column_names) {
            const auto pos = message.find("column ");
            if (pos != std::string::npos) {
                std::size_t idx_end = pos + 7;
                while (idx_end < message.size() && std::isdigit(message[idx_end]) != 0)
                    ++idx_end;
                const int idx = std::stoi(message.substr(pos + 7, idx_end - pos - 7));
                if (idx >= 0 && idx < static_cast<int>(column_names->size()))
                    message += " (" + (*column_names)[idx] + ")";
            }
        }
        throw std::invalid_argument(message);
    }

    Eigen::VectorXd retention = Eigen::VectorXd::Ones(p);
    if (const auto* dropout = dynamic_cast<const DropoutModel*>(&model))
        retention = dropout->retention();

    StatisticalOracle oracle(moments, samples.rows(), options.kind, options.alpha,
                             retention, options.dof_correction);
    const SkeletonResult skeleton = pc_skeleton(oracle, p, options.max_cond);
    DiscoveryResult result{Cpdag(p), moments.alpha_star, {}};
    result.cpdag = orient(p, skeleton, &result.conflicts);
    return result;
}

}  // namespace anchorci
