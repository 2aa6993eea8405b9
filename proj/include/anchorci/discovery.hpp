#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "anchorci/citest.hpp"
#include "anchorci/graph.hpp"
#include "anchorci/moments.hpp"

namespace anchorci {

/// Conditional-independence oracle. Implementations must be deterministic
/// functions of (i, j, cond).
class CiOracle {
public:
    virtual ~CiOracle() = default;
    virtual int node_count() const = 0;
    virtual bool independent(int i, int j, const std::vector<int>& cond) = 0;
};

/// Ground-truth oracle answering queries by d-separation in a known DAG.
class DSeparationOracle final : public CiOracle {
public:
    explicit DSeparationOracle(Dag g) : graph_(std::move(g)) {}
    int node_count() const override { return graph_.node_count(); }
    bool independent(int i, int j, const std::vector<int>& cond) override {
        return d_separated(graph_, i, j, cond);
    }

private:
    Dag graph_;
};

/// Estimation-mode oracle: partial correlations from the shrunk latent
/// covariance, turned into one of the test statistics and thresholded at
/// significance alpha.
class StatisticalOracle final : public CiOracle {
public:
    StatisticalOracle(const LatentMoments& moments, long n, CiStatKind kind,
                      double alpha, const Eigen::VectorXd& retention,
                      bool dof_correction = false);

    int node_count() const override;
    bool independent(int i, int j, const std::vector<int>& cond) override;

    double statistic(int i, int j, const std::vector<int>& cond);

    /// Statistics do not depend on alpha, so one oracle can serve a whole
    /// alpha grid; computed statistics are memoized across runs.
    void set_alpha(double alpha);
    void clear_cache() { pcorr_.clear(); }

private:
    const StabilizingTransform& transform_for(int i, int j);

    long n_;
    CiStatKind kind_;
    double alpha_;
    Eigen::VectorXd q_;
    bool dof_correction_;
    PcorrCache pcorr_;
    std::map<std::pair<int, int>, StabilizingTransform> transforms_;
    std::unique_ptr<NormalizingStat> normalizing_;
    std::map<std::tuple<int, int, std::vector<int>>, double> stat_memo_;
};

struct SkeletonResult {
    std::vector<std::pair<int, int>> edges;  // first < second
    std::map<std::pair<int, int>, std::vector<int>> sepsets;
};

/// PC adjacency search: start complete, then for conditioning sizes
/// 0..max_cond test, for each surviving pair in ascending order, all
/// subsets of adj(i)\{j} and then adj(j)\{i}; drop the edge on the first
/// independence found and record the separating set.
SkeletonResult pc_skeleton(CiOracle& oracle, int p, int max_cond = -1);

/// v-structure orientation from separating sets followed by Meek closure.
Cpdag orient(int p, const SkeletonResult& skeleton,
             std::vector<std::string>* conflict_log = nullptr);

struct PipelineOptions {
    CiStatKind kind = CiStatKind::kDropoutStabilizing;
    double alpha = 0.05;
    int max_cond = -1;           // -1 means p-2
    bool dof_correction = false;
};

struct DiscoveryResult {
    Cpdag cpdag;
    double alpha_star = 0.0;
    std::vector<std::string> conflicts;
};

/// End-to-end discovery: observed moments -> latent covariance -> PSD
/// shrinkage -> partial correlations -> chosen statistic -> PC -> CPDAG.
DiscoveryResult anchored_causal_inference(
    const Eigen::MatrixXd& samples, const MeasurementModel& model,
    const PipelineOptions& options,
    const std::vector<std::string>* column_names = nullptr);

}  // namespace anchorci
