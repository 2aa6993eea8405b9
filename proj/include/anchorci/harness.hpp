#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anchorci/discovery.hpp"
#include "anchorci/sem.hpp"

namespace anchorci {

/// Simulation benchmark configuration. Defaults reproduce the desk-scale
/// dropout benchmark: Erdos-Renyi graphs, weights bounded away from zero,
/// latent means on [0,3], retention probabilities on [0.01, 0.8].
struct ExperimentConfig {
    int p = 10;
    double d = 3.0;
    long n = 1000;
    int replicates = 50;
    std::uint64_t seed = 20240101;
    std::vector<CiStatKind> tests = {CiStatKind::kDropoutStabilizing,
                                     CiStatKind::kGaussian};
    std::vector<double> alphas = {1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.5};
    double weight_lo = 0.25, weight_hi = 1.0;
    double mu_lo = 0.0, mu_hi = 3.0;
    double q_lo = 0.01, q_hi = 0.8;
    int max_cond = -1;

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
};

struct RocPoint {
    double alpha = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

struct RunMetrics {
    CiStatKind test;
    double alpha = 0.0;
    bool failed = false;
    std::string error;
    int shd_cpdag = 0;
    int shd_skeleton = 0;
    double tpr_skeleton = 0.0, fpr_skeleton = 0.0;
    double tpr_cpdag = 0.0, fpr_cpdag = 0.0;
    double alpha_star = 0.0;
    Cpdag estimate{1};
};

struct ModelFit {
    CiStatKind test;
    double alpha_star = 0.0;
    Eigen::MatrixXd sigma;   // moment-mapped latent covariance
    Eigen::MatrixXd shrunk;  // PSD matrix used by the tests
};

struct ReplicateResult {
    std::uint64_t seed = 0;
    Dag truth{1};
    Cpdag truth_cpdag{1};
    std::vector<ModelFit> fits;
    std::vector<RunMetrics> runs;
};

struct AggregateMetrics {
    CiStatKind test;
    double alpha = 0.0;
    int successes = 0;
    double mean_shd_skeleton = 0.0, se_shd_skeleton = 0.0;
    double mean_shd_cpdag = 0.0, se_shd_cpdag = 0.0;
    double mean_tpr_skeleton = 0.0, mean_fpr_skeleton = 0.0;
    double mean_tpr_cpdag = 0.0, mean_fpr_cpdag = 0.0;
    double mean_alpha_star = 0.0;
};

struct SimulationResult {
    ExperimentConfig config;
    std::vector<ReplicateResult> replicates;
    std::vector<AggregateMetrics> aggregates;
    int roc_monotonicity_violations = 0;

    std::string to_json() const;
    std::string aggregates_csv() const;
};

const char* to_string(CiStatKind kind);
CiStatKind stat_kind_from_string(const std::string& name);

/// Run the full simulation benchmark. Replicates execute in parallel
/// (worker count capped by ANCHORCI_THREADS) with per-replicate seeds
/// derived from the master seed; aggregation is an ordered reduction, so
/// the result is independent of scheduling.
SimulationResult run_simulation(const ExperimentConfig& config);

enum class RocMode { kSkeleton, kCpdag };

/// True/false positive rates of estimates against the true DAG. Skeleton
/// mode scores adjacency only. CPDAG mode scores an undirected estimated
/// edge as a true positive when the pair is adjacent in the truth, a
/// directed one only when the same direction is present; everything else
/// on the estimate is a false positive. Rates are normalized by the
/// adjacent / nonadjacent pair counts of the truth.
std::vector<RocPoint> roc_points(const std::vector<std::pair<double, Cpdag>>& estimates,
                                 const Dag& truth, RocMode mode);

struct NamedMatrix {
    Eigen::MatrixXd data;
    std::vector<std::string> names;
};

/// Read a delimited numeric table (comma or tab, auto-detected) with a
/// header row of unique column names. Throws std::invalid_argument naming
/// the offending row/column on ragged or non-numeric input. With
/// log_transform, applies log(1+x) cellwise (zeros stay zero).
NamedMatrix ingest_matrix(const std::string& path, bool log_transform = false);

void emit_matrix(const std::string& path, const Eigen::MatrixXd& data,
                 const std::vector<std::string>& names);

/// Worker cap: ANCHORCI_THREADS when set, hardware concurrency otherwise.
int worker_count();

}  // namespace anchorci
