#pragma once

#include <random>
#include <string>

#include <Eigen/Dense>

#include "anchorci/graph.hpp"

namespace anchorci {

using Rng = std::mt19937_64;

/// Linear Gaussian structural equation model Z = B^T Z + eps,
/// eps ~ N(pi, diag(omega)). B[i][j] is nonzero only for edges i -> j.
struct SemParams {
    Dag graph;
    Eigen::MatrixXd weights;      // B
    Eigen::VectorXd noise_mean;   // pi
    Eigen::VectorXd noise_var;    // omega, all positive

    void validate() const;
    std::string to_json() const;
    static SemParams from_json(const std::string& text);
};

struct MomentPair {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Erdos-Renyi style random DAG: draw a uniform node order, then include
/// each forward pair independently with probability min(1, d/(p-1)).
Dag random_dag(int p, double expected_degree, Rng& rng);

/// Random SEM on g: edge weights uniform on [-1,-0.25] u [0.25,1], target
/// node means uniform on [0,3] (pi solved so the implied mean matches),
/// unit noise variances.
SemParams random_sem(const Dag& g, Rng& rng,
                     double weight_lo = 0.25, double weight_hi = 1.0,
                     double mean_lo = 0.0, double mean_hi = 3.0);

/// Closed-form implied moments: mu = (I-B)^-T pi, Sigma = (I-B)^-T Omega (I-B)^-1.
MomentPair implied_moments(const SemParams& sem);

/// n i.i.d. rows of Z drawn by forward simulation in topological order.
Eigen::MatrixXd sample_sem(const SemParams& sem, int n, Rng& rng);

}  // namespace anchorci
