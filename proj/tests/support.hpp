#pragma once

// Shared test fixtures: exhaustive DAG enumeration, d-separation
// signatures, the brute-force MEC oracle, and small matrix helpers.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "anchorci/graph.hpp"
#include "anchorci/sem.hpp"

namespace testsupport {

using anchorci::Cpdag;
using anchorci::Dag;

// All labeled DAGs on p nodes: each unordered pair is absent, forward or
// backward; assignments with directed cycles are discarded.
inline std::vector<Dag> enumerate_dags(int p) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) pairs.push_back({i, j});
    const int m = static_cast<int>(pairs.size());
    std::vector<Dag> out;
    std::vector<int> state(m, 0);  // 0 absent, 1 i->j, 2 j->i
    while (true) {
        std::vector<std::pair<int, int>> edges;
        for (int e = 0; e < m; ++e) {
            if (state[e] == 1) edges.push_back(pairs[e]);
            if (state[e] == 2) edges.push_back({pairs[e].second, pairs[e].first});
        }
        try {
            out.emplace_back(p, edges);
        } catch (const std::invalid_argument&) {
            // directed cycle; skip this assignment
        }
        int e = 0;
        while (e < m && state[e] == 2) state[e++] = 0;
        if (e == m) break;
        ++state[e];
    }
    return out;
}

// Bit signature of all d-separation statements (i<j, K subset of the rest).
inline std::vector<bool> dsep_signature(const Dag& g) {
    const int p = g.node_count();
    std::vector<bool> sig;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            std::vector<int> rest;
            for (int v = 0; v < p; ++v)
                if (v != i && v != j) rest.push_back(v);
            const int subsets = 1 << rest.size();
            for (int mask = 0; mask < subsets; ++mask) {
                std::vector<int> cond;
                for (std::size_t t = 0; t < rest.size(); ++t)
                    if (mask & (1 << t)) cond.push_back(rest[t]);
                sig.push_back(anchorci::d_separated(g, i, j, cond));
            }
        }
    }
    return sig;
}

// Universe of all DAGs on p nodes grouped into Markov equivalence classes
// by d-separation signature.
struct DagUniverse {
    std::vector<Dag> dags;
    std::vector<std::vector<bool>> signatures;
    std::map<std::vector<bool>, std::vector<std::size_t>> classes;

    explicit DagUniverse(int p) : dags(enumerate_dags(p)) {
        signatures.reserve(dags.size());
        for (std::size_t s = 0; s < dags.size(); ++s) {
            signatures.push_back(dsep_signature(dags[s]));
            classes[signatures.back()].push_back(s);
        }
    }

    // CPDAG by brute force: skeleton of the member, an edge directed iff
    // every class member orients it the same way.
    Cpdag mec_cpdag(std::size_t index) const {
        const Dag& g = dags[index];
        const auto& members = classes.at(signatures[index]);
        Cpdag out(g.node_count());
        for (const auto& [a, b] : g.edges()) {
            bool always_forward = true;
            bool always_backward = true;
            for (std::size_t other : members) {
                if (!dags[other].has_edge(a, b)) always_forward = false;
                if (!dags[other].has_edge(b, a)) always_backward = false;
            }
            if (always_forward) out.add_directed(a, b);
            else if (always_backward) out.add_directed(b, a);
            else out.add_undirected(a, b);
        }
        return out;
    }
};

inline Eigen::MatrixXd random_spd(int p, anchorci::Rng& rng, double ridge = -1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd a(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) a(i, j) = gauss(rng);
    if (ridge < 0.0) ridge = 0.5 * p;
    return a * a.transpose() + ridge * Eigen::MatrixXd::Identity(p, p);
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Classical asymptotic covariance of sqrt(n)-scaled Gaussian sample
// correlations (Olkin-Siotani form); reference for q = 1 reductions.
inline double gaussian_corr_asym_cov(const Eigen::MatrixXd& corr, int g, int h, int j,
                                     int k) {
    auto r = [&](int a, int b) { return a == b ? 1.0 : corr(a, b); };
    return 0.5 * r(g, h) * r(j, k) *
               (r(g, j) * r(g, j) + r(g, k) * r(g, k) + r(h, j) * r(h, j) +
                r(h, k) * r(h, k)) +
           r(g, j) * r(h, k) + r(g, k) * r(h, j) -
           (r(g, h) * r(g, j) * r(g, k) + r(g, h) * r(h, j) * r(h, k) +
            r(j, k) * r(g, j) * r(h, j) + r(j, k) * r(g, k) * r(h, k));
}

}  // namespace testsupport
