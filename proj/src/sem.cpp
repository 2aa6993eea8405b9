#include "anchorci/sem.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace anchorci {

void SemParams::validate() const {
    const int p = graph.node_count();
    if (weights.rows() != p || weights.cols() != p)
        throw std::invalid_argument("SemParams: weight matrix shape mismatch");
    if (noise_mean.size() != p || noise_var.size() != p)
        throw std::invalid_argument("SemParams: noise vector length mismatch");
    for (int i = 0; i < p; ++i) {
        if (!(noise_var[i] > 0.0))
            throw std::invalid_argument("SemParams: noise variances must be positive");
        for (int j = 0; j < p; ++j) {
            if (weights(i, j) != 0.0 && !graph.has_edge(i, j))
                throw std::invalid_argument("SemParams: weight outside graph support");
        }
    }
}

Dag random_dag(int p, double expected_degree, Rng& rng) {
    if (p < 1) throw std::invalid_argument("random_dag: p must be positive");
    if (expected_degree < 0.0)
        throw std::invalid_argument("random_dag: expected degree must be nonnegative");
    Dag g(p);
    if (p == 1) return g;
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const double prob = std::min(1.0, expected_degree / static_cast<double>(p - 1));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < p; ++s) {
        for (int t = s + 1; t < p; ++t) {
            if (unif(rng) < prob) g.add_edge(order[s], order[t]);
        }
    }
    return g;
}

SemParams random_sem(const Dag& g, Rng& rng, double weight_lo, double weight_hi,
                     double mean_lo, double mean_hi) {
    const int p = g.node_count();
    SemParams sem{g, Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p),
                  Eigen::VectorXd::Ones(p)};
    std::uniform_real_distribution<double> mag(weight_lo, weight_hi);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (const auto& [from, to] : g.edges()) {
        const double sign = coin(rng) < 0.5 ? -1.0 : 1.0;
        sem.weights(from, to) = sign * mag(rng);
    }
    std::uniform_real_distribution<double> mean_dist(mean_lo, mean_hi);
    Eigen::VectorXd target_mean(p);
    for (int i = 0; i < p; ++i) target_mean[i] = mean_dist(rng);
    // pi chosen so the implied mean (I-B)^-T pi equals the drawn target.
    sem.noise_mean =
        (Eigen::MatrixXd::Identity(p, p) - sem.weights).transpose() * target_mean;
    sem.validate();
    return sem;
}

MomentPair implied_moments(const SemParams& sem) {
    sem.validate();
    const int p = sem.graph.node_count();
    const Eigen::MatrixXd ImBt =
        (Eigen::MatrixXd::Identity(p, p) - sem.weights).transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(ImBt);
    const Eigen::VectorXd mean = lu.solve(sem.noise_mean);
    const Eigen::MatrixXd half = lu.solve(Eigen::MatrixXd(sem.noise_var.asDiagonal()));
    Eigen::MatrixXd cov = lu.solve(half.transpose()).transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {mean, cov};
}

Eigen::MatrixXd sample_sem(const SemParams& sem, int n, Rng& rng) {
    sem.validate();
    if (n < 1) throw std::invalid_argument("sample_sem: n must be positive");
    const int p = sem.graph.node_count();
    const auto order = sem.graph.topological_order();
    Eigen::MatrixXd samples(n, p);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> noise_sd(p);
    for (int i = 0; i < p; ++i) noise_sd[i] = std::sqrt(sem.noise_var[i]);
    for (int r = 0; r < n; ++r) {
        for (int v : order) {
            double value = sem.noise_mean[v] + noise_sd[v] * gauss(rng);
            for (int u : sem.graph.parents(v)) value += sem.weights(u, v) * samples(r, u);
            samples(r, v) = value;
        }
    }
    return samples;
}

std::string SemParams::to_json() const {
    validate();
    nlohmann::json j;
    const int p = graph.node_count();
    j["p"] = p;
    j["edges"] = nlohmann::json::array();
    for (const auto& [a, b] : graph.edges()) j["edges"].push_back({a, b});
    j["B"] = nlohmann::json::array();
    for (int i = 0; i < p; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < p; ++k) row.push_back(weights(i, k));
        j["B"].push_back(row);
    }
    j["pi"] = std::vector<double>(noise_mean.data(), noise_mean.data() + p);
    j["omega"] = std::vector<double>(noise_var.data(), noise_var.data() + p);
    return j.dump(2);
}

SemParams SemParams::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const int p = j.at("p").get<int>();
    Dag g(p);
    for (const auto& e : j.at("edges")) g.add_edge(e.at(0).get<int>(), e.at(1).get<int>());
    SemParams sem{g, Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p),
                  Eigen::VectorXd::Ones(p)};
    const auto& B = j.at("B");
    for (int i = 0; i < p; ++i)
        for (int k = 0; k < p; ++k) sem.weights(i, k) = B.at(i).at(k).get<double>();
    for (int i = 0; i < p; ++i) {
        sem.noise_mean[i] = j.at("pi").at(i).get<double>();
        sem.noise_var[i] = j.at("omega").at(i).get<double>();
    }
    sem.validate();
    return sem;
}

}  // namespace anchorci
