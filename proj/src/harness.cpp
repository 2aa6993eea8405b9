#include "anchorci/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "anchorci/measurement.hpp"
#include "anchorci/numeric.hpp"

namespace anchorci {

const char* to_string(CiStatKind kind) {
    switch (kind) {
        case CiStatKind::kGaussian: return "gaussian";
        case CiStatKind::kDropoutStabilizing: return "stabilizing";
        case CiStatKind::kDropoutNormalizing: return "normalizing";
    }
    return "unknown";
}

CiStatKind stat_kind_from_string(const std::string& name) {
    if (name == "gaussian") return CiStatKind::kGaussian;
    if (name == "stabilizing") return CiStatKind::kDropoutStabilizing;
    if (name == "normalizing") return CiStatKind::kDropoutNormalizing;
    throw std::invalid_argument("unknown test statistic: " + name);
}

void ExperimentConfig::validate() const {
    if (p < 1) throw std::invalid_argument("config: p must be positive");
    if (d < 0.0) throw std::invalid_argument("config: d must be nonnegative");
    if (n < 4) throw std::invalid_argument("config: n must be at least 4");
    if (replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
    if (tests.empty() || alphas.empty())
        throw std::invalid_argument("config: tests and alphas must be nonempty");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0))
            throw std::invalid_argument("config: alphas must lie in (0,1)");
    if (!(q_lo > 0.0 && q_hi <= 1.0 && q_lo <= q_hi))
        throw std::invalid_argument("config: q range must satisfy 0 < lo <= hi <= 1");
    if (!(weight_lo > 0.0 && weight_lo <= weight_hi))
        throw std::invalid_argument("config: weight range invalid");
    if (mu_lo > mu_hi) throw std::invalid_argument("config: mu range invalid");
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["p"] = p;
    j["d"] = d;
    j["n"] = n;
    j["replicates"] = replicates;
    j["seed"] = seed;
    j["tests"] = nlohmann::json::array();
    for (auto t : tests) j["tests"].push_back(to_string(t));
    j["alphas"] = alphas;
    j["weight_range"] = {weight_lo, weight_hi};
    j["mu_range"] = {mu_lo, mu_hi};
    j["q_range"] = {q_lo, q_hi};
    j["max_cond"] = max_cond;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("p")) cfg.p = j.at("p").get<int>();
    if (j.contains("d")) cfg.d = j.at("d").get<double>();
    if (j.contains("n")) cfg.n = j.at("n").get<long>();
    if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tests")) {
        cfg.tests.clear();
        for (const auto& t : j.at("tests"))
            cfg.tests.push_back(stat_kind_from_string(t.get<std::string>()));
    }
    if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("weight_range")) {
        cfg.weight_lo = j.at("weight_range").at(0).get<double>();
        cfg.weight_hi = j.at("weight_range").at(1).get<double>();
    }
    if (j.contains("mu_range")) {
        cfg.mu_lo = j.at("mu_range").at(0).get<double>();
        cfg.mu_hi = j.at("mu_range").at(1).get<double>();
    }
    if (j.contains("q_range")) {
        cfg.q_lo = j.at("q_range").at(0).get<double>();
        cfg.q_hi = j.at("q_range").at(1).get<double>();
    }
    if (j.contains("max_cond")) cfg.max_cond = j.at("max_cond").get<int>();
    cfg.validate();
    return cfg;
}

int worker_count() {
    if (const char* env = std::getenv("ANCHORCI_THREADS")) {
        const int requested = std::atoi(env);
        if (requested >= 1) return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

struct PairCounts {
    int adjacent = 0;
    int nonadjacent = 0;
};

PairCounts truth_pair_counts(const Dag& truth) {
    PairCounts counts;
    const int p = truth.node_count();
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            truth.adjacent(i, j) ? ++counts.adjacent : ++counts.nonadjacent;
    return counts;
}

double safe_rate(int numerator, int denominator) {
    return denominator == 0 ? 0.0 : static_cast<double>(numerator) / denominator;
}

RocPoint score_estimate(const Cpdag& estimate, const Dag& truth, RocMode mode,
                        double alpha) {
    const PairCounts counts = truth_pair_counts(truth);
    int tp = 0, fp = 0;
    if (mode == RocMode::kSkeleton) {
        auto score_pair = [&](int a, int b) {
            truth.adjacent(a, b) ? ++tp : ++fp;
        };
        for (const auto& [a, b] : estimate.directed()) score_pair(a, b);
        for (const auto& [a, b] : estimate.undirected()) score_pair(a, b);
    } else {
        for (const auto& [a, b] : estimate.directed())
            truth.has_edge(a, b) ? ++tp : ++fp;
        for (const auto& [a, b] : estimate.undirected())
            truth.adjacent(a, b) ? ++tp : ++fp;
    }
    return RocPoint{alpha, safe_rate(tp, counts.adjacent),
                    safe_rate(fp, counts.nonadjacent)};
}

RunMetrics evaluate_run(CiStatKind test, double alpha, const DiscoveryResult& run,
                        const Dag& truth, const Cpdag& truth_cpdag) {
    RunMetrics m;
    m.test = test;
    m.alpha = alpha;
    m.estimate = run.cpdag;
    m.alpha_star = run.alpha_star;
    m.shd_cpdag = shd(run.cpdag, truth_cpdag);
    m.shd_skeleton = shd(skeleton_of(run.cpdag), skeleton_of(truth_cpdag));
    const RocPoint skel = score_estimate(run.cpdag, truth, RocMode::kSkeleton, alpha);
    const RocPoint cp = score_estimate(run.cpdag, truth, RocMode::kCpdag, alpha);
    m.tpr_skeleton = skel.tpr;
    m.fpr_skeleton = skel.fpr;
    m.tpr_cpdag = cp.tpr;
    m.fpr_cpdag = cp.fpr;
    return m;
}

ReplicateResult run_replicate(const ExperimentConfig& cfg, int index) {
    ReplicateResult rep;
    rep.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
    Rng rng(rep.seed);

    rep.truth = random_dag(cfg.p, cfg.d, rng);
    const SemParams sem = random_sem(rep.truth, rng, cfg.weight_lo, cfg.weight_hi,
                                     cfg.mu_lo, cfg.mu_hi);
    Eigen::VectorXd q(cfg.p);
    std::uniform_real_distribution<double> q_dist(cfg.q_lo, cfg.q_hi);
    for (int i = 0; i < cfg.p; ++i) q[i] = q_dist(rng);

    const Eigen::MatrixXd latent = sample_sem(sem, static_cast<int>(cfg.n), rng);
    const Eigen::MatrixXd observed = apply_dropout(latent, q, rng);
    rep.truth_cpdag = cpdag_of(rep.truth);

    for (CiStatKind test : cfg.tests) {
        std::size_t next_alpha = 0;
        try {
            const IdentityModel identity(cfg.p);
            const DropoutModel dropout(q);
            const MeasurementModel& model =
                test == CiStatKind::kGaussian
                    ? static_cast<const MeasurementModel&>(identity)
                    : static_cast<const MeasurementModel&>(dropout);
            const LatentMoments moments = estimate_latent_moments(observed, model);
            rep.fits.push_back({test, moments.alpha_star, moments.sigma, moments.shrunk});
            Eigen::VectorXd retention =
                test == CiStatKind::kGaussian ? Eigen::VectorXd::Ones(cfg.p) : q;
            StatisticalOracle oracle(moments, cfg.n, test, cfg.alphas.front(),
                                     retention);
            for (; next_alpha < cfg.alphas.size(); ++next_alpha) {
                oracle.set_alpha(cfg.alphas[next_alpha]);
                const SkeletonResult skeleton =
                    pc_skeleton(oracle, cfg.p, cfg.max_cond);
                DiscoveryResult run{Cpdag(cfg.p), moments.alpha_star, {}};
                run.cpdag = orient(cfg.p, skeleton, &run.conflicts);
                rep.runs.push_back(evaluate_run(test, cfg.alphas[next_alpha], run,
                                                rep.truth, rep.truth_cpdag));
            }
        } catch (const std::exception& err) {
            // record the failure for the alphas that did not finish
            for (; next_alpha < cfg.alphas.size(); ++next_alpha) {
                RunMetrics failed;
                failed.test = test;
                failed.alpha = cfg.alphas[next_alpha];
                failed.failed = true;
                failed.error = err.what();
                failed.estimate = Cpdag(cfg.p);
                rep.runs.push_back(failed);
            }
        }
    }
    return rep;
}

}  // namespace

SimulationResult run_simulation(const ExperimentConfig& config) {
    config.validate();
    SimulationResult result;
    result.config = config;
    result.replicates.resize(config.replicates);

    const int workers =
        std::max(1, std::min(worker_count(), config.replicates));
    std::atomic<int> next{0};
    auto work = [&]() {
        while (true) {
            const int index = next.fetch_add(1);
            if (index >= config.replicates) break;
            result.replicates[static_cast<std::size_t>(index)] =
                run_replicate(config, index);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    // Ordered reduction over (test, alpha) cells.
    for (CiStatKind test : config.tests) {
        for (double alpha : config.alphas) {
            AggregateMetrics agg;
            agg.test = test;
            agg.alpha = alpha;
            std::vector<double> shd_skel, shd_cp;
            for (const auto& rep : result.replicates) {
                for (const auto& run : rep.runs) {
                    if (run.test != test || run.alpha != alpha || run.failed) continue;
                    ++agg.successes;
                    shd_skel.push_back(run.shd_skeleton);
                    shd_cp.push_back(run.shd_cpdag);
                    agg.mean_tpr_skeleton += run.tpr_skeleton;
                    agg.mean_fpr_skeleton += run.fpr_skeleton;
                    agg.mean_tpr_cpdag += run.tpr_cpdag;
                    agg.mean_fpr_cpdag += run.fpr_cpdag;
                    agg.mean_alpha_star += run.alpha_star;
                }
            }
            const int c = agg.successes;
            if (c > 0) {
                auto mean_of = [c](const std::vector<double>& xs) {
                    double s = 0.0;
                    for (double x : xs) s += x;
                    return s / c;
                };
                auto se_of = [c](const std::vector<double>& xs, double mean) {
                    if (c < 2) return 0.0;
                    double ss = 0.0;
                    for (double x : xs) ss += (x - mean) * (x - mean);
                    return std::sqrt(ss / (c - 1) / c);
                };
                agg.mean_shd_skeleton = mean_of(shd_skel);
                agg.se_shd_skeleton = se_of(shd_skel, agg.mean_shd_skeleton);
                agg.mean_shd_cpdag = mean_of(shd_cp);
                agg.se_shd_cpdag = se_of(shd_cp, agg.mean_shd_cpdag);
                agg.mean_tpr_skeleton /= c;
                agg.mean_fpr_skeleton /= c;
                agg.mean_tpr_cpdag /= c;
                agg.mean_fpr_cpdag /= c;
                agg.mean_alpha_star /= c;
            }
            result.aggregates.push_back(agg);
        }
    }

    // Skeleton-mode FPR should trace monotonically in alpha; deeper
    // conditioning levels can break this, so violations are only counted.
    for (const auto& rep : result.replicates) {
        for (CiStatKind test : config.tests) {
            std::vector<std::pair<double, double>> points;
            for (const auto& run : rep.runs)
                if (run.test == test && !run.failed)
                    points.push_back({run.alpha, run.fpr_skeleton});
            std::sort(points.begin(), points.end());
            for (std::size_t s = 1; s < points.size(); ++s)
                if (points[s].second < points[s - 1].second - 1e-12)
                    ++result.roc_monotonicity_violations;
        }
    }
    return result;
}

std::vector<RocPoint> roc_points(const std::vector<std::pair<double, Cpdag>>& estimates,
                                 const Dag& truth, RocMode mode) {
    std::vector<RocPoint> points;
    points.reserve(estimates.size());
    for (const auto& [alpha, estimate] : estimates) {
        if (estimate.node_count() != truth.node_count())
            throw std::invalid_argument("roc_points: node count mismatch");
        points.push_back(score_estimate(estimate, truth, mode, alpha));
    }
    return points;
}

namespace {

nlohmann::json cpdag_json(const Cpdag& g) {
    return nlohmann::json::parse(g.to_json());
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (long r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

std::string SimulationResult::to_json() const {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(config.to_json());
    j["roc_monotonicity_violations"] = roc_monotonicity_violations;
    j["replicates"] = nlohmann::json::array();
    for (const auto& rep : replicates) {
        nlohmann::json r;
        r["seed"] = rep.seed;
        r["truth_edges"] = nlohmann::json::array();
        for (const auto& [a, b] : rep.truth.edges()) r["truth_edges"].push_back({a, b});
        r["truth_cpdag"] = cpdag_json(rep.truth_cpdag);
        r["fits"] = nlohmann::json::array();
        for (const auto& fit : rep.fits) {
            nlohmann::json f;
            f["test"] = to_string(fit.test);
            f["alpha_star"] = fit.alpha_star;
            f["sigma_hat"] = matrix_json(fit.sigma);
            f["lambda_hat"] = matrix_json(fit.shrunk);
            r["fits"].push_back(f);
        }
        r["runs"] = nlohmann::json::array();
        for (const auto& run : rep.runs) {
            nlohmann::json m;
            m["test"] = to_string(run.test);
            m["alpha"] = run.alpha;
            if (run.failed) {
                m["error"] = run.error;
            } else {
                m["shd_cpdag"] = run.shd_cpdag;
                m["shd_skeleton"] = run.shd_skeleton;
                m["tpr_skeleton"] = run.tpr_skeleton;
                m["fpr_skeleton"] = run.fpr_skeleton;
                m["tpr_cpdag"] = run.tpr_cpdag;
                m["fpr_cpdag"] = run.fpr_cpdag;
                m["alpha_star"] = run.alpha_star;
                m["estimate"] = cpdag_json(run.estimate);
            }
            r["runs"].push_back(m);
        }
        j["replicates"].push_back(r);
    }
    j["aggregates"] = nlohmann::json::array();
    for (const auto& agg : aggregates) {
        nlohmann::json a;
        a["test"] = to_string(agg.test);
        a["alpha"] = agg.alpha;
        a["successes"] = agg.successes;
        a["mean_shd_skeleton"] = agg.mean_shd_skeleton;
        a["se_shd_skeleton"] = agg.se_shd_skeleton;
        a["mean_shd_cpdag"] = agg.mean_shd_cpdag;
        a["se_shd_cpdag"] = agg.se_shd_cpdag;
        a["mean_tpr_skeleton"] = agg.mean_tpr_skeleton;
        a["mean_fpr_skeleton"] = agg.mean_fpr_skeleton;
        a["mean_tpr_cpdag"] = agg.mean_tpr_cpdag;
        a["mean_fpr_cpdag"] = agg.mean_fpr_cpdag;
        a["mean_alpha_star"] = agg.mean_alpha_star;
        j["aggregates"].push_back(a);
    }
    return j.dump(2);
}

std::string SimulationResult::aggregates_csv() const {
    std::ostringstream out;
    out << "test,alpha,metric,value,stderr\n";
    char buffer[128];
    auto row = [&](const AggregateMetrics& agg, const char* metric, double value,
                   double se) {
        std::snprintf(buffer, sizeof(buffer), "%s,%.17g,%s,%.17g,%.17g\n",
                      to_string(agg.test), agg.alpha, metric, value, se);
        out << buffer;
    };
    for (const auto& agg : aggregates) {
        row(agg, "shd_skeleton", agg.mean_shd_skeleton, agg.se_shd_skeleton);
        row(agg, "shd_cpdag", agg.mean_shd_cpdag, agg.se_shd_cpdag);
        row(agg, "tpr_skeleton", agg.mean_tpr_skeleton, 0.0);
        row(agg, "fpr_skeleton", agg.mean_fpr_skeleton, 0.0);
        row(agg, "tpr_cpdag", agg.mean_tpr_cpdag, 0.0);
        row(agg, "fpr_cpdag", agg.mean_fpr_cpdag, 0.0);
        row(agg, "alpha_star", agg.mean_alpha_star, 0.0);
    }
    return out.str();
}

NamedMatrix ingest_matrix(const std::string& path, bool log_transform) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("ingest_matrix: cannot open " + path);
    std::string header;
    if (!std::getline(in, header))
        throw std::invalid_argument("ingest_matrix: empty file " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char delim = header.find('\t') != std::string::npos ? '\t' : ',';

    NamedMatrix out;
    {
        std::istringstream line(header);
        std::string cell;
        while (std::getline(line, cell, delim)) out.names.push_back(cell);
    }
    const std::size_t p = out.names.size();
    if (p == 0) throw std::invalid_argument("ingest_matrix: header has no columns");
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a + 1; b < p; ++b)
            if (out.names[a] == out.names[b])
                throw std::invalid_argument("ingest_matrix: duplicate column name '" +
                                            out.names[a] + "'");

    std::vector<std::vector<double>> rows;
    std::string line_text;
    int line_no = 1;
    while (std::getline(in, line_text)) {
        ++line_no;
        if (!line_text.empty() && line_text.back() == '\r') line_text.pop_back();
        if (line_text.empty()) continue;
        std::istringstream line(line_text);
        std::string cell;
        std::vector<double> row;
        std::size_t col = 0;
        while (std::getline(line, cell, delim)) {
            ++col;
            try {
                std::size_t used = 0;
                const double value = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(cell[used]) != 0) ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing text");
                row.push_back(value);
            } catch (const std::exception&) {
                throw std::invalid_argument(
                    "ingest_matrix: non-numeric cell at row " + std::to_string(line_no) +
                    ", column " + std::to_string(col) + " ('" +
                    out.names[std::min(col - 1, p - 1)] + "')");
            }
        }
        if (row.size() != p) {
            throw std::invalid_argument("ingest_matrix: row " + std::to_string(line_no) +
                                        " has " + std::to_string(row.size()) +
                                        " cells, expected " + std::to_string(p));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("ingest_matrix: no data rows");

    out.data.resize(static_cast<long>(rows.size()), static_cast<long>(p));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < p; ++c)
            out.data(static_cast<long>(r), static_cast<long>(c)) =
                log_transform ? std::log1p(rows[r][c]) : rows[r][c];
    return out;
}

void emit_matrix(const std::string& path, const Eigen::MatrixXd& data,
                 const std::vector<std::string>& names) {
    if (static_cast<long>(names.size()) != data.cols())
        throw std::invalid_argument("emit_matrix: name count mismatch");
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("emit_matrix: cannot open " + path);
    for (std::size_t c = 0; c < names.size(); ++c)
        out << (c == 0 ? "" : ",") << names[c];
    out << "\n";
    char buffer[64];
    for (long r = 0; r < data.rows(); ++r) {
        for (long c = 0; c < data.cols(); ++c) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", data(r, c));
            out << (c == 0 ? "" : ",") << buffer;
        }
        out << "\n";
    }
}

}  // namespace anchorci
