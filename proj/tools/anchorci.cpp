// anchorci: causal structure discovery from corrupted observations.
//
// Subcommands:
//   discover  learn a CPDAG from an expression matrix
//   simulate  run the synthetic benchmark and emit metrics
//   evaluate  structural Hamming distance between two graph files
//   roc       score a directory of estimated graphs against a truth graph

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "anchorci/discovery.hpp"
#include "anchorci/harness.hpp"
#include "anchorci/measurement.hpp"

namespace {

using namespace anchorci;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open " + path);
    out << text;
}

Eigen::VectorXd read_q_file(const std::string& path,
                            const std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open q file " + path);
    std::map<std::string, double> by_name;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& c : line)
            if (c == ',' || c == '\t') c = ' ';
        std::istringstream fields(line);
        std::string name;
        double value;
        if (!(fields >> name)) continue;  // blank line
        if (!(fields >> value))
            throw std::invalid_argument("q file line " + std::to_string(line_no) +
                                        ": expected 'name value'");
        by_name[name] = value;
    }
    Eigen::VectorXd q(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto found = by_name.find(names[i]);
        if (found == by_name.end())
            throw std::invalid_argument("q file is missing column '" + names[i] + "'");
        q[static_cast<long>(i)] = found->second;
    }
    return q;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream fields(text);
    std::string cell;
    while (std::getline(fields, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

int cmd_discover(const std::string& input, const std::string& q_file, double lambda,
                 const std::string& lambda_grid, const std::string& test_name,
                 double alpha, int max_cond, const std::string& output,
                 bool log_transform, bool dof_correction) {
    const NamedMatrix table = ingest_matrix(input, log_transform);
    const int p = static_cast<int>(table.data.cols());

    PipelineOptions options;
    options.kind = stat_kind_from_string(test_name);
    options.alpha = alpha;
    options.max_cond = max_cond;
    options.dof_correction = dof_correction;

    DiscoveryResult result{Cpdag(p), 0.0, {}};
    if (options.kind == CiStatKind::kGaussian) {
        const IdentityModel model(p);
        result = anchored_causal_inference(table.data, model, options, &table.names);
    } else {
        Eigen::VectorXd q;
        if (!q_file.empty()) {
            q = read_q_file(q_file, table.names);
        } else {
            double chosen = lambda;
            if (!lambda_grid.empty())
                chosen = select_lambda(table.data, parse_double_list(lambda_grid));
            if (!(chosen > 0.0))
                throw std::invalid_argument(
                    "dropout tests need --q, --lambda or --lambda-grid");
            std::cerr << "lambda = " << chosen << "\n";
            q = estimate_dropout_params(table.data, chosen).q;
        }
        const DropoutModel model(q);
        result = anchored_causal_inference(table.data, model, options, &table.names);
    }

    for (const auto& conflict : result.conflicts) std::cerr << conflict << "\n";
    std::cerr << "alpha_star = " << result.alpha_star << "\n";
    const std::string graph_json = result.cpdag.to_json();
    if (output.empty()) std::cout << graph_json << "\n";
    else write_file(output, graph_json);
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& output,
                 const std::string& csv, int p, double d, long n, int replicates,
                 long seed, const std::string& tests, const std::string& alphas) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ExperimentConfig::from_json(read_file(config_path));
    if (p > 0) cfg.p = p;
    if (d >= 0.0) cfg.d = d;
    if (n > 0) cfg.n = n;
    if (replicates > 0) cfg.replicates = replicates;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!tests.empty()) {
        cfg.tests.clear();
        std::istringstream fields(tests);
        std::string cell;
        while (std::getline(fields, cell, ','))
            cfg.tests.push_back(stat_kind_from_string(cell));
    }
    if (!alphas.empty()) cfg.alphas = parse_double_list(alphas);
    cfg.validate();

    const SimulationResult result = run_simulation(cfg);
    if (output.empty()) std::cout << result.to_json() << "\n";
    else write_file(output, result.to_json());
    if (!csv.empty()) write_file(csv, result.aggregates_csv());

    for (const auto& agg : result.aggregates) {
        std::cerr << to_string(agg.test) << " alpha=" << agg.alpha
                  << " shd_skeleton=" << agg.mean_shd_skeleton << " (se "
                  << agg.se_shd_skeleton << ")\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& path_a, const std::string& path_b) {
    const Cpdag a = Cpdag::from_json(read_file(path_a));
    const Cpdag b = Cpdag::from_json(read_file(path_b));
    std::cout << "shd " << shd(a, b) << "\n";
    std::cout << "shd_skeleton " << shd(skeleton_of(a), skeleton_of(b)) << "\n";
    return 0;
}

Dag dag_from_graph_json(const std::string& text) {
    const Cpdag g = Cpdag::from_json(text);
    if (!g.undirected().empty())
        throw std::invalid_argument("truth graph must be fully directed");
    Dag out(g.node_count());
    for (const auto& [a, b] : g.directed()) out.add_edge(a, b);
    return out;
}

int cmd_roc(const std::string& estimates_dir, const std::string& truth_path,
            const std::string& output) {
    const Dag truth = dag_from_graph_json(read_file(truth_path));

    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(estimates_dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::invalid_argument("no .json estimates in " + estimates_dir);

    // alpha is taken from the first numeric substring of the file name,
    // falling back to the file index.
    auto alpha_of = [](const std::string& path, std::size_t index) {
        const std::string name = std::filesystem::path(path).filename().string();
        for (std::size_t s = 0; s < name.size(); ++s) {
            if (std::isdigit(name[s]) == 0) continue;
            try {
                return std::stod(name.substr(s));
            } catch (const std::exception&) {
                break;
            }
        }
        return static_cast<double>(index);
    };

    std::vector<std::pair<double, Cpdag>> estimates;
    for (std::size_t s = 0; s < files.size(); ++s)
        estimates.push_back({alpha_of(files[s], s), Cpdag::from_json(read_file(files[s]))});

    const auto skel = roc_points(estimates, truth, RocMode::kSkeleton);
    const auto cp = roc_points(estimates, truth, RocMode::kCpdag);

    std::ostringstream out;
    out << "file,alpha,tpr_skeleton,fpr_skeleton,tpr_cpdag,fpr_cpdag\n";
    for (std::size_t s = 0; s < files.size(); ++s) {
        out << std::filesystem::path(files[s]).filename().string() << ","
            << skel[s].alpha << "," << skel[s].tpr << "," << skel[s].fpr << ","
            << cp[s].tpr << "," << cp[s].fpr << "\n";
    }
    if (output.empty()) std::cout << out.str();
    else write_file(output, out.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anchored causal structure discovery from corrupted observations"};
    app.require_subcommand(1);

    // discover
    std::string in_path, q_file, lambda_grid, test_name = "stabilizing", out_path;
    double lambda = 0.0, alpha = 0.05;
    int max_cond = -1;
    bool log_transform = false, dof_correction = false;
    auto* discover = app.add_subcommand("discover", "learn a CPDAG from data");
    discover->add_option("--input", in_path, "delimited matrix with header row")
        ->required();
    discover->add_option("--q", q_file, "two-column file: column name, retention");
    discover->add_option("--lambda", lambda, "mean-dropout link decay parameter");
    discover->add_option("--lambda-grid", lambda_grid,
                         "comma-separated lambda candidates; picks the one "
                         "needing the least shrinkage");
    discover->add_option("--test", test_name, "gaussian | stabilizing | normalizing");
    discover->add_option("--alpha", alpha, "significance level");
    discover->add_option("--max-cond", max_cond, "conditioning set cap (-1: p-2)");
    discover->add_option("--output", out_path, "graph JSON path (stdout if empty)");
    discover->add_flag("--log-transform", log_transform, "apply log(1+x) to cells");
    discover->add_flag("--dof-correction", dof_correction,
                       "use sqrt(n-|K|-3) scaling in the gaussian test");

    // simulate
    std::string config_path, sim_out, sim_csv, sim_tests, sim_alphas;
    int sim_p = 0, sim_replicates = 0;
    double sim_d = -1.0;
    long sim_n = 0, sim_seed = -1;
    auto* simulate = app.add_subcommand("simulate", "run the synthetic benchmark");
    simulate->add_option("--config", config_path, "ExperimentConfig JSON file");
    simulate->add_option("--output", sim_out, "result JSON path (stdout if empty)");
    simulate->add_option("--csv", sim_csv, "flat metrics CSV path");
    simulate->add_option("--p", sim_p, "node count");
    simulate->add_option("--d", sim_d, "expected degree");
    simulate->add_option("--n", sim_n, "samples per replicate");
    simulate->add_option("--replicates", sim_replicates, "replicate count");
    simulate->add_option("--seed", sim_seed, "master seed");
    simulate->add_option("--tests", sim_tests, "comma-separated test kinds");
    simulate->add_option("--alphas", sim_alphas, "comma-separated alpha grid");

    // evaluate
    std::string eval_a, eval_b;
    auto* evaluate = app.add_subcommand("evaluate", "SHD between two graph files");
    evaluate->add_option("--a", eval_a, "first graph JSON")->required();
    evaluate->add_option("--b", eval_b, "second graph JSON")->required();

    // roc
    std::string roc_dir, roc_truth, roc_out;
    auto* roc = app.add_subcommand("roc", "score estimates against a truth DAG");
    roc->add_option("--estimates", roc_dir, "directory of graph JSON files")
        ->required();
    roc->add_option("--truth", roc_truth, "truth DAG as graph JSON (all directed)")
        ->required();
    roc->add_option("--output", roc_out, "CSV path (stdout if empty)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (discover->parsed())
            return cmd_discover(in_path, q_file, lambda, lambda_grid, test_name, alpha,
                                max_cond, out_path, log_transform, dof_correction);
        if (simulate->parsed())
            return cmd_simulate(config_path, sim_out, sim_csv, sim_p, sim_d, sim_n,
                                sim_replicates, sim_seed, sim_tests, sim_alphas);
        if (evaluate->parsed()) return cmd_evaluate(eval_a, eval_b);
        if (roc->parsed()) return cmd_roc(roc_dir, roc_truth, roc_out);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
