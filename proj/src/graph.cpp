#include "anchorci/graph.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace anchorci {

Dag::Dag(int p) : p_(p) {
    if (p < 1) throw std::invalid_argument("Dag: node count must be positive");
}

Dag::Dag(int p, const std::vector<std::pair<int, int>>& edges) : Dag(p) {
    for (const auto& [from, to] : edges) add_edge(from, to);
}

void Dag::check_node(int v) const {
    if (v < 0 || v >= p_) throw std::out_of_range("Dag: node out of range");
}

bool Dag::has_edge(int from, int to) const {
    return edges_.count({from, to}) > 0;
}

bool Dag::creates_cycle(int from, int to) const {
    // Would from->to close a cycle? Equivalent to a directed path to->from.
    std::vector<bool> seen(p_, false);
    std::queue<int> frontier;
    frontier.push(to);
    seen[to] = true;
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        if (v == from) return true;
        for (const auto& [a, b] : edges_) {
            if (a == v && !seen[b]) {
                seen[b] = true;
                frontier.push(b);
            }
        }
    }
    return false;
}

void Dag::add_edge(int from, int to) {
    check_node(from);
    check_node(to);
    if (from == to) throw std::invalid_argument("Dag: self loop");
    if (has_edge(from, to)) throw std::invalid_argument("Dag: duplicate edge");
    if (creates_cycle(from, to)) throw std::invalid_argument("Dag: edge would create a cycle");
    edges_.insert({from, to});
}

std::vector<int> Dag::parents(int node) const {
    check_node(node);
    std::vector<int> out;
    for (const auto& [a, b] : edges_)
        if (b == node) out.push_back(a);
    return out;
}

std::vector<int> Dag::children(int node) const {
    check_node(node);
    std::vector<int> out;
    for (const auto& [a, b] : edges_)
        if (a == node) out.push_back(b);
    return out;
}

std::vector<int> Dag::topological_order() const {
    std::vector<int> indeg(p_, 0);
    for (const auto& [a, b] : edges_) ++indeg[b];
    std::vector<int> order;
    order.reserve(p_);
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int v = 0; v < p_; ++v)
        if (indeg[v] == 0) ready.push(v);
    while (!ready.empty()) {
        const int v = ready.top();
        ready.pop();
        order.push_back(v);
        for (const auto& [a, b] : edges_) {
            if (a == v && --indeg[b] == 0) ready.push(b);
        }
    }
    if (static_cast<int>(order.size()) != p_) {
        throw std::logic_error("Dag: cycle detected");  // unreachable by construction
    }
    return order;
}

bool d_separated(const Dag& g, int i, int j, const std::vector<int>& cond) {
    const int p = g.node_count();
    auto check = [&](int v) {
        if (v < 0 || v >= p) throw std::out_of_range("d_separated: node out of range");
    };
    check(i);
    check(j);
    if (i == j) throw std::invalid_argument("d_separated: i and j must differ");
    std::vector<bool> in_cond(p, false);
    for (int v : cond) {
        check(v);
        if (v == i || v == j)
            throw std::invalid_argument("d_separated: conditioning set contains endpoint");
        in_cond[v] = true;
    }

    // Ancestral set of {i,j} union K.
    std::vector<bool> anc(p, false);
    std::queue<int> frontier;
    auto mark = [&](int v) {
        if (!anc[v]) {
            anc[v] = true;
            frontier.push(v);
        }
    };
    mark(i);
    mark(j);
    for (int v = 0; v < p; ++v)
        if (in_cond[v]) mark(v);
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int u : g.parents(v)) mark(u);
    }

    // Moral graph on the ancestral set: undirect edges, marry co-parents.
    std::vector<std::vector<bool>> moral(p, std::vector<bool>(p, false));
    for (const auto& [a, b] : g.edges()) {
        if (anc[a] && anc[b]) moral[a][b] = moral[b][a] = true;
    }
    for (int v = 0; v < p; ++v) {
        if (!anc[v]) continue;
        const auto ps = g.parents(v);
        for (std::size_t s = 0; s < ps.size(); ++s)
            for (std::size_t t = s + 1; t < ps.size(); ++t)
                if (anc[ps[s]] && anc[ps[t]])
                    moral[ps[s]][ps[t]] = moral[ps[t]][ps[s]] = true;
    }

    // Separated iff i cannot reach j after deleting the conditioning nodes.
    std::vector<bool> seen(p, false);
    std::queue<int> bfs;
    bfs.push(i);
    seen[i] = true;
    while (!bfs.empty()) {
        const int v = bfs.front();
        bfs.pop();
        if (v == j) return false;
        for (int u = 0; u < p; ++u) {
            if (moral[v][u] && !seen[u] && !in_cond[u] && anc[u]) {
                seen[u] = true;
                bfs.push(u);
            }
        }
    }
    return true;
}

void Cpdag::check_node(int v) const {
    if (v < 0 || v >= p_) throw std::out_of_range("Cpdag: node out of range");
}

void Cpdag::add_directed(int from, int to) {
    check_node(from);
    check_node(to);
    if (from == to) throw std::invalid_argument("Cpdag: self loop");
    if (adjacent(from, to)) throw std::invalid_argument("Cpdag: pair already has an edge");
    directed_.insert({from, to});
}

void Cpdag::add_undirected(int a, int b) {
    check_node(a);
    check_node(b);
    if (a == b) throw std::invalid_argument("Cpdag: self loop");
    if (adjacent(a, b)) throw std::invalid_argument("Cpdag: pair already has an edge");
    undirected_.insert({std::min(a, b), std::max(a, b)});
}

bool Cpdag::has_directed(int from, int to) const {
    return directed_.count({from, to}) > 0;
}

bool Cpdag::has_undirected(int a, int b) const {
    return undirected_.count({std::min(a, b), std::max(a, b)}) > 0;
}

bool Cpdag::adjacent(int a, int b) const {
    return has_undirected(a, b) || has_directed(a, b) || has_directed(b, a);
}

namespace {

// Mutable pattern used while orienting: status[a][b] codes the edge a..b.
enum class EdgeStatus : std::uint8_t { kAbsent, kUndirected, kDirectedOut, kDirectedIn };

class Pattern {
public:
    explicit Pattern(int p) : p_(p), status_(p, std::vector<EdgeStatus>(p, EdgeStatus::kAbsent)) {}

    int size() const { return p_; }
    bool adjacent(int a, int b) const { return status_[a][b] != EdgeStatus::kAbsent; }
    bool undirected(int a, int b) const { return status_[a][b] == EdgeStatus::kUndirected; }
    bool directed(int from, int to) const { return status_[from][to] == EdgeStatus::kDirectedOut; }

    void set_undirected(int a, int b) {
        status_[a][b] = status_[b][a] = EdgeStatus::kUndirected;
    }
    void set_directed(int from, int to) {
        status_[from][to] = EdgeStatus::kDirectedOut;
        status_[to][from] = EdgeStatus::kDirectedIn;
    }

    // Orient from->to; refuses to overwrite the opposite orientation.
    bool orient(int from, int to, std::vector<std::string>* log) {
        if (directed(to, from)) {
            if (log) {
                log->push_back("conflicting orientation " + std::to_string(from) + "->" +
                               std::to_string(to) + " dropped");
            }
            return false;
        }
        if (!directed(from, to)) set_directed(from, to);
        return true;
    }

    Cpdag to_cpdag() const {
        Cpdag out(p_);
        for (int a = 0; a < p_; ++a) {
            for (int b = 0; b < p_; ++b) {
                if (directed(a, b)) out.add_directed(a, b);
                else if (a < b && undirected(a, b)) out.add_undirected(a, b);
            }
        }
        return out;
    }

private:
    int p_;
    std::vector<std::vector<EdgeStatus>> status_;
};

// Meek rules R1-R4 applied to a fixpoint, nodes visited in ascending order.
void meek_closure(Pattern& g, std::vector<std::string>* log) {
    const int p = g.size();
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < p; ++a) {
            for (int b = 0; b < p; ++b) {
                if (!g.undirected(a, b)) continue;
                bool oriented = false;
                // R1: z -> a, z not adjacent b  =>  a -> b
                for (int z = 0; z < p && !oriented; ++z) {
                    if (g.directed(z, a) && !g.adjacent(z, b) && z != b)
                        oriented = g.orient(a, b, log);
                }
                // R2: a -> z -> b  =>  a -> b
                for (int z = 0; z < p && !oriented; ++z) {
                    if (g.directed(a, z) && g.directed(z, b))
                        oriented = g.orient(a, b, log);
                }
                // R3: a - c -> b, a - d -> b, c not adjacent d  =>  a -> b
                for (int c = 0; c < p && !oriented; ++c) {
                    if (!(g.undirected(a, c) && g.directed(c, b))) continue;
                    for (int d = c + 1; d < p && !oriented; ++d) {
                        if (g.undirected(a, d) && g.directed(d, b) && !g.adjacent(c, d))
                            oriented = g.orient(a, b, log);
                    }
                }
                // R4: a adj c, a adj d, d -> c -> b, b not adjacent d  =>  a -> b
                for (int c = 0; c < p && !oriented; ++c) {
                    if (!(g.adjacent(a, c) && g.directed(c, b))) continue;
                    for (int d = 0; d < p && !oriented; ++d) {
                        if (d == c || d == a || d == b) continue;
                        if (g.adjacent(a, d) && g.directed(d, c) && !g.adjacent(b, d))
                            oriented = g.orient(a, b, log);
                    }
                }
                if (oriented) changed = true;
            }
        }
    }
}

}  // namespace

Cpdag cpdag_of(const Dag& g) {
    const int p = g.node_count();
    Pattern pattern(p);
    for (const auto& [a, b] : g.edges()) pattern.set_undirected(a, b);

    // v-structures a -> c <- b with a,b nonadjacent are compelled.
    for (int c = 0; c < p; ++c) {
        const auto ps = g.parents(c);
        for (std::size_t s = 0; s < ps.size(); ++s) {
            for (std::size_t t = s + 1; t < ps.size(); ++t) {
                const int a = ps[s], b = ps[t];
                if (!g.adjacent(a, b)) {
                    pattern.orient(a, c, nullptr);
                    pattern.orient(b, c, nullptr);
                }
            }
        }
    }
    meek_closure(pattern, nullptr);
    return pattern.to_cpdag();
}

namespace detail {

// Shared with the discovery module: orient a skeleton given v-structure
// decisions, then close under the Meek rules.
Cpdag close_pattern(int p, const std::vector<std::pair<int, int>>& skeleton,
                    const std::vector<std::pair<int, int>>& vstructs,
                    std::vector<std::string>* conflict_log) {
    Pattern pattern(p);
    for (const auto& [a, b] : skeleton) pattern.set_undirected(a, b);
    for (const auto& [from, to] : vstructs) pattern.orient(from, to, conflict_log);
    meek_closure(pattern, conflict_log);
    return pattern.to_cpdag();
}

}  // namespace detail

namespace {

enum class PairStatus : std::uint8_t { kAbsent, kForward, kBackward, kUndirected };

PairStatus pair_status(const Cpdag& g, int a, int b) {
    if (g.has_directed(a, b)) return PairStatus::kForward;
    if (g.has_directed(b, a)) return PairStatus::kBackward;
    if (g.has_undirected(a, b)) return PairStatus::kUndirected;
    return PairStatus::kAbsent;
}

}  // namespace

int shd(const Cpdag& a, const Cpdag& b) {
    if (a.node_count() != b.node_count())
        throw std::invalid_argument("shd: graphs have different node counts");
    int distance = 0;
    for (int i = 0; i < a.node_count(); ++i)
        for (int j = i + 1; j < a.node_count(); ++j)
            if (pair_status(a, i, j) != pair_status(b, i, j)) ++distance;
    return distance;
}

Cpdag skeleton_of(const Cpdag& g) {
    Cpdag out(g.node_count());
    for (const auto& [a, b] : g.directed()) out.add_undirected(a, b);
    for (const auto& [a, b] : g.undirected()) out.add_undirected(a, b);
    return out;
}

std::string Cpdag::to_json() const {
    nlohmann::json j;
    j["p"] = p_;
    j["directed"] = nlohmann::json::array();
    for (const auto& [a, b] : directed_) j["directed"].push_back({a, b});
    j["undirected"] = nlohmann::json::array();
    for (const auto& [a, b] : undirected_) j["undirected"].push_back({a, b});
    return j.dump(2);
}

Cpdag Cpdag::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Cpdag out(j.at("p").get<int>());
    for (const auto& e : j.at("directed")) out.add_directed(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& e : j.at("undirected"))
        out.add_undirected(e.at(0).get<int>(), e.at(1).get<int>());
    return out;
}

}  // namespace anchorci
