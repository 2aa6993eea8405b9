#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace anchorci {

/// Directed acyclic graph on nodes 0..p-1.
///
/// Edges are stored as ordered pairs (i,j) meaning i -> j. Construction and
/// mutation enforce acyclicity, no self loops and no duplicates.
class Dag {
public:
    explicit Dag(int p);
    Dag(int p, const std::vector<std::pair<int, int>>& edges);

    int node_count() const { return p_; }
    bool has_edge(int from, int to) const;
    bool adjacent(int a, int b) const { return has_edge(a, b) || has_edge(b, a); }
    void add_edge(int from, int to);

    const std::set<std::pair<int, int>>& edges() const { return edges_; }
    std::vector<int> parents(int node) const;
    std::vector<int> children(int node) const;

    /// Some topological order (parents before children).
    std::vector<int> topological_order() const;

private:
    void check_node(int v) const;
    bool creates_cycle(int from, int to) const;

    int p_ = 0;
    std::set<std::pair<int, int>> edges_;
};

/// Partially directed graph representing a Markov equivalence class:
/// compelled edges directed, reversible edges undirected.
class Cpdag {
public:
    explicit Cpdag(int p) : p_(p) {}

    int node_count() const { return p_; }

    void add_directed(int from, int to);
    void add_undirected(int a, int b);

    bool has_directed(int from, int to) const;
    bool has_undirected(int a, int b) const;
    bool adjacent(int a, int b) const;

    const std::set<std::pair<int, int>>& directed() const { return directed_; }
    const std::set<std::pair<int, int>>& undirected() const { return undirected_; }

    bool operator==(const Cpdag& other) const = default;

    std::string to_json() const;
    static Cpdag from_json(const std::string& text);

private:
    void check_node(int v) const;

    int p_ = 0;
    std::set<std::pair<int, int>> directed_;
    std::set<std::pair<int, int>> undirected_;  // stored with first < second
};

/// d-separation of i and j given K (moralized-ancestral-graph criterion).
bool d_separated(const Dag& g, int i, int j, const std::vector<int>& cond);

/// CPDAG of the Markov equivalence class of g: skeleton of g with an edge
/// directed iff it is compelled (v-structure orientation plus Meek closure).
Cpdag cpdag_of(const Dag& g);

/// Structural Hamming distance between two partially directed graphs:
/// number of node pairs whose status in {absent, i->j, j->i, undirected}
/// differs. Any mismatch counts one.
int shd(const Cpdag& a, const Cpdag& b);

Cpdag skeleton_of(const Cpdag& g);

namespace detail {

/// Orient a skeleton given already-decided edge orientations, then close
/// under the Meek rules. Conflicting orientations keep the first writer
/// and are appended to conflict_log when provided.
Cpdag close_pattern(int p, const std::vector<std::pair<int, int>>& skeleton,
                    const std::vector<std::pair<int, int>>& vstructs,
                    std::vector<std::string>* conflict_log);

}  // namespace detail

}  // namespace anchorci
