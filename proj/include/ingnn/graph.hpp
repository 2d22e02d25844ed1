#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ingnn/sparse.hpp"

namespace ingnn {

// Undirected simple graph in compressed-row form. Every edge (u,v) is stored
// twice, once per endpoint row; rows hold sorted, duplicate-free neighbor
// lists and never contain the row's own index. Immutable after construction.
struct Graph {
    std::size_t num_nodes = 0;
    std::vector<std::size_t> row_offsets;  // length num_nodes+1
    std::vector<std::size_t> col_indices;  // length 2·M

    Graph() : row_offsets(1, 0) {}

    std::size_t num_edges() const { return col_indices.size() / 2; }
    std::size_t degree(std::size_t u) const { return row_offsets[u + 1] - row_offsets[u]; }

    const std::size_t* neighbors_begin(std::size_t u) const {
        return col_indices.data() + row_offsets[u];
    }
    const std::size_t* neighbors_end(std::size_t u) const {
        return col_indices.data() + row_offsets[u + 1];
    }

    bool has_edge(std::size_t u, std::size_t v) const {
        return std::binary_search(neighbors_begin(u), neighbors_end(u), v);
    }

    bool operator==(const Graph& other) const = default;
};

struct GraphBuildStats {
    std::size_t duplicate_edges_removed = 0;
    std::size_t self_loops_removed = 0;
};

// Builds a Graph from an arbitrary undirected edge list (either orientation,
// duplicates allowed). Self-loops are stripped and duplicates collapsed; the
// counts are reported through `stats` when given.
inline Graph build_graph(std::size_t num_nodes,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                         GraphBuildStats* stats = nullptr) {
    std::vector<std::pair<std::size_t, std::size_t>> canon;
    canon.reserve(edges.size());
    std::size_t self_loops = 0;
    for (const auto& [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes)
            throw std::invalid_argument("edge endpoint out of range");
        if (u == v) {
            ++self_loops;
            continue;
        }
        canon.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(canon.begin(), canon.end());
    std::size_t unique_count = static_cast<std::size_t>(
        std::unique(canon.begin(), canon.end()) - canon.begin());
    std::size_t duplicates = canon.size() - unique_count;
    canon.resize(unique_count);
    if (stats != nullptr) {
        stats->duplicate_edges_removed = duplicates;
        stats->self_loops_removed = self_loops;
    }

    Graph g;
    g.num_nodes = num_nodes;
    std::vector<std::size_t> deg(num_nodes, 0);
    for (const auto& [u, v] : canon) {
        ++deg[u];
        ++deg[v];
    }
    g.row_offsets.assign(num_nodes + 1, 0);
    for (std::size_t i = 0; i < num_nodes; ++i) g.row_offsets[i + 1] = g.row_offsets[i] + deg[i];
    g.col_indices.resize(2 * canon.size());
    std::vector<std::size_t> cursor(g.row_offsets.begin(), g.row_offsets.end() - 1);
    for (const auto& [u, v] : canon) {
        g.col_indices[cursor[u]++] = v;
        g.col_indices[cursor[v]++] = u;
    }
    // canon is sorted by (min,max) so each row ends up sorted except for the
    // interleaving of the two orientations; sort rows to be safe.
    for (std::size_t i = 0; i < num_nodes; ++i)
        std::sort(g.col_indices.begin() + g.row_offsets[i],
                  g.col_indices.begin() + g.row_offsets[i + 1]);
    return g;
}

inline std::vector<std::size_t> degrees(const Graph& g) {
    std::vector<std::size_t> out(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) out[i] = g.degree(i);
    return out;
}

// Checks every structural invariant; returns a list of human-readable
// violations (empty means valid). Run at every ingestion boundary.
inline std::vector<std::string> validate(const Graph& g) {
    std::vector<std::string> violations;
    if (g.row_offsets.size() != g.num_nodes + 1) {
        violations.push_back("row_offsets length != num_nodes+1");
        return violations;
    }
    if (g.row_offsets.front() != 0) violations.push_back("row_offsets[0] != 0");
    if (g.row_offsets.back() != g.col_indices.size())
        violations.push_back("row_offsets[N] != col_indices length");
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        if (g.row_offsets[i] > g.row_offsets[i + 1]) {
            violations.push_back("row_offsets not non-decreasing");
            break;
        }
    if (!violations.empty()) return violations;

    for (std::size_t u = 0; u < g.num_nodes; ++u) {
        for (std::size_t k = g.row_offsets[u]; k < g.row_offsets[u + 1]; ++k) {
            std::size_t v = g.col_indices[k];
            if (v >= g.num_nodes) {
                violations.push_back("column index out of range at node " + std::to_string(u));
                return violations;
            }
            if (v == u) violations.push_back("self-loop at node " + std::to_string(u));
            if (k > g.row_offsets[u] && g.col_indices[k - 1] == v)
                violations.push_back("duplicate entry in row " + std::to_string(u));
            if (k > g.row_offsets[u] && g.col_indices[k - 1] > v)
                violations.push_back("unsorted row " + std::to_string(u));
        }
    }
    for (std::size_t u = 0; u < g.num_nodes && violations.empty(); ++u)
        for (std::size_t k = g.row_offsets[u]; k < g.row_offsets[u + 1]; ++k)
            if (!g.has_edge(g.col_indices[k], u)) {
                violations.push_back("asymmetric edge (" + std::to_string(u) + "," +
                                     std::to_string(g.col_indices[k]) + ")");
                break;
            }
    return violations;
}

// Node class labels, values in [0, num_classes).
struct Labels {
    std::vector<int> values;
    int num_classes = 0;
};

inline void validate_labels(const Labels& labels, std::size_t num_nodes) {
    if (labels.num_classes < 2) throw std::invalid_argument("need at least 2 classes");
    if (labels.values.size() != num_nodes)
        throw std::invalid_argument("labels length does not match node count");
    for (int v : labels.values)
        if (v < 0 || v >= labels.num_classes)
            throw std::invalid_argument("label out of range");
}

struct DataSplit {
    std::vector<std::size_t> train, valid, test;
};

inline void validate_split(const DataSplit& split, std::size_t num_nodes) {
    if (split.train.empty() || split.valid.empty())
        throw std::invalid_argument("train and valid splits must be non-empty");
    std::vector<char> seen(num_nodes, 0);
    for (const auto* part : {&split.train, &split.valid, &split.test}) {
        for (std::size_t idx : *part) {
            if (idx >= num_nodes) throw std::invalid_argument("split index out of range");
            if (seen[idx]) throw std::invalid_argument("split parts overlap");
            seen[idx] = 1;
        }
    }
}

// Fraction of undirected edges whose endpoints share a label. An edgeless
// graph yields 0 and raises `no_edges` when the caller asks for it.
inline double edge_homophily(const Graph& g, const Labels& labels, bool* no_edges = nullptr) {
    validate_labels(labels, g.num_nodes);
    if (no_edges != nullptr) *no_edges = false;
    if (g.num_edges() == 0) {
        if (no_edges != nullptr) *no_edges = true;
        return 0.0;
    }
    std::size_t same = 0;
    for (std::size_t u = 0; u < g.num_nodes; ++u)
        for (std::size_t k = g.row_offsets[u]; k < g.row_offsets[u + 1]; ++k) {
            std::size_t v = g.col_indices[k];
            if (u < v && labels.values[u] == labels.values[v]) ++same;
        }
    return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

// D^{-1/2} A D^{-1/2}. Degree-0 nodes keep an all-zero row. When
// `add_self_loops` is set the GCN-style variant D̃^{-1/2}(A+I)D̃^{-1/2} is
// built instead.
inline SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops = false) {
    SparseMatrix out(g.num_nodes, g.num_nodes);
    std::vector<double> deg(g.num_nodes, 0.0);
    for (std::size_t u = 0; u < g.num_nodes; ++u)
        deg[u] = static_cast<double>(g.degree(u) + (add_self_loops ? 1 : 0));
    // one sqrt of the degree product per entry: exact for regular graphs
    auto entry = [&](std::size_t u, std::size_t v) { return 1.0 / std::sqrt(deg[u] * deg[v]); };
    for (std::size_t u = 0; u < g.num_nodes; ++u) {
        bool loop_emitted = false;
        for (std::size_t k = g.row_offsets[u]; k < g.row_offsets[u + 1]; ++k) {
            std::size_t v = g.col_indices[k];
            if (add_self_loops && !loop_emitted && v > u) {
                out.col_indices.push_back(u);
                out.values.push_back(entry(u, u));
                loop_emitted = true;
            }
            out.col_indices.push_back(v);
            out.values.push_back(entry(u, v));
        }
        if (add_self_loops && !loop_emitted) {
            out.col_indices.push_back(u);
            out.values.push_back(entry(u, u));
        }
        out.row_offsets[u + 1] = out.col_indices.size();
    }
    return out;
}

// Raw adjacency as a numeric operator (all stored entries = 1).
inline SparseMatrix adjacency_matrix(const Graph& g) {
    SparseMatrix out(g.num_nodes, g.num_nodes);
    out.row_offsets = g.row_offsets;
    out.col_indices = g.col_indices;
    out.values.assign(g.col_indices.size(), 1.0);
    return out;
}

// Relabels nodes: node u of the input becomes perm[u] of the output.
inline Graph relabel(const Graph& g, const std::vector<std::size_t>& perm) {
    if (perm.size() != g.num_nodes) throw std::invalid_argument("permutation size mismatch");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(g.num_edges());
    for (std::size_t u = 0; u < g.num_nodes; ++u)
        for (std::size_t k = g.row_offsets[u]; k < g.row_offsets[u + 1]; ++k)
            if (u < g.col_indices[k]) edges.emplace_back(perm[u], perm[g.col_indices[k]]);
    return build_graph(g.num_nodes, edges);
}

}  // namespace ingnn
