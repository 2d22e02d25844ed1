#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ingnn/dense.hpp"
#include "ingnn/graph.hpp"
#include "ingnn/rng.hpp"

namespace ingnn {
namespace synth {

// Spec for a homophily-controlled graph. Node features are drawn (with
// replacement) from per-class pools: either `imported_pool` (rows grouped by
// class, `imported_pool_per_class` rows each, e.g. loaded from a real
// dataset) or, by default, pools of `pool_size` samples from class
// Gaussians whose means sit on scaled one-hot directions so that any two
// class means are `mean_separation` apart. pool_size 0 draws a fresh
// Gaussian sample per node.
struct SynSpec {
    std::size_t num_nodes = 1490;
    int num_classes = 5;
    double target_homophily = 0.5;
    double avg_degree = 4.0;
    std::size_t feature_dim = 50;
    double feature_noise = 1.0;
    double mean_separation = 1.0;
    std::size_t pool_size = 150;
    DenseMatrix imported_pool;  // optional: (num_classes · per_class) × feature_dim
    std::size_t imported_pool_per_class = 0;
    std::uint64_t seed = 0;

    bool uses_imported_pool() const { return imported_pool_per_class > 0; }

    void check() const {
        if (num_nodes < 2) throw std::invalid_argument("num_nodes must be >= 2");
        if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
        if (target_homophily < 0.0 || target_homophily > 1.0)
            throw std::invalid_argument("target_homophily must be in [0,1]");
        if (avg_degree < 0.0) throw std::invalid_argument("avg_degree must be >= 0");
        double stubs = avg_degree * static_cast<double>(num_nodes);
        double rounded = std::round(stubs);
        if (std::fabs(stubs - rounded) > 1e-9 ||
            static_cast<long long>(rounded) % 2 != 0)
            throw std::invalid_argument("avg_degree * num_nodes must be an even integer");
        if (feature_noise < 0.0) throw std::invalid_argument("feature_noise must be >= 0");
        if (feature_dim == 0) throw std::invalid_argument("feature_dim must be >= 1");
        if (uses_imported_pool()) {
            if (imported_pool.rows !=
                    imported_pool_per_class * static_cast<std::size_t>(num_classes) ||
                imported_pool.cols != feature_dim)
                throw std::invalid_argument(
                    "imported pool must be (num_classes * per_class) x feature_dim");
        }
    }
};

struct SynResult {
    Graph graph;
    Labels labels;
    DenseMatrix features;
    double realized_homophily = 0.0;
};

namespace detail {

inline std::uint64_t edge_key(std::size_t u, std::size_t v, std::size_t n) {
    if (u > v) std::swap(u, v);
    return static_cast<std::uint64_t>(u) * n + v;
}

// Class means: mean_separation/sqrt(2) along one-hot directions, so
// ||mu_a - mu_b|| = mean_separation for any two classes (classes wrap when
// C > feature_dim).
inline DenseMatrix class_means(int num_classes, std::size_t feature_dim, double separation) {
    DenseMatrix means(static_cast<std::size_t>(num_classes), feature_dim);
    const double scale = separation / std::sqrt(2.0);
    for (int c = 0; c < num_classes; ++c)
        means(static_cast<std::size_t>(c), static_cast<std::size_t>(c) % feature_dim) = scale;
    return means;
}

}  // namespace detail

// Generates (graph, labels, features) with edge homophily pinned to the
// target: the intra-class edge count is fixed to round(h·E) up front and
// every slot draws a uniform same-class or cross-class pair, rejecting
// self-loops and duplicates.
inline SynResult gen_homophily_graph(const SynSpec& spec) {
    spec.check();
    const std::size_t n = spec.num_nodes;
    const int num_classes = spec.num_classes;
    Rng graph_rng(derive_seed(spec.seed, stream::synth_graph));
    Rng feat_rng(derive_seed(spec.seed, stream::synth_features));

    SynResult result;
    result.labels.num_classes = num_classes;
    result.labels.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        result.labels.values[i] = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    graph_rng.shuffle(result.labels.values);

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < n; ++i)
        by_class[static_cast<std::size_t>(result.labels.values[i])].push_back(i);

    const auto num_edges =
        static_cast<std::size_t>(std::llround(spec.avg_degree * static_cast<double>(n) / 2.0));
    const auto intra_target = static_cast<std::size_t>(
        std::llround(spec.target_homophily * static_cast<double>(num_edges)));

    // cumulative same-class pair weights n_c(n_c-1)/2
    std::vector<double> intra_weight(by_class.size());
    double intra_total = 0.0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        double nc = static_cast<double>(by_class[c].size());
        intra_total += nc * (nc - 1.0) / 2.0;
        intra_weight[c] = intra_total;
    }
    if (intra_target > 0 && intra_total < static_cast<double>(intra_target))
        throw std::invalid_argument("infeasible spec: not enough same-class pairs");

    std::unordered_set<std::uint64_t> used;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(num_edges);
    const std::size_t max_attempts_per_edge = 100000;

    auto draw_intra = [&]() {
        double t = graph_rng.next_double() * intra_total;
        std::size_t c = static_cast<std::size_t>(
            std::lower_bound(intra_weight.begin(), intra_weight.end(), t) -
            intra_weight.begin());
        if (c >= by_class.size()) c = by_class.size() - 1;
        const auto& members = by_class[c];
        std::size_t u = members[graph_rng.next_index(members.size())];
        std::size_t v = members[graph_rng.next_index(members.size())];
        return std::make_pair(u, v);
    };
    auto draw_cross = [&]() {
        std::size_t u = graph_rng.next_index(n);
        std::size_t v = graph_rng.next_index(n);
        return std::make_pair(u, v);
    };

    for (std::size_t e = 0; e < num_edges; ++e) {
        const bool intra = e < intra_target;
        std::size_t attempts = 0;
        while (true) {
            if (++attempts > max_attempts_per_edge)
                throw std::invalid_argument("infeasible spec: could not place edge");
            auto [u, v] = intra ? draw_intra() : draw_cross();
            if (u == v) continue;
            if (intra != (result.labels.values[u] == result.labels.values[v])) continue;
            std::uint64_t key = detail::edge_key(u, v, n);
            if (used.count(key)) continue;
            used.insert(key);
            edges.emplace_back(u, v);
            break;
        }
    }

    result.graph = build_graph(n, edges);
    bool no_edges = false;
    result.realized_homophily = num_edges == 0
                                    ? 0.0
                                    : edge_homophily(result.graph, result.labels, &no_edges);

    DenseMatrix means =
        detail::class_means(num_classes, spec.feature_dim, spec.mean_separation);
    result.features = DenseMatrix(n, spec.feature_dim);
    if (spec.uses_imported_pool()) {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t cls = static_cast<std::size_t>(result.labels.values[i]);
            std::size_t pick = cls * spec.imported_pool_per_class +
                               feat_rng.next_index(spec.imported_pool_per_class);
            const double* src = spec.imported_pool.row(pick);
            std::copy(src, src + spec.feature_dim, result.features.row(i));
        }
    } else if (spec.pool_size == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* mu = means.row(static_cast<std::size_t>(result.labels.values[i]));
            double* row = result.features.row(i);
            for (std::size_t j = 0; j < spec.feature_dim; ++j)
                row[j] = mu[j] + spec.feature_noise * feat_rng.next_normal();
        }
    } else {
        std::vector<DenseMatrix> pools;
        pools.reserve(by_class.size());
        for (int c = 0; c < num_classes; ++c) {
            DenseMatrix pool(spec.pool_size, spec.feature_dim);
            const double* mu = means.row(static_cast<std::size_t>(c));
            for (std::size_t p = 0; p < spec.pool_size; ++p) {
                double* row = pool.row(p);
                for (std::size_t j = 0; j < spec.feature_dim; ++j)
                    row[j] = mu[j] + spec.feature_noise * feat_rng.next_normal();
            }
            pools.push_back(std::move(pool));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const DenseMatrix& pool = pools[static_cast<std::size_t>(result.labels.values[i])];
            const double* src = pool.row(feat_rng.next_index(spec.pool_size));
            std::copy(src, src + spec.feature_dim, result.features.row(i));
        }
    }
    return result;
}

// Bag-of-words-style sparse binary pool: each class owns a disjoint block of
// `words_per_class` features; a pool vector activates its class words with
// probability p_class and any feature at all with probability p_background.
// A vector is "informative" with probability p_informative; the rest carry
// background words only, like generic documents in a citation corpus.
inline DenseMatrix make_topic_pool(int num_classes, std::size_t per_class,
                                   std::size_t feature_dim, std::size_t words_per_class,
                                   double p_class, double p_background,
                                   std::uint64_t seed, double p_informative = 1.0) {
    if (words_per_class * static_cast<std::size_t>(num_classes) > feature_dim)
        throw std::invalid_argument("topic pool: class word blocks exceed feature_dim");
    if (p_informative < 0.0 || p_informative > 1.0)
        throw std::invalid_argument("topic pool: p_informative must be in [0,1]");
    Rng rng(derive_seed(seed, stream::synth_features));
    DenseMatrix pool(per_class * static_cast<std::size_t>(num_classes), feature_dim);
    for (int c = 0; c < num_classes; ++c) {
        std::size_t block = static_cast<std::size_t>(c) * words_per_class;
        for (std::size_t p = 0; p < per_class; ++p) {
            double* row = pool.row(static_cast<std::size_t>(c) * per_class + p);
            if (rng.next_double() < p_informative)
                for (std::size_t w = 0; w < words_per_class; ++w)
                    if (rng.next_double() < p_class) row[block + w] = 1.0;
            for (std::size_t j = 0; j < feature_dim; ++j)
                if (rng.next_double() < p_background) row[j] = 1.0;
        }
    }
    return pool;
}

// Two-class 1-D Gaussian setup for the aggregation analysis: a d-regular
// graph where each node has round(h·d) same-class and d-round(h·d)
// cross-class neighbors.
struct GaussianClassSpec {
    double mu1 = 0.0;
    double sigma1 = 1.0;
    double mu2 = 1.0;
    double sigma2 = 1.0;
    std::size_t degree = 5;
    double homophily = 0.5;

    void check() const {
        if (sigma1 <= 0.0 || sigma2 <= 0.0)
            throw std::invalid_argument("sigmas must be positive");
        if (degree < 1) throw std::invalid_argument("degree must be >= 1");
        if (homophily < 0.0 || homophily > 1.0)
            throw std::invalid_argument("homophily must be in [0,1]");
    }
};

struct GaussianGraphResult {
    Graph graph;
    Labels labels;
    DenseMatrix features;  // N×1
    bool parity_adjusted = false;
};

namespace detail {

// Pairs two equally sized endpoint pools into edges. Conflicts (self-loops,
// duplicates within the batch or against `used`) are repaired by re-drawing
// the b-side partner of each bad slot, which preserves all degrees. Throws
// when the pool is too constrained to form a simple pairing.
inline void pair_stubs(std::vector<std::size_t>& a, std::vector<std::size_t>& b,
                       std::unordered_set<std::uint64_t>& used,
                       std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       std::size_t n, Rng& rng) {
    if (a.size() != b.size()) throw std::logic_error("stub pools must pair evenly");
    const std::size_t m = a.size();
    if (m == 0) return;
    std::unordered_map<std::uint64_t, std::size_t> first_seen;
    std::vector<std::size_t> bad;
    for (std::size_t round = 0;; ++round) {
        if (round > 500)
            throw std::invalid_argument("stub pairing failed; spec too constrained");
        bad.clear();
        first_seen.clear();
        for (std::size_t i = 0; i < m; ++i) {
            if (a[i] == b[i]) {
                bad.push_back(i);
                continue;
            }
            std::uint64_t key = edge_key(a[i], b[i], n);
            if (used.count(key) || !first_seen.try_emplace(key, i).second)
                bad.push_back(i);
        }
        if (bad.empty()) break;
        for (std::size_t i : bad) std::swap(b[i], b[rng.next_index(m)]);
    }
    for (std::size_t i = 0; i < m; ++i) {
        used.insert(edge_key(a[i], b[i], n));
        edges.emplace_back(a[i], b[i]);
    }
}

}  // namespace detail

inline GaussianGraphResult gen_gaussian_regular(const GaussianClassSpec& spec, std::size_t n,
                                                std::uint64_t seed) {
    spec.check();
    if (n < 4 || n % 2 != 0)
        throw std::invalid_argument("gen_gaussian_regular needs an even n >= 4");
    const std::size_t half = n / 2;
    const std::size_t d = spec.degree;
    auto k_same = static_cast<std::size_t>(std::llround(spec.homophily * static_cast<double>(d)));
    if (k_same > d) k_same = d;
    std::size_t k_cross = d - k_same;
    if (k_same > half - 1 || k_cross > half)
        throw std::invalid_argument("class too small for the requested degree split");

    GaussianGraphResult result;
    result.labels.num_classes = 2;
    result.labels.values.assign(n, 0);
    for (std::size_t i = half; i < n; ++i) result.labels.values[i] = 1;

    // per-node stub counts; adjust one node per class if within-class stub
    // totals have odd parity
    std::vector<std::size_t> same_stubs(n, k_same), cross_stubs(n, k_cross);
    if ((half * k_same) % 2 != 0) {
        result.parity_adjusted = true;
        for (std::size_t node : {std::size_t{0}, half}) {
            same_stubs[node] -= 1;
            cross_stubs[node] += 1;
        }
    }

    Rng rng(derive_seed(seed, stream::synth_graph));
    const std::size_t max_restarts = 50;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= max_restarts)
            throw std::invalid_argument("gen_gaussian_regular: pairing failed repeatedly");
        try {
            edges.clear();
            std::unordered_set<std::uint64_t> used;
            for (int cls = 0; cls < 2; ++cls) {
                std::vector<std::size_t> stubs;
                std::size_t lo = cls == 0 ? 0 : half, hi = cls == 0 ? half : n;
                for (std::size_t u = lo; u < hi; ++u)
                    stubs.insert(stubs.end(), same_stubs[u], u);
                rng.shuffle(stubs);
                std::vector<std::size_t> a(stubs.begin(), stubs.begin() + stubs.size() / 2);
                std::vector<std::size_t> b(stubs.begin() + stubs.size() / 2, stubs.end());
                detail::pair_stubs(a, b, used, edges, n, rng);
            }
            std::vector<std::size_t> cross_a, cross_b;
            for (std::size_t u = 0; u < half; ++u)
                cross_a.insert(cross_a.end(), cross_stubs[u], u);
            for (std::size_t u = half; u < n; ++u)
                cross_b.insert(cross_b.end(), cross_stubs[u], u);
            rng.shuffle(cross_a);
            rng.shuffle(cross_b);
            detail::pair_stubs(cross_a, cross_b, used, edges, n, rng);
            break;
        } catch (const std::invalid_argument&) {
            if (attempt + 1 >= max_restarts) throw;
        }
    }
    result.graph = build_graph(n, edges);

    Rng feat_rng(derive_seed(seed, stream::synth_features));
    result.features = DenseMatrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        bool cls2 = result.labels.values[i] == 1;
        double mu = cls2 ? spec.mu2 : spec.mu1;
        double sigma = cls2 ? spec.sigma2 : spec.sigma1;
        result.features(i, 0) = mu + sigma * feat_rng.next_normal();
    }
    return result;
}

// Replaces every node's feature row by the mean over its neighbors
// (excluding itself); degree-0 nodes become zero.
inline DenseMatrix mean_aggregate(const Graph& g, const DenseMatrix& features) {
    if (features.rows != g.num_nodes)
        throw std::invalid_argument("mean_aggregate: feature rows != node count");
    DenseMatrix out(features.rows, features.cols);
    for (std::size_t u = 0; u < g.num_nodes; ++u) {
        std::size_t deg = g.degree(u);
        if (deg == 0) continue;
        double* orow = out.row(u);
        for (std::size_t k = g.row_offsets[u]; k < g.row_offsets[u + 1]; ++k) {
            const double* nrow = features.row(g.col_indices[k]);
            for (std::size_t j = 0; j < features.cols; ++j) orow[j] += nrow[j];
        }
        for (std::size_t j = 0; j < features.cols; ++j)
            orow[j] /= static_cast<double>(deg);
    }
    return out;
}

}  // namespace synth
}  // namespace ingnn
