#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ingnn/graph.hpp"
#include "ingnn/nn.hpp"
#include "ingnn/rng.hpp"
#include "ingnn/sparse.hpp"

namespace ingnn {

enum class FusionMode { adaptive, equal_sum, concat };

inline std::string to_string(FusionMode m) {
    switch (m) {
        case FusionMode::adaptive: return "adaptive";
        case FusionMode::equal_sum: return "equal_sum";
        case FusionMode::concat: return "concat";
    }
    return "adaptive";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "adaptive") return FusionMode::adaptive;
    if (s == "equal_sum") return FusionMode::equal_sum;
    if (s == "concat") return FusionMode::concat;
    throw std::invalid_argument("unknown fusion mode: " + s);
}

struct IngnnConfig {
    std::size_t hidden = 64;      // d
    std::size_t prop_steps = 5;   // s1, neighborhood propagation depth
    std::size_t adj_powers = 2;   // s2, adjacency powers in the structure branch
    double dropout = 0.5;
    bool row_normalize_features = false;  // row-wise L1 normalization of X
    bool add_self_loops = false;          // GCN-style Â variant; off by default
    bool strc_literal = false;            // debug: batch-normalize the N×N operator itself
    FusionMode fusion_mode = FusionMode::adaptive;
    bool disable_ego = false;
    bool disable_agg = false;
    bool disable_strc = false;

    void check() const {
        if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
        if (prop_steps < 1) throw std::invalid_argument("prop_steps must be >= 1");
        if (adj_powers < 1) throw std::invalid_argument("adj_powers must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0)
            throw std::invalid_argument("dropout must be in [0,1)");
        if (disable_ego && disable_agg && disable_strc)
            throw std::invalid_argument("at least one feature branch must stay enabled");
    }

    bool ego_enabled() const { return !disable_ego; }
    bool agg_enabled() const { return !disable_agg; }
    bool strc_enabled() const { return !disable_strc; }

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["hidden"] = std::to_string(hidden);
        kv["prop_steps"] = std::to_string(prop_steps);
        kv["adj_powers"] = std::to_string(adj_powers);
        std::ostringstream drop;
        drop.precision(17);
        drop << dropout;
        kv["dropout"] = drop.str();
        kv["row_normalize_features"] = row_normalize_features ? "true" : "false";
        kv["add_self_loops"] = add_self_loops ? "true" : "false";
        kv["strc_literal"] = strc_literal ? "true" : "false";
        kv["fusion_mode"] = to_string(fusion_mode);
        kv["disable_ego"] = disable_ego ? "true" : "false";
        kv["disable_agg"] = disable_agg ? "true" : "false";
        kv["disable_strc"] = disable_strc ? "true" : "false";
        return kv;
    }

    static bool parse_bool(const std::string& v) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::invalid_argument("expected boolean, got: " + v);
    }

    static IngnnConfig from_kv(const std::map<std::string, std::string>& kv) {
        IngnnConfig cfg;
        auto get = [&kv](const std::string& key, const std::string& fallback) {
            auto it = kv.find(key);
            return it == kv.end() ? fallback : it->second;
        };
        cfg.hidden = std::stoul(get("hidden", "64"));
        cfg.prop_steps = std::stoul(get("prop_steps", "5"));
        cfg.adj_powers = std::stoul(get("adj_powers", "2"));
        cfg.dropout = std::stod(get("dropout", "0.5"));
        cfg.row_normalize_features = parse_bool(get("row_normalize_features", "false"));
        cfg.add_self_loops = parse_bool(get("add_self_loops", "false"));
        cfg.strc_literal = parse_bool(get("strc_literal", "false"));
        cfg.fusion_mode = fusion_mode_from_string(get("fusion_mode", "adaptive"));
        cfg.disable_ego = parse_bool(get("disable_ego", "false"));
        cfg.disable_agg = parse_bool(get("disable_agg", "false"));
        cfg.disable_strc = parse_bool(get("disable_strc", "false"));
        cfg.check();
        return cfg;
    }
};

// Sparse operators shared by every forward pass on a fixed graph.
struct GraphOps {
    SparseMatrix a_hat;  // D^{-1/2} A D^{-1/2}
    SparseMatrix a_raw;  // A with unit values
    std::size_t num_nodes = 0;
};

inline GraphOps build_graph_ops(const Graph& g, const IngnnConfig& cfg) {
    GraphOps ops;
    ops.a_hat = normalized_adjacency(g, cfg.add_self_loops);
    ops.a_raw = adjacency_matrix(g);
    ops.num_nodes = g.num_nodes;
    return ops;
}

// Prepared feature matrix. Mostly-zero inputs additionally carry a CSR view;
// the ego extraction then masks stored entries only, which is equivalent to
// dense dropout (dropping a zero is a no-op) at nnz cost.
struct FeatureInput {
    DenseMatrix dense;
    bool sparse = false;
    SparseMatrix csr;

    std::size_t rows() const { return dense.rows; }
    std::size_t cols() const { return dense.cols; }
};

inline FeatureInput prepare_features(const DenseMatrix& x, const IngnnConfig& cfg,
                                     double density_threshold = 0.25) {
    FeatureInput input;
    input.dense = cfg.row_normalize_features ? l1_normalize_rows(x) : x;
    std::size_t nnz = 0;
    for (double v : input.dense.data)
        if (v != 0.0) ++nnz;
    double density = input.dense.data.empty()
                         ? 1.0
                         : static_cast<double>(nnz) / static_cast<double>(input.dense.data.size());
    if (density < density_threshold) {
        input.sparse = true;
        input.csr = sparsify(input.dense);
    }
    return input;
}

// All trainable tensors of the model. Plain copyable struct; checkpointing is
// a copy assignment.
struct ModelParams {
    Linear w_ego;   // D×d
    Linear w_strc;  // N×d (transductive: grows with the graph)
    Linear w_pred;  // d×C, or 3d×C in concat mode
    std::vector<BatchNorm> bn_chain;
    std::vector<double> fusion_logits;  // p1, p2, p3
    std::vector<double> fusion_grad;

    void init(std::size_t feat_dim, std::size_t num_nodes, std::size_t num_classes,
              const IngnnConfig& cfg, Rng& rng) {
        cfg.check();
        std::size_t d = cfg.hidden;
        w_ego = Linear(feat_dim, d);
        w_strc = Linear(num_nodes, d);
        std::size_t pred_in = cfg.fusion_mode == FusionMode::concat ? 3 * d : d;
        w_pred = Linear(pred_in, num_classes);
        w_ego.init_glorot(rng);
        w_strc.init_glorot(rng);
        w_pred.init_glorot(rng);
        bn_chain.assign(cfg.adj_powers,
                        BatchNorm(cfg.strc_literal ? num_nodes : d));
        fusion_logits.assign(3, 0.0);
        fusion_grad.assign(3, 0.0);
    }

    std::vector<ParamRef> weight_param_refs() {
        std::vector<ParamRef> refs;
        refs.push_back({"w_ego", &w_ego.weight.data, &w_ego.grad.data});
        refs.push_back({"w_strc", &w_strc.weight.data, &w_strc.grad.data});
        refs.push_back({"w_pred", &w_pred.weight.data, &w_pred.grad.data});
        for (std::size_t j = 0; j < bn_chain.size(); ++j) {
            refs.push_back({"bn" + std::to_string(j) + "_gamma", &bn_chain[j].gamma,
                            &bn_chain[j].grad_gamma});
            refs.push_back({"bn" + std::to_string(j) + "_beta", &bn_chain[j].beta,
                            &bn_chain[j].grad_beta});
        }
        return refs;
    }

    std::vector<ParamRef> fusion_param_refs() {
        return {{"fusion_logits", &fusion_logits, &fusion_grad}};
    }

    void zero_weight_grads() {
        w_ego.zero_grad();
        w_strc.zero_grad();
        w_pred.zero_grad();
        for (BatchNorm& bn : bn_chain) bn.zero_grad();
    }

    void zero_fusion_grads() { std::fill(fusion_grad.begin(), fusion_grad.end(), 0.0); }
};

// Softmax over the enabled fusion logits; disabled branches are excluded from
// the softmax (not zeroed afterwards) so the remaining weights sum to 1.
// equal_sum mode pins the weights to 1/3 each.
inline std::array<double, 3> fusion_weights(const std::vector<double>& logits,
                                            const std::array<bool, 3>& enabled,
                                            FusionMode mode) {
    std::array<double, 3> pi{0.0, 0.0, 0.0};
    if (mode == FusionMode::equal_sum) {
        for (int s = 0; s < 3; ++s) pi[s] = 1.0 / 3.0;
        return pi;
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < 3; ++s)
        if (enabled[s]) max_logit = std::max(max_logit, logits[s]);
    double denom = 0.0;
    for (int s = 0; s < 3; ++s)
        if (enabled[s]) denom += std::exp(logits[s] - max_logit);
    for (int s = 0; s < 3; ++s)
        if (enabled[s]) pi[s] = std::exp(logits[s] - max_logit) / denom;
    return pi;
}

// H_agg = Σ_{i=1..s1} Âⁱ·H_ego, computed by repeated sparse products; Âⁱ is
// never materialized.
inline DenseMatrix extract_agg(const SparseMatrix& a_hat, const DenseMatrix& h_ego,
                               std::size_t s1) {
    DenseMatrix hop = spmm(a_hat, h_ego);
    DenseMatrix acc = hop;
    for (std::size_t i = 1; i < s1; ++i) {
        hop = spmm(a_hat, hop);
        add_inplace(acc, hop);
    }
    return acc;
}

struct ImportanceScores {
    std::array<double, 3> value{0.0, 0.0, 0.0};  // ego, agg, strc
    bool defined = false;
};

// I_s = π_s·⟨H_s⟩ / Σ_t π_t·⟨H_t⟩ with ⟨·⟩ the mean absolute value.
inline ImportanceScores importance_scores(const DenseMatrix& h_ego, const DenseMatrix& h_agg,
                                          const DenseMatrix& h_strc,
                                          const std::array<double, 3>& pi) {
    ImportanceScores out;
    std::array<double, 3> weighted{pi[0] * mean_abs(h_ego), pi[1] * mean_abs(h_agg),
                                   pi[2] * mean_abs(h_strc)};
    double denom = weighted[0] + weighted[1] + weighted[2];
    if (denom <= 0.0) return out;  // undefined, reported as such
    out.defined = true;
    for (int s = 0; s < 3; ++s) out.value[s] = weighted[s] / denom;
    return out;
}

// ---------------------------------------------------------------------------
// INGNN: three feature extractors, adaptive fusion, linear prediction head.
// Forward caches everything the hand-composed backward needs; an instance is
// confined to one worker at a time.
// ---------------------------------------------------------------------------
class IngnnModel {
public:
    IngnnConfig config;
    ModelParams params;

    IngnnModel() = default;

    IngnnModel(const IngnnConfig& cfg, std::size_t feat_dim, std::size_t num_nodes,
               std::size_t num_classes, Rng& init_rng)
        : config(cfg), input_dropout_(cfg.dropout), fuse_dropout_(cfg.dropout) {
        config.check();
        params.init(feat_dim, num_nodes, num_classes, cfg, init_rng);
    }

    DenseMatrix forward(const GraphOps& ops, const FeatureInput& x, Mode mode,
                        Rng& dropout_rng) {
        config.check();
        const std::size_t n = ops.num_nodes;
        const std::size_t d = config.hidden;
        mode_ = mode;

        bool need_ego = config.ego_enabled() || config.agg_enabled();
        if (need_ego) {
            extract_ego(x, mode, dropout_rng);
        } else {
            h_ego_ = DenseMatrix(n, d);
        }
        h_agg_ = config.agg_enabled() ? extract_agg(ops.a_hat, h_ego_, config.prop_steps)
                                      : DenseMatrix(n, d);
        if (config.strc_enabled()) {
            if (config.strc_literal)
                extract_strc_literal(ops, mode);
            else
                extract_strc(ops, mode);
        } else {
            h_strc_ = DenseMatrix(n, d);
        }

        if (config.fusion_mode == FusionMode::concat) {
            pi_ = {0.0, 0.0, 0.0};
            DenseMatrix cat(n, 3 * d);
            for (std::size_t i = 0; i < n; ++i) {
                double* out = cat.row(i);
                const double* e = h_ego_.row(i);
                const double* a = h_agg_.row(i);
                const double* s = h_strc_.row(i);
                for (std::size_t j = 0; j < d; ++j) {
                    out[j] = config.ego_enabled() ? e[j] : 0.0;
                    out[d + j] = a[j];
                    out[2 * d + j] = s[j];
                }
            }
            fused_dropped_ = fuse_dropout_.forward(cat, mode, dropout_rng);
        } else {
            pi_ = fusion_weights(params.fusion_logits,
                                 {config.ego_enabled(), config.agg_enabled(),
                                  config.strc_enabled()},
                                 config.fusion_mode);
            DenseMatrix fused(n, d);
            if (config.ego_enabled()) axpy_inplace(fused, pi_[0], h_ego_);
            if (config.agg_enabled()) axpy_inplace(fused, pi_[1], h_agg_);
            if (config.strc_enabled()) axpy_inplace(fused, pi_[2], h_strc_);
            fused_dropped_ = fuse_dropout_.forward(fused, mode, dropout_rng);
        }
        h_ = relu(fused_dropped_);
        logits_ = linear_forward(params.w_pred, h_);
        forward_done_ = true;
        return logits_;
    }

    // Propagates dL/dlogits back through the whole composition. The two flags
    // select which gradient group is accumulated; the other group's buffers
    // are untouched (kept exactly zero by the caller's zero_*_grads).
    void backward(const GraphOps& ops, const FeatureInput& x, const DenseMatrix& dlogits,
                  bool weight_grads, bool fusion_grads) {
        if (!forward_done_) throw std::logic_error("backward before forward");
        const std::size_t d = config.hidden;

        DenseMatrix dh;
        if (weight_grads) {
            dh = linear_backward(params.w_pred, h_, dlogits);
        } else {
            dh = matmul_a_bt(dlogits, params.w_pred.weight);
        }
        DenseMatrix dfused = fuse_dropout_.backward(relu_backward(dh, fused_dropped_));

        if (config.fusion_mode == FusionMode::concat) {
            if (!weight_grads) return;  // no fusion parameters exist in concat mode
            const std::size_t n = dfused.rows;
            DenseMatrix de(n, d), da(n, d), ds(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                const double* f = dfused.row(i);
                for (std::size_t j = 0; j < d; ++j) {
                    de(i, j) = f[j];
                    da(i, j) = f[d + j];
                    ds(i, j) = f[2 * d + j];
                }
            }
            backward_branches(ops, x, de, da, ds, 1.0, 1.0, 1.0);
            return;
        }

        if (fusion_grads && config.fusion_mode == FusionMode::adaptive) {
            std::array<bool, 3> enabled{config.ego_enabled(), config.agg_enabled(),
                                        config.strc_enabled()};
            std::array<double, 3> dpi{0.0, 0.0, 0.0};
            const DenseMatrix* branches[3] = {&h_ego_, &h_agg_, &h_strc_};
            for (int s = 0; s < 3; ++s) {
                if (!enabled[s]) continue;
                double acc = 0.0;
                for (std::size_t k = 0; k < dfused.data.size(); ++k)
                    acc += dfused.data[k] * branches[s]->data[k];
                dpi[s] = acc;
            }
            double inner = 0.0;
            for (int s = 0; s < 3; ++s)
                if (enabled[s]) inner += pi_[s] * dpi[s];
            for (int s = 0; s < 3; ++s)
                if (enabled[s]) params.fusion_grad[s] += pi_[s] * (dpi[s] - inner);
        }

        if (weight_grads)
            backward_branches(ops, x, dfused, dfused, dfused, pi_[0], pi_[1], pi_[2]);
    }

    const DenseMatrix& h_ego() const { return h_ego_; }
    const DenseMatrix& h_agg() const { return h_agg_; }
    const DenseMatrix& h_strc() const { return h_strc_; }
    const DenseMatrix& logits() const { return logits_; }
    const std::array<double, 3>& fusion_pi() const { return pi_; }

    ImportanceScores importance() const {
        return importance_scores(h_ego_, h_agg_, h_strc_, pi_);
    }

private:
    // H_ego = Dropout(X)·W_ego. On the sparse path the mask covers stored
    // entries only (dropping a structural zero changes nothing).
    void extract_ego(const FeatureInput& x, Mode mode, Rng& rng) {
        sparse_path_ = x.sparse;
        if (x.sparse) {
            x_dropped_sparse_ = x.csr;
            if (mode == Mode::train && config.dropout > 0.0) {
                const double keep_scale = 1.0 / (1.0 - config.dropout);
                for (double& v : x_dropped_sparse_.values)
                    v = rng.next_double() >= config.dropout ? v * keep_scale : 0.0;
            }
            h_ego_ = spmm(x_dropped_sparse_, params.w_ego.weight);
        } else {
            x_dropped_ = input_dropout_.forward(x.dense, mode, rng);
            h_ego_ = linear_forward(params.w_ego, x_dropped_);
        }
    }

    // Factored structure branch: S_1 = BN_1(A·W_strc), S_j = BN_j(A·S_{j-1}),
    // H_strc = Σ_j S_j. Keeps the per-power rescaling of the adjacency
    // products at O(s2·M·d) cost instead of batch-normalizing the N×N
    // operator itself (which the literal debug path below does).
    void extract_strc(const GraphOps& ops, Mode mode) {
        const std::size_t s2 = config.adj_powers;
        DenseMatrix current = spmm(ops.a_raw, params.w_strc.weight);
        current = params.bn_chain[0].forward(current, mode);
        h_strc_ = current;
        for (std::size_t j = 1; j < s2; ++j) {
            current = spmm(ops.a_raw, current);
            current = params.bn_chain[j].forward(current, mode);
            add_inplace(h_strc_, current);
        }
    }

    // Literal form: H_strc = Σ_j BN^j(A)·W_strc with BN over the N columns of
    // the (dense) operator. Guarded to small graphs; not numerically
    // equivalent to the factored form (different normalization axes).
    void extract_strc_literal(const GraphOps& ops, Mode mode) {
        const std::size_t n = ops.num_nodes;
        if (n > 512)
            throw std::invalid_argument("strc_literal is limited to graphs with N <= 512");
        DenseMatrix power = params.bn_chain[0].forward(densify(ops.a_raw), mode);
        literal_sum_ = power;
        for (std::size_t j = 1; j < config.adj_powers; ++j) {
            power = params.bn_chain[j].forward(spmm(ops.a_raw, power), mode);
            add_inplace(literal_sum_, power);
        }
        h_strc_ = linear_forward(params.w_strc, literal_sum_);
    }

    void backward_strc(const GraphOps& ops, const DenseMatrix& dh_strc) {
        if (config.strc_literal) {
            add_inplace(params.w_strc.grad, matmul_at_b(literal_sum_, dh_strc));
            DenseMatrix dsum = matmul_a_bt(dh_strc, params.w_strc.weight);
            DenseMatrix carry;
            for (std::size_t j = config.adj_powers; j >= 1; --j) {
                DenseMatrix dp = j == config.adj_powers ? dsum : add(dsum, carry);
                DenseMatrix du = params.bn_chain[j - 1].backward(dp);
                if (j > 1) carry = spmm(ops.a_raw, du);  // A symmetric
            }
            return;
        }
        DenseMatrix carry;
        for (std::size_t j = config.adj_powers; j >= 1; --j) {
            DenseMatrix ds = j == config.adj_powers ? dh_strc : add(dh_strc, carry);
            DenseMatrix du = params.bn_chain[j - 1].backward(ds);
            if (j > 1)
                carry = spmm(ops.a_raw, du);
            else
                add_inplace(params.w_strc.grad, spmm_transposed(ops.a_raw, du));
        }
    }

    void backward_branches(const GraphOps& ops, const FeatureInput& x,
                           const DenseMatrix& de, const DenseMatrix& da,
                           const DenseMatrix& ds, double w_ego_scale, double w_agg_scale,
                           double w_strc_scale) {
        if (config.strc_enabled()) backward_strc(ops, scale(ds, w_strc_scale));

        DenseMatrix dh_ego;
        bool have_ego_grad = false;
        if (config.agg_enabled()) {
            // dH_ego += Σ_{i=1..s1} Âⁱ·(π₂·dZ); Â symmetric, same loop as forward
            DenseMatrix hop = spmm(ops.a_hat, scale(da, w_agg_scale));
            dh_ego = hop;
            for (std::size_t i = 1; i < config.prop_steps; ++i) {
                hop = spmm(ops.a_hat, hop);
                add_inplace(dh_ego, hop);
            }
            have_ego_grad = true;
        }
        if (config.ego_enabled()) {
            if (have_ego_grad)
                axpy_inplace(dh_ego, w_ego_scale, de);
            else {
                dh_ego = scale(de, w_ego_scale);
                have_ego_grad = true;
            }
        }
        if (!have_ego_grad) return;
        if (sparse_path_)
            add_inplace(params.w_ego.grad, spmm_transposed(x_dropped_sparse_, dh_ego));
        else
            linear_backward(params.w_ego, x_dropped_, dh_ego);
    }

    Dropout input_dropout_{0.5};
    Dropout fuse_dropout_{0.5};
    Mode mode_ = Mode::eval;
    bool forward_done_ = false;
    bool sparse_path_ = false;
    DenseMatrix x_dropped_;
    SparseMatrix x_dropped_sparse_;
    DenseMatrix h_ego_, h_agg_, h_strc_;
    DenseMatrix literal_sum_;
    DenseMatrix fused_dropped_;
    DenseMatrix h_;
    DenseMatrix logits_;
    std::array<double, 3> pi_{0.0, 0.0, 0.0};
};

}  // namespace ingnn
