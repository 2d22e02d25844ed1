#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ingnn/graph.hpp"
#include "ingnn/model.hpp"
#include "ingnn/nn.hpp"
#include "ingnn/rng.hpp"

namespace ingnn {

// Alternation schedule of the bi-level loop: W trains for
// `w_epochs_per_round` epochs on the train split, then the fusion logits
// train for `p_epochs_per_round` epochs on the validation split with dropout
// and batch norm in eval mode.
struct Schedule {
    std::size_t w_epochs_per_round = 20;
    std::size_t p_epochs_per_round = 10;
    double p_lr = 0.01;
    std::size_t patience = 100;
    std::size_t max_epochs = 3000;

    void check() const {
        if (w_epochs_per_round == 0 || p_epochs_per_round == 0 || patience == 0 ||
            max_epochs == 0 || p_lr <= 0.0)
            throw std::invalid_argument("schedule fields must be positive");
    }
};

struct TrainConfig {
    IngnnConfig model;
    double lr = 0.01;
    double weight_decay = 5e-4;
    bool bilevel = true;

    std::map<std::string, std::string> to_kv() const {
        auto kv = model.to_kv();
        std::ostringstream lr_s, wd_s;
        lr_s.precision(17);
        wd_s.precision(17);
        lr_s << lr;
        wd_s << weight_decay;
        kv["lr"] = lr_s.str();
        kv["weight_decay"] = wd_s.str();
        kv["bilevel"] = bilevel ? "true" : "false";
        return kv;
    }
};

struct EpochMetrics {
    std::size_t epoch = 0;
    char phase = 'W';
    double train_loss = 0.0;
    double train_acc = 0.0;
    double valid_loss = 0.0;
    double valid_acc = 0.0;

    bool operator==(const EpochMetrics&) const = default;
};

struct RunRecord {
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::vector<EpochMetrics> epochs;
    std::array<double, 3> final_fusion_logits{0.0, 0.0, 0.0};
    std::array<double, 3> final_importance{0.0, 0.0, 0.0};
    bool importance_defined = false;
    double test_accuracy = 0.0;
    double best_valid_accuracy = 0.0;
    std::size_t best_epoch = 0;
    std::string status = "ok";
    double wall_time_seconds = 0.0;
};

// Argmax accuracy; ties break toward the lowest class id.
inline double accuracy_from_logits(const DenseMatrix& logits, const Labels& labels,
                                   const std::vector<std::size_t>& index_set) {
    if (index_set.empty()) throw std::invalid_argument("accuracy over an empty index set");
    std::size_t correct = 0;
    for (std::size_t idx : index_set) {
        const double* row = logits.row(idx);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols; ++c)
            if (row[c] > row[best]) best = c;
        if (static_cast<int>(best) == labels.values[idx]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(index_set.size());
}

namespace detail {

inline void require_zero_grads(const std::vector<ParamRef>& refs, const char* which) {
    for (const ParamRef& ref : refs)
        for (double g : *ref.grad)
            if (g != 0.0)
                throw std::logic_error(std::string("phase isolation violated: nonzero ") +
                                       which + " gradient in " + ref.name);
}

inline std::map<std::string, std::string> run_config_kv(const TrainConfig& cfg,
                                                        const Schedule& sched,
                                                        std::uint64_t seed) {
    auto kv = cfg.to_kv();
    kv["w_epochs_per_round"] = std::to_string(sched.w_epochs_per_round);
    kv["p_epochs_per_round"] = std::to_string(sched.p_epochs_per_round);
    std::ostringstream plr;
    plr.precision(17);
    plr << sched.p_lr;
    kv["p_lr"] = plr.str();
    kv["patience"] = std::to_string(sched.patience);
    kv["max_epochs"] = std::to_string(sched.max_epochs);
    kv["seed"] = std::to_string(seed);
    return kv;
}

}  // namespace detail

// Alternating first-order bi-level training (min_P L_valid subject to
// W* = argmin_W L_train): W epochs update the model weights on the train
// mask in train mode; P epochs update only the fusion logits on the
// validation mask with the model in eval mode. Early-stops when validation
// accuracy has not improved for `patience` epochs (counting both phases),
// restores the best-validation parameters, then evaluates the test split
// exactly once.
inline RunRecord bilevel_train(const Graph& g, const DenseMatrix& features,
                               const Labels& labels, const DataSplit& split,
                               const TrainConfig& cfg, const Schedule& sched,
                               std::uint64_t seed,
                               ModelParams* trained_params = nullptr) {
    cfg.model.check();
    sched.check();
    validate_labels(labels, g.num_nodes);
    validate_split(split, g.num_nodes);
    if (features.rows != g.num_nodes)
        throw std::invalid_argument("feature row count does not match node count");

    const auto t_start = std::chrono::steady_clock::now();
    RunRecord record;
    record.config = detail::run_config_kv(cfg, sched, seed);
    record.seed = seed;

    GraphOps ops = build_graph_ops(g, cfg.model);
    FeatureInput input = prepare_features(features, cfg.model);

    Rng init_rng(derive_seed(seed, stream::param_init));
    Rng dropout_rng(derive_seed(seed, stream::dropout));
    IngnnModel model(cfg.model, input.cols(), g.num_nodes,
                     static_cast<std::size_t>(labels.num_classes), init_rng);

    const bool has_fusion_params = cfg.model.fusion_mode == FusionMode::adaptive;
    const bool alternating = cfg.bilevel && has_fusion_params;

    std::vector<ParamRef> weight_refs = model.params.weight_param_refs();
    std::vector<ParamRef> fusion_refs = model.params.fusion_param_refs();
    std::vector<ParamRef> joint_refs = weight_refs;
    if (has_fusion_params && !cfg.bilevel)
        joint_refs.insert(joint_refs.end(), fusion_refs.begin(), fusion_refs.end());

    AdamState opt_w(cfg.lr, cfg.weight_decay);
    AdamState opt_p(sched.p_lr, 0.0);
    if (alternating) {
        opt_w.attach(weight_refs);
        opt_p.attach(fusion_refs);
    } else {
        opt_w.attach(joint_refs);
    }

    ModelParams best_params = model.params;
    double best_valid_acc = -1.0;
    double best_valid_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;           // epoch of the restored checkpoint
    std::size_t last_acc_gain_epoch = 0;  // drives the patience counter
    const std::size_t cycle = sched.w_epochs_per_round + sched.p_epochs_per_round;

    for (std::size_t epoch = 1; epoch <= sched.max_epochs; ++epoch) {
        const bool p_phase = alternating && ((epoch - 1) % cycle) >= sched.w_epochs_per_round;
        double step_loss;
        if (p_phase) {
            model.forward(ops, input, Mode::eval, dropout_rng);
            LossResult loss = softmax_cross_entropy(model.logits(), labels.values, split.valid);
            step_loss = loss.loss;
            model.params.zero_fusion_grads();
            model.backward(ops, input, loss.grad, /*weight_grads=*/false,
                           /*fusion_grads=*/true);
            detail::require_zero_grads(weight_refs, "weight");
            adam_step(opt_p, fusion_refs);
            model.params.zero_fusion_grads();
        } else {
            model.forward(ops, input, Mode::train, dropout_rng);
            LossResult loss = softmax_cross_entropy(model.logits(), labels.values, split.train);
            step_loss = loss.loss;
            if (alternating) {
                model.params.zero_weight_grads();
                model.backward(ops, input, loss.grad, true, false);
                detail::require_zero_grads(fusion_refs, "fusion");
                adam_step(opt_w, weight_refs);
                model.params.zero_weight_grads();
            } else {
                model.params.zero_weight_grads();
                model.params.zero_fusion_grads();
                model.backward(ops, input, loss.grad, true, has_fusion_params);
                adam_step(opt_w, joint_refs);
                model.params.zero_weight_grads();
                model.params.zero_fusion_grads();
            }
        }

        if (!std::isfinite(step_loss)) {
            record.status = "diverged";
            record.epochs.push_back({epoch, p_phase ? 'P' : 'W', step_loss, 0.0, step_loss, 0.0});
            break;
        }

        // metrics pass: one eval-mode forward serves both masks
        model.forward(ops, input, Mode::eval, dropout_rng);
        LossResult train_eval =
            softmax_cross_entropy(model.logits(), labels.values, split.train);
        LossResult valid_eval =
            softmax_cross_entropy(model.logits(), labels.values, split.valid);
        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.phase = p_phase ? 'P' : 'W';
        metrics.train_loss = train_eval.loss;
        metrics.train_acc = accuracy_from_logits(model.logits(), labels, split.train);
        metrics.valid_loss = valid_eval.loss;
        metrics.valid_acc = accuracy_from_logits(model.logits(), labels, split.valid);
        record.epochs.push_back(metrics);

        // checkpoint on accuracy, validation loss breaking ties (a saturated
        // validation accuracy would otherwise pin the checkpoint to the first
        // lucky epoch); the patience counter tracks accuracy gains only
        if (metrics.valid_acc > best_valid_acc ||
            (metrics.valid_acc == best_valid_acc && metrics.valid_loss < best_valid_loss)) {
            if (metrics.valid_acc > best_valid_acc) last_acc_gain_epoch = epoch;
            best_valid_acc = metrics.valid_acc;
            best_valid_loss = metrics.valid_loss;
            best_epoch = epoch;
            best_params = model.params;
        }
        if (epoch - last_acc_gain_epoch >= sched.patience) break;
    }

    model.params = best_params;
    record.best_epoch = best_epoch;
    record.best_valid_accuracy = best_valid_acc < 0.0 ? 0.0 : best_valid_acc;
    for (int s = 0; s < 3; ++s) record.final_fusion_logits[s] = model.params.fusion_logits[s];

    if (record.status == "ok") {
        model.forward(ops, input, Mode::eval, dropout_rng);
        record.test_accuracy = split.test.empty()
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : accuracy_from_logits(model.logits(), labels, split.test);
        ImportanceScores imp = model.importance();
        record.final_importance = imp.value;
        record.importance_defined = imp.defined;
    } else {
        record.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    }

    if (trained_params != nullptr) *trained_params = model.params;
    record.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return record;
}

// ---------------------------------------------------------------------------
// MLP control: Dropout → Linear → ReLU → Linear on X only. Trained with the
// same early-stopping protocol; graph-independent by construction.
// ---------------------------------------------------------------------------
inline RunRecord mlp_baseline(const DenseMatrix& features, const Labels& labels,
                              const DataSplit& split, std::size_t hidden, double lr,
                              double weight_decay, double dropout_rate,
                              const Schedule& sched, std::uint64_t seed) {
    sched.check();
    validate_labels(labels, features.rows);
    validate_split(split, features.rows);

    const auto t_start = std::chrono::steady_clock::now();
    RunRecord record;
    record.seed = seed;
    record.config["baseline"] = "mlp";
    record.config["hidden"] = std::to_string(hidden);
    record.config["seed"] = std::to_string(seed);

    Rng init_rng(derive_seed(seed, stream::param_init));
    Rng dropout_rng(derive_seed(seed, stream::dropout));
    Linear l1(features.cols, hidden), l2(hidden, static_cast<std::size_t>(labels.num_classes));
    l1.init_glorot(init_rng);
    l2.init_glorot(init_rng);
    Dropout drop(dropout_rate);
    std::vector<ParamRef> refs = {{"l1", &l1.weight.data, &l1.grad.data},
                                  {"l2", &l2.weight.data, &l2.grad.data}};
    AdamState opt(lr, weight_decay);
    opt.attach(refs);

    DenseMatrix x_drop, h_pre, h_act;
    auto forward = [&](Mode mode) {
        x_drop = drop.forward(features, mode, dropout_rng);
        h_pre = linear_forward(l1, x_drop);
        h_act = relu(h_pre);
        return linear_forward(l2, h_act);
    };

    DenseMatrix best_w1 = l1.weight, best_w2 = l2.weight;
    double best_valid_acc = -1.0;
    double best_valid_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t last_acc_gain_epoch = 0;

    for (std::size_t epoch = 1; epoch <= sched.max_epochs; ++epoch) {
        DenseMatrix logits = forward(Mode::train);
        LossResult loss = softmax_cross_entropy(logits, labels.values, split.train);
        if (!std::isfinite(loss.loss)) {
            record.status = "diverged";
            break;
        }
        l1.zero_grad();
        l2.zero_grad();
        DenseMatrix dh = linear_backward(l2, h_act, loss.grad);
        DenseMatrix dpre = relu_backward(dh, h_pre);
        linear_backward(l1, x_drop, dpre);
        adam_step(opt, refs);

        DenseMatrix eval_logits = forward(Mode::eval);
        LossResult train_eval = softmax_cross_entropy(eval_logits, labels.values, split.train);
        LossResult valid_eval = softmax_cross_entropy(eval_logits, labels.values, split.valid);
        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.phase = 'W';
        metrics.train_loss = train_eval.loss;
        metrics.train_acc = accuracy_from_logits(eval_logits, labels, split.train);
        metrics.valid_loss = valid_eval.loss;
        metrics.valid_acc = accuracy_from_logits(eval_logits, labels, split.valid);
        record.epochs.push_back(metrics);

        if (metrics.valid_acc > best_valid_acc ||
            (metrics.valid_acc == best_valid_acc && metrics.valid_loss < best_valid_loss)) {
            if (metrics.valid_acc > best_valid_acc) last_acc_gain_epoch = epoch;
            best_valid_acc = metrics.valid_acc;
            best_valid_loss = metrics.valid_loss;
            best_epoch = epoch;
            best_w1 = l1.weight;
            best_w2 = l2.weight;
        }
        if (epoch - last_acc_gain_epoch >= sched.patience) break;
    }

    l1.weight = best_w1;
    l2.weight = best_w2;
    record.best_epoch = best_epoch;
    record.best_valid_accuracy = best_valid_acc < 0.0 ? 0.0 : best_valid_acc;
    if (record.status == "ok") {
        DenseMatrix logits = forward(Mode::eval);
        record.test_accuracy = split.test.empty()
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : accuracy_from_logits(logits, labels, split.test);
    } else {
        record.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    record.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return record;
}

// ---------------------------------------------------------------------------
// Grid search over the hyper-parameter options; selects by mean validation
// accuracy across the supplied splits (first occurrence wins ties).
// ---------------------------------------------------------------------------
struct GridSpec {
    std::vector<std::size_t> hidden{64, 128};
    std::vector<std::size_t> prop_steps{2, 5, 10, 20};
    std::vector<std::size_t> adj_powers{1, 2, 5};
    std::vector<double> lr{0.01, 0.001};
    std::vector<double> weight_decay{0.001, 0.0005};
    std::vector<bool> normalize{true, false};
};

struct GridRow {
    TrainConfig config;
    double mean_valid_accuracy = 0.0;
    double mean_test_accuracy = 0.0;
    std::vector<RunRecord> runs;
};

struct GridResult {
    std::size_t best_index = 0;
    std::vector<GridRow> table;
};

inline GridResult grid_search(const Graph& g, const DenseMatrix& features,
                              const Labels& labels, const std::vector<DataSplit>& splits,
                              const TrainConfig& base, const GridSpec& grid,
                              const Schedule& sched, std::uint64_t seed) {
    if (grid.hidden.empty() || grid.prop_steps.empty() || grid.adj_powers.empty() ||
        grid.lr.empty() || grid.weight_decay.empty() || grid.normalize.empty())
        throw std::invalid_argument("grid_search: empty grid dimension");
    if (splits.empty()) throw std::invalid_argument("grid_search: no splits");

    GridResult result;
    double best_valid = -1.0;
    for (std::size_t ih = 0; ih < grid.hidden.size(); ++ih)
        for (std::size_t i1 = 0; i1 < grid.prop_steps.size(); ++i1)
            for (std::size_t i2 = 0; i2 < grid.adj_powers.size(); ++i2)
                for (std::size_t il = 0; il < grid.lr.size(); ++il)
                    for (std::size_t iw = 0; iw < grid.weight_decay.size(); ++iw)
                        for (std::size_t in = 0; in < grid.normalize.size(); ++in) {
                            GridRow row;
                            row.config = base;
                            row.config.model.hidden = grid.hidden[ih];
                            row.config.model.prop_steps = grid.prop_steps[i1];
                            row.config.model.adj_powers = grid.adj_powers[i2];
                            row.config.lr = grid.lr[il];
                            row.config.weight_decay = grid.weight_decay[iw];
                            row.config.model.row_normalize_features = grid.normalize[in];
                            double valid_sum = 0.0, test_sum = 0.0;
                            for (std::size_t r = 0; r < splits.size(); ++r) {
                                RunRecord rec =
                                    bilevel_train(g, features, labels, splits[r], row.config,
                                                  sched, derive_seed(seed, r));
                                valid_sum += rec.best_valid_accuracy;
                                test_sum += rec.test_accuracy;
                                row.runs.push_back(std::move(rec));
                            }
                            row.mean_valid_accuracy =
                                valid_sum / static_cast<double>(splits.size());
                            row.mean_test_accuracy =
                                test_sum / static_cast<double>(splits.size());
                            if (row.mean_valid_accuracy > best_valid) {
                                best_valid = row.mean_valid_accuracy;
                                result.best_index = result.table.size();
                            }
                            result.table.push_back(std::move(row));
                        }
    return result;
}

// ---------------------------------------------------------------------------
// Ablation suite: the base model plus six single-change variants. All runs share the split and seed so rows are directly comparable.
// ---------------------------------------------------------------------------
inline std::vector<std::pair<std::string, RunRecord>> ablation_suite(
    const Graph& g, const DenseMatrix& features, const Labels& labels,
    const DataSplit& split, const TrainConfig& base, const Schedule& sched,
    std::uint64_t seed) {
    std::vector<std::pair<std::string, TrainConfig>> variants;
    variants.emplace_back("base", base);
    {
        TrainConfig c = base;
        c.model.disable_ego = true;
        variants.emplace_back("wo_ego", c);
    }
    {
        TrainConfig c = base;
        c.model.disable_agg = true;
        variants.emplace_back("wo_agg", c);
    }
    {
        TrainConfig c = base;
        c.model.disable_strc = true;
        variants.emplace_back("wo_strc", c);
    }
    {
        TrainConfig c = base;
        c.model.fusion_mode = FusionMode::equal_sum;
        variants.emplace_back("wo_fusion", c);
    }
    {
        TrainConfig c = base;
        c.bilevel = false;
        variants.emplace_back("wo_bilevel", c);
    }
    {
        TrainConfig c = base;
        c.model.fusion_mode = FusionMode::concat;
        variants.emplace_back("concat", c);
    }

    std::vector<std::pair<std::string, RunRecord>> out;
    for (auto& [name, cfg] : variants)
        out.emplace_back(name, bilevel_train(g, features, labels, split, cfg, sched, seed));
    return out;
}

}  // namespace ingnn
