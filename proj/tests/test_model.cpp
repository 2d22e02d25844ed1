#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ingnn/model.hpp"
#include "oracles.hpp"

using namespace ingnn;

namespace {

// BN instances that act as the identity: unit gamma, zero beta, frozen
// running stats of mean 0 / var 1, used in eval mode with tiny eps.
void bypass_bn(std::vector<BatchNorm>& chain) {
    for (BatchNorm& bn : chain) {
        bn.eps = 1e-15;
        std::fill(bn.gamma.begin(), bn.gamma.end(), 1.0);
        std::fill(bn.beta.begin(), bn.beta.end(), 0.0);
        std::fill(bn.running_mean.begin(), bn.running_mean.end(), 0.0);
        std::fill(bn.running_var.begin(), bn.running_var.end(), 1.0);
    }
}

IngnnModel make_model(const IngnnConfig& cfg, std::size_t feat_dim, std::size_t n,
                      std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    return IngnnModel(cfg, feat_dim, n, classes, rng);
}

}  // namespace

TEST_CASE("extract_ego reduces to X in eval mode with identity weights") {
    IngnnConfig cfg;
    cfg.hidden = 3;
    cfg.prop_steps = 1;
    cfg.adj_powers = 1;
    Graph g = build_graph(4, {{0, 1}, {2, 3}});
    GraphOps ops = build_graph_ops(g, cfg);
    Rng rng(31);
    DenseMatrix x = oracle::random_matrix(4, 3, rng);
    FeatureInput input = prepare_features(x, cfg);

    IngnnModel model = make_model(cfg, 3, 4, 2, 1);
    model.params.w_ego.weight = DenseMatrix::identity(3);
    Rng dummy(0);
    model.forward(ops, input, Mode::eval, dummy);
    CHECK(oracle::max_abs_diff(model.h_ego(), x) == 0.0);
}

TEST_CASE("extract_ego with one-hot rows selects rows of the weight matrix") {
    IngnnConfig cfg;
    cfg.hidden = 4;
    Graph g = build_graph(3, {{0, 1}});
    GraphOps ops = build_graph_ops(g, cfg);
    DenseMatrix x(3, 5);
    x(0, 2) = 1.0;
    x(1, 0) = 1.0;
    x(2, 4) = 1.0;
    FeatureInput input = prepare_features(x, cfg);
    IngnnModel model = make_model(cfg, 5, 3, 2, 2);
    Rng dummy(0);
    model.forward(ops, input, Mode::eval, dummy);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(model.h_ego()(0, j) == model.params.w_ego.weight(2, j));
        CHECK(model.h_ego()(1, j) == model.params.w_ego.weight(0, j));
        CHECK(model.h_ego()(2, j) == model.params.w_ego.weight(4, j));
    }
}

TEST_CASE("train-mode dropout expectation reproduces the eval path") {
    IngnnConfig cfg;
    cfg.hidden = 2;
    cfg.dropout = 0.5;
    Graph g = build_graph(2, {{0, 1}});
    GraphOps ops = build_graph_ops(g, cfg);
    DenseMatrix x(2, 2, 1.0);
    FeatureInput input = prepare_features(x, cfg);
    IngnnModel model = make_model(cfg, 2, 2, 2, 3);
    Rng dropout_rng(77);
    Rng dummy(0);
    model.forward(ops, input, Mode::eval, dummy);
    DenseMatrix expected = model.h_ego();

    DenseMatrix acc(2, 2);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        model.forward(ops, input, Mode::train, dropout_rng);
        add_inplace(acc, model.h_ego());
    }
    // each H_ego entry is an average of `draws` masked sums; allow 4 sigma
    for (std::size_t k = 0; k < acc.data.size(); ++k) {
        double mean = acc.data[k] / draws;
        double w2 = 0.0;
        for (std::size_t r = 0; r < 2; ++r)
            w2 += model.params.w_ego.weight(r, k % 2) * model.params.w_ego.weight(r, k % 2);
        double sigma = std::sqrt(w2 / draws);  // var of Bernoulli(1/2)·2w is w²
        CHECK(std::fabs(mean - expected.data[k]) < 4.0 * sigma + 1e-12);
    }
}

TEST_CASE("extract_agg examples") {
    SECTION("edgeless graph gives zero") {
        SparseMatrix a(3, 3);
        DenseMatrix h(3, 2, 1.0);
        CHECK(oracle::max_abs_diff(extract_agg(a, h, 3), DenseMatrix(3, 2)) == 0.0);
    }
    SECTION("two-node chain, s1=2") {
        Graph g = build_graph(2, {{0, 1}});
        SparseMatrix a = normalized_adjacency(g);
        DenseMatrix h(2, 1);
        h(0, 0) = 1.0;
        DenseMatrix out = extract_agg(a, h, 2);
        CHECK(out(0, 0) == Catch::Approx(1.0));
        CHECK(out(1, 0) == Catch::Approx(1.0));
    }
    SECTION("s1=1 on a 4-cycle halves the neighbor sum") {
        Graph g = build_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
        SparseMatrix a = normalized_adjacency(g);
        Rng rng(32);
        DenseMatrix h = oracle::random_matrix(4, 3, rng);
        DenseMatrix out = extract_agg(a, h, 1);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double neighbor_sum = 0.0;
                for (const std::size_t* it = g.neighbors_begin(i); it != g.neighbors_end(i);
                     ++it)
                    neighbor_sum += h(*it, j);
                CHECK(out(i, j) == Catch::Approx(0.5 * neighbor_sum));
            }
    }
    SECTION("linear in its input") {
        Rng rng(33);
        Graph g = oracle::random_graph(6, 0.5, rng);
        SparseMatrix a = normalized_adjacency(g);
        DenseMatrix h = oracle::random_matrix(6, 2, rng);
        DenseMatrix lhs = extract_agg(a, scale(h, 2.5), 3);
        DenseMatrix rhs = scale(extract_agg(a, h, 3), 2.5);
        CHECK(oracle::max_rel_diff(lhs, rhs) < 1e-12);
    }
}

TEST_CASE("structure branch examples") {
    SECTION("s2=1 with bypassed BN equals A times the weights") {
        IngnnConfig cfg;
        cfg.hidden = 3;
        cfg.adj_powers = 1;
        Rng rng(34);
        Graph g = oracle::random_graph(5, 0.5, rng);
        GraphOps ops = build_graph_ops(g, cfg);
        DenseMatrix x = oracle::random_matrix(5, 2, rng);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 2, 5, 2, 4);
        bypass_bn(model.params.bn_chain);
        Rng dummy(0);
        model.forward(ops, input, Mode::eval, dummy);
        DenseMatrix expected =
            oracle::naive_matmul(densify(ops.a_raw), model.params.w_strc.weight);
        CHECK(oracle::max_rel_diff(model.h_strc(), expected) < 1e-9);
    }
    SECTION("zero-edge graph yields beta-constant rows") {
        IngnnConfig cfg;
        cfg.hidden = 2;
        cfg.adj_powers = 2;
        Graph g = build_graph(4, {});
        GraphOps ops = build_graph_ops(g, cfg);
        DenseMatrix x(4, 2, 1.0);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 2, 4, 2, 5);
        for (std::size_t j = 0; j < 2; ++j) {
            model.params.bn_chain[0].beta[j] = 0.25 * (j + 1);
            model.params.bn_chain[1].beta[j] = 0.5;
        }
        Rng dummy(0);
        model.forward(ops, input, Mode::train, dummy);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(model.h_strc()(i, j) ==
                      Catch::Approx(0.25 * (j + 1) + 0.5).margin(1e-12));
    }
    SECTION("train-mode BN keeps per-step column std near 1") {
        IngnnConfig cfg;
        cfg.hidden = 4;
        cfg.adj_powers = 1;
        Rng rng(35);
        Graph g = oracle::random_graph(30, 0.3, rng);
        GraphOps ops = build_graph_ops(g, cfg);
        DenseMatrix x = oracle::random_matrix(30, 3, rng);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 3, 30, 2, 6);
        Rng dummy(0);
        model.forward(ops, input, Mode::train, dummy);
        const DenseMatrix& s = model.h_strc();  // s2=1: H_strc == S_1
        for (std::size_t j = 0; j < 4; ++j) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < 30; ++i) mean += s(i, j);
            mean /= 30.0;
            for (std::size_t i = 0; i < 30; ++i) var += (s(i, j) - mean) * (s(i, j) - mean);
            var /= 30.0;
            CHECK(std::sqrt(var) == Catch::Approx(1.0).margin(1e-3));
        }
    }
}

TEST_CASE("fusion weights") {
    std::array<bool, 3> all{true, true, true};
    std::vector<double> zero{0.0, 0.0, 0.0};
    auto pi = fusion_weights(zero, all, FusionMode::adaptive);
    for (double p : pi) CHECK(p == Catch::Approx(1.0 / 3.0));

    std::vector<double> ln2{std::log(2.0), 0.0, 0.0};
    auto pi2 = fusion_weights(ln2, all, FusionMode::adaptive);
    CHECK(pi2[0] == Catch::Approx(0.5));
    CHECK(pi2[1] == Catch::Approx(0.25));
    CHECK(pi2[2] == Catch::Approx(0.25));

    // disabled logits are excluded from the softmax, remaining weights sum to 1
    auto pi3 = fusion_weights(ln2, {true, false, true}, FusionMode::adaptive);
    CHECK(pi3[1] == 0.0);
    CHECK(pi3[0] + pi3[2] == Catch::Approx(1.0));
    CHECK(pi3[0] == Catch::Approx(2.0 / 3.0));

    auto pi4 = fusion_weights(ln2, all, FusionMode::equal_sum);
    for (double p : pi4) CHECK(p == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("fusion weights stay a probability vector for wild logits") {
    Rng rng(36);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> logits = {rng.next_normal() * 50.0, rng.next_normal() * 50.0,
                                      rng.next_normal() * 50.0};
        auto pi = fusion_weights(logits, {true, true, true}, FusionMode::adaptive);
        double sum = pi[0] + pi[1] + pi[2];
        CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
        for (double p : pi) {
            CHECK(p > 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("fused sum with zero side branches reduces to the ego branch") {
    IngnnConfig cfg;
    cfg.hidden = 3;
    cfg.disable_agg = true;
    cfg.disable_strc = true;
    Graph g = build_graph(4, {{0, 1}, {1, 2}});
    GraphOps ops = build_graph_ops(g, cfg);
    Rng rng(37);
    DenseMatrix x = oracle::random_matrix(4, 3, rng);
    FeatureInput input = prepare_features(x, cfg);
    IngnnModel model = make_model(cfg, 3, 4, 2, 7);
    Rng dummy(0);
    DenseMatrix logits = model.forward(ops, input, Mode::eval, dummy);
    // single enabled branch gets the full softmax mass, so H = ReLU(H_ego)
    CHECK(model.fusion_pi()[0] == 1.0);
    DenseMatrix expected = matmul(relu(model.h_ego()), model.params.w_pred.weight);
    CHECK(oracle::max_abs_diff(logits, expected) < 1e-14);
}

TEST_CASE("forward determinism and softmax row sums") {
    IngnnConfig cfg;
    cfg.hidden = 4;
    Rng rng(38);
    Graph g = oracle::random_graph(8, 0.4, rng);
    GraphOps ops = build_graph_ops(g, cfg);
    DenseMatrix x = oracle::random_matrix(8, 5, rng);
    FeatureInput input = prepare_features(x, cfg);
    IngnnModel model = make_model(cfg, 5, 8, 3, 8);
    Rng dummy(0);
    DenseMatrix l1 = model.forward(ops, input, Mode::eval, dummy);
    DenseMatrix l2 = model.forward(ops, input, Mode::eval, dummy);
    CHECK(oracle::max_abs_diff(l1, l2) == 0.0);
    for (std::size_t i = 0; i < 8; ++i) {
        double denom = 0.0, row_max = l1(i, 0);
        for (std::size_t c = 1; c < 3; ++c) row_max = std::max(row_max, l1(i, c));
        for (std::size_t c = 0; c < 3; ++c) denom += std::exp(l1(i, c) - row_max);
        double total = 0.0;
        for (std::size_t c = 0; c < 3; ++c) total += std::exp(l1(i, c) - row_max) / denom;
        CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("end-to-end gradients match finite differences") {
    Rng rng(39);
    double worst = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
        Graph g = oracle::random_graph(6, 0.5, rng);
        DenseMatrix x = oracle::random_matrix(6, 4, rng);
        Labels labels;
        labels.num_classes = 3;
        for (int i = 0; i < 6; ++i) labels.values.push_back(static_cast<int>(rng.next_index(3)));
        std::vector<std::size_t> mask = {0, 2, 5};

        IngnnConfig cfg;
        cfg.hidden = 3;
        cfg.prop_steps = 2;
        cfg.adj_powers = 2;
        cfg.dropout = 0.0;
        cfg.fusion_mode = trial % 3 == 0 ? FusionMode::adaptive
                                         : (trial % 3 == 1 ? FusionMode::equal_sum
                                                           : FusionMode::concat);
        GraphOps ops = build_graph_ops(g, cfg);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 4, 6, 3, 100 + trial);
        for (auto& v : model.params.fusion_logits) v = rng.next_normal() * 0.5;
        for (auto& bn : model.params.bn_chain) {
            for (auto& v : bn.running_mean) v = rng.next_normal();
            for (auto& v : bn.running_var) v = 0.5 + rng.next_double();
        }

        Rng dummy(0);
        model.forward(ops, input, Mode::eval, dummy);
        LossResult loss = softmax_cross_entropy(model.logits(), labels.values, mask);
        model.params.zero_weight_grads();
        model.params.zero_fusion_grads();
        model.backward(ops, input, loss.grad, true, true);

        auto eval_loss = [&] {
            Rng d2(0);
            model.forward(ops, input, Mode::eval, d2);
            return softmax_cross_entropy(model.logits(), labels.values, mask).loss;
        };
        auto refs = model.params.weight_param_refs();
        auto frefs = model.params.fusion_param_refs();
        refs.insert(refs.end(), frefs.begin(), frefs.end());
        for (auto& ref : refs)
            for (std::size_t k = 0; k < ref.value->size(); ++k) {
                double fd = oracle::central_difference(eval_loss, (*ref.value)[k]);
                double an = (*ref.grad)[k];
                double rel =
                    std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
                worst = std::max(worst, rel);
            }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("node permutation equivariance with frozen statistics") {
    Rng rng(40);
    for (int trial = 0; trial < 6; ++trial) {
        std::size_t n = 7;
        Graph g = oracle::random_graph(n, 0.5, rng);
        DenseMatrix x = oracle::random_matrix(n, 3, rng);
        IngnnConfig cfg;
        cfg.hidden = 3;
        cfg.prop_steps = 2;
        cfg.adj_powers = 2;
        cfg.dropout = 0.0;
        GraphOps ops = build_graph_ops(g, cfg);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 3, n, 2, 200 + trial);
        Rng dummy(0);
        DenseMatrix base = model.forward(ops, input, Mode::eval, dummy);

        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        Graph pg = relabel(g, perm);
        DenseMatrix px(n, 3), pw(n, cfg.hidden);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < 3; ++j) px(perm[i], j) = x(i, j);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < cfg.hidden; ++j)
                pw(perm[i], j) = model.params.w_strc.weight(i, j);

        IngnnModel pmodel = make_model(cfg, 3, n, 2, 200 + trial);
        pmodel.params = model.params;
        pmodel.params.w_strc.weight = pw;  // rows follow the node permutation
        GraphOps pops = build_graph_ops(pg, cfg);
        FeatureInput pinput = prepare_features(px, cfg);
        DenseMatrix permuted = pmodel.forward(pops, pinput, Mode::eval, dummy);

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(permuted(perm[i], c) == Catch::Approx(base(i, c)).margin(1e-9));
    }
}

TEST_CASE("disabled branches receive exactly zero gradients") {
    Rng rng(41);
    Graph g = oracle::random_graph(6, 0.6, rng);
    DenseMatrix x = oracle::random_matrix(6, 3, rng);
    Labels labels;
    labels.num_classes = 2;
    for (int i = 0; i < 6; ++i) labels.values.push_back(i % 2);
    std::vector<std::size_t> mask = {0, 1, 2, 3, 4, 5};

    SECTION("structure branch off keeps its parameters untouched") {
        IngnnConfig cfg;
        cfg.hidden = 3;
        cfg.dropout = 0.0;
        cfg.disable_strc = true;
        GraphOps ops = build_graph_ops(g, cfg);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 3, 6, 2, 300);
        Rng dummy(0);
        model.forward(ops, input, Mode::eval, dummy);
        LossResult loss = softmax_cross_entropy(model.logits(), labels.values, mask);
        model.params.zero_weight_grads();
        model.backward(ops, input, loss.grad, true, true);
        for (double v : model.params.w_strc.grad.data) CHECK(v == 0.0);
        for (const BatchNorm& bn : model.params.bn_chain) {
            for (double v : bn.grad_gamma) CHECK(v == 0.0);
            for (double v : bn.grad_beta) CHECK(v == 0.0);
        }
        CHECK(model.params.fusion_grad[2] == 0.0);
    }
    SECTION("ego and agg both off keep w_ego untouched") {
        IngnnConfig cfg;
        cfg.hidden = 3;
        cfg.dropout = 0.0;
        cfg.disable_ego = true;
        cfg.disable_agg = true;
        GraphOps ops = build_graph_ops(g, cfg);
        FeatureInput input = prepare_features(x, cfg);
        IngnnModel model = make_model(cfg, 3, 6, 2, 301);
        Rng dummy(0);
        model.forward(ops, input, Mode::eval, dummy);
        LossResult loss = softmax_cross_entropy(model.logits(), labels.values, mask);
        model.params.zero_weight_grads();
        model.backward(ops, input, loss.grad, true, true);
        for (double v : model.params.w_ego.grad.data) CHECK(v == 0.0);
    }
    SECTION("all branches disabled is rejected") {
        IngnnConfig cfg;
        cfg.disable_ego = cfg.disable_agg = cfg.disable_strc = true;
        CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    }
}

TEST_CASE("importance scores") {
    DenseMatrix h2(2, 2, 2.0), h1(2, 2, 1.0), zero(2, 2);
    SECTION("zero branch contributes zero importance") {
        auto s = importance_scores(h1, h1, zero, {1.0 / 3, 1.0 / 3, 1.0 / 3});
        CHECK(s.defined);
        CHECK(s.value[2] == 0.0);
        CHECK(s.value[0] + s.value[1] + s.value[2] == Catch::Approx(1.0));
    }
    SECTION("equal weights and magnitudes split evenly") {
        auto s = importance_scores(h1, h1, h1, {1.0 / 3, 1.0 / 3, 1.0 / 3});
        for (double v : s.value) CHECK(v == Catch::Approx(1.0 / 3.0));
    }
    SECTION("worked example") {
        auto s = importance_scores(h2, h1, h1, {0.5, 0.25, 0.25});
        CHECK(s.value[0] == Catch::Approx(2.0 / 3.0));
        CHECK(s.value[1] == Catch::Approx(1.0 / 6.0));
        CHECK(s.value[2] == Catch::Approx(1.0 / 6.0));
    }
    SECTION("all-zero denominator reported undefined") {
        auto s = importance_scores(zero, zero, zero, {1.0 / 3, 1.0 / 3, 1.0 / 3});
        CHECK(!s.defined);
    }
}

TEST_CASE("equal-sum fusion is insensitive to branch order") {
    Rng rng(42);
    DenseMatrix a = oracle::random_matrix(5, 4, rng);
    DenseMatrix b = oracle::random_matrix(5, 4, rng);
    DenseMatrix c = oracle::random_matrix(5, 4, rng);
    auto fuse3 = [](const DenseMatrix& x, const DenseMatrix& y, const DenseMatrix& z) {
        DenseMatrix out(x.rows, x.cols);
        axpy_inplace(out, 1.0 / 3.0, x);
        axpy_inplace(out, 1.0 / 3.0, y);
        axpy_inplace(out, 1.0 / 3.0, z);
        return out;
    };
    DenseMatrix ref = fuse3(a, b, c);
    CHECK(oracle::max_rel_diff(ref, fuse3(b, c, a)) < 1e-12);
    CHECK(oracle::max_rel_diff(ref, fuse3(c, a, b)) < 1e-12);
    CHECK(oracle::max_rel_diff(ref, fuse3(c, b, a)) < 1e-12);
}

TEST_CASE("literal structure variant with bypassed BN matches adjacency powers") {
    IngnnConfig cfg;
    cfg.hidden = 2;
    cfg.adj_powers = 2;
    cfg.dropout = 0.0;
    cfg.strc_literal = true;
    Rng rng(43);
    Graph g = oracle::random_graph(6, 0.5, rng);
    GraphOps ops = build_graph_ops(g, cfg);
    DenseMatrix x = oracle::random_matrix(6, 2, rng);
    FeatureInput input = prepare_features(x, cfg);
    IngnnModel model = make_model(cfg, 2, 6, 2, 44);
    bypass_bn(model.params.bn_chain);
    Rng dummy(0);
    model.forward(ops, input, Mode::eval, dummy);
    DenseMatrix adense = densify(ops.a_raw);
    DenseMatrix a2 = oracle::naive_matmul(adense, adense);
    DenseMatrix expected =
        oracle::naive_matmul(add(adense, a2), model.params.w_strc.weight);
    CHECK(oracle::max_rel_diff(model.h_strc(), expected) < 1e-9);

    // guarded beyond 512 nodes
    IngnnConfig big = cfg;
    Graph gx = oracle::random_graph(600, 0.01, rng);
    GraphOps opsx = build_graph_ops(gx, big);
    DenseMatrix xx(600, 2, 1.0);
    FeatureInput inputx = prepare_features(xx, big);
    IngnnModel mx = make_model(big, 2, 600, 2, 45);
    CHECK_THROWS_AS(mx.forward(opsx, inputx, Mode::eval, dummy), std::invalid_argument);
}

TEST_CASE("config kv round trip") {
    IngnnConfig cfg;
    cfg.hidden = 128;
    cfg.prop_steps = 20;
    cfg.adj_powers = 5;
    cfg.dropout = 0.25;
    cfg.row_normalize_features = true;
    cfg.fusion_mode = FusionMode::concat;
    cfg.disable_agg = true;
    IngnnConfig back = IngnnConfig::from_kv(cfg.to_kv());
    CHECK(back.hidden == 128);
    CHECK(back.prop_steps == 20);
    CHECK(back.adj_powers == 5);
    CHECK(back.dropout == 0.25);
    CHECK(back.row_normalize_features);
    CHECK(back.fusion_mode == FusionMode::concat);
    CHECK(back.disable_agg);
}
