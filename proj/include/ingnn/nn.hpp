#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ingnn/dense.hpp"
#include "ingnn/rng.hpp"

namespace ingnn {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Linear layer, no bias: y = x·W. The gradient buffer accumulates across
// backward calls and is zeroed by the optimizer owner between steps.
// ---------------------------------------------------------------------------
struct Linear {
    DenseMatrix weight;  // in×out
    DenseMatrix grad;

    Linear() = default;
    Linear(std::size_t in, std::size_t out) : weight(in, out), grad(in, out) {}

    void init_glorot(Rng& rng) { weight = glorot_uniform(weight.rows, weight.cols, rng); }
    void zero_grad() { grad.fill(0.0); }
};

inline DenseMatrix linear_forward(const Linear& layer, const DenseMatrix& x) {
    return matmul(x, layer.weight);
}

// Returns dL/dx and accumulates dL/dW into layer.grad.
inline DenseMatrix linear_backward(Linear& layer, const DenseMatrix& x, const DenseMatrix& dy) {
    require_shape(dy.rows == x.rows && dy.cols == layer.weight.cols, "linear_backward");
    add_inplace(layer.grad, matmul_at_b(x, dy));
    return matmul_a_bt(dy, layer.weight);
}

// ---------------------------------------------------------------------------
// Inverted dropout. Train mode keeps each entry with probability 1-p and
// scales survivors by 1/(1-p); eval mode is the identity map.
// ---------------------------------------------------------------------------
struct Dropout {
    double rate = 0.5;
    Mode last_mode = Mode::eval;
    DenseMatrix last_mask;  // 0 or 1/(1-p) per entry
    bool forward_done = false;

    explicit Dropout(double p = 0.5) : rate(p) {
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
    }

    DenseMatrix forward(const DenseMatrix& x, Mode mode, Rng& rng) {
        last_mode = mode;
        forward_done = true;
        if (mode == Mode::eval || rate == 0.0) return x;
        last_mask = DenseMatrix(x.rows, x.cols);
        const double keep_scale = 1.0 / (1.0 - rate);
        DenseMatrix out(x.rows, x.cols);
        for (std::size_t k = 0; k < x.data.size(); ++k) {
            if (rng.next_double() >= rate) {
                last_mask.data[k] = keep_scale;
                out.data[k] = x.data[k] * keep_scale;
            }
        }
        return out;
    }

    DenseMatrix backward(const DenseMatrix& dy) const {
        if (!forward_done) throw std::logic_error("dropout backward before forward");
        if (last_mode == Mode::eval || rate == 0.0) return dy;
        return hadamard(dy, last_mask);
    }
};

// ---------------------------------------------------------------------------
// Batch normalization over the row dimension (one statistic per column).
// Train mode normalizes with biased batch variance and maintains running
// statistics; eval mode is a fixed affine map built from the running stats.
// ---------------------------------------------------------------------------
struct BatchNorm {
    std::size_t num_features = 0;
    std::vector<double> gamma, beta;
    std::vector<double> grad_gamma, grad_beta;
    std::vector<double> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    // backward cache
    DenseMatrix xhat;
    std::vector<double> inv_std;
    Mode last_mode = Mode::eval;
    bool forward_done = false;

    BatchNorm() = default;
    explicit BatchNorm(std::size_t features)
        : num_features(features),
          gamma(features, 1.0),
          beta(features, 0.0),
          grad_gamma(features, 0.0),
          grad_beta(features, 0.0),
          running_mean(features, 0.0),
          running_var(features, 1.0) {}

    void zero_grad() {
        std::fill(grad_gamma.begin(), grad_gamma.end(), 0.0);
        std::fill(grad_beta.begin(), grad_beta.end(), 0.0);
    }

    DenseMatrix forward(const DenseMatrix& x, Mode mode) {
        require_shape(x.cols == num_features, "batchnorm forward");
        last_mode = mode;
        forward_done = true;
        const std::size_t n = x.rows;
        xhat = DenseMatrix(x.rows, x.cols);
        inv_std.assign(num_features, 0.0);
        DenseMatrix out(x.rows, x.cols);

        if (mode == Mode::train) {
            std::vector<double> mean(num_features, 0.0), var(num_features, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = x.row(i);
                for (std::size_t j = 0; j < num_features; ++j) mean[j] += r[j];
            }
            for (std::size_t j = 0; j < num_features; ++j) mean[j] /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = x.row(i);
                for (std::size_t j = 0; j < num_features; ++j) {
                    double d = r[j] - mean[j];
                    var[j] += d * d;
                }
            }
            for (std::size_t j = 0; j < num_features; ++j) var[j] /= static_cast<double>(n);
            for (std::size_t j = 0; j < num_features; ++j) {
                inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
                // running variance uses the unbiased estimate when possible
                double var_update = n > 1 ? var[j] * static_cast<double>(n) /
                                                static_cast<double>(n - 1)
                                          : var[j];
                running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean[j];
                running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var_update;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = x.row(i);
                double* h = xhat.row(i);
                double* o = out.row(i);
                for (std::size_t j = 0; j < num_features; ++j) {
                    h[j] = (r[j] - mean[j]) * inv_std[j];
                    o[j] = gamma[j] * h[j] + beta[j];
                }
            }
        } else {
            for (std::size_t j = 0; j < num_features; ++j)
                inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = x.row(i);
                double* h = xhat.row(i);
                double* o = out.row(i);
                for (std::size_t j = 0; j < num_features; ++j) {
                    h[j] = (r[j] - running_mean[j]) * inv_std[j];
                    o[j] = gamma[j] * h[j] + beta[j];
                }
            }
        }
        return out;
    }

    // Exact train-mode formula; eval mode reduces to the affine map gradient.
    DenseMatrix backward(const DenseMatrix& dy) {
        if (!forward_done) throw std::logic_error("batchnorm backward before forward");
        require_shape(dy.same_shape(xhat), "batchnorm backward");
        const std::size_t n = dy.rows;
        DenseMatrix dx(dy.rows, dy.cols);

        std::vector<double> sum_dy(num_features, 0.0), sum_dy_xhat(num_features, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* dr = dy.row(i);
            const double* h = xhat.row(i);
            for (std::size_t j = 0; j < num_features; ++j) {
                sum_dy[j] += dr[j];
                sum_dy_xhat[j] += dr[j] * h[j];
            }
        }
        for (std::size_t j = 0; j < num_features; ++j) {
            grad_gamma[j] += sum_dy_xhat[j];
            grad_beta[j] += sum_dy[j];
        }
        if (last_mode == Mode::train) {
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double* dr = dy.row(i);
                const double* h = xhat.row(i);
                double* o = dx.row(i);
                for (std::size_t j = 0; j < num_features; ++j)
                    o[j] = gamma[j] * inv_std[j] *
                           (dr[j] - inv_n * sum_dy[j] - h[j] * inv_n * sum_dy_xhat[j]);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double* dr = dy.row(i);
                double* o = dx.row(i);
                for (std::size_t j = 0; j < num_features; ++j)
                    o[j] = gamma[j] * inv_std[j] * dr[j];
            }
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Masked softmax cross-entropy.
// ---------------------------------------------------------------------------
struct LossResult {
    double loss = 0.0;
    DenseMatrix grad;  // zero outside the mask
};

inline LossResult softmax_cross_entropy(const DenseMatrix& logits,
                                        const std::vector<int>& labels,
                                        const std::vector<std::size_t>& mask) {
    if (mask.empty()) throw std::invalid_argument("softmax_cross_entropy: empty mask");
    if (labels.size() != logits.rows)
        throw std::invalid_argument("softmax_cross_entropy: labels length mismatch");
    LossResult result;
    result.grad = DenseMatrix(logits.rows, logits.cols);
    const double inv_m = 1.0 / static_cast<double>(mask.size());
    std::vector<double> probs(logits.cols);
    for (std::size_t idx : mask) {
        if (idx >= logits.rows) throw std::invalid_argument("mask index out of range");
        const double* row = logits.row(idx);
        double max_logit = row[0];
        for (std::size_t c = 1; c < logits.cols; ++c) max_logit = std::max(max_logit, row[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            probs[c] = std::exp(row[c] - max_logit);
            denom += probs[c];
        }
        int label = labels[idx];
        if (label < 0 || static_cast<std::size_t>(label) >= logits.cols)
            throw std::invalid_argument("label out of range");
        result.loss += -(row[label] - max_logit - std::log(denom)) * inv_m;
        double* grow = result.grad.row(idx);
        for (std::size_t c = 0; c < logits.cols; ++c) grow[c] = probs[c] / denom * inv_m;
        grow[label] -= inv_m;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Adam. Parameters are registered as named (value, grad) vector pairs so that
// matrices, batchnorm affine vectors and the fusion logits all go through the
// same update path. Weight decay is classic L2 added to the gradient before
// the moment update.
// ---------------------------------------------------------------------------
struct ParamRef {
    std::string name;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr;
};

struct AdamState {
    double lr = 0.01;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    AdamState() = default;
    AdamState(double learning_rate, double decay) : lr(learning_rate), weight_decay(decay) {}

    void attach(const std::vector<ParamRef>& params) {
        m.clear();
        v.clear();
        for (const ParamRef& p : params) {
            m.emplace_back(p.value->size(), 0.0);
            v.emplace_back(p.value->size(), 0.0);
        }
        step = 0;
    }
};

inline void adam_step(AdamState& state, const std::vector<ParamRef>& params) {
    if (state.m.size() != params.size())
        throw std::logic_error("adam_step: optimizer not attached to these parameters");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<double>& value = *params[p].value;
        const std::vector<double>& grad = *params[p].grad;
        if (value.size() != grad.size() || value.size() != state.m[p].size())
            throw std::logic_error("adam_step: parameter/grad size mismatch");
        for (std::size_t k = 0; k < value.size(); ++k) {
            double g = grad[k] + state.weight_decay * value[k];
            state.m[p][k] = state.beta1 * state.m[p][k] + (1.0 - state.beta1) * g;
            state.v[p][k] = state.beta2 * state.v[p][k] + (1.0 - state.beta2) * g * g;
            double mhat = state.m[p][k] / bc1;
            double vhat = state.v[p][k] / bc2;
            value[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace ingnn
