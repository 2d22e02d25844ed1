#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ingnn/rng.hpp"

namespace ingnn {

// Row-major dense matrix of doubles. Features, parameters and activations
// all use this one type; 64-bit floats throughout so gradient checks have
// headroom.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool same_shape(const DenseMatrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.cols == b.rows, "matmul");
    DenseMatrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;  // feature matrices are often mostly zero
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// aᵀ·b without materializing the transpose (weight gradients).
inline DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.rows == b.rows, "matmul_at_b");
    DenseMatrix out(a.cols, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            double* orow = out.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// a·bᵀ without materializing the transpose (input gradients).
inline DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.cols == b.cols, "matmul_a_bt");
    DenseMatrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < b.rows; ++k) {
            const double* brow = b.row(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j] * brow[j];
            orow[k] = acc;
        }
    }
    return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.same_shape(b), "add");
    DenseMatrix out = a;
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += b.data[k];
    return out;
}

inline void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.same_shape(b), "add_inplace");
    for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] += b.data[k];
}

inline void axpy_inplace(DenseMatrix& a, double alpha, const DenseMatrix& b) {
    require_shape(a.same_shape(b), "axpy_inplace");
    for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] += alpha * b.data[k];
}

inline DenseMatrix scale(const DenseMatrix& a, double alpha) {
    DenseMatrix out = a;
    for (double& v : out.data) v *= alpha;
    return out;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.same_shape(b), "hadamard");
    DenseMatrix out = a;
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] *= b.data[k];
    return out;
}

// Adds a 1×cols row vector to every row.
inline DenseMatrix add_row_vector(const DenseMatrix& a, const DenseMatrix& v) {
    require_shape(v.rows == 1 && v.cols == a.cols, "add_row_vector");
    DenseMatrix out = a;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* orow = out.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) orow[j] += v.data[j];
    }
    return out;
}

inline DenseMatrix relu(const DenseMatrix& a) {
    DenseMatrix out = a;
    for (double& v : out.data)
        if (v < 0.0) v = 0.0;
    return out;
}

// Gradient of relu given the pre-activation values.
inline DenseMatrix relu_backward(const DenseMatrix& grad, const DenseMatrix& pre) {
    require_shape(grad.same_shape(pre), "relu_backward");
    DenseMatrix out = grad;
    for (std::size_t k = 0; k < out.data.size(); ++k)
        if (pre.data[k] <= 0.0) out.data[k] = 0.0;
    return out;
}

inline double mean_abs(const DenseMatrix& a) {
    if (a.data.empty()) return 0.0;
    double acc = 0.0;
    for (double v : a.data) acc += std::fabs(v);
    return acc / static_cast<double>(a.data.size());
}

inline bool all_finite(const DenseMatrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

// Row-wise L1 normalization; all-zero rows are left untouched.
inline DenseMatrix l1_normalize_rows(const DenseMatrix& a) {
    DenseMatrix out = a;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* r = out.row(i);
        double norm = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) norm += std::fabs(r[j]);
        if (norm == 0.0) continue;
        for (std::size_t j = 0; j < a.cols; ++j) r[j] /= norm;
    }
    return out;
}

inline DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseMatrix out(rows, cols);
    double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : out.data) v = (2.0 * rng.next_double() - 1.0) * bound;
    return out;
}

}  // namespace ingnn
