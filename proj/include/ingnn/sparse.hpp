#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ingnn/dense.hpp"

namespace ingnn {

// Compressed-row sparse matrix. Same index layout as Graph plus a value per
// stored entry; used for A, Â and for sparse feature matrices.
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_offsets;  // length rows+1
    std::vector<std::size_t> col_indices;
    std::vector<double> values;

    SparseMatrix() = default;
    SparseMatrix(std::size_t r, std::size_t c)
        : rows(r), cols(c), row_offsets(r + 1, 0) {}

    std::size_t nnz() const { return col_indices.size(); }

    static SparseMatrix identity(std::size_t n) {
        SparseMatrix m(n, n);
        m.col_indices.resize(n);
        m.values.assign(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            m.row_offsets[i + 1] = i + 1;
            m.col_indices[i] = i;
        }
        return m;
    }
};

// Sparse–dense product s·d. Rows are processed in order and each output row
// accumulates in stored-entry order, so the result is bit-deterministic.
inline DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
    require_shape(s.cols == d.rows, "spmm");
    DenseMatrix out(s.rows, d.cols);
    for (std::size_t i = 0; i < s.rows; ++i) {
        double* orow = out.row(i);
        for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
            const double v = s.values[k];
            const double* drow = d.row(s.col_indices[k]);
            for (std::size_t j = 0; j < d.cols; ++j) orow[j] += v * drow[j];
        }
    }
    return out;
}

// sᵀ·d via row-wise scatter; used for gradients through sparse operators.
inline DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& d) {
    require_shape(s.rows == d.rows, "spmm_transposed");
    DenseMatrix out(s.cols, d.cols);
    for (std::size_t i = 0; i < s.rows; ++i) {
        const double* drow = d.row(i);
        for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
            const double v = s.values[k];
            double* orow = out.row(s.col_indices[k]);
            for (std::size_t j = 0; j < d.cols; ++j) orow[j] += v * drow[j];
        }
    }
    return out;
}

inline DenseMatrix densify(const SparseMatrix& s) {
    DenseMatrix out(s.rows, s.cols);
    for (std::size_t i = 0; i < s.rows; ++i)
        for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k)
            out(i, s.col_indices[k]) += s.values[k];
    return out;
}

// CSR view of a dense matrix, dropping exact zeros.
inline SparseMatrix sparsify(const DenseMatrix& d) {
    SparseMatrix out(d.rows, d.cols);
    for (std::size_t i = 0; i < d.rows; ++i) {
        for (std::size_t j = 0; j < d.cols; ++j) {
            if (d(i, j) != 0.0) {
                out.col_indices.push_back(j);
                out.values.push_back(d(i, j));
            }
        }
        out.row_offsets[i + 1] = out.col_indices.size();
    }
    return out;
}

}  // namespace ingnn
