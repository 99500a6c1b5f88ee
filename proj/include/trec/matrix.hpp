#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trec {

// Dense row-major matrix of doubles. Values produced by the kernels below are
// immutable by convention; mutation happens only through Parameter updates.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);  // zero-filled
    Matrix(int rows, int cols, std::vector<double> values);

    static Matrix row_vector(std::vector<double> values);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& at(int r, int c) { return values_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return values_[static_cast<size_t>(r) * cols_ + c]; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double* row(int r) { return values_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return values_.data() + static_cast<size_t>(r) * cols_; }

    std::span<const double> row_span(int r) const { return {row(r), static_cast<size_t>(cols_)}; }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;  // e.g. "3x4"

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && values_ == other.values_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> values_;
};

// Plain forward kernels. The autodiff tape records these same computations so
// the traced and untraced paths produce bit-identical values.

// Standard product, shape (a.rows, b.cols). Throws DimensionError on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
// a · bᵀ with a (n,k), b (m,k) -> (n,m).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// aᵀ · b with a (k,n), b (k,m) -> (n,m).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Elementwise max(0, x).
Matrix relu(const Matrix& x);

// Each row mapped to exp(x - rowmax)/sum, so every output row sums to 1.
Matrix softmax_rows(const Matrix& x);

// Column means over the sequence axis, (n,d) -> (1,d). Throws on n == 0.
Matrix mean_over_sequence(const Matrix& x);

// Per-column maximum, ties broken by first occurrence. argmax_rows, when
// non-null, receives the winning row per column (needed for the backward rule).
Matrix max_over_sequence(const Matrix& x, std::vector<int>* argmax_rows = nullptr);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& x, double c);

// Inner product of two row vectors of equal length, accumulated in index order.
double dot_rows(const Matrix& a, const Matrix& b);
double dot_n(const double* a, const double* b, int n);

double sum_squares(const Matrix& x);
double sum_all(const Matrix& x);

// -ln sigmoid(x) = ln(1 + e^{-x}), evaluated without overflow for any x.
double neg_log_sigmoid(double x);
double sigmoid(double x);

}  // namespace trec
