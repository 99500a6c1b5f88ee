#include "trec/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trec/errors.hpp"

namespace trec {

namespace {

[[noreturn]] void throw_shape(const char* op, const Matrix& a, const Matrix& b) {
    std::ostringstream msg;
    msg << op << ": dimension mismatch " << a.shape_str() << " vs " << b.shape_str();
    throw DimensionError(msg.str());
}

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0) {
        throw DimensionError("Matrix: rows and cols must be positive, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
    values_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows <= 0 || cols <= 0) {
        throw DimensionError("Matrix: rows and cols must be positive, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (values_.size() != static_cast<size_t>(rows) * cols) {
        throw DimensionError("Matrix: value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_str());
    }
}

Matrix Matrix::row_vector(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Matrix(1, n, std::move(values));
}

bool Matrix::all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw_shape("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int t = 0; t < k; ++t) {
            const double av = arow[t];
            const double* brow = b.row(t);
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw_shape("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    const int n = a.rows(), k = a.cols(), m = b.rows();
    for (int i = 0; i < n; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < m; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += arow[t] * brow[t];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw_shape("matmul_tn", a, b);
    Matrix out(a.cols(), b.cols());
    const int k = a.rows(), n = a.cols(), m = b.cols();
    for (int t = 0; t < k; ++t) {
        const double* arow = a.row(t);
        const double* brow = b.row(t);
        for (int i = 0; i < n; ++i) {
            const double av = arow[i];
            double* orow = out.row(i);
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix relu(const Matrix& x) {
    Matrix out = x;
    double* v = out.data();
    for (int i = 0; i < out.size(); ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
    return out;
}

Matrix softmax_rows(const Matrix& x) {
    Matrix out = x;
    const int cols = x.cols();
    for (int r = 0; r < x.rows(); ++r) {
        double* row = out.row(r);
        double mx = row[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < cols; ++c) row[c] /= sum;
    }
    return out;
}

Matrix mean_over_sequence(const Matrix& x) {
    if (x.rows() < 1 || x.empty()) {
        throw DimensionError("mean_over_sequence: empty sequence");
    }
    Matrix out(1, x.cols());
    double* o = out.data();
    for (int r = 0; r < x.rows(); ++r) {
        const double* row = x.row(r);
        for (int c = 0; c < x.cols(); ++c) o[c] += row[c];
    }
    const double inv = 1.0 / x.rows();
    for (int c = 0; c < x.cols(); ++c) o[c] *= inv;
    return out;
}

Matrix max_over_sequence(const Matrix& x, std::vector<int>* argmax_rows) {
    if (x.rows() < 1 || x.empty()) {
        throw DimensionError("max_over_sequence: empty sequence");
    }
    Matrix out(1, x.cols());
    std::vector<int> arg(x.cols(), 0);
    double* o = out.data();
    const double* first = x.row(0);
    for (int c = 0; c < x.cols(); ++c) o[c] = first[c];
    for (int r = 1; r < x.rows(); ++r) {
        const double* row = x.row(r);
        for (int c = 0; c < x.cols(); ++c) {
            if (row[c] > o[c]) {  // strict: ties keep the earliest row
                o[c] = row[c];
                arg[c] = r;
            }
        }
    }
    if (argmax_rows) *argmax_rows = std::move(arg);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw_shape("add", a, b);
    Matrix out = a;
    double* o = out.data();
    const double* p = b.data();
    for (int i = 0; i < out.size(); ++i) o[i] += p[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw_shape("sub", a, b);
    Matrix out = a;
    double* o = out.data();
    const double* p = b.data();
    for (int i = 0; i < out.size(); ++i) o[i] -= p[i];
    return out;
}

Matrix scale(const Matrix& x, double c) {
    Matrix out = x;
    double* o = out.data();
    for (int i = 0; i < out.size(); ++i) o[i] *= c;
    return out;
}

double dot_n(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double dot_rows(const Matrix& a, const Matrix& b) {
    if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) {
        throw_shape("dot_rows", a, b);
    }
    return dot_n(a.data(), b.data(), a.cols());
}

double sum_squares(const Matrix& x) {
    const double* p = x.data();
    double acc = 0.0;
    for (int i = 0; i < x.size(); ++i) acc += p[i] * p[i];
    return acc;
}

double sum_all(const Matrix& x) {
    const double* p = x.data();
    double acc = 0.0;
    for (int i = 0; i < x.size(); ++i) acc += p[i];
    return acc;
}

double neg_log_sigmoid(double x) {
    // softplus(-x), split to keep exp() in [0,1].
    if (x >= 0.0) return std::log1p(std::exp(-x));
    return -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace trec
