#include "trec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "trec/errors.hpp"

namespace trec {

void Parameter::zero_grad_rows(std::span<const int> rows_to_clear) {
    for (int r : rows_to_clear) {
        double* g = grad.row(r);
        std::fill(g, g + grad.cols(), 0.0);
    }
}

Tape::ValueId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<ValueId>(nodes_.size() - 1);
}

Tape::ValueId Tape::parameter(Parameter& p) {
    Node n;
    n.op = Op::kParameter;
    n.value = p.value;
    n.param = &p;
    return push(std::move(n));
}

Tape::ValueId Tape::constant(Matrix m) {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(m);
    return push(std::move(n));
}

Tape::ValueId Tape::gather_rows(Parameter& table, std::vector<int> ids) {
    if (ids.empty()) throw DimensionError("gather_rows: empty id list");
    for (int id : ids) {
        if (id < 0 || id >= table.rows()) {
            throw DimensionError("gather_rows: id " + std::to_string(id) +
                                 " out of range for table " + table.value.shape_str());
        }
    }
    Matrix out(static_cast<int>(ids.size()), table.cols());
    for (size_t k = 0; k < ids.size(); ++k) {
        const double* src = table.value.row(ids[k]);
        std::copy(src, src + table.cols(), out.row(static_cast<int>(k)));
    }
    Node n;
    n.op = Op::kGatherRows;
    n.value = std::move(out);
    n.ids = std::move(ids);
    n.param = &table;
    return push(std::move(n));
}

Tape::ValueId Tape::matmul(ValueId a, ValueId b) {
    Node n;
    n.op = Op::kMatMul;
    n.value = trec::matmul(val(a), val(b));
    n.in0 = a;
    n.in1 = b;
    return push(std::move(n));
}

Tape::ValueId Tape::matmul_nt(ValueId a, ValueId b) {
    Node n;
    n.op = Op::kMatMulNT;
    n.value = trec::matmul_nt(val(a), val(b));
    n.in0 = a;
    n.in1 = b;
    return push(std::move(n));
}

Tape::ValueId Tape::relu(ValueId x) {
    Node n;
    n.op = Op::kRelu;
    n.value = trec::relu(val(x));
    n.in0 = x;
    return push(std::move(n));
}

Tape::ValueId Tape::softmax_rows(ValueId x) {
    Node n;
    n.op = Op::kSoftmaxRows;
    n.value = trec::softmax_rows(val(x));
    n.in0 = x;
    return push(std::move(n));
}

Tape::ValueId Tape::scale(ValueId x, double c) {
    Node n;
    n.op = Op::kScale;
    n.value = trec::scale(val(x), c);
    n.in0 = x;
    n.c = c;
    return push(std::move(n));
}

Tape::ValueId Tape::add(ValueId a, ValueId b) {
    Node n;
    n.op = Op::kAdd;
    n.value = trec::add(val(a), val(b));
    n.in0 = a;
    n.in1 = b;
    return push(std::move(n));
}

Tape::ValueId Tape::sub(ValueId a, ValueId b) {
    Node n;
    n.op = Op::kSub;
    n.value = trec::sub(val(a), val(b));
    n.in0 = a;
    n.in1 = b;
    return push(std::move(n));
}

Tape::ValueId Tape::mean_over_sequence(ValueId x) {
    Node n;
    n.op = Op::kMeanSeq;
    n.value = trec::mean_over_sequence(val(x));
    n.in0 = x;
    return push(std::move(n));
}

Tape::ValueId Tape::max_over_sequence(ValueId x) {
    Node n;
    n.op = Op::kMaxSeq;
    n.value = trec::max_over_sequence(val(x), &n.ids);
    n.in0 = x;
    return push(std::move(n));
}

Tape::ValueId Tape::dot(ValueId a, ValueId b) {
    Node n;
    n.op = Op::kDot;
    n.value = Matrix(1, 1, {trec::dot_rows(val(a), val(b))});
    n.in0 = a;
    n.in1 = b;
    return push(std::move(n));
}

Tape::ValueId Tape::sum_squares(ValueId x) {
    Node n;
    n.op = Op::kSumSquares;
    n.value = Matrix(1, 1, {trec::sum_squares(val(x))});
    n.in0 = x;
    return push(std::move(n));
}

Tape::ValueId Tape::sum_all(ValueId x) {
    Node n;
    n.op = Op::kSumAll;
    n.value = Matrix(1, 1, {trec::sum_all(val(x))});
    n.in0 = x;
    return push(std::move(n));
}

Tape::ValueId Tape::neg_log_sigmoid(ValueId x) {
    if (val(x).size() != 1) {
        throw DimensionError("neg_log_sigmoid: expected 1x1, got " + val(x).shape_str());
    }
    Node n;
    n.op = Op::kNegLogSigmoid;
    n.value = Matrix(1, 1, {trec::neg_log_sigmoid(val(x).at(0, 0))});
    n.in0 = x;
    return push(std::move(n));
}

double Tape::scalar(ValueId id) const {
    const Matrix& m = val(id);
    if (m.size() != 1) throw DimensionError("scalar: node is " + m.shape_str());
    return m.at(0, 0);
}

namespace {

// Lazily shaped gradient buffers, one per node.
struct GradBuf {
    std::vector<Matrix> g;
    std::vector<bool> set;

    explicit GradBuf(size_t n) : g(n), set(n, false) {}

    void accumulate(int id, const Matrix& shape_like, const Matrix& delta) {
        if (!set[id]) {
            g[id] = Matrix(shape_like.rows(), shape_like.cols());
            set[id] = true;
        }
        double* dst = g[id].data();
        const double* src = delta.data();
        for (int i = 0; i < g[id].size(); ++i) dst[i] += src[i];
    }
    void accumulate_scaled(int id, const Matrix& shape_like, const Matrix& src_m, double f) {
        if (!set[id]) {
            g[id] = Matrix(shape_like.rows(), shape_like.cols());
            set[id] = true;
        }
        double* dst = g[id].data();
        const double* src = src_m.data();
        for (int i = 0; i < g[id].size(); ++i) dst[i] += f * src[i];
    }
};

}  // namespace

void Tape::backward(ValueId root) {
    if (val(root).size() != 1) {
        throw DimensionError("backward: root must be scalar, got " + val(root).shape_str());
    }
    GradBuf grads(nodes_.size());
    grads.g[root] = Matrix(1, 1, {1.0});
    grads.set[root] = true;

    for (int i = root; i >= 0; --i) {
        if (!grads.set[i]) continue;
        const Node& n = nodes_[i];
        const Matrix& g = grads.g[i];
        switch (n.op) {
            case Op::kParameter: {
                double* dst = n.param->grad.data();
                const double* src = g.data();
                for (int k = 0; k < g.size(); ++k) dst[k] += src[k];
                break;
            }
            case Op::kConstant:
                break;
            case Op::kGatherRows: {
                const int d = n.param->cols();
                for (size_t k = 0; k < n.ids.size(); ++k) {
                    double* dst = n.param->grad.row(n.ids[k]);
                    const double* src = g.row(static_cast<int>(k));
                    for (int c = 0; c < d; ++c) dst[c] += src[c];
                }
                break;
            }
            case Op::kMatMul:
                // C = A·B: dA += G·Bᵀ, dB += Aᵀ·G
                grads.accumulate(n.in0, val(n.in0), trec::matmul_nt(g, val(n.in1)));
                grads.accumulate(n.in1, val(n.in1), trec::matmul_tn(val(n.in0), g));
                break;
            case Op::kMatMulNT:
                // C = A·Bᵀ: dA += G·B, dB += Gᵀ·A
                grads.accumulate(n.in0, val(n.in0), trec::matmul(g, val(n.in1)));
                grads.accumulate(n.in1, val(n.in1), trec::matmul_tn(g, val(n.in0)));
                break;
            case Op::kRelu: {
                // Subgradient at 0 is 0: pass only where x > 0.
                const Matrix& x = val(n.in0);
                Matrix d(x.rows(), x.cols());
                const double* xp = x.data();
                const double* gp = g.data();
                double* dp = d.data();
                for (int k = 0; k < x.size(); ++k) dp[k] = xp[k] > 0.0 ? gp[k] : 0.0;
                grads.accumulate(n.in0, x, d);
                break;
            }
            case Op::kSoftmaxRows: {
                // dX_rc = y_rc * (g_rc - sum_j g_rj y_rj)
                const Matrix& y = n.value;
                Matrix d(y.rows(), y.cols());
                for (int r = 0; r < y.rows(); ++r) {
                    const double* yr = y.row(r);
                    const double* gr = g.row(r);
                    double s = 0.0;
                    for (int c = 0; c < y.cols(); ++c) s += gr[c] * yr[c];
                    double* dr = d.row(r);
                    for (int c = 0; c < y.cols(); ++c) dr[c] = yr[c] * (gr[c] - s);
                }
                grads.accumulate(n.in0, val(n.in0), d);
                break;
            }
            case Op::kScale:
                grads.accumulate_scaled(n.in0, val(n.in0), g, n.c);
                break;
            case Op::kAdd:
                grads.accumulate(n.in0, val(n.in0), g);
                grads.accumulate(n.in1, val(n.in1), g);
                break;
            case Op::kSub:
                grads.accumulate(n.in0, val(n.in0), g);
                grads.accumulate_scaled(n.in1, val(n.in1), g, -1.0);
                break;
            case Op::kMeanSeq: {
                const Matrix& x = val(n.in0);
                Matrix d(x.rows(), x.cols());
                const double inv = 1.0 / x.rows();
                const double* gp = g.data();
                for (int r = 0; r < x.rows(); ++r) {
                    double* dr = d.row(r);
                    for (int c = 0; c < x.cols(); ++c) dr[c] = gp[c] * inv;
                }
                grads.accumulate(n.in0, x, d);
                break;
            }
            case Op::kMaxSeq: {
                // Gradient routed to the first-occurring argmax row per column.
                const Matrix& x = val(n.in0);
                Matrix d(x.rows(), x.cols());
                const double* gp = g.data();
                for (int c = 0; c < x.cols(); ++c) d.at(n.ids[c], c) = gp[c];
                grads.accumulate(n.in0, x, d);
                break;
            }
            case Op::kDot: {
                const double gs = g.at(0, 0);
                grads.accumulate_scaled(n.in0, val(n.in0), val(n.in1), gs);
                grads.accumulate_scaled(n.in1, val(n.in1), val(n.in0), gs);
                break;
            }
            case Op::kSumSquares:
                grads.accumulate_scaled(n.in0, val(n.in0), val(n.in0), 2.0 * g.at(0, 0));
                break;
            case Op::kSumAll: {
                const Matrix& x = val(n.in0);
                Matrix d(x.rows(), x.cols());
                d.fill(g.at(0, 0));
                grads.accumulate(n.in0, x, d);
                break;
            }
            case Op::kNegLogSigmoid: {
                // d/dx ln(1+e^{-x}) = -sigmoid(-x)
                const double x = val(n.in0).at(0, 0);
                Matrix d(1, 1, {-sigmoid(-x) * g.at(0, 0)});
                grads.accumulate(n.in0, val(n.in0), d);
                break;
            }
        }
    }
}

Tape::Touched Tape::touched() const {
    Touched out;
    for (const Node& n : nodes_) {
        if (n.op == Op::kParameter) {
            if (std::find(out.full.begin(), out.full.end(), n.param) == out.full.end()) {
                out.full.push_back(n.param);
            }
        } else if (n.op == Op::kGatherRows) {
            auto it = std::find_if(out.table_rows.begin(), out.table_rows.end(),
                                   [&](const auto& e) { return e.first == n.param; });
            if (it == out.table_rows.end()) {
                out.table_rows.emplace_back(n.param, n.ids);
            } else {
                it->second.insert(it->second.end(), n.ids.begin(), n.ids.end());
            }
        }
    }
    for (auto& [param, rows] : out.table_rows) {
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }
    return out;
}

FdReport finite_difference_check(const std::function<double()>& loss_fn,
                                 std::span<Parameter* const> params, double eps) {
    if (eps <= 0.0) throw NumericsError("finite_difference_check: eps must be positive");

    for (Parameter* p : params) p->zero_grad();
    const double base = loss_fn();
    if (!std::isfinite(base)) {
        throw NumericsError("finite_difference_check: non-finite loss");
    }
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    FdReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        for (int r = 0; r < p.rows(); ++r) {
            for (int c = 0; c < p.cols(); ++c) {
                const double saved = p.value.at(r, c);
                p.value.at(r, c) = saved + eps;
                const double up = loss_fn();
                p.value.at(r, c) = saved - eps;
                const double down = loss_fn();
                p.value.at(r, c) = saved;
                if (!std::isfinite(up) || !std::isfinite(down)) {
                    throw NumericsError("finite_difference_check: non-finite loss at " +
                                        p.name);
                }
                const double numeric = (up - down) / (2.0 * eps);
                const double a = analytic[pi].at(r, c);
                const double rel =
                    std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
                if (rel > report.max_rel_error) {
                    report.max_rel_error = rel;
                    report.worst_param = p.name;
                    report.worst_row = r;
                    report.worst_col = c;
                    report.analytic = a;
                    report.numeric = numeric;
                }
            }
        }
    }
    for (Parameter* p : params) p->zero_grad();
    return report;
}

}  // namespace trec
