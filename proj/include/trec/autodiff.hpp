#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trec/matrix.hpp"

namespace trec {

// A learnable tensor with its gradient accumulator. grad always mirrors the
// shape of value and is exactly zero after a reset.
struct Parameter {
    Matrix value;
    Matrix grad;
    std::string name;

    Parameter(std::string name_, Matrix value_)
        : value(std::move(value_)), grad(value.rows(), value.cols()), name(std::move(name_)) {}

    int rows() const { return value.rows(); }
    int cols() const { return value.cols(); }

    void zero_grad() { grad.fill(0.0); }
    void zero_grad_rows(std::span<const int> rows_to_clear);
};

// Reverse-mode computation record. Operations evaluate eagerly and append a
// node; backward() replays the nodes in reverse, accumulating into the grad
// field of every Parameter that contributed to the root. Confined to one
// logical thread; rebuilt per training example.
class Tape {
public:
    using ValueId = int;

    // Leaves.
    ValueId parameter(Parameter& p);
    ValueId constant(Matrix m);
    // Rows of `table` stacked in id order, (ids.size(), d). Gradients scatter
    // back into the gathered rows, accumulating on repeated ids.
    ValueId gather_rows(Parameter& table, std::vector<int> ids);

    // Primitive operations.
    ValueId matmul(ValueId a, ValueId b);
    ValueId matmul_nt(ValueId a, ValueId b);  // a · bᵀ
    ValueId relu(ValueId x);
    ValueId softmax_rows(ValueId x);
    ValueId scale(ValueId x, double c);
    ValueId add(ValueId a, ValueId b);
    ValueId sub(ValueId a, ValueId b);
    ValueId mean_over_sequence(ValueId x);
    ValueId max_over_sequence(ValueId x);
    ValueId dot(ValueId a, ValueId b);           // (1,d)·(1,d) -> (1,1)
    ValueId sum_squares(ValueId x);              // -> (1,1)
    ValueId sum_all(ValueId x);                  // -> (1,1)
    ValueId neg_log_sigmoid(ValueId x);          // (1,1) -> (1,1)

    const Matrix& value(ValueId id) const { return nodes_[id].value; }
    double scalar(ValueId id) const;  // value of a (1,1) node

    // Accumulates d(root)/d(param) into every touched Parameter's grad.
    // root must be a (1,1) scalar. May be called repeatedly; gradients add up.
    void backward(ValueId root);

    // Distinct rows gathered per table plus parameters used whole, in first-use
    // order. Lets the optimizer update and reset only what this tape touched.
    struct Touched {
        std::vector<std::pair<Parameter*, std::vector<int>>> table_rows;
        std::vector<Parameter*> full;
    };
    Touched touched() const;

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        kParameter, kConstant, kGatherRows,
        kMatMul, kMatMulNT, kRelu, kSoftmaxRows, kScale, kAdd, kSub,
        kMeanSeq, kMaxSeq, kDot, kSumSquares, kSumAll, kNegLogSigmoid,
    };
    struct Node {
        Op op;
        Matrix value;
        int in0 = -1;
        int in1 = -1;
        double c = 0.0;             // kScale factor
        std::vector<int> ids;       // kGatherRows ids / kMaxSeq argmax rows
        Parameter* param = nullptr; // kParameter / kGatherRows target
    };

    ValueId push(Node node);
    const Matrix& val(ValueId id) const { return nodes_[id].value; }

    std::vector<Node> nodes_;
};

// Maximum relative error between the analytic gradient and a central finite
// difference, over every entry of every listed parameter.
struct FdReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_row = -1;
    int worst_col = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// loss_fn must evaluate the loss from the parameters' current values and, as a
// side effect, accumulate analytic gradients into their grad fields (zeroed
// here before the nominal call). Gradients produced during the perturbed calls
// are ignored. Relative error: |a-n| / max(1e-8, |a|+|n|).
FdReport finite_difference_check(const std::function<double()>& loss_fn,
                                 std::span<Parameter* const> params, double eps);

}  // namespace trec
