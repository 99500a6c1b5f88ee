#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "trec/autodiff.hpp"
#include "trec/errors.hpp"
#include "trec/matrix.hpp"

using namespace trec;
using trec::testing::random_matrix;

TEST_CASE("matmul identity and hand-checked product") {
    std::mt19937_64 rng(7);
    const Matrix x = random_matrix(2, 2, rng);
    const Matrix eye(2, 2, {1, 0, 0, 1});
    CHECK(matmul(eye, x) == x);

    const Matrix a(2, 2, {1, 2, 3, 4});
    const Matrix b(2, 1, {0, 1});
    const Matrix c = matmul(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 1);
    CHECK(c.at(0, 0) == 2.0);
    CHECK(c.at(1, 0) == 4.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    const Matrix a(2, 3);
    const Matrix b(2, 2);
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("2x2") != std::string::npos);
    }
}

TEST_CASE("matmul gradient matches central finite differences") {
    std::mt19937_64 rng(11);
    Parameter a("a", random_matrix(3, 4, rng));
    Parameter b("b", random_matrix(4, 2, rng));
    std::vector<Parameter*> params{&a, &b};
    auto loss = [&] {
        Tape tape;
        const auto out = tape.sum_all(tape.matmul(tape.parameter(a), tape.parameter(b)));
        tape.backward(out);
        return tape.scalar(out);
    };
    const FdReport report = finite_difference_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("relu values and gradient") {
    const Matrix x(1, 3, {-1, 0, 2});
    const Matrix y = relu(x);
    CHECK(y.at(0, 0) == 0.0);
    CHECK(y.at(0, 1) == 0.0);
    CHECK(y.at(0, 2) == 2.0);

    const Matrix neg(2, 2, {-3, -1, -0.5, -2});
    const Matrix zeros = relu(neg);
    for (int i = 0; i < zeros.size(); ++i) CHECK(zeros.data()[i] == 0.0);

    Parameter p("p", Matrix(1, 2, {-1, 2}));
    Tape tape;
    const auto out = tape.sum_all(tape.relu(tape.parameter(p)));
    tape.backward(out);
    CHECK(p.grad.at(0, 0) == 0.0);
    CHECK(p.grad.at(0, 1) == 1.0);
}

TEST_CASE("softmax rows: uniform, overflow guard, hand value") {
    const Matrix u = softmax_rows(Matrix(1, 3, {0, 0, 0}));
    for (int c = 0; c < 3; ++c) CHECK(u.at(0, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const Matrix big = softmax_rows(Matrix(1, 2, {1000, 1000}));
    CHECK(big.all_finite());
    CHECK(big.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(big.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

    // exp(0)/(exp(0)+exp(ln 3)) = 1/4, exp(ln 3)/... = 3/4.
    const Matrix hand = softmax_rows(Matrix(1, 2, {0.0, std::log(3.0)}));
    CHECK(hand.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(hand.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay in [0,1]") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix x = random_matrix(4, 6, rng);
        const Matrix y = softmax_rows(scale(x, 50.0));
        CHECK(y.same_shape(x));
        for (int r = 0; r < y.rows(); ++r) {
            double sum = 0.0;
            for (int c = 0; c < y.cols(); ++c) {
                sum += y.at(r, c);
                CHECK(y.at(r, c) >= 0.0);
                CHECK(y.at(r, c) <= 1.0);
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("mean over sequence") {
    const Matrix r(1, 3, {0.4, -0.2, 1.5});
    Matrix three(3, 3);
    for (int row = 0; row < 3; ++row) {
        for (int c = 0; c < 3; ++c) three.at(row, c) = r.at(0, c);
    }
    const Matrix m = mean_over_sequence(three);
    for (int c = 0; c < 3; ++c) CHECK(m.at(0, c) == doctest::Approx(r.at(0, c)).epsilon(1e-15));

    const Matrix x(2, 2, {0, 2, 2, 0});
    const Matrix mx = mean_over_sequence(x);
    CHECK(mx.at(0, 0) == 1.0);
    CHECK(mx.at(0, 1) == 1.0);

    // Row permutation leaves the mean unchanged.
    const Matrix perm(2, 2, {2, 0, 0, 2});
    CHECK(mean_over_sequence(perm) == mx);

    CHECK_THROWS_AS(Matrix(0, 3), DimensionError);  // empty sequences are unrepresentable
}

TEST_CASE("max over sequence and first-occurrence ties") {
    const Matrix x(2, 2, {0, 2, 2, 0});
    const Matrix mx = max_over_sequence(x);
    CHECK(mx.at(0, 0) == 2.0);
    CHECK(mx.at(0, 1) == 2.0);

    const Matrix single(1, 4, {3, -1, 0.5, 2});
    CHECK(max_over_sequence(single) == single);

    const Matrix perm(2, 2, {2, 0, 0, 2});
    CHECK(max_over_sequence(perm) == mx);

    // Tie in column 0: gradient goes to the first row only.
    Parameter p("p", Matrix(2, 2, {1, 5, 1, 3}));
    Tape tape;
    const auto out = tape.sum_all(tape.max_over_sequence(tape.parameter(p)));
    tape.backward(out);
    CHECK(p.grad.at(0, 0) == 1.0);
    CHECK(p.grad.at(0, 1) == 1.0);
    CHECK(p.grad.at(1, 0) == 0.0);
    CHECK(p.grad.at(1, 1) == 0.0);
}

TEST_CASE("finite difference check on a linear loss") {
    std::mt19937_64 rng(17);
    Parameter p("p", random_matrix(3, 5, rng));
    std::vector<Parameter*> params{&p};
    auto loss = [&] {
        Tape tape;
        const auto out = tape.sum_all(tape.parameter(p));
        tape.backward(out);
        return tape.scalar(out);
    };
    const FdReport report = finite_difference_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("every primitive passes the gradient oracle on random inputs") {
    std::mt19937_64 rng(19);
    // Inputs resampled away from |x| < 1e-3 to dodge relu/max kinks.
    Parameter a("a", random_matrix(3, 4, rng, 1e-3));
    Parameter b("b", random_matrix(5, 4, rng, 1e-3));
    Parameter w("w", random_matrix(4, 4, rng, 1e-3));
    const Matrix mix_const = random_matrix(5, 1, rng);
    std::vector<Parameter*> params{&a, &b, &w};

    auto loss = [&] {
        Tape tape;
        const auto x = tape.relu(tape.matmul(tape.parameter(a), tape.parameter(w)));
        const auto logits = tape.scale(tape.matmul_nt(x, tape.parameter(b)), 0.5);
        const auto attn = tape.softmax_rows(logits);
        const auto mixed = tape.matmul(attn, tape.constant(mix_const));
        const auto mean_part = tape.mean_over_sequence(mixed);
        const auto max_part = tape.max_over_sequence(mixed);
        const auto head = tape.add(mean_part, tape.scale(max_part, 0.25));
        const auto margin = tape.sub(tape.sum_all(head), tape.sum_squares(mean_part));
        const auto out = tape.neg_log_sigmoid(margin);
        tape.backward(out);
        return tape.scalar(out);
    };
    const FdReport report = finite_difference_check(loss, params, 1e-5);
    CAPTURE(report.worst_param);
    CAPTURE(report.analytic);
    CAPTURE(report.numeric);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("dot gradient") {
    std::mt19937_64 rng(23);
    Parameter a("a", random_matrix(1, 6, rng));
    Parameter b("b", random_matrix(1, 6, rng));
    std::vector<Parameter*> params{&a, &b};
    auto loss = [&] {
        Tape tape;
        const auto out = tape.dot(tape.parameter(a), tape.parameter(b));
        tape.backward(out);
        return tape.scalar(out);
    };
    CHECK(finite_difference_check(loss, params, 1e-6).max_rel_error < 1e-6);
}

TEST_CASE("backward accumulation is additive") {
    std::mt19937_64 rng(29);
    Parameter p("p", random_matrix(2, 3, rng));
    Tape tape;
    const auto out = tape.sum_squares(tape.parameter(p));
    tape.backward(out);
    const Matrix once = p.grad;
    tape.backward(out);
    for (int i = 0; i < once.size(); ++i) {
        CHECK(p.grad.data()[i] == doctest::Approx(2.0 * once.data()[i]).epsilon(1e-15));
    }
    p.zero_grad();
    for (int i = 0; i < p.grad.size(); ++i) CHECK(p.grad.data()[i] == 0.0);
}

TEST_CASE("corrupted backward rule is caught by the oracle") {
    std::mt19937_64 rng(31);
    Parameter p("p", random_matrix(2, 2, rng));
    std::vector<Parameter*> params{&p};
    auto lying_loss = [&] {
        Tape tape;
        const auto out = tape.sum_squares(tape.parameter(p));
        tape.backward(out);
        p.grad.at(0, 0) += 0.05;  // deliberate corruption
        return tape.scalar(out);
    };
    const FdReport report = finite_difference_check(lying_loss, params, 1e-5);
    CHECK(report.max_rel_error > 1e-4);
    CHECK(report.worst_param == "p");
}

TEST_CASE("non-finite loss raises a numerics error") {
    Parameter p("p", Matrix(1, 1, {1.0}));
    std::vector<Parameter*> params{&p};
    auto bad_loss = [&] { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(finite_difference_check(bad_loss, params, 1e-5), NumericsError);
    CHECK_THROWS_AS(finite_difference_check([] { return 0.0; }, params, 0.0), NumericsError);
}
