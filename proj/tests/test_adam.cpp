#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "wadapt/adam.hpp"
#include "wadapt/errors.hpp"

using namespace wadapt;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Parameter p("p", Matrix::from_rows({{1.0, -3.0}}));
    Adam opt({&p}, AdamOptions{});
    p.grad.fill(0.0);
    opt.step();
    EXPECT_EQ(p.value, Matrix::from_rows({{1.0, -3.0}}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
    Parameter p("p", Matrix(1, 1, 0.0));
    AdamOptions o;
    o.learning_rate = 0.1;
    Adam opt({&p}, o);
    p.grad(0, 0) = 1.0;
    opt.step();
    EXPECT_NEAR(p.value(0, 0), -0.1 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Adam, SecondStepClosedForm) {
    Parameter p("p", Matrix(1, 1, 0.0));
    AdamOptions o;
    o.learning_rate = 0.01;
    Adam opt({&p}, o);
    p.grad(0, 0) = 2.0;
    opt.step();
    p.grad(0, 0) = -1.0;
    opt.step();
    const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0;
    const double v = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;
    const double m_hat = m / (1.0 - 0.81), v_hat = v / (1.0 - 0.999 * 0.999);
    const double first = -0.01 * 2.0 / (2.0 + 1e-8);
    EXPECT_NEAR(p.value(0, 0), first - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
    auto run = [] {
        std::mt19937_64 rng(9);
        Parameter w("w", wadapt::testing::random_matrix(3, 2, rng));
        const Matrix x = wadapt::testing::random_matrix(5, 3, rng);
        Adam opt({&w}, AdamOptions{});
        for (int i = 0; i < 100; ++i) {
            Tape t;
            Var y = ad::tanh(ad::matmul(t.constant(x), t.param(w)));
            t.backward(ad::mean(ad::mul(y, y)));
            opt.step();
        }
        return w.value;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteGradientRejectedWithoutUpdate) {
    Parameter a("a", Matrix(1, 1, 1.0));
    Parameter b("b", Matrix(1, 1, 2.0));
    Adam opt({&a, &b}, AdamOptions{});
    a.grad(0, 0) = 1.0;
    b.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(opt.step(), TrainingError);
    EXPECT_EQ(a.value(0, 0), 1.0);
    EXPECT_EQ(b.value(0, 0), 2.0);
}
