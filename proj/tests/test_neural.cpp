#include "doctest.h"

#include <cmath>
#include <sstream>

#include "psar/neural.hpp"

using namespace psar;

namespace {

void zero_params(Mlp& m) {
    for (auto& w : m.weights()) w.setZero();
    for (auto& b : m.biases()) b.setZero();
}

// Scalar test loss: sum of squared outputs against fixed targets.
double loss_of(const Mlp& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets) {
    Eigen::MatrixXd out = m.forward(x);
    return (out - targets).squaredNorm();
}

// Max relative error between analytic gradients and central differences.
double gradcheck(Mlp& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, double h) {
    Mlp::Cache cache;
    Eigen::MatrixXd out = m.forward(x, cache);
    MlpGradients grads = m.zero_gradients();
    m.backward(cache, 2.0 * (out - targets), grads);

    double worst = 0.0;
    for (int l = 0; l < m.num_layers(); ++l) {
        for (int i = 0; i < m.weights()[l].rows(); ++i) {
            for (int j = 0; j < m.weights()[l].cols(); ++j) {
                double saved = m.weights()[l](i, j);
                m.weights()[l](i, j) = saved + h;
                double up = loss_of(m, x, targets);
                m.weights()[l](i, j) = saved - h;
                double down = loss_of(m, x, targets);
                m.weights()[l](i, j) = saved;
                double fd = (up - down) / (2.0 * h);
                double ga = grads.weights[l](i, j);
                double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1.0});
                worst = std::max(worst, rel);
            }
        }
        for (int i = 0; i < m.biases()[l].size(); ++i) {
            double saved = m.biases()[l](i);
            m.biases()[l](i) = saved + h;
            double up = loss_of(m, x, targets);
            m.biases()[l](i) = saved - h;
            double down = loss_of(m, x, targets);
            m.biases()[l](i) = saved;
            double fd = (up - down) / (2.0 * h);
            double ga = grads.biases[l](i);
            double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1.0});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

bool near_relu_kink(const Mlp& m, const Eigen::MatrixXd& x, double margin) {
    Mlp::Cache cache;
    m.forward(x, cache);
    // Only hidden layers have ReLU kinks.
    for (int l = 0; l + 1 < m.num_layers(); ++l)
        if (cache.pre[static_cast<size_t>(l)].cwiseAbs().minCoeff() < margin) return true;
    return false;
}

}  // namespace

TEST_CASE("forward with zeroed parameters and sigmoid output gives 0.5") {
    Rng rng(1);
    Mlp m({3, 4, 2}, OutputActivation::sigmoid, rng);
    zero_params(m);
    Eigen::MatrixXd x(1, 3);
    x << 0.3, -1.0, 2.0;
    Eigen::MatrixXd out = m.forward(x);
    CHECK(out(0, 0) == doctest::Approx(0.5));
    CHECK(out(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("single identity layer with unit weights returns the input") {
    Rng rng(2);
    Mlp m({3, 3}, OutputActivation::identity, rng);
    zero_params(m);
    for (int i = 0; i < 3; ++i) m.weights()[0](i, i) = 1.0;
    Eigen::MatrixXd x(1, 3);
    x << -0.5, 0.25, 4.0;
    Eigen::MatrixXd out = m.forward(x);
    for (int i = 0; i < 3; ++i) CHECK(out(0, i) == doctest::Approx(x(0, i)));
}

TEST_CASE("softplus output is strictly positive") {
    Rng rng(3);
    Mlp m({2, 5, 1}, OutputActivation::softplus, rng);
    Eigen::MatrixXd x(3, 2);
    x << -50.0, -50.0, 0.0, 0.0, 50.0, -50.0;
    Eigen::MatrixXd out = m.forward(x);
    for (int i = 0; i < 3; ++i) CHECK(out(i, 0) > 0.0);
}

TEST_CASE("forward rejects dimension mismatch") {
    Rng rng(4);
    Mlp m({3, 2}, OutputActivation::identity, rng);
    Eigen::MatrixXd x(1, 2);
    x << 1.0, 2.0;
    CHECK_THROWS_AS(m.forward(x), std::invalid_argument);
}

TEST_CASE("backward of a constant loss is zero") {
    Rng rng(5);
    Mlp m({2, 4, 1}, OutputActivation::identity, rng);
    Eigen::MatrixXd x(1, 2);
    x << 0.7, -0.2;
    Mlp::Cache cache;
    m.forward(x, cache);
    MlpGradients grads = m.zero_gradients();
    m.backward(cache, Eigen::MatrixXd::Zero(1, 1), grads);
    for (const auto& w : grads.weights) CHECK(w.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (const auto& b : grads.biases) CHECK(b.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("backward requires a filled cache") {
    Rng rng(6);
    Mlp m({2, 1}, OutputActivation::identity, rng);
    Mlp::Cache stale;
    MlpGradients grads = m.zero_gradients();
    CHECK_THROWS_AS(m.backward(stale, Eigen::MatrixXd::Zero(1, 1), grads), std::logic_error);
}

TEST_CASE("hand-differentiated single linear unit") {
    // L = (w*x - target)^2 at x = 1, w = 1, target = 0: dL/dw = 2.
    Rng rng(7);
    Mlp m({1, 1}, OutputActivation::identity, rng);
    zero_params(m);
    m.weights()[0](0, 0) = 1.0;
    Eigen::MatrixXd x(1, 1), target(1, 1);
    x << 1.0;
    target << 0.0;
    Mlp::Cache cache;
    Eigen::MatrixXd out = m.forward(x, cache);
    MlpGradients grads = m.zero_gradients();
    m.backward(cache, 2.0 * (out - target), grads);
    CHECK(grads.weights[0](0, 0) == doctest::Approx(2.0));
}

TEST_CASE("gradients match central finite differences on random 3-layer nets") {
    int checked = 0;
    for (int seed = 0; seed < 40 && checked < 10; ++seed) {
        Rng rng(static_cast<std::uint64_t>(100 + seed));
        Mlp m({2, 5, 5, 1}, OutputActivation::sigmoid, rng);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::MatrixXd x(3, 2), targets(3, 1);
        for (int i = 0; i < 3; ++i) {
            x(i, 0) = u(rng);
            x(i, 1) = u(rng);
            targets(i, 0) = 0.5 * (u(rng) + 1.0);
        }
        if (near_relu_kink(m, x, 1e-3)) continue;  // finite differences break at kinks
        CHECK(gradcheck(m, x, targets, 1e-5) < 1e-4);
        checked += 1;
    }
    CHECK(checked == 10);
}

TEST_CASE("adamw closed-form single steps") {
    Rng rng(8);
    SUBCASE("zero gradient, zero decay leaves parameters unchanged") {
        Mlp m({1, 1}, OutputActivation::identity, rng);
        m.weights()[0](0, 0) = 0.37;
        AdamW opt(m, {.learning_rate = 1e-3, .weight_decay = 0.0});
        MlpGradients g = m.zero_gradients();
        opt.step(m, g);
        CHECK(m.weights()[0](0, 0) == doctest::Approx(0.37).epsilon(1e-12));
    }
    SUBCASE("first step moves by about -lr for a positive gradient") {
        Mlp m({1, 1}, OutputActivation::identity, rng);
        m.weights()[0](0, 0) = 0.0;
        m.biases()[0](0) = 0.0;
        AdamW opt(m, {.learning_rate = 1e-3, .weight_decay = 0.0});
        MlpGradients g = m.zero_gradients();
        g.weights[0](0, 0) = 0.5;  // bias-corrected ratio = g/(|g|+eps) ~ 1
        opt.step(m, g);
        CHECK(m.weights()[0](0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
    }
    SUBCASE("decay-only update multiplies by (1 - lr*decay)") {
        Mlp m({1, 1}, OutputActivation::identity, rng);
        m.weights()[0](0, 0) = 2.0;
        AdamW opt(m, {.learning_rate = 0.1, .weight_decay = 0.01});
        MlpGradients g = m.zero_gradients();
        opt.step(m, g);
        CHECK(m.weights()[0](0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-12));
    }
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    auto run = [] {
        Rng rng(999);
        Mlp m({2, 5, 1}, OutputActivation::identity, rng);
        AdamW opt(m, {});
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int step = 0; step < 25; ++step) {
            Eigen::MatrixXd x(4, 2), t(4, 1);
            for (int i = 0; i < 4; ++i) {
                x(i, 0) = u(rng);
                x(i, 1) = u(rng);
                t(i, 0) = u(rng);
            }
            Mlp::Cache cache;
            Eigen::MatrixXd out = m.forward(x, cache);
            MlpGradients g = m.zero_gradients();
            m.backward(cache, 2.0 * (out - t), g);
            opt.step(m, g);
        }
        return m;
    };
    Mlp a = run(), b = run();
    for (int l = 0; l < a.num_layers(); ++l) {
        CHECK(a.weights()[l] == b.weights()[l]);  // bit-exact
        CHECK(a.biases()[l] == b.biases()[l]);
    }
}

TEST_CASE("checkpoint round-trips exactly") {
    Rng rng(10);
    Mlp m({3, 7, 2}, OutputActivation::softplus, rng);
    std::stringstream ss;
    m.save(ss, "net");
    std::string name;
    Mlp loaded = Mlp::load(ss, &name);
    CHECK(name == "net");
    CHECK(loaded.widths() == m.widths());
    CHECK(loaded.output_activation() == m.output_activation());
    for (int l = 0; l < m.num_layers(); ++l) {
        CHECK(loaded.weights()[l] == m.weights()[l]);
        CHECK(loaded.biases()[l] == m.biases()[l]);
    }
}
