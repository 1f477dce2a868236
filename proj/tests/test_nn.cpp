#include <cmath>

#include "doctest.h"
#include "grad_check.hpp"
#include "sargen/nn/layers.hpp"
#include "sargen/rng.hpp"

using namespace sargen;
using namespace sargen::nn;
using sargen_test::check_gradients;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
    Tensor t(n, c, h, w);
    for (auto& v : t.v) v = rng.normal() * scale;
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(11);
    for (const auto [k, stride] : {std::pair{3, 1}, std::pair{3, 2}, std::pair{1, 1}}) {
        Conv2d conv(2, 3, k, stride, rng);
        const Tensor x = random_tensor(2, 2, 6, 6, rng);
        const Tensor proj = random_tensor(2, 3, conv.out_size(6), conv.out_size(6), rng);
        conv.W.zero_grad();
        conv.b.zero_grad();
        conv.grad_params(x, proj);
        const Tensor gx = conv.backward_input(proj, 6, 6);

        auto loss = [&] { return dot(conv.forward(x), proj); };
        const auto res = check_gradients({&conv.W, &conv.b}, loss);
        CHECK(res.max_rel_err < 1e-6);

        // input gradient via directional finite difference
        Rng drng(5);
        Tensor dir = random_tensor(2, 2, 6, 6, drng);
        Tensor xp = x, xm = x;
        const double eps = 1e-6;
        for (std::size_t i = 0; i < x.size(); ++i) {
            xp.v[i] += eps * dir.v[i];
            xm.v[i] -= eps * dir.v[i];
        }
        const double fd = (dot(conv.forward(xp), proj) - dot(conv.forward(xm), proj)) / (2 * eps);
        CHECK(std::abs(fd - dot(gx, dir)) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(12);
    Dense dense(7, 4, rng);
    const Tensor x = random_tensor(3, 7, 1, 1, rng);
    const Tensor proj = random_tensor(3, 4, 1, 1, rng);
    dense.W.zero_grad();
    dense.b.zero_grad();
    dense.grad_params(x, proj);
    auto loss = [&] { return dot(dense.forward(x), proj); };
    CHECK(check_gradients({&dense.W, &dense.b}, loss).max_rel_err < 1e-6);
}

TEST_CASE("batchnorm train-mode gradients match finite differences") {
    Rng rng(13);
    BatchNorm2d bn(3);
    for (auto& g : bn.gamma.w) g = 1.0 + 0.3 * rng.normal();
    for (auto& b : bn.beta.w) b = 0.2 * rng.normal();
    const Tensor x = random_tensor(4, 3, 5, 5, rng);
    Tensor proj = random_tensor(4, 3, 5, 5, rng);

    BatchNorm2d::Cache cache;
    bn.gamma.zero_grad();
    bn.beta.zero_grad();
    // keep running stats fixed during the check
    auto run_mean = bn.running_mean;
    auto run_var = bn.running_var;
    bn.forward_train(x, cache);
    const Tensor gx = bn.backward(cache, proj);

    auto loss = [&] {
        BatchNorm2d::Cache c;
        BatchNorm2d probe = bn;
        probe.running_mean = run_mean;
        probe.running_var = run_var;
        return dot(probe.forward_train(x, c), proj);
    };
    CHECK(check_gradients({&bn.gamma, &bn.beta}, loss).max_rel_err < 1e-5);

    // input gradient
    const double eps = 1e-6;
    Rng drng(7);
    const Tensor dir = random_tensor(4, 3, 5, 5, drng);
    auto eval_at = [&](double sign) {
        Tensor xx = x;
        for (std::size_t i = 0; i < x.size(); ++i) xx.v[i] += sign * eps * dir.v[i];
        BatchNorm2d probe = bn;
        BatchNorm2d::Cache c;
        return dot(probe.forward_train(xx, c), proj);
    };
    const double fd = (eval_at(1) - eval_at(-1)) / (2 * eps);
    CHECK(std::abs(fd - dot(gx, dir)) < 1e-5 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("activation backward passes match finite differences") {
    Rng rng(14);
    const Tensor x = random_tensor(2, 2, 3, 3, rng);
    const Tensor proj = random_tensor(2, 2, 3, 3, rng);
    const double eps = 1e-6;

    SUBCASE("leaky_relu") {
        const Tensor gx = leaky_relu_backward(x, proj);
        for (const std::size_t i : {std::size_t{0}, std::size_t{5}, std::size_t{17}}) {
            Tensor xp = x, xm = x;
            xp.v[i] += eps;
            xm.v[i] -= eps;
            const double fd = (dot(leaky_relu(xp), proj) - dot(leaky_relu(xm), proj)) / (2 * eps);
            CHECK(std::abs(fd - gx.v[i]) < 1e-6);
        }
    }
    SUBCASE("sigmoid and tanh") {
        const Tensor ys = sigmoid(x);
        const Tensor gs = sigmoid_backward(ys, proj);
        const Tensor yt = tanh_act(x);
        const Tensor gt = tanh_backward(yt, proj);
        for (const std::size_t i : {std::size_t{1}, std::size_t{8}}) {
            Tensor xp = x, xm = x;
            xp.v[i] += eps;
            xm.v[i] -= eps;
            double fd = (dot(sigmoid(xp), proj) - dot(sigmoid(xm), proj)) / (2 * eps);
            CHECK(std::abs(fd - gs.v[i]) < 1e-6);
            fd = (dot(tanh_act(xp), proj) - dot(tanh_act(xm), proj)) / (2 * eps);
            CHECK(std::abs(fd - gt.v[i]) < 1e-6);
        }
    }
}

TEST_CASE("upsample and avgpool adjoints satisfy the dot-product identity") {
    Rng rng(15);
    const Tensor x = random_tensor(2, 3, 4, 4, rng);
    const Tensor y_up = random_tensor(2, 3, 8, 8, rng);
    // <Ax, y> == <x, A^T y>
    CHECK(dot(upsample2x(x), y_up) == doctest::Approx(dot(x, upsample2x_backward(y_up))).epsilon(1e-12));
    const Tensor big = random_tensor(2, 3, 8, 8, rng);
    const Tensor y_dn = random_tensor(2, 3, 4, 4, rng);
    CHECK(dot(avgpool2x(big), y_dn) == doctest::Approx(dot(big, avgpool2x_backward(y_dn))).epsilon(1e-12));
}

TEST_CASE("adam converges on a quadratic") {
    Param p(1);
    p.w[0] = 0.0;
    Adam adam({&p}, 0.1);
    for (int step = 0; step < 1000; ++step) {
        adam.zero_grad();
        p.g[0] = 2.0 * (p.w[0] - 3.0);
        adam.step();
    }
    CHECK(p.w[0] == doctest::Approx(3.0).epsilon(1e-4));
}
