#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"
#include "soint/net.hpp"
#include "soint/rng.hpp"

using namespace soint;

namespace {

Net manual_net(std::vector<int> sizes, std::vector<Activation> acts,
               std::vector<double> params) {
    NetSpec spec{std::move(sizes), std::move(acts), 0};
    spec.validate();
    Net net{spec, std::move(params)};
    REQUIRE(net.params.size() == spec.param_count());
    return net;
}

// Independent dense forward pass: straight loops over the documented layout,
// written without reference to the library implementation.
std::vector<double> oracle_forward(const Net& net, std::vector<double> x) {
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < net.spec.layer_sizes.size(); ++l) {
        const int in_w = net.spec.layer_sizes[l];
        const int out_w = net.spec.layer_sizes[l + 1];
        std::vector<double> next(out_w, 0.0);
        for (int o = 0; o < out_w; ++o)
            for (int i = 0; i < in_w; ++i)
                next[o] += net.params[p + o * in_w + i] * x[i];
        p += static_cast<std::size_t>(in_w) * out_w;
        for (int o = 0; o < out_w; ++o) {
            next[o] += net.params[p + o];
            switch (net.spec.activations[l]) {
                case Activation::identity: break;
                case Activation::relu: next[o] = std::max(0.0, next[o]); break;
                case Activation::tanh: next[o] = std::tanh(next[o]); break;
                case Activation::sigmoid: next[o] = 1.0 / (1.0 + std::exp(-next[o])); break;
                case Activation::softplus: next[o] = std::log1p(std::exp(next[o])); break;
            }
        }
        p += out_w;
        x = next;
    }
    return x;
}

Net random_net(std::vector<int> sizes, std::vector<Activation> acts,
               std::uint64_t seed) {
    NetSpec spec{std::move(sizes), std::move(acts), seed};
    return Net::init(spec);
}

}  // namespace

TEST_CASE("identity network passes input through") {
    Net net = manual_net({2, 2}, {Activation::identity},
                         {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
    const std::vector<double> out = forward(net, std::vector<double>{1.0, -2.0});
    CHECK(out[0] == 1.0);
    CHECK(out[1] == -2.0);
}

TEST_CASE("bias-only relu clamps the negative bias") {
    Net net = manual_net({2, 2}, {Activation::relu},
                         {0.0, 0.0, 0.0, 0.0, -1.0, 3.0});
    for (double a : {-5.0, 0.0, 2.5}) {
        const std::vector<double> out = forward(net, std::vector<double>{a, -a});
        CHECK(out[0] == 0.0);
        CHECK(out[1] == 3.0);
    }
}

TEST_CASE("two-layer forward matches the independent oracle") {
    Net net = manual_net(
        {2, 3, 2}, {Activation::tanh, Activation::identity},
        {0.1, -0.2, 0.3, 0.4, -0.5, 0.6,   // layer 1 weights (3x2)
         0.05, -0.05, 0.1,                 // layer 1 biases
         1.0, 0.5, -0.5, 0.25, 0.75, -1.0, // layer 2 weights (2x3)
         -0.1, 0.2});                      // layer 2 biases
    const std::vector<double> x{0.7, -1.3};
    const std::vector<double> got = forward(net, x);
    const std::vector<double> want = oracle_forward(net, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::fabs(got[i] - want[i]) < 1e-12);
}

TEST_CASE("forward rejects wrong input width") {
    Net net = manual_net({2, 1}, {Activation::identity}, {1.0, 1.0, 0.0});
    CHECK_THROWS_AS(forward(net, std::vector<double>{1.0}), InvalidInputError);
}

TEST_CASE("linear map input gradient is the weight row") {
    Net net = manual_net({3, 1}, {Activation::identity}, {2.0, -3.0, 0.5, 0.0});
    const double one[1] = {1.0};
    Gradients g = gradients(net, std::vector<double>{1.0, 1.0, 1.0}, one);
    CHECK(g.input == std::vector<double>{2.0, -3.0, 0.5});
}

TEST_CASE("zero output gradient yields zero gradients") {
    Net net = random_net({4, 6, 3}, {Activation::tanh, Activation::sigmoid}, 5);
    const std::vector<double> zero(3, 0.0);
    Gradients g = gradients(net, std::vector<double>{0.3, -0.1, 0.2, 0.9}, zero);
    for (double v : g.params) CHECK(v == 0.0);
    for (double v : g.input) CHECK(v == 0.0);
}

TEST_CASE("gradients match central finite differences on a random net") {
    Net net = random_net({3, 5, 4, 2},
                         {Activation::tanh, Activation::softplus, Activation::sigmoid},
                         17);
    rng::Stream s = rng::stream(3, {rng::hash_str("probe")});
    std::vector<double> x{0.4, -0.8, 1.1};
    std::vector<double> og{0.7, -1.2};

    Gradients analytic = gradients(net, x, og);
    auto scalar = [&](const Net& m, const std::vector<double>& in) {
        const std::vector<double> out = forward(m, in);
        double f = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) f += og[i] * out[i];
        return f;
    };

    const double eps = 1e-5;
    double max_rel = 0.0;
    Net work = net;
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const double saved = work.params[i];
        work.params[i] = saved + eps;
        const double fp = scalar(work, x);
        work.params[i] = saved - eps;
        const double fm = scalar(work, x);
        work.params[i] = saved;
        const double fd = (fp - fm) / (2 * eps);
        max_rel = std::max(max_rel,
                           std::fabs(analytic.params[i] - fd) /
                               std::max({std::fabs(fd), std::fabs(analytic.params[i]), 1.0}));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double fp = scalar(net, x);
        x[i] = saved - eps;
        const double fm = scalar(net, x);
        x[i] = saved;
        const double fd = (fp - fm) / (2 * eps);
        max_rel = std::max(max_rel,
                           std::fabs(analytic.input[i] - fd) /
                               std::max({std::fabs(fd), std::fabs(analytic.input[i]), 1.0}));
    }
    (void)s;
    CHECK(max_rel < 1e-4);
}

TEST_CASE("one sgd step") {
    Net net = manual_net({1, 1}, {Activation::identity}, {1.0, 0.0});
    OptimizerState opt = OptimizerState::sgd(0.1);
    optimize_step(net, opt, std::vector<double>{2.0, 0.0});
    CHECK(net.params[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(opt.step == 1);

    optimize_step(net, opt, std::vector<double>{0.0, 0.0});
    CHECK(net.params[0] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("first adam step moves by about the learning rate against the gradient") {
    // Hand-computed from the published update: m_hat = g, v_hat = g^2, so the
    // step is lr * g / (|g| + eps) = lr * sign(g) up to eps.
    Net net = manual_net({2, 1}, {Activation::identity}, {1.0, -1.0, 0.5});
    OptimizerState opt = OptimizerState::adam(0.01);
    optimize_step(net, opt, std::vector<double>{3.0, -0.2, 0.001});
    CHECK(net.params[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-5));
    CHECK(net.params[1] == doctest::Approx(-1.0 + 0.01).epsilon(1e-5));
    CHECK(net.params[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("non-finite gradients raise a divergence error") {
    Net net = manual_net({1, 1}, {Activation::identity}, {1.0, 0.0});
    OptimizerState opt = OptimizerState::sgd(0.1);
    CHECK_THROWS_AS(
        optimize_step(net, opt, std::vector<double>{std::nan(""), 0.0}),
        TrainingDivergenceError);
}

TEST_CASE("grad_check: linear network is exact to 1e-10") {
    Net net = manual_net({3, 2}, {Activation::identity},
                         {0.5, -1.5, 2.0, 1.0, 0.0, -0.5, 0.1, 0.2});
    CHECK(grad_check(net, std::vector<double>{0.3, 0.6, -0.9}, 1e-5) < 1e-10);
}

TEST_CASE("grad_check: tanh and softplus MLPs stay under 1e-4") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        Net net = random_net({4, 8, 8, 3},
                             {Activation::tanh, Activation::softplus, Activation::tanh},
                             seed);
        rng::Stream s = rng::stream(seed, {rng::hash_str("gc-input")});
        std::vector<double> x(4);
        for (double& v : x) v = s.normal();
        CHECK(grad_check(net, x, 1e-5) < 1e-4);
    }
}

TEST_CASE("grad_check: relu away from kinks stays under 1e-4") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Net net = random_net({4, 8, 3}, {Activation::relu, Activation::identity}, seed);
        rng::Stream s = rng::stream(seed, {rng::hash_str("relu-input")});
        std::vector<double> x(4);
        for (double& v : x) v = s.normal();

        // Exclude inputs whose pre-activations sit near the relu kink.
        ForwardTrace trace = forward_trace(net, x);
        bool near_kink = false;
        for (double z : trace.pre[0]) near_kink |= std::fabs(z) < 1e-3;
        if (near_kink) continue;

        CHECK(grad_check(net, x, 1e-5) < 1e-4);
    }
}

TEST_CASE("grad_check validates epsilon") {
    Net net = manual_net({1, 1}, {Activation::identity}, {1.0, 0.0});
    CHECK_THROWS_AS(grad_check(net, std::vector<double>{1.0}, 0.0), InvalidInputError);
    CHECK_THROWS_AS(grad_check(net, std::vector<double>{1.0}, 0.5), InvalidInputError);
}

TEST_CASE("initialization is deterministic per seed") {
    NetSpec spec{{5, 7, 2}, {Activation::tanh, Activation::identity}, 123};
    Net a = Net::init(spec);
    Net b = Net::init(spec);
    CHECK(a.params == b.params);

    spec.seed = 124;
    Net c = Net::init(spec);
    CHECK(a.params != c.params);
}

TEST_CASE("initial weights follow the 2/(fan_in+fan_out) variance scale") {
    // One wide layer gives >= 10^4 weight draws.
    NetSpec spec{{100, 120}, {Activation::identity}, 7};
    Net net = Net::init(spec);

    const std::size_t weight_count = 100 * 120;
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < weight_count; ++i) {
        sum += net.params[i];
        sq += net.params[i] * net.params[i];
    }
    const double mean = sum / weight_count;
    const double var = sq / weight_count - mean * mean;
    const double expected = 2.0 / (100 + 120);
    CHECK(std::fabs(mean) < 0.1 * std::sqrt(expected));
    CHECK(var == doctest::Approx(expected).epsilon(0.1));

    for (std::size_t i = weight_count; i < net.params.size(); ++i)
        CHECK(net.params[i] == 0.0);
}

TEST_CASE("spec validation rejects malformed shapes") {
    NetSpec only_input{{3}, {}, 0};
    CHECK_THROWS_AS(only_input.validate(), InvalidInputError);
    NetSpec zero_width{{3, 0}, {Activation::relu}, 0};
    CHECK_THROWS_AS(zero_width.validate(), InvalidInputError);
    NetSpec missing_activation{{3, 2}, {}, 0};
    CHECK_THROWS_AS(missing_activation.validate(), InvalidInputError);
}

TEST_CASE("checkpoint json round-trips value-exact") {
    Net net = random_net({3, 9, 2}, {Activation::softplus, Activation::sigmoid}, 99);
    net.params[0] = 0.1;  // not exactly representable; exercises text round-trip
    net.params[1] = 1e-301;

    const std::string text = net_to_json(net).dump();
    Net back = net_from_json(nlohmann::json::parse(text));
    CHECK(back.spec.layer_sizes == net.spec.layer_sizes);
    CHECK(back.spec.seed == net.spec.seed);
    REQUIRE(back.params.size() == net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i)
        CHECK(back.params[i] == net.params[i]);
}
