#include "soint/net.hpp"

#include <cmath>
#include <cstddef>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"
#include "soint/rng.hpp"

namespace soint {

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::softplus:
            // log(1+exp(z)) without overflow for large |z|.
            return z > 30.0 ? z : std::log1p(std::exp(z));
    }
    return z;
}

// Derivative in terms of the pre-activation z and the activation value y.
double activate_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;  // subgradient 0 at z == 0
        case Activation::tanh: return 1.0 - y * y;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::softplus: return 1.0 / (1.0 + std::exp(-z));
    }
    return 1.0;
}

}  // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softplus") return Activation::softplus;
    throw InvalidInputError("unknown activation: " + name);
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softplus: return "softplus";
    }
    return "identity";
}

std::size_t NetSpec::param_count() const {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        count += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1];
        count += layer_sizes[l + 1];
    }
    return count;
}

void NetSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw InvalidInputError("net spec needs at least input and one layer");
    for (int w : layer_sizes)
        if (w < 1) throw InvalidInputError("layer widths must be positive");
    if (activations.size() != layer_sizes.size() - 1)
        throw InvalidInputError("need exactly one activation per non-input layer");
}

Net Net::init(NetSpec spec) {
    spec.validate();
    Net net{std::move(spec), {}};
    net.params.resize(net.spec.param_count());

    rng::Stream stream = rng::stream(net.spec.seed, {rng::hash_str("net-init")});
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < net.spec.layer_sizes.size(); ++l) {
        const int fan_in = net.spec.layer_sizes[l];
        const int fan_out = net.spec.layer_sizes[l + 1];
        const double sd = std::sqrt(2.0 / (fan_in + fan_out));
        for (int i = 0; i < fan_in * fan_out; ++i) net.params[p++] = sd * stream.normal();
        for (int i = 0; i < fan_out; ++i) net.params[p++] = 0.0;
    }
    return net;
}

ForwardTrace forward_trace(const Net& net, std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.spec.input_width())
        throw InvalidInputError("forward: input width mismatch");

    ForwardTrace trace;
    trace.pre.resize(net.spec.num_layers());
    trace.post.resize(net.spec.num_layers());

    std::vector<double> current(input.begin(), input.end());
    std::size_t p = 0;
    for (std::size_t l = 0; l < net.spec.num_layers(); ++l) {
        const int in_w = net.spec.layer_sizes[l];
        const int out_w = net.spec.layer_sizes[l + 1];
        const double* weights = net.params.data() + p;
        const double* biases = weights + static_cast<std::size_t>(in_w) * out_w;
        p += static_cast<std::size_t>(in_w) * out_w + out_w;

        std::vector<double> pre(out_w);
        std::vector<double> post(out_w);
        for (int o = 0; o < out_w; ++o) {
            double z = biases[o];
            const double* row = weights + static_cast<std::size_t>(o) * in_w;
            for (int i = 0; i < in_w; ++i) z += row[i] * current[i];
            pre[o] = z;
            post[o] = activate(net.spec.activations[l], z);
        }
        current = post;
        trace.pre[l] = std::move(pre);
        trace.post[l] = std::move(post);
    }
    return trace;
}

std::vector<double> forward(const Net& net, std::span<const double> input) {
    return forward_trace(net, input).post.back();
}

ForwardBackward forward_backward(const Net& net, std::span<const double> input,
                                 std::span<const double> output_grad) {
    if (static_cast<int>(output_grad.size()) != net.spec.output_width())
        throw InvalidInputError("gradients: output_grad width mismatch");
    ForwardTrace trace = forward_trace(net, input);

    Gradients g;
    g.params.assign(net.params.size(), 0.0);

    // delta = dF/d(post-activation of current layer); walk layers backward.
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    std::size_t layer_offset = net.params.size();
    for (std::size_t l = net.spec.num_layers(); l-- > 0;) {
        const int in_w = net.spec.layer_sizes[l];
        const int out_w = net.spec.layer_sizes[l + 1];
        layer_offset -= static_cast<std::size_t>(in_w) * out_w + out_w;
        const double* weights = net.params.data() + layer_offset;
        double* w_grad = g.params.data() + layer_offset;
        double* b_grad = w_grad + static_cast<std::size_t>(in_w) * out_w;

        const std::vector<double>& pre = trace.pre[l];
        const std::vector<double>& post = trace.post[l];
        const double* below =
            l == 0 ? input.data() : trace.post[l - 1].data();

        std::vector<double> next_delta(in_w, 0.0);
        for (int o = 0; o < out_w; ++o) {
            const double dz =
                delta[o] * activate_grad(net.spec.activations[l], pre[o], post[o]);
            b_grad[o] += dz;
            const double* row = weights + static_cast<std::size_t>(o) * in_w;
            double* grow = w_grad + static_cast<std::size_t>(o) * in_w;
            for (int i = 0; i < in_w; ++i) {
                grow[i] += dz * below[i];
                next_delta[i] += dz * row[i];
            }
        }
        delta = std::move(next_delta);
    }
    g.input = std::move(delta);
    return {std::move(trace.post.back()), std::move(g)};
}

Gradients gradients(const Net& net, std::span<const double> input,
                    std::span<const double> output_grad) {
    return forward_backward(net, input, output_grad).grads;
}

OptimizerState OptimizerState::sgd(double learning_rate) {
    OptimizerState s;
    s.algo = Algo::sgd;
    s.learning_rate = learning_rate;
    return s;
}

OptimizerState OptimizerState::adam(double learning_rate) {
    OptimizerState s;
    s.algo = Algo::adam;
    s.learning_rate = learning_rate;
    return s;
}

void optimize_step(Net& net, OptimizerState& state,
                   std::span<const double> param_grad) {
    if (param_grad.size() != net.params.size())
        throw InvalidInputError("optimize_step: gradient length mismatch");
    for (double g : param_grad)
        if (!std::isfinite(g))
            throw TrainingDivergenceError("non-finite gradient", state.step);

    state.step += 1;
    if (state.algo == OptimizerState::Algo::sgd) {
        for (std::size_t i = 0; i < net.params.size(); ++i)
            net.params[i] -= state.learning_rate * param_grad[i];
        return;
    }

    if (state.first_moment.empty()) {
        state.first_moment.assign(net.params.size(), 0.0);
        state.second_moment.assign(net.params.size(), 0.0);
    }
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const double g = param_grad[i];
        state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
        state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        const double m_hat = state.first_moment[i] / bias1;
        const double v_hat = state.second_moment[i] / bias2;
        net.params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

double grad_check(const Net& net, std::span<const double> input, double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 1e-2)
        throw InvalidInputError("grad_check: epsilon must be in (0, 1e-2]");

    const std::vector<double> ones(net.spec.output_width(), 1.0);
    Gradients analytic = gradients(net, input, ones);

    auto probe = [&](const Net& n, std::span<const double> x) {
        std::vector<double> out = forward(n, x);
        double s = 0.0;
        for (double v : out) s += v;
        return s;
    };

    double max_rel = 0.0;
    auto update = [&](double a, double fd) {
        double denom = std::max({std::fabs(a), std::fabs(fd), 1.0});
        max_rel = std::max(max_rel, std::fabs(a - fd) / denom);
    };

    Net work = net;
    for (std::size_t i = 0; i < work.params.size(); ++i) {
        const double saved = work.params[i];
        work.params[i] = saved + epsilon;
        const double fp = probe(work, input);
        work.params[i] = saved - epsilon;
        const double fm = probe(work, input);
        work.params[i] = saved;
        update(analytic.params[i], (fp - fm) / (2.0 * epsilon));
    }

    std::vector<double> x(input.begin(), input.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + epsilon;
        const double fp = probe(net, x);
        x[i] = saved - epsilon;
        const double fm = probe(net, x);
        x[i] = saved;
        update(analytic.input[i], (fp - fm) / (2.0 * epsilon));
    }
    return max_rel;
}

nlohmann::json net_to_json(const Net& net) {
    nlohmann::json spec;
    spec["layer_sizes"] = net.spec.layer_sizes;
    std::vector<std::string> acts;
    for (Activation a : net.spec.activations) acts.push_back(activation_name(a));
    spec["activations"] = acts;
    spec["seed"] = net.spec.seed;
    return nlohmann::json{{"spec", spec}, {"params", net.params}};
}

Net net_from_json(const nlohmann::json& j) {
    NetSpec spec;
    spec.layer_sizes = j.at("spec").at("layer_sizes").get<std::vector<int>>();
    for (const auto& name : j.at("spec").at("activations"))
        spec.activations.push_back(activation_from_name(name.get<std::string>()));
    spec.seed = j.at("spec").at("seed").get<std::uint64_t>();
    spec.validate();

    Net net{std::move(spec), j.at("params").get<std::vector<double>>()};
    if (net.params.size() != net.spec.param_count())
        throw InvalidInputError("checkpoint params length mismatch");
    return net;
}

}  // namespace soint
