#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace soint {

enum class Activation { identity, relu, tanh, sigmoid, softplus };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

// Fixed fully-connected architecture. layer_sizes[0] is the input width;
// activations has one entry per non-input layer.
struct NetSpec {
    std::vector<int> layer_sizes;
    std::vector<Activation> activations;
    std::uint64_t seed = 0;

    int input_width() const { return layer_sizes.front(); }
    int output_width() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return activations.size(); }
    std::size_t param_count() const;
    void validate() const;
};

// Parameter layout is layer-major: for each layer, the weight matrix in
// row-major order (out x in), then the bias vector. Checkpoints depend on
// this layout, so it must not change.
struct Net {
    NetSpec spec;
    std::vector<double> params;

    // Glorot init: weights ~ N(0, 2/(fan_in+fan_out)), biases zero,
    // drawn in parameter-layout order from the stream derived from spec.seed.
    static Net init(NetSpec spec);
};

std::vector<double> forward(const Net& net, std::span<const double> input);

// Per-layer pre-activations and activations from one forward pass.
// trace.post.back() is the network output.
struct ForwardTrace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};
ForwardTrace forward_trace(const Net& net, std::span<const double> input);

struct Gradients {
    std::vector<double> params;
    std::vector<double> input;
};

// Reverse-mode gradients of <output_grad, forward(net, input)> with respect
// to parameters and input.
Gradients gradients(const Net& net, std::span<const double> input,
                    std::span<const double> output_grad);

struct ForwardBackward {
    std::vector<double> output;
    Gradients grads;
};

// One forward pass plus the reverse sweep, sharing the forward trace.
ForwardBackward forward_backward(const Net& net, std::span<const double> input,
                                 std::span<const double> output_grad);

struct OptimizerState {
    enum class Algo { sgd, adam };
    Algo algo = Algo::sgd;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> first_moment;   // adam only
    std::vector<double> second_moment;  // adam only
    long step = 0;

    static OptimizerState sgd(double learning_rate);
    static OptimizerState adam(double learning_rate);
};

// One update step; state and net are owned by the caller, no shared state.
// Throws TrainingDivergenceError on non-finite gradient entries.
void optimize_step(Net& net, OptimizerState& state,
                   std::span<const double> param_grad);

// Max relative error between analytic and central-finite-difference gradients
// over all parameters and input coordinates. The probed scalar is the sum of
// network outputs. Diagnostic only.
double grad_check(const Net& net, std::span<const double> input,
                  double epsilon);

nlohmann::json net_to_json(const Net& net);
Net net_from_json(const nlohmann::json& j);

}  // namespace soint
