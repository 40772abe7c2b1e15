#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "soint/net.hpp"
#include "soint/rng.hpp"

namespace soint {

// Soft masks hold the element-wise maximum of k concrete (Gumbel-Softmax)
// vectors, so entries are in (0,1]. Hard masks are exact k-hot vectors.
struct SelectionMask {
    std::vector<double> values;
    bool hard = false;

    int k_selected() const;
    std::vector<int> selected_features() const;  // 1-based indices of the ones
};

// Per-feature selector: a deep net with identity head whose outputs are
// softmax-normalized into importance weights, plus the Gumbel top-k sampler.
struct Interpreter {
    Net w_net;  // n inputs -> n pre-softmax scores
    int k = 1;
    double tau = 0.5;
    int target_index = 1;  // 1-based output index this interpreter explains

    int n() const { return w_net.spec.input_width(); }
    void validate() const;

    nlohmann::json to_json() const;
    static Interpreter from_json(const nlohmann::json& j);
};

// Default selector architecture: two hidden layers of width 4n with tanh.
Interpreter make_interpreter(int n, int k, double tau, int target_index,
                             std::uint64_t init_seed);

// Softmax-normalized importance weights; strictly positive, sum to 1.
std::vector<double> importance_weights(const Interpreter& interp,
                                       std::span<const double> x);

// Everything needed to push gradients back through one relaxed sample.
struct RelaxedMaskTrace {
    std::vector<double> scores;                // net output, pre-softmax
    std::vector<double> weights;               // softmax(scores)
    std::vector<std::vector<double>> noise;    // k x n Gumbel draws
    std::vector<std::vector<double>> concrete; // k x n concrete vectors
    std::vector<int> max_draw;                 // per feature, argmax draw index
    SelectionMask mask;
};

// Concrete top-k relaxation: draw k Gumbel-perturbed softmax vectors
//   c_j = softmax((log w + g_j) / tau)
// and take their element-wise maximum. Differentiable in the selector
// parameters for fixed noise.
RelaxedMaskTrace sample_relaxed_mask_trace(const Interpreter& interp,
                                           std::span<const double> x,
                                           const std::vector<std::vector<double>>& noise);
RelaxedMaskTrace sample_relaxed_mask_trace(const Interpreter& interp,
                                           std::span<const double> x,
                                           rng::Stream& stream,
                                           bool force_zero_noise = false);
SelectionMask sample_relaxed_mask(const Interpreter& interp,
                                  std::span<const double> x, rng::Stream& stream,
                                  bool force_zero_noise = false);

// Gradient of a scalar objective with respect to the selector parameters,
// given its gradient with respect to the mask values.
std::vector<double> relaxed_mask_param_grad(const Interpreter& interp,
                                            std::span<const double> x,
                                            const RelaxedMaskTrace& trace,
                                            std::span<const double> mask_grad);

// Exact top-k of the importance weights; ties broken toward lower index.
SelectionMask hard_mask(const Interpreter& interp, std::span<const double> x);
SelectionMask hard_mask_from_weights(std::span<const double> weights, int k);

std::vector<double> apply_mask(std::span<const double> x, const SelectionMask& mask);

// Test hook shared with the CLI: SOINT_FORCE_ZERO_GUMBEL=1 pins all Gumbel
// noise to zero for deterministic runs.
bool zero_gumbel_forced_by_env();

}  // namespace soint
