#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "soint/blackbox.hpp"
#include "soint/interpreter.hpp"

namespace soint {

struct TrainerConfig {
    double margin = 0.5;              // hinge margin m, also the scale of the
                                      // target-disagreement term
    double margin_prime = 0.5;        // fine-tune hinge margin m'
    std::string disagreement_loss = "scaled_indicator";
    double interpreter_step = 0.02;   // selector update rate
    double energy_step = 5e-3;        // surrogate update rate
    OptimizerState::Algo optimizer = OptimizerState::Algo::adam;
    int batch_size = 128;
    int max_iterations = 100;
    double tolerance = 1e-3;          // relative penalty change per iteration
    int patience = 5;                 // consecutive small changes before stop
    double tau = 0.5;
    bool anneal_tau = false;          // linear 1.0 -> 0.1 over the run
    std::vector<int> selector_hidden; // empty: two layers of width 4n, tanh
    bool force_zero_gumbel = false;   // test hook; env var also honored
    std::uint64_t seed = 0;

    void validate() const;

    nlohmann::json to_json() const;
    static TrainerConfig from_json(const nlohmann::json& j);
};

// Hinge penalty for the interpreter: substituting the full-input target
// prediction into the masked prediction must not lower the surrogate energy,
// with an extra margin charged on target disagreement.
//
//   max{0, E(x*mask, [full_t, masked_-t]) - E(x*mask, masked) + L}
//   L = margin * 1[full_t != masked_t]
//
// target is 1-based.
double interpreter_loss(const SurrogateEnergy& esb, std::span<const double> x,
                        const SelectionMask& soft_mask,
                        std::span<const int> full_pred,
                        std::span<const int> masked_pred, int target,
                        const TrainerConfig& cfg);

// Structured hinge for fine-tuning the surrogate: its own argmin y_prime must
// lose to the black box's masked prediction by at least margin_prime.
double energy_finetune_loss(const SurrogateEnergy& esb,
                            std::span<const double> x_masked,
                            std::span<const int> y_prime,
                            std::span<const int> masked_pred,
                            double margin_prime);

// Exhaustive argmin of the surrogate at a masked input (lexicographic ties).
std::vector<int> infer_surrogate_argmin(const SurrogateEnergy& esb,
                                        std::span<const double> x_masked);

struct TrainResult {
    Interpreter interpreter;
    SurrogateEnergy surrogate;
    std::vector<double> penalty_history;      // batch-mean interpreter penalty
    std::vector<double> finetune_history;     // batch-mean surrogate hinge
    std::vector<double> agreement_history;    // target match rate vs full pred
    std::vector<double> iteration_seconds;

    long iterations() const { return static_cast<long>(penalty_history.size()); }
    nlohmann::json run_log() const;
};

// Alternating optimization: one selector gradient step on the relaxed-mask
// penalty, refresh of the masked black-box predictions under the new hard
// mask, then one surrogate step on the fine-tune hinge. Stops when the mean
// penalty stays within tolerance for `patience` consecutive iterations, or
// at max_iterations.
TrainResult train_interpreter(const Predictor& bb, const SurrogateEnergy& esb0,
                              const Dataset& data, int target, int k,
                              const TrainerConfig& cfg);

}  // namespace soint
