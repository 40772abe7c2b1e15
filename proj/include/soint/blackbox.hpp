#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "soint/net.hpp"
#include "soint/synth.hpp"

namespace soint {

// The only surface the interpreter pipeline sees: deterministic inference on
// full and masked inputs. No gradients cross this interface.
struct Predictor {
    virtual ~Predictor() = default;
    virtual int input_dim() const = 0;
    virtual int output_dim() const = 0;
    virtual std::vector<int> predict(std::span<const double> x) const = 0;

    // Prediction on the element-wise product x * mask; mask entries in [0,1].
    std::vector<int> predict_masked(std::span<const double> x,
                                    std::span<const double> mask) const;
};

struct OracleBlackBox {
    SyntheticEnergy energy;
    int n = 5;
};

// Learned energy over concatenated (x, y). The net's raw output is a
// goodness score; energy = -score, so inference is argmin energy over all
// 2^d outputs with the lexicographic tie rule.
struct SpenBlackBox {
    Net energy_net;
    int n = 0;
    int d = 0;

    double energy(std::span<const double> x, std::span<const int> y) const;
};

class BlackBox final : public Predictor {
public:
    explicit BlackBox(OracleBlackBox oracle) : impl_(std::move(oracle)) {}
    explicit BlackBox(SpenBlackBox spen) : impl_(std::move(spen)) {}

    int input_dim() const override;
    int output_dim() const override;
    std::vector<int> predict(std::span<const double> x) const override;

    bool is_oracle() const { return std::holds_alternative<OracleBlackBox>(impl_); }
    const SpenBlackBox& spen() const { return std::get<SpenBlackBox>(impl_); }

    nlohmann::json to_json() const;
    static BlackBox from_json(const nlohmann::json& j);

private:
    std::variant<OracleBlackBox, SpenBlackBox> impl_;
};

// Differentiable stand-in for the black box; same energy convention as the
// SPEN. Gradients with respect to the masked input drive the interpreter,
// gradients with respect to parameters drive fine-tuning.
struct SurrogateEnergy {
    Net energy_net;
    int n = 0;
    int d = 0;

    double energy(std::span<const double> x, std::span<const int> y) const;

    struct ValueAndXGrad {
        double value;
        std::vector<double> x_grad;
    };
    ValueAndXGrad energy_with_x_grad(std::span<const double> x,
                                     std::span<const int> y) const;

    struct ValueAndParamGrad {
        double value;
        std::vector<double> param_grad;
    };
    ValueAndParamGrad energy_with_param_grad(std::span<const double> x,
                                             std::span<const int> y) const;

    std::vector<int> argmin(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static SurrogateEnergy from_json(const nlohmann::json& j);
};

struct SpenTrainConfig {
    std::vector<int> hidden_layers;  // empty: two layers of max(16, 2(n+d))
    Activation hidden_activation = Activation::softplus;
    int epochs = 40;
    int batch_size = 128;
    double learning_rate = 3e-3;
    std::string inference = "enumerate";
    std::string value_function = "neg_hamming";
    double ground_truth_ratio = 0.3;
    double random_ratio = 0.4;
    double adversarial_ratio = 0.3;
    int adversarial_steps = 10;
    double adversarial_step_size = 2.0;
    std::uint64_t seed = 0;

    void validate() const;

    nlohmann::json to_json() const;
    static SpenTrainConfig from_json(const nlohmann::json& j);
};

struct ValueTrainResult {
    std::vector<double> epoch_losses;
};

// Trains a SPEN black box value-network style on the dataset's labels.
SpenBlackBox train_spen(const Dataset& data, const SpenTrainConfig& cfg,
                        ValueTrainResult* result = nullptr);

// Draws num_samples standard-normal inputs from sampler_seed, labels them
// with bb.predict, and trains a surrogate energy by the same procedure.
SurrogateEnergy pretrain_surrogate(const Predictor& bb, long num_samples,
                                   std::uint64_t sampler_seed,
                                   const SpenTrainConfig& cfg,
                                   ValueTrainResult* result = nullptr);

}  // namespace soint
