#include "soint/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"
#include "soint/rng.hpp"

namespace soint {

void TrainerConfig::validate() const {
    if (margin < 0.0 || margin_prime < 0.0)
        throw InvalidInputError("trainer config: margins must be non-negative");
    if (disagreement_loss != "scaled_indicator")
        throw InvalidInputError("trainer config: unsupported disagreement loss " +
                                disagreement_loss);
    if (!(interpreter_step > 0.0) || !(energy_step > 0.0))
        throw InvalidInputError("trainer config: step sizes must be positive");
    if (batch_size < 1) throw InvalidInputError("trainer config: batch_size must be positive");
    if (max_iterations < 1)
        throw InvalidInputError("trainer config: max_iterations must be at least 1");
    if (!(tolerance >= 0.0)) throw InvalidInputError("trainer config: tolerance must be >= 0");
    if (patience < 1) throw InvalidInputError("trainer config: patience must be positive");
    if (!(tau > 0.0)) throw InvalidInputError("trainer config: tau must be positive");
}

nlohmann::json TrainerConfig::to_json() const {
    return {{"margin", margin},
            {"margin_prime", margin_prime},
            {"disagreement_loss", disagreement_loss},
            {"interpreter_step", interpreter_step},
            {"energy_step", energy_step},
            {"optimizer", optimizer == OptimizerState::Algo::adam ? "adam" : "sgd"},
            {"batch_size", batch_size},
            {"max_iterations", max_iterations},
            {"tolerance", tolerance},
            {"patience", patience},
            {"tau", tau},
            {"anneal_tau", anneal_tau},
            {"selector_hidden", selector_hidden},
            {"force_zero_gumbel", force_zero_gumbel},
            {"seed", seed}};
}

TrainerConfig TrainerConfig::from_json(const nlohmann::json& j) {
    TrainerConfig cfg;
    if (j.contains("margin")) cfg.margin = j.at("margin").get<double>();
    if (j.contains("margin_prime")) cfg.margin_prime = j.at("margin_prime").get<double>();
    if (j.contains("disagreement_loss"))
        cfg.disagreement_loss = j.at("disagreement_loss").get<std::string>();
    if (j.contains("interpreter_step"))
        cfg.interpreter_step = j.at("interpreter_step").get<double>();
    if (j.contains("energy_step")) cfg.energy_step = j.at("energy_step").get<double>();
    if (j.contains("optimizer")) {
        const std::string name = j.at("optimizer").get<std::string>();
        if (name == "adam") cfg.optimizer = OptimizerState::Algo::adam;
        else if (name == "sgd") cfg.optimizer = OptimizerState::Algo::sgd;
        else throw InvalidInputError("trainer config: unknown optimizer " + name);
    }
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("max_iterations")) cfg.max_iterations = j.at("max_iterations").get<int>();
    if (j.contains("tolerance")) cfg.tolerance = j.at("tolerance").get<double>();
    if (j.contains("patience")) cfg.patience = j.at("patience").get<int>();
    if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
    if (j.contains("anneal_tau")) cfg.anneal_tau = j.at("anneal_tau").get<bool>();
    if (j.contains("selector_hidden"))
        cfg.selector_hidden = j.at("selector_hidden").get<std::vector<int>>();
    if (j.contains("force_zero_gumbel"))
        cfg.force_zero_gumbel = j.at("force_zero_gumbel").get<bool>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

namespace {

std::vector<int> substitute_target(std::span<const int> masked_pred,
                                   std::span<const int> full_pred, int target) {
    std::vector<int> y(masked_pred.begin(), masked_pred.end());
    y[target - 1] = full_pred[target - 1];
    return y;
}

void check_loss_inputs(const SurrogateEnergy& esb, std::size_t x_size,
                       std::span<const int> a, std::span<const int> b, int target) {
    if (static_cast<int>(x_size) != esb.n)
        throw InvalidInputError("loss: input width mismatch");
    if (static_cast<int>(a.size()) != esb.d || static_cast<int>(b.size()) != esb.d)
        throw InvalidInputError("loss: output width mismatch");
    if (target < 1 || target > esb.d)
        throw InvalidInputError("loss: target index out of range");
}

}  // namespace

double interpreter_loss(const SurrogateEnergy& esb, std::span<const double> x,
                        const SelectionMask& soft_mask,
                        std::span<const int> full_pred,
                        std::span<const int> masked_pred, int target,
                        const TrainerConfig& cfg) {
    check_loss_inputs(esb, x.size(), full_pred, masked_pred, target);
    const std::vector<double> masked_x = apply_mask(x, soft_mask);
    const std::vector<int> substituted = substitute_target(masked_pred, full_pred, target);

    const double e_substituted = esb.energy(masked_x, substituted);
    const double e_masked = esb.energy(masked_x, masked_pred);
    const double disagree =
        full_pred[target - 1] != masked_pred[target - 1] ? cfg.margin : 0.0;
    return std::max(0.0, e_substituted - e_masked + disagree);
}

double energy_finetune_loss(const SurrogateEnergy& esb,
                            std::span<const double> x_masked,
                            std::span<const int> y_prime,
                            std::span<const int> masked_pred,
                            double margin_prime) {
    check_loss_inputs(esb, x_masked.size(), y_prime, masked_pred, 1);
    const double e_prime = esb.energy(x_masked, y_prime);
    const double e_masked = esb.energy(x_masked, masked_pred);
    return std::max(0.0, e_prime - e_masked + margin_prime);
}

std::vector<int> infer_surrogate_argmin(const SurrogateEnergy& esb,
                                        std::span<const double> x_masked) {
    if (static_cast<int>(x_masked.size()) != esb.n)
        throw InvalidInputError("surrogate argmin: input width mismatch");
    return esb.argmin(x_masked);
}

nlohmann::json TrainResult::run_log() const {
    return {{"iterations", iterations()},
            {"penalty", penalty_history},
            {"finetune_loss", finetune_history},
            {"target_agreement", agreement_history},
            {"seconds_per_iteration", iteration_seconds}};
}

TrainResult train_interpreter(const Predictor& bb, const SurrogateEnergy& esb0,
                              const Dataset& data, int target, int k,
                              const TrainerConfig& cfg) {
    cfg.validate();
    const long rows = data.num_samples();
    const int n = data.n;
    const int d = bb.output_dim();
    if (rows == 0) throw InvalidInputError("train_interpreter: empty dataset");
    if (data.n != bb.input_dim())
        throw InvalidInputError("train_interpreter: dataset width != black box input");
    if (esb0.n != n || esb0.d != d)
        throw InvalidInputError("train_interpreter: surrogate shape mismatch");
    if (target < 1 || target > d)
        throw InvalidInputError("train_interpreter: target index out of range");
    if (k < 1 || k > n) throw InvalidInputError("train_interpreter: k out of range");

    const bool zero_noise = cfg.force_zero_gumbel || zero_gumbel_forced_by_env();

    TrainResult result;
    result.surrogate = esb0;
    {
        Interpreter interp =
            make_interpreter(n, k, cfg.tau, target,
                             rng::derive(cfg.seed, {rng::hash_str("selector-init")}));
        if (!cfg.selector_hidden.empty()) {
            NetSpec spec;
            spec.layer_sizes.push_back(n);
            for (int h : cfg.selector_hidden) spec.layer_sizes.push_back(h);
            spec.layer_sizes.push_back(n);
            spec.activations.assign(cfg.selector_hidden.size(), Activation::tanh);
            spec.activations.push_back(Activation::identity);
            spec.seed = rng::derive(cfg.seed, {rng::hash_str("selector-init")});
            interp.w_net = Net::init(spec);
        }
        result.interpreter = std::move(interp);
    }
    Interpreter& interp = result.interpreter;
    SurrogateEnergy& esb = result.surrogate;

    // Full-input predictions once up front; masked predictions refreshed per
    // batch as the mask moves.
    std::vector<std::vector<int>> full_pred(rows);
    std::vector<std::vector<int>> masked_pred(rows);
    for (long r = 0; r < rows; ++r) {
        full_pred[r] = bb.predict(data.input_row(r));
        masked_pred[r] =
            bb.predict_masked(data.input_row(r), hard_mask(interp, data.input_row(r)).values);
    }

    OptimizerState selector_opt =
        cfg.optimizer == OptimizerState::Algo::adam
            ? OptimizerState::adam(cfg.interpreter_step)
            : OptimizerState::sgd(cfg.interpreter_step);
    OptimizerState energy_opt =
        cfg.optimizer == OptimizerState::Algo::adam
            ? OptimizerState::adam(cfg.energy_step)
            : OptimizerState::sgd(cfg.energy_step);

    std::vector<long> order(rows);
    for (long i = 0; i < rows; ++i) order[i] = i;
    std::vector<double> selector_grad(interp.w_net.params.size());
    std::vector<double> energy_grad(esb.energy_net.params.size());
    std::vector<double> mask_grad(n);

    int calm_iterations = 0;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const auto started = std::chrono::steady_clock::now();

        if (cfg.anneal_tau)
            interp.tau = 1.0 + (0.1 - 1.0) * (it - 1) /
                                   std::max(1, cfg.max_iterations - 1);

        rng::Stream shuffle = rng::stream(
            cfg.seed, {rng::hash_str("batch"), static_cast<std::uint64_t>(it)});
        for (long i = rows - 1; i > 0; --i) {
            const long j = static_cast<long>(shuffle.next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }
        const long batch = std::min<long>(cfg.batch_size, rows);

        // (1) selector step on the relaxed-mask penalty
        std::fill(selector_grad.begin(), selector_grad.end(), 0.0);
        double penalty_sum = 0.0;
        for (long b = 0; b < batch; ++b) {
            const long row = order[b];
            const auto x = data.input_row(row);
            rng::Stream noise = rng::stream(cfg.seed,
                                            {rng::hash_str("gumbel"),
                                             static_cast<std::uint64_t>(it),
                                             static_cast<std::uint64_t>(row)});
            RelaxedMaskTrace trace =
                sample_relaxed_mask_trace(interp, x, noise, zero_noise);

            const std::vector<int>& y_masked = masked_pred[row];
            if (full_pred[row][target - 1] == y_masked[target - 1]) continue;

            const std::vector<int> substituted =
                substitute_target(y_masked, full_pred[row], target);
            const std::vector<double> masked_x = apply_mask(x, trace.mask);
            auto sub_grad = esb.energy_with_x_grad(masked_x, substituted);
            auto masked_grad_e = esb.energy_with_x_grad(masked_x, y_masked);
            const double pre = sub_grad.value - masked_grad_e.value + cfg.margin;
            if (pre < 0.0) continue;
            penalty_sum += pre;

            for (int i = 0; i < n; ++i)
                mask_grad[i] = (sub_grad.x_grad[i] - masked_grad_e.x_grad[i]) * x[i];
            std::vector<double> pgrad =
                relaxed_mask_param_grad(interp, x, trace, mask_grad);
            for (std::size_t i = 0; i < selector_grad.size(); ++i)
                selector_grad[i] += pgrad[i];
        }
        for (double& g : selector_grad) g /= static_cast<double>(batch);
        optimize_step(interp.w_net, selector_opt, selector_grad);

        const double penalty = penalty_sum / static_cast<double>(batch);
        if (!std::isfinite(penalty))
            throw TrainingDivergenceError("interpreter penalty is not finite", it);

        // (2) refresh masked predictions under the updated hard mask
        double agree = 0.0;
        for (long b = 0; b < batch; ++b) {
            const long row = order[b];
            const auto x = data.input_row(row);
            masked_pred[row] = bb.predict_masked(x, hard_mask(interp, x).values);
            agree += masked_pred[row][target - 1] == full_pred[row][target - 1] ? 1.0 : 0.0;
        }

        // (3)+(4) surrogate fine-tune step at the hard-masked inputs
        std::fill(energy_grad.begin(), energy_grad.end(), 0.0);
        double finetune_sum = 0.0;
        for (long b = 0; b < batch; ++b) {
            const long row = order[b];
            const auto x = data.input_row(row);
            const std::vector<double> masked_x =
                apply_mask(x, hard_mask(interp, x));
            const std::vector<int> y_prime = esb.argmin(masked_x);
            auto prime_grad = esb.energy_with_param_grad(masked_x, y_prime);
            auto masked_grad_e = esb.energy_with_param_grad(masked_x, masked_pred[row]);
            const double pre = prime_grad.value - masked_grad_e.value + cfg.margin_prime;
            if (pre < 0.0) continue;
            finetune_sum += pre;
            for (std::size_t i = 0; i < energy_grad.size(); ++i)
                energy_grad[i] += prime_grad.param_grad[i] - masked_grad_e.param_grad[i];
        }
        for (double& g : energy_grad) g /= static_cast<double>(batch);
        optimize_step(esb.energy_net, energy_opt, energy_grad);

        result.penalty_history.push_back(penalty);
        result.finetune_history.push_back(finetune_sum / static_cast<double>(batch));
        result.agreement_history.push_back(agree / static_cast<double>(batch));
        result.iteration_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count());

        // Stop once the penalty has been flat for `patience` iterations.
        if (result.penalty_history.size() >= 2) {
            const auto& h = result.penalty_history;
            const double prev = h[h.size() - 2];
            const double rel = std::fabs(h.back() - prev) /
                               std::max(std::fabs(prev), 1e-12);
            calm_iterations = rel < cfg.tolerance ? calm_iterations + 1 : 0;
            if (calm_iterations >= cfg.patience) break;
        }
    }
    return result;
}

}  // namespace soint
