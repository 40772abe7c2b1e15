#include "soint/blackbox.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"
#include "soint/rng.hpp"

namespace soint {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> concat(std::span<const double> x, std::span<const double> y) {
    std::vector<double> xy;
    xy.reserve(x.size() + y.size());
    xy.insert(xy.end(), x.begin(), x.end());
    xy.insert(xy.end(), y.begin(), y.end());
    return xy;
}

std::vector<double> to_real(std::span<const int> y) {
    return std::vector<double>(y.begin(), y.end());
}

double net_score(const Net& net, std::span<const double> x,
                 std::span<const double> y) {
    return forward(net, concat(x, y))[0];
}

std::vector<int> enumerate_argmin(const Net& net, std::span<const double> x, int d) {
    return brute_force_argmin(
        [&](std::span<const int> y) {
            return -net_score(net, x, to_real(y));
        },
        d);
}

}  // namespace

std::vector<int> Predictor::predict_masked(std::span<const double> x,
                                           std::span<const double> mask) const {
    if (x.size() != mask.size())
        throw InvalidInputError("predict_masked: mask width mismatch");
    for (double m : mask)
        if (!(m >= 0.0 && m <= 1.0))
            throw InvalidInputError("predict_masked: mask entries must be in [0,1]");
    std::vector<double> masked(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) masked[i] = x[i] * mask[i];
    return predict(masked);
}

double SpenBlackBox::energy(std::span<const double> x,
                            std::span<const int> y) const {
    return -net_score(energy_net, x, to_real(y));
}

int BlackBox::input_dim() const {
    return std::visit([](const auto& b) { return b.n; }, impl_);
}

int BlackBox::output_dim() const {
    if (const auto* oracle = std::get_if<OracleBlackBox>(&impl_))
        return oracle->energy.output_dim();
    return std::get<SpenBlackBox>(impl_).d;
}

std::vector<int> BlackBox::predict(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw InvalidInputError("predict: input width mismatch");
    if (const auto* oracle = std::get_if<OracleBlackBox>(&impl_)) {
        return brute_force_argmin(
            [&](std::span<const int> y) { return oracle->energy.eval(x, y); },
            oracle->energy.output_dim());
    }
    const auto& spen = std::get<SpenBlackBox>(impl_);
    return enumerate_argmin(spen.energy_net, x, spen.d);
}

nlohmann::json BlackBox::to_json() const {
    if (const auto* oracle = std::get_if<OracleBlackBox>(&impl_)) {
        return {{"kind", "oracle"},
                {"energy", energy_kind_name(oracle->energy.kind)},
                {"n", oracle->n}};
    }
    const auto& spen = std::get<SpenBlackBox>(impl_);
    return {{"kind", "spen"},
            {"n", spen.n},
            {"d", spen.d},
            {"net", net_to_json(spen.energy_net)}};
}

BlackBox BlackBox::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "oracle") {
        OracleBlackBox oracle;
        oracle.energy.kind = energy_kind_from_name(j.at("energy").get<std::string>());
        oracle.n = j.at("n").get<int>();
        return BlackBox(oracle);
    }
    if (kind == "spen") {
        SpenBlackBox spen;
        spen.n = j.at("n").get<int>();
        spen.d = j.at("d").get<int>();
        spen.energy_net = net_from_json(j.at("net"));
        if (spen.energy_net.spec.input_width() != spen.n + spen.d)
            throw InvalidInputError("spen checkpoint: net width != n + d");
        return BlackBox(std::move(spen));
    }
    throw InvalidInputError("unknown black box kind: " + kind);
}

double SurrogateEnergy::energy(std::span<const double> x,
                               std::span<const int> y) const {
    if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != d)
        throw InvalidInputError("surrogate energy: width mismatch");
    return -net_score(energy_net, x, to_real(y));
}

SurrogateEnergy::ValueAndXGrad SurrogateEnergy::energy_with_x_grad(
    std::span<const double> x, std::span<const int> y) const {
    const std::vector<double> xy = concat(x, to_real(y));
    const double minus_one[1] = {-1.0};
    ForwardBackward fb = forward_backward(energy_net, xy, minus_one);
    ValueAndXGrad out;
    out.value = -fb.output[0];
    out.x_grad.assign(fb.grads.input.begin(), fb.grads.input.begin() + n);
    return out;
}

SurrogateEnergy::ValueAndParamGrad SurrogateEnergy::energy_with_param_grad(
    std::span<const double> x, std::span<const int> y) const {
    const std::vector<double> xy = concat(x, to_real(y));
    const double minus_one[1] = {-1.0};
    ForwardBackward fb = forward_backward(energy_net, xy, minus_one);
    ValueAndParamGrad out;
    out.value = -fb.output[0];
    out.param_grad = std::move(fb.grads.params);
    return out;
}

std::vector<int> SurrogateEnergy::argmin(std::span<const double> x) const {
    return enumerate_argmin(energy_net, x, d);
}

nlohmann::json SurrogateEnergy::to_json() const {
    return {{"kind", "surrogate"},
            {"n", n},
            {"d", d},
            {"net", net_to_json(energy_net)}};
}

SurrogateEnergy SurrogateEnergy::from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "surrogate")
        throw InvalidInputError("not a surrogate checkpoint");
    SurrogateEnergy esb;
    esb.n = j.at("n").get<int>();
    esb.d = j.at("d").get<int>();
    esb.energy_net = net_from_json(j.at("net"));
    if (esb.energy_net.spec.input_width() != esb.n + esb.d)
        throw InvalidInputError("surrogate checkpoint: net width != n + d");
    return esb;
}

void SpenTrainConfig::validate() const {
    if (epochs < 0) throw InvalidInputError("spen config: epochs must be >= 0");
    if (batch_size < 1) throw InvalidInputError("spen config: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw InvalidInputError("spen config: learning_rate must be positive");
    if (inference != "enumerate")
        throw InvalidInputError("spen config: unsupported inference mode " + inference);
    if (value_function != "neg_hamming")
        throw InvalidInputError("spen config: unsupported value function " + value_function);
    const double ratios[3] = {ground_truth_ratio, random_ratio, adversarial_ratio};
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0 || r > 1.0)
            throw InvalidInputError("spen config: sample ratios must be in [0,1]");
        sum += r;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw InvalidInputError("spen config: sample ratios must sum to 1");
    if (adversarial_steps < 1) throw InvalidInputError("spen config: adversarial_steps must be positive");
}

nlohmann::json SpenTrainConfig::to_json() const {
    return {{"hidden_layers", hidden_layers},
            {"hidden_activation", activation_name(hidden_activation)},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"inference", inference},
            {"value_function", value_function},
            {"ground_truth_ratio", ground_truth_ratio},
            {"random_ratio", random_ratio},
            {"adversarial_ratio", adversarial_ratio},
            {"adversarial_steps", adversarial_steps},
            {"adversarial_step_size", adversarial_step_size},
            {"seed", seed}};
}

SpenTrainConfig SpenTrainConfig::from_json(const nlohmann::json& j) {
    SpenTrainConfig cfg;
    if (j.contains("hidden_layers")) cfg.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
    if (j.contains("hidden_activation"))
        cfg.hidden_activation = activation_from_name(j.at("hidden_activation").get<std::string>());
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("inference")) cfg.inference = j.at("inference").get<std::string>();
    if (j.contains("value_function")) cfg.value_function = j.at("value_function").get<std::string>();
    if (j.contains("ground_truth_ratio")) cfg.ground_truth_ratio = j.at("ground_truth_ratio").get<double>();
    if (j.contains("random_ratio")) cfg.random_ratio = j.at("random_ratio").get<double>();
    if (j.contains("adversarial_ratio")) cfg.adversarial_ratio = j.at("adversarial_ratio").get<double>();
    if (j.contains("adversarial_steps")) cfg.adversarial_steps = j.at("adversarial_steps").get<int>();
    if (j.contains("adversarial_step_size")) cfg.adversarial_step_size = j.at("adversarial_step_size").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

namespace {

Net make_energy_net(int n, int d, const SpenTrainConfig& cfg, std::uint64_t init_seed) {
    std::vector<int> hidden = cfg.hidden_layers;
    if (hidden.empty()) {
        const int width = std::max(16, 2 * (n + d));
        hidden = {width, width};
    }
    NetSpec spec;
    spec.layer_sizes.push_back(n + d);
    for (int h : hidden) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(1);
    spec.activations.assign(hidden.size(), cfg.hidden_activation);
    spec.activations.push_back(Activation::identity);
    spec.seed = init_seed;
    return Net::init(spec);
}

// Value regression: sigmoid of the net score is pushed toward
// 1 - hamming(y_candidate, y_true)/d, i.e. the negative normalized Hamming
// distance shifted into the sigmoid's range. Candidates mix the ground
// truth, uniform draws from [0,1]^d, and gradient-ascent adversaries on the
// relaxed output cube.
ValueTrainResult run_value_training(Net& net, const std::vector<double>& inputs,
                                    const std::vector<int>& labels, long rows,
                                    int n, int d, const SpenTrainConfig& cfg) {
    ValueTrainResult result;
    OptimizerState opt = OptimizerState::adam(cfg.learning_rate);
    std::vector<double> grad_accum(net.params.size());
    std::vector<double> xy(n + d);
    std::vector<double> y_cand(d);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<long> order(rows);
        for (long i = 0; i < rows; ++i) order[i] = i;
        rng::Stream shuffle = rng::stream(
            cfg.seed, {rng::hash_str("spen-shuffle"), static_cast<std::uint64_t>(epoch)});
        for (long i = rows - 1; i > 0; --i) {
            const long j = static_cast<long>(shuffle.next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        long batch_start = 0;
        while (batch_start < rows) {
            const long batch_end = std::min(rows, batch_start + cfg.batch_size);
            const long batch = batch_end - batch_start;
            std::fill(grad_accum.begin(), grad_accum.end(), 0.0);

            for (long b = batch_start; b < batch_end; ++b) {
                const long row = order[b];
                const double* x = inputs.data() + row * n;
                const int* y_true = labels.data() + row * d;
                rng::Stream s = rng::stream(
                    cfg.seed, {rng::hash_str("spen-candidate"),
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(row)});

                const double pick = s.uniform();
                if (pick < cfg.ground_truth_ratio) {
                    for (int i = 0; i < d; ++i) y_cand[i] = y_true[i];
                } else {
                    for (int i = 0; i < d; ++i) y_cand[i] = s.uniform();
                    if (pick >= cfg.ground_truth_ratio + cfg.random_ratio) {
                        // Ascend the predicted value to find candidates the
                        // net currently overrates.
                        for (int step = 0; step < cfg.adversarial_steps; ++step) {
                            std::copy(x, x + n, xy.begin());
                            std::copy(y_cand.begin(), y_cand.end(), xy.begin() + n);
                            const double probe[1] = {1.0};
                            ForwardBackward fb = forward_backward(net, xy, probe);
                            const double sig = sigmoid(fb.output[0]);
                            const double dval = sig * (1.0 - sig);
                            for (int i = 0; i < d; ++i) {
                                y_cand[i] += cfg.adversarial_step_size * dval *
                                             fb.grads.input[n + i];
                                y_cand[i] = std::clamp(y_cand[i], 0.0, 1.0);
                            }
                        }
                    }
                }

                double hamming = 0.0;
                for (int i = 0; i < d; ++i) hamming += std::fabs(y_cand[i] - y_true[i]);
                const double target = 1.0 - hamming / d;

                std::copy(x, x + n, xy.begin());
                std::copy(y_cand.begin(), y_cand.end(), xy.begin() + n);
                const double probe[1] = {1.0};
                ForwardBackward fb = forward_backward(net, xy, probe);
                const double sig = sigmoid(fb.output[0]);
                const double loss = (sig - target) * (sig - target);
                if (!std::isfinite(loss))
                    throw TrainingDivergenceError("spen training loss is not finite", epoch);
                epoch_loss += loss;

                const double dloss_dscore = 2.0 * (sig - target) * sig * (1.0 - sig);
                for (std::size_t i = 0; i < grad_accum.size(); ++i)
                    grad_accum[i] += dloss_dscore * fb.grads.params[i];
            }

            for (double& g : grad_accum) g /= static_cast<double>(batch);
            optimize_step(net, opt, grad_accum);
            batch_start = batch_end;
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(rows));
    }
    return result;
}

}  // namespace

SpenBlackBox train_spen(const Dataset& data, const SpenTrainConfig& cfg,
                        ValueTrainResult* result) {
    cfg.validate();
    if (data.num_samples() == 0)
        throw InvalidInputError("train_spen: empty dataset");

    SpenBlackBox spen;
    spen.n = data.n;
    spen.d = data.d;
    spen.energy_net = make_energy_net(
        data.n, data.d, cfg, rng::derive(cfg.seed, {rng::hash_str("spen-init")}));

    ValueTrainResult r = run_value_training(spen.energy_net, data.inputs,
                                            data.outputs, data.num_samples(),
                                            data.n, data.d, cfg);
    if (result) *result = std::move(r);
    return spen;
}

SurrogateEnergy pretrain_surrogate(const Predictor& bb, long num_samples,
                                   std::uint64_t sampler_seed,
                                   const SpenTrainConfig& cfg,
                                   ValueTrainResult* result) {
    cfg.validate();
    if (num_samples <= 0)
        throw InvalidInputError("pretrain_surrogate: need at least one sample");

    const int n = bb.input_dim();
    const int d = bb.output_dim();
    std::vector<double> inputs(static_cast<std::size_t>(num_samples) * n);
    std::vector<int> labels(static_cast<std::size_t>(num_samples) * d);
    for (long r = 0; r < num_samples; ++r) {
        rng::Stream s = rng::stream(
            sampler_seed, {rng::hash_str("surrogate-input"), static_cast<std::uint64_t>(r)});
        double* x = inputs.data() + r * n;
        for (int i = 0; i < n; ++i) x[i] = s.normal();
        std::vector<int> y = bb.predict({x, static_cast<std::size_t>(n)});
        for (int i = 0; i < d; ++i) labels[r * d + i] = y[i];
    }

    SurrogateEnergy esb;
    esb.n = n;
    esb.d = d;
    esb.energy_net = make_energy_net(
        n, d, cfg, rng::derive(cfg.seed, {rng::hash_str("surrogate-init")}));

    ValueTrainResult r =
        run_value_training(esb.energy_net, inputs, labels, num_samples, n, d, cfg);
    if (result) *result = std::move(r);
    return esb;
}

}  // namespace soint
