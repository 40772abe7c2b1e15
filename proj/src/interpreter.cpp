#include "soint/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"

namespace soint {

namespace {

std::vector<double> softmax(std::span<const double> z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

}  // namespace

int SelectionMask::k_selected() const {
    int count = 0;
    for (double v : values) count += v == 1.0 ? 1 : 0;
    return count;
}

std::vector<int> SelectionMask::selected_features() const {
    std::vector<int> selected;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] == 1.0) selected.push_back(static_cast<int>(i) + 1);
    return selected;
}

void Interpreter::validate() const {
    if (w_net.spec.input_width() != w_net.spec.output_width())
        throw InvalidInputError("interpreter: selector must map n inputs to n scores");
    if (k < 1 || k > n())
        throw InvalidInputError("interpreter: k must be in [1, n]");
    if (!(tau > 0.0)) throw InvalidInputError("interpreter: tau must be positive");
    if (target_index < 1) throw InvalidInputError("interpreter: target index is 1-based");
}

Interpreter make_interpreter(int n, int k, double tau, int target_index,
                             std::uint64_t init_seed) {
    NetSpec spec;
    spec.layer_sizes = {n, 4 * n, 4 * n, n};
    spec.activations = {Activation::tanh, Activation::tanh, Activation::identity};
    spec.seed = init_seed;

    Interpreter interp{Net::init(spec), k, tau, target_index};
    interp.validate();
    return interp;
}

std::vector<double> importance_weights(const Interpreter& interp,
                                       std::span<const double> x) {
    return softmax(forward(interp.w_net, x));
}

RelaxedMaskTrace sample_relaxed_mask_trace(
    const Interpreter& interp, std::span<const double> x,
    const std::vector<std::vector<double>>& noise) {
    if (static_cast<int>(noise.size()) != interp.k)
        throw InvalidInputError("relaxed mask: need one noise vector per draw");

    RelaxedMaskTrace trace;
    trace.scores = forward(interp.w_net, x);
    trace.weights = softmax(trace.scores);
    trace.noise = noise;

    const int n = interp.n();
    trace.concrete.resize(interp.k);
    trace.mask.values.assign(n, 0.0);
    trace.mask.hard = false;
    trace.max_draw.assign(n, 0);

    std::vector<double> perturbed(n);
    for (int j = 0; j < interp.k; ++j) {
        if (static_cast<int>(noise[j].size()) != n)
            throw InvalidInputError("relaxed mask: noise width mismatch");
        for (int i = 0; i < n; ++i)
            perturbed[i] = (std::log(trace.weights[i]) + noise[j][i]) / interp.tau;
        trace.concrete[j] = softmax(perturbed);
        for (int i = 0; i < n; ++i) {
            if (j == 0 || trace.concrete[j][i] > trace.mask.values[i]) {
                trace.mask.values[i] = trace.concrete[j][i];
                trace.max_draw[i] = j;
            }
        }
    }
    return trace;
}

RelaxedMaskTrace sample_relaxed_mask_trace(const Interpreter& interp,
                                           std::span<const double> x,
                                           rng::Stream& stream,
                                           bool force_zero_noise) {
    std::vector<std::vector<double>> noise(interp.k,
                                           std::vector<double>(interp.n(), 0.0));
    if (!force_zero_noise) {
        for (auto& draw : noise)
            for (double& g : draw) g = stream.gumbel();
    }
    return sample_relaxed_mask_trace(interp, x, noise);
}

SelectionMask sample_relaxed_mask(const Interpreter& interp,
                                  std::span<const double> x, rng::Stream& stream,
                                  bool force_zero_noise) {
    return sample_relaxed_mask_trace(interp, x, stream, force_zero_noise).mask;
}

std::vector<double> relaxed_mask_param_grad(const Interpreter& interp,
                                            std::span<const double> x,
                                            const RelaxedMaskTrace& trace,
                                            std::span<const double> mask_grad) {
    const int n = interp.n();
    if (static_cast<int>(mask_grad.size()) != n)
        throw InvalidInputError("mask gradient width mismatch");

    // mask_i = concrete[max_draw[i]][i]; route each feature's gradient to the
    // draw that won the max, then back through that draw's softmax.
    std::vector<double> dlogw(n, 0.0);
    std::vector<double> dc(n);
    for (int j = 0; j < interp.k; ++j) {
        std::fill(dc.begin(), dc.end(), 0.0);
        bool any = false;
        for (int i = 0; i < n; ++i) {
            if (trace.max_draw[i] == j && mask_grad[i] != 0.0) {
                dc[i] = mask_grad[i];
                any = true;
            }
        }
        if (!any) continue;
        const std::vector<double>& c = trace.concrete[j];
        double inner = 0.0;
        for (int i = 0; i < n; ++i) inner += dc[i] * c[i];
        for (int i = 0; i < n; ++i) {
            const double dz = c[i] * (dc[i] - inner);  // softmax backward
            dlogw[i] += dz / interp.tau;
        }
    }

    // log w = log softmax(scores): d/dscores_a = dlogw_a - w_a * sum(dlogw).
    const double total = std::accumulate(dlogw.begin(), dlogw.end(), 0.0);
    std::vector<double> dscores(n);
    for (int i = 0; i < n; ++i) dscores[i] = dlogw[i] - trace.weights[i] * total;

    return gradients(interp.w_net, x, dscores).params;
}

SelectionMask hard_mask_from_weights(std::span<const double> weights, int k) {
    const int n = static_cast<int>(weights.size());
    if (k < 1 || k > n) throw InvalidInputError("hard mask: k out of range");

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return weights[a] > weights[b];  // stable: ties keep the lower index first
    });

    SelectionMask mask;
    mask.values.assign(n, 0.0);
    mask.hard = true;
    for (int j = 0; j < k; ++j) mask.values[idx[j]] = 1.0;
    return mask;
}

SelectionMask hard_mask(const Interpreter& interp, std::span<const double> x) {
    return hard_mask_from_weights(importance_weights(interp, x), interp.k);
}

std::vector<double> apply_mask(std::span<const double> x, const SelectionMask& mask) {
    if (x.size() != mask.values.size())
        throw InvalidInputError("apply_mask: width mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask.values[i];
    return out;
}

bool zero_gumbel_forced_by_env() {
    const char* v = std::getenv("SOINT_FORCE_ZERO_GUMBEL");
    return v != nullptr && v[0] == '1';
}

nlohmann::json Interpreter::to_json() const {
    return {{"kind", "interpreter"},
            {"net", net_to_json(w_net)},
            {"k", k},
            {"tau", tau},
            {"target_index", target_index},
            {"n", n()}};
}

Interpreter Interpreter::from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "interpreter")
        throw InvalidInputError("not an interpreter checkpoint");
    Interpreter interp{net_from_json(j.at("net")), j.at("k").get<int>(),
                       j.at("tau").get<double>(), j.at("target_index").get<int>()};
    if (j.at("n").get<int>() != interp.n())
        throw InvalidInputError("interpreter checkpoint: n mismatch");
    interp.validate();
    return interp;
}

}  // namespace soint
