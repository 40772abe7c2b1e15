#include "soint/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"
#include "soint/rng.hpp"

namespace soint {

double selection_accuracy(const std::vector<SelectionMask>& masks,
                          const std::set<int>& ground_truth) {
    if (masks.empty()) throw InvalidInputError("selection_accuracy: no masks");
    long hits = 0;
    for (const SelectionMask& mask : masks) {
        if (!mask.hard)
            throw ConfigError("selection_accuracy: masks must be hard");
        const std::vector<int> selected = mask.selected_features();
        if (selected.size() != ground_truth.size())
            throw ConfigError("selection_accuracy: k must equal |ground truth|");
        hits += std::equal(selected.begin(), selected.end(), ground_truth.begin(),
                           ground_truth.end())
                    ? 1
                    : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(masks.size());
}

double selection_precision(const std::vector<SelectionMask>& masks,
                           const std::set<int>& ground_truth) {
    if (masks.empty()) throw InvalidInputError("selection_precision: no masks");
    double total = 0.0;
    for (const SelectionMask& mask : masks) {
        if (!mask.hard) throw ConfigError("selection_precision: masks must be hard");
        const std::vector<int> selected = mask.selected_features();
        long overlap = 0;
        for (int f : selected) overlap += ground_truth.count(f);
        total += static_cast<double>(overlap) / static_cast<double>(selected.size());
    }
    return total / static_cast<double>(masks.size());
}

namespace {

// 1-based rank of every feature under descending weight, ties to lower index.
std::vector<int> ranks_of(const std::vector<double>& weights) {
    const int n = static_cast<int>(weights.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return weights[a] > weights[b]; });
    std::vector<int> rank(n);
    for (int pos = 0; pos < n; ++pos) rank[idx[pos]] = pos + 1;
    return rank;
}

double median_of(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double median_rank(const std::vector<std::vector<double>>& weight_vectors,
                   const std::set<int>& ground_truth) {
    if (weight_vectors.empty() || ground_truth.empty())
        throw InvalidInputError("median_rank: empty input");
    std::vector<double> collected;
    collected.reserve(weight_vectors.size() * ground_truth.size());
    for (const std::vector<double>& weights : weight_vectors) {
        const std::vector<int> rank = ranks_of(weights);
        for (int f : ground_truth) {
            if (f < 1 || f > static_cast<int>(weights.size()))
                throw InvalidInputError("median_rank: ground-truth feature out of range");
            collected.push_back(rank[f - 1]);
        }
    }
    return median_of(collected);
}

double fidelity_f1_masks(const Predictor& bb, const Dataset& data,
                         const std::vector<SelectionMask>& masks,
                         bool compare_to_labels) {
    if (data.num_samples() == 0) throw InvalidInputError("fidelity_f1: empty dataset");
    if (static_cast<long>(masks.size()) != data.num_samples())
        throw InvalidInputError("fidelity_f1: one mask per sample required");

    long tp = 0, fp = 0, fn = 0;
    for (long r = 0; r < data.num_samples(); ++r) {
        const auto x = data.input_row(r);
        std::vector<int> reference;
        if (compare_to_labels)
            reference.assign(data.output_row(r).begin(), data.output_row(r).end());
        else
            reference = bb.predict(x);
        const std::vector<int> masked = bb.predict_masked(x, masks[r].values);
        for (int i = 0; i < static_cast<int>(reference.size()); ++i) {
            tp += masked[i] == 1 && reference[i] == 1;
            fp += masked[i] == 1 && reference[i] == 0;
            fn += masked[i] == 0 && reference[i] == 1;
        }
    }
    if (tp + fp + fn == 0) return 1.0;  // no positives anywhere: full agreement
    return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

double fidelity_f1(const Predictor& bb, const Interpreter& interp,
                   const Dataset& data, int k, bool compare_to_labels) {
    std::vector<SelectionMask> masks;
    masks.reserve(data.num_samples());
    for (long r = 0; r < data.num_samples(); ++r) {
        const std::vector<double> weights =
            importance_weights(interp, data.input_row(r));
        masks.push_back(hard_mask_from_weights(weights, k));
    }
    return fidelity_f1_masks(bb, data, masks, compare_to_labels);
}

namespace {

// Restricts the pipeline to the target output: the wrapped box predicts the
// single bit y_target.
class TargetProjection final : public Predictor {
public:
    TargetProjection(const Predictor& base, int target)
        : base_(base), target_(target) {
        if (target < 1 || target > base.output_dim())
            throw InvalidInputError("target projection: index out of range");
    }
    int input_dim() const override { return base_.input_dim(); }
    int output_dim() const override { return 1; }
    std::vector<int> predict(std::span<const double> x) const override {
        return {base_.predict(x)[target_ - 1]};
    }

private:
    const Predictor& base_;
    int target_;
};

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
    return {{"surrogate", surrogate.to_json()},
            {"pretrain_samples", pretrain_samples},
            {"trainer", trainer.to_json()}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    if (j.contains("surrogate")) cfg.surrogate = SpenTrainConfig::from_json(j.at("surrogate"));
    if (j.contains("pretrain_samples"))
        cfg.pretrain_samples = j.at("pretrain_samples").get<long>();
    if (j.contains("trainer")) cfg.trainer = TrainerConfig::from_json(j.at("trainer"));
    return cfg;
}

TrainResult marginal_baseline(const Predictor& bb, const Dataset& data,
                              int target, int k, const PipelineConfig& cfg,
                              const SurrogateEnergy* pretrained) {
    if (pretrained != nullptr && pretrained->d != 1)
        throw InvalidInputError("marginal baseline: surrogate must have output width 1");

    TargetProjection projected(bb, target);
    SurrogateEnergy esb =
        pretrained != nullptr
            ? *pretrained
            : pretrain_surrogate(projected, cfg.pretrain_samples,
                                 rng::derive(cfg.surrogate.seed,
                                             {rng::hash_str("marginal-sampler")}),
                                 cfg.surrogate);
    TrainResult result = train_interpreter(projected, esb, data, 1, k, cfg.trainer);
    result.interpreter.target_index = target;  // report against the original box
    return result;
}

void BenchmarkConfig::validate() const {
    if (energies.empty() || input_dims.empty() || methods.empty())
        throw ConfigError("benchmark: empty grid axis");
    for (int n : input_dims)
        if (n < 4) throw ConfigError("benchmark: input dims must be >= 4");
    for (const std::string& m : methods)
        if (m != "soint" && m != "marginal" && m != "random")
            throw ConfigError("benchmark: unknown method " + m);
    for (const std::string& m : metrics)
        if (m != "accuracy" && m != "precision" && m != "median_rank" &&
            m != "fidelity_f1")
            throw ConfigError("benchmark: unknown metric " + m);
    if (repetitions < 1) throw ConfigError("benchmark: repetitions must be >= 1");
    if (k < 1) throw ConfigError("benchmark: k must be positive");
    if (train_samples < 1 || eval_samples < 1)
        throw ConfigError("benchmark: sample counts must be positive");
    if (blackbox != "oracle" && blackbox != "spen")
        throw ConfigError("benchmark: unknown black box kind " + blackbox);
    for (EnergyKind e : energies) {
        const int d = SyntheticEnergy{e}.output_dim();
        for (int t : targets_for(e))
            if (t < 1 || t > d)
                throw ConfigError("benchmark: target out of range for " +
                                  energy_kind_name(e));
    }
}

std::vector<int> BenchmarkConfig::targets_for(EnergyKind kind) const {
    return kind == EnergyKind::e1 ? targets_e1 : targets_e2;
}

nlohmann::json BenchmarkConfig::to_json() const {
    std::vector<std::string> energy_names;
    for (EnergyKind e : energies) energy_names.push_back(energy_kind_name(e));
    // jobs is intentionally omitted: reports must not depend on it.
    return {{"energies", energy_names},
            {"input_dims", input_dims},
            {"targets_e1", targets_e1},
            {"targets_e2", targets_e2},
            {"methods", methods},
            {"metrics", metrics},
            {"repetitions", repetitions},
            {"k", k},
            {"train_samples", train_samples},
            {"eval_samples", eval_samples},
            {"blackbox", blackbox},
            {"spen_train_samples", spen_train_samples},
            {"spen", spen.to_json()},
            {"pipeline", pipeline.to_json()},
            {"master_seed", master_seed}};
}

BenchmarkConfig BenchmarkConfig::from_json(const nlohmann::json& j) {
    BenchmarkConfig cfg;
    if (j.contains("energies")) {
        cfg.energies.clear();
        for (const auto& name : j.at("energies"))
            cfg.energies.push_back(energy_kind_from_name(name.get<std::string>()));
    }
    if (j.contains("input_dims")) cfg.input_dims = j.at("input_dims").get<std::vector<int>>();
    if (j.contains("targets_e1")) cfg.targets_e1 = j.at("targets_e1").get<std::vector<int>>();
    if (j.contains("targets_e2")) cfg.targets_e2 = j.at("targets_e2").get<std::vector<int>>();
    if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("metrics")) cfg.metrics = j.at("metrics").get<std::vector<std::string>>();
    if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<int>();
    if (j.contains("k")) cfg.k = j.at("k").get<int>();
    if (j.contains("train_samples")) cfg.train_samples = j.at("train_samples").get<long>();
    if (j.contains("eval_samples")) cfg.eval_samples = j.at("eval_samples").get<long>();
    if (j.contains("blackbox")) cfg.blackbox = j.at("blackbox").get<std::string>();
    if (j.contains("spen_train_samples"))
        cfg.spen_train_samples = j.at("spen_train_samples").get<long>();
    if (j.contains("spen")) cfg.spen = SpenTrainConfig::from_json(j.at("spen"));
    if (j.contains("pipeline")) cfg.pipeline = PipelineConfig::from_json(j.at("pipeline"));
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    cfg.validate();
    return cfg;
}

MetricAggregate MetricAggregate::of(std::vector<double> values) {
    MetricAggregate agg;
    agg.values = std::move(values);
    for (double v : agg.values) agg.mean += v;
    agg.mean /= static_cast<double>(agg.values.size());
    for (double v : agg.values) agg.stddev += (v - agg.mean) * (v - agg.mean);
    agg.stddev = std::sqrt(agg.stddev / static_cast<double>(agg.values.size()));
    return agg;
}

namespace {

struct SharedArtifacts {
    Dataset train_data;
    Dataset eval_data;
    std::unique_ptr<BlackBox> blackbox;
    SurrogateEnergy surrogate;  // full-output surrogate, used by soint
};

Dataset dataset_slice(const Dataset& data, long start, long count) {
    Dataset out;
    out.spec = data.spec;
    out.spec.num_samples = count;
    out.n = data.n;
    out.d = data.d;
    out.ground_truth_features = data.ground_truth_features;
    out.inputs.assign(data.inputs.begin() + start * data.n,
                      data.inputs.begin() + (start + count) * data.n);
    out.outputs.assign(data.outputs.begin() + start * data.d,
                       data.outputs.begin() + (start + count) * data.d);
    return out;
}

std::uint64_t cell_word(EnergyKind energy, int n, int rep) {
    return rng::derive(0, {rng::hash_str(energy_kind_name(energy)),
                           static_cast<std::uint64_t>(n),
                           static_cast<std::uint64_t>(rep)});
}

SharedArtifacts build_shared(const BenchmarkConfig& cfg, EnergyKind energy,
                             int n, int rep) {
    const std::uint64_t key = cell_word(energy, n, rep);

    DatasetSpec dspec;
    dspec.energy = SyntheticEnergy{energy};
    dspec.input_dim = n;
    dspec.num_samples = cfg.train_samples + cfg.eval_samples;
    dspec.seed = rng::derive(cfg.master_seed, {rng::hash_str("data"), key});
    const Dataset full = generate_dataset(dspec);

    SharedArtifacts shared;
    shared.train_data = dataset_slice(full, 0, cfg.train_samples);
    shared.eval_data = dataset_slice(full, cfg.train_samples, cfg.eval_samples);

    if (cfg.blackbox == "oracle") {
        shared.blackbox =
            std::make_unique<BlackBox>(OracleBlackBox{SyntheticEnergy{energy}, n});
    } else {
        SpenTrainConfig spen_cfg = cfg.spen;
        spen_cfg.seed = rng::derive(cfg.master_seed, {rng::hash_str("spen"), key});
        Dataset spen_train = shared.train_data;
        if (cfg.spen_train_samples != cfg.train_samples) {
            DatasetSpec sspec = dspec;
            sspec.num_samples = cfg.spen_train_samples;
            sspec.seed = rng::derive(cfg.master_seed, {rng::hash_str("spen-data"), key});
            spen_train = generate_dataset(sspec);
        }
        shared.blackbox = std::make_unique<BlackBox>(train_spen(spen_train, spen_cfg));
    }

    SpenTrainConfig surr_cfg = cfg.pipeline.surrogate;
    surr_cfg.seed = rng::derive(cfg.master_seed, {rng::hash_str("surrogate"), key});
    shared.surrogate = pretrain_surrogate(
        *shared.blackbox, cfg.pipeline.pretrain_samples,
        rng::derive(cfg.master_seed, {rng::hash_str("surrogate-sampler"), key}),
        surr_cfg);
    return shared;
}

struct UnitResult {
    std::map<std::string, double> metric_values;
    long iterations = 0;
};

UnitResult run_unit(const BenchmarkConfig& cfg, const SharedArtifacts& shared,
                    EnergyKind energy, int n, int target,
                    const std::string& method, int rep) {
    const std::uint64_t key =
        rng::derive(cell_word(energy, n, rep),
                    {static_cast<std::uint64_t>(target), rng::hash_str(method)});

    const Dataset& eval_data = shared.eval_data;
    const long eval_rows = eval_data.num_samples();
    std::vector<std::vector<double>> weights(eval_rows);
    long iterations = 0;

    if (method == "random") {
        // Untrained reference: fresh uniform weights per sample.
        for (long r = 0; r < eval_rows; ++r) {
            rng::Stream s = rng::stream(
                cfg.master_seed,
                {rng::hash_str("random-baseline"), key, static_cast<std::uint64_t>(r)});
            weights[r].resize(n);
            for (double& w : weights[r]) w = s.uniform();
        }
    } else {
        PipelineConfig pipeline = cfg.pipeline;
        pipeline.trainer.seed =
            rng::derive(cfg.master_seed, {rng::hash_str("trainer"), key});
        TrainResult trained;
        if (method == "soint") {
            trained = train_interpreter(*shared.blackbox, shared.surrogate,
                                        shared.train_data, target, cfg.k,
                                        pipeline.trainer);
        } else {
            pipeline.surrogate.seed =
                rng::derive(cfg.master_seed, {rng::hash_str("marginal-surrogate"), key});
            trained = marginal_baseline(*shared.blackbox, shared.train_data, target,
                                        cfg.k, pipeline);
        }
        iterations = trained.iterations();
        for (long r = 0; r < eval_rows; ++r)
            weights[r] = importance_weights(trained.interpreter, eval_data.input_row(r));
    }

    std::vector<SelectionMask> masks;
    masks.reserve(eval_rows);
    for (long r = 0; r < eval_rows; ++r)
        masks.push_back(hard_mask_from_weights(weights[r], cfg.k));

    const std::set<int> gt(eval_data.ground_truth_features.begin(),
                           eval_data.ground_truth_features.end());

    UnitResult unit;
    unit.iterations = iterations;
    for (const std::string& metric : cfg.metrics) {
        if (metric == "accuracy")
            unit.metric_values[metric] = selection_accuracy(masks, gt);
        else if (metric == "precision")
            unit.metric_values[metric] = selection_precision(masks, gt);
        else if (metric == "median_rank")
            unit.metric_values[metric] = median_rank(weights, gt);
        else if (metric == "fidelity_f1")
            unit.metric_values[metric] =
                fidelity_f1_masks(*shared.blackbox, eval_data, masks);
    }
    return unit;
}

// Minimal fixed-size pool: tasks write only their own slot, so no locking.
void run_parallel(long count, int jobs, const std::function<void(long)>& work) {
    if (jobs <= 1) {
        for (long i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                    work(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
    cfg.validate();

    struct SharedKey {
        EnergyKind energy;
        int n;
        int rep;
    };
    std::vector<SharedKey> shared_keys;
    for (EnergyKind energy : cfg.energies)
        for (int n : cfg.input_dims)
            for (int rep = 0; rep < cfg.repetitions; ++rep)
                shared_keys.push_back({energy, n, rep});

    std::vector<SharedArtifacts> shared(shared_keys.size());
    run_parallel(static_cast<long>(shared_keys.size()), cfg.jobs, [&](long i) {
        const SharedKey& k = shared_keys[i];
        shared[i] = build_shared(cfg, k.energy, k.n, k.rep);
    });

    auto shared_index = [&](EnergyKind energy, int n, int rep) {
        for (std::size_t i = 0; i < shared_keys.size(); ++i)
            if (shared_keys[i].energy == energy && shared_keys[i].n == n &&
                shared_keys[i].rep == rep)
                return i;
        throw ConfigError("benchmark: missing shared artifacts");
    };

    struct Unit {
        EnergyKind energy;
        int n;
        int target;
        std::string method;
        int rep;
    };
    std::vector<Unit> units;
    for (EnergyKind energy : cfg.energies)
        for (int n : cfg.input_dims)
            for (int target : cfg.targets_for(energy))
                for (const std::string& method : cfg.methods)
                    for (int rep = 0; rep < cfg.repetitions; ++rep)
                        units.push_back({energy, n, target, method, rep});

    std::vector<UnitResult> results(units.size());
    run_parallel(static_cast<long>(units.size()), cfg.jobs, [&](long i) {
        const Unit& u = units[i];
        results[i] = run_unit(cfg, shared[shared_index(u.energy, u.n, u.rep)],
                              u.energy, u.n, u.target, u.method, u.rep);
    });

    BenchmarkReport report;
    for (EnergyKind energy : cfg.energies) {
        for (int n : cfg.input_dims) {
            for (int target : cfg.targets_for(energy)) {
                for (const std::string& method : cfg.methods) {
                    CellResult cell{energy, n, target, method, {}};
                    std::map<std::string, std::vector<double>> values;
                    std::vector<double> iteration_counts;
                    for (std::size_t i = 0; i < units.size(); ++i) {
                        const Unit& u = units[i];
                        if (u.energy != energy || u.n != n || u.target != target ||
                            u.method != method)
                            continue;
                        for (const auto& [name, v] : results[i].metric_values)
                            values[name].push_back(v);
                        iteration_counts.push_back(
                            static_cast<double>(results[i].iterations));
                    }
                    for (auto& [name, v] : values)
                        cell.metrics[name] = MetricAggregate::of(std::move(v));
                    if (method != "random")
                        cell.metrics["iterations"] =
                            MetricAggregate::of(std::move(iteration_counts));
                    report.cells.push_back(std::move(cell));
                }
            }
        }
    }

    report.meta = {{"master_seed", cfg.master_seed}, {"config", cfg.to_json()}};
    return report;
}

nlohmann::json BenchmarkReport::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const CellResult& cell : cells) {
        nlohmann::json metrics_json;
        for (const auto& [name, agg] : cell.metrics)
            metrics_json[name] = {{"values", agg.values},
                                  {"mean", agg.mean},
                                  {"std", agg.stddev}};
        cells_json.push_back({{"energy", energy_kind_name(cell.energy)},
                              {"n", cell.n},
                              {"target", cell.target},
                              {"method", cell.method},
                              {"metrics", metrics_json}});
    }
    return {{"cells", cells_json}, {"meta", meta}};
}

BenchmarkReport BenchmarkReport::from_json(const nlohmann::json& j) {
    BenchmarkReport report;
    report.meta = j.value("meta", nlohmann::json::object());
    for (const auto& cell_json : j.at("cells")) {
        CellResult cell;
        cell.energy = energy_kind_from_name(cell_json.at("energy").get<std::string>());
        cell.n = cell_json.at("n").get<int>();
        cell.target = cell_json.at("target").get<int>();
        cell.method = cell_json.at("method").get<std::string>();
        for (const auto& [name, agg_json] : cell_json.at("metrics").items()) {
            MetricAggregate agg;
            agg.values = agg_json.at("values").get<std::vector<double>>();
            agg.mean = agg_json.at("mean").get<double>();
            agg.stddev = agg_json.at("std").get<double>();
            cell.metrics[name] = std::move(agg);
        }
        report.cells.push_back(std::move(cell));
    }
    return report;
}

std::string BenchmarkReport::to_csv() const {
    std::ostringstream out;
    out << "energy,n,target,method,metric,rep,value\n";
    for (const CellResult& cell : cells)
        for (const auto& [name, agg] : cell.metrics)
            for (std::size_t rep = 0; rep < agg.values.size(); ++rep)
                out << energy_kind_name(cell.energy) << "," << cell.n << ","
                    << cell.target << "," << cell.method << "," << name << ","
                    << rep << "," << format_double(agg.values[rep]) << "\n";
    return out.str();
}

const CellResult* BenchmarkReport::find(EnergyKind energy, int n, int target,
                                        const std::string& method) const {
    for (const CellResult& cell : cells)
        if (cell.energy == energy && cell.n == n && cell.target == target &&
            cell.method == method)
            return &cell;
    return nullptr;
}

nlohmann::json plot_data(const BenchmarkReport& report) {
    // Key series by (energy, target, metric, method); x axis is n.
    struct SeriesKey {
        std::string energy;
        int target;
        std::string metric;
        std::string method;
        bool operator<(const SeriesKey& o) const {
            return std::tie(energy, target, metric, method) <
                   std::tie(o.energy, o.target, o.metric, o.method);
        }
    };
    std::map<SeriesKey, std::map<int, const MetricAggregate*>> series;
    for (const CellResult& cell : report.cells)
        for (const auto& [name, agg] : cell.metrics)
            if (name != "iterations")
                series[{energy_kind_name(cell.energy), cell.target, name,
                        cell.method}][cell.n] = &agg;

    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, points] : series) {
        nlohmann::json points_json = nlohmann::json::array();
        for (const auto& [n, agg] : points)
            points_json.push_back(
                {{"n", n}, {"mean", agg->mean}, {"std", agg->stddev}});
        out.push_back({{"energy", key.energy},
                       {"target", key.target},
                       {"metric", key.metric},
                       {"method", key.method},
                       {"points", points_json}});
    }
    return {{"series", out}};
}

}  // namespace soint
