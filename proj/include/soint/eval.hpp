#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soint/training.hpp"

namespace soint {

// Fraction of samples whose selected feature set equals the ground truth
// exactly. Masks must be hard with |ground_truth| selections.
double selection_accuracy(const std::vector<SelectionMask>& masks,
                          const std::set<int>& ground_truth);

// Softer companion to the exact-match accuracy: mean |selected ∩ GT| / k.
double selection_precision(const std::vector<SelectionMask>& masks,
                           const std::set<int>& ground_truth);

// Median, over samples and ground-truth features, of each ground-truth
// feature's 1-based position when features are sorted by descending weight
// (ties toward the lower index). Midpoint convention for even counts.
double median_rank(const std::vector<std::vector<double>>& weight_vectors,
                   const std::set<int>& ground_truth);

// Micro-averaged F1 of masked predictions against full predictions, treating
// 1 as the positive class. Defined as 1.0 when no positives exist on either
// side. When compare_to_labels is true the reference is the dataset labels
// instead of the black box's own full-input predictions.
double fidelity_f1_masks(const Predictor& bb, const Dataset& data,
                         const std::vector<SelectionMask>& masks,
                         bool compare_to_labels = false);
double fidelity_f1(const Predictor& bb, const Interpreter& interp,
                   const Dataset& data, int k, bool compare_to_labels = false);

// Everything needed to train one interpreter end to end.
struct PipelineConfig {
    SpenTrainConfig surrogate;
    long pretrain_samples = 10000;
    TrainerConfig trainer;

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
};

// Ablation: identical pipeline, but the surrogate sees only the target
// output (a 1-bit energy), so no cross-output information reaches the
// interpreter. A supplied pretrained surrogate must have output width 1.
TrainResult marginal_baseline(const Predictor& bb, const Dataset& data,
                              int target, int k, const PipelineConfig& cfg,
                              const SurrogateEnergy* pretrained = nullptr);

struct BenchmarkConfig {
    std::vector<EnergyKind> energies = {EnergyKind::e1, EnergyKind::e2};
    std::vector<int> input_dims = {5, 10, 15, 20};
    std::vector<int> targets_e1 = {1, 2};
    std::vector<int> targets_e2 = {3, 4};
    std::vector<std::string> methods = {"soint", "marginal", "random"};
    std::vector<std::string> metrics = {"accuracy", "precision", "median_rank",
                                        "fidelity_f1"};
    int repetitions = 5;
    int k = 4;
    long train_samples = 4000;
    long eval_samples = 1000;
    std::string blackbox = "spen";  // or "oracle"
    long spen_train_samples = 10000;
    SpenTrainConfig spen;
    PipelineConfig pipeline;
    std::uint64_t master_seed = 0;
    int jobs = 1;  // execution detail, not part of the report identity

    void validate() const;
    std::vector<int> targets_for(EnergyKind kind) const;

    nlohmann::json to_json() const;
    static BenchmarkConfig from_json(const nlohmann::json& j);
};

struct MetricAggregate {
    std::vector<double> values;  // one per repetition
    double mean = 0.0;
    double stddev = 0.0;  // population convention

    static MetricAggregate of(std::vector<double> values);
};

struct CellResult {
    EnergyKind energy;
    int n = 0;
    int target = 0;
    std::string method;
    std::map<std::string, MetricAggregate> metrics;
};

struct BenchmarkReport {
    std::vector<CellResult> cells;  // sorted by (energy, n, target, method)
    nlohmann::json meta;

    nlohmann::json to_json() const;
    static BenchmarkReport from_json(const nlohmann::json& j);
    std::string to_csv() const;

    const CellResult* find(EnergyKind energy, int n, int target,
                           const std::string& method) const;
};

// Runs the full grid. Cells are independent jobs keyed by
// (energy, n, target, method, repetition); every random stream derives from
// the master seed and the cell key, so the report does not depend on
// scheduling or job count.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

// Figure-style export: for each (energy, target, metric, method), the mean
// and std band as a function of n.
nlohmann::json plot_data(const BenchmarkReport& report);

}  // namespace soint
