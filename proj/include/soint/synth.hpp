#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace soint {

enum class EnergyKind { e1, e2 };

EnergyKind energy_kind_from_name(const std::string& name);
std::string energy_kind_name(EnergyKind kind);

// The two analytic energies used to synthesize structured data. Both read
// only the first four input features; e1 scores a 2-bit output, e2 a 4-bit
// output.
struct SyntheticEnergy {
    EnergyKind kind;

    int output_dim() const { return kind == EnergyKind::e1 ? 2 : 4; }
    static constexpr int min_input_dim = 4;

    double eval(std::span<const double> x, std::span<const int> y) const;
};

// Largest output dimension the exhaustive 2^d enumeration accepts.
inline constexpr int kMaxEnumerationDim = 20;

// Exact argmin over all 2^d binary outputs. Outputs are enumerated as bit
// strings y1..yd with y1 the most significant bit, so the first strict
// minimum is the lexicographically smallest minimizer.
std::vector<int> brute_force_argmin(
    const std::function<double(std::span<const int>)>& energy_of_y, int d);

struct DatasetSpec {
    SyntheticEnergy energy;
    int input_dim = 5;
    long num_samples = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    DatasetSpec spec;
    int n = 0;
    int d = 0;
    std::vector<double> inputs;   // row-major num_samples x n
    std::vector<int> outputs;     // row-major num_samples x d
    std::vector<int> ground_truth_features;  // 1-based, {1,2,3,4} for e1/e2

    long num_samples() const { return n == 0 ? 0 : static_cast<long>(inputs.size()) / n; }
    std::span<const double> input_row(long r) const {
        return {inputs.data() + r * n, static_cast<std::size_t>(n)};
    }
    std::span<const int> output_row(long r) const {
        return {outputs.data() + r * d, static_cast<std::size_t>(d)};
    }
};

// Inputs are i.i.d. standard normal; each row draws from its own stream
// derived from (seed, row index), so generation is a pure function of the
// spec no matter how rows are scheduled. Outputs come from brute_force_argmin
// of the generating energy.
Dataset generate_dataset(const DatasetSpec& spec);

// CSV with header x1..xn,y1..yd; doubles printed in shortest round-trip
// form. The metadata sidecar holds the spec and ground-truth features.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& csv_path);
void write_dataset_meta(const Dataset& data, const std::filesystem::path& meta_path);
Dataset read_dataset(const std::filesystem::path& csv_path,
                     const std::filesystem::path& meta_path);

// Sibling path convention for the sidecar: d.csv -> d.meta.json
std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace soint
