#include "soint/synth.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "soint/error.hpp"
#include "soint/rng.hpp"

namespace soint {

EnergyKind energy_kind_from_name(const std::string& name) {
    if (name == "e1") return EnergyKind::e1;
    if (name == "e2") return EnergyKind::e2;
    throw InvalidInputError("unknown energy: " + name);
}

std::string energy_kind_name(EnergyKind kind) {
    return kind == EnergyKind::e1 ? "e1" : "e2";
}

double SyntheticEnergy::eval(std::span<const double> x,
                             std::span<const int> y) const {
    if (static_cast<int>(x.size()) < min_input_dim)
        throw InvalidInputError("energy eval: input needs at least 4 features");
    if (static_cast<int>(y.size()) != output_dim())
        throw InvalidInputError("energy eval: output width mismatch");

    if (kind == EnergyKind::e1) {
        return (x[0] * y[0] + x[3]) * (1 - y[1]) +
               (x[1] * (1 - y[0]) + x[2]) * y[1];
    }
    return (std::sin(x[0]) * y[0] * y[2] + std::fabs(x[3])) * (1 - y[1]) * y[3] +
           (std::exp(x[1] / 10.0 - 1.0) * (1 - y[0]) * (1 - y[2]) + x[2]) *
               y[1] * (1 - y[3]);
}

std::vector<int> brute_force_argmin(
    const std::function<double(std::span<const int>)>& energy_of_y, int d) {
    if (d < 1) throw InvalidInputError("argmin: output dim must be positive");
    if (d > kMaxEnumerationDim)
        throw CapacityError("argmin: output dim " + std::to_string(d) +
                            " exceeds enumeration bound " +
                            std::to_string(kMaxEnumerationDim));

    std::vector<int> y(d), best(d);
    double best_energy = 0.0;
    for (std::uint32_t m = 0; m < (1u << d); ++m) {
        for (int i = 0; i < d; ++i) y[i] = (m >> (d - 1 - i)) & 1u;
        const double e = energy_of_y(y);
        if (m == 0 || e < best_energy) {
            best_energy = e;
            best = y;
        }
    }
    return best;
}

void DatasetSpec::validate() const {
    if (input_dim < SyntheticEnergy::min_input_dim)
        throw InvalidInputError("dataset: input_dim must be at least 4");
    if (num_samples < 0)
        throw InvalidInputError("dataset: num_samples must be non-negative");
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset data;
    data.spec = spec;
    data.n = spec.input_dim;
    data.d = spec.energy.output_dim();
    data.ground_truth_features = {1, 2, 3, 4};
    data.inputs.resize(static_cast<std::size_t>(spec.num_samples) * data.n);
    data.outputs.resize(static_cast<std::size_t>(spec.num_samples) * data.d);

    for (long r = 0; r < spec.num_samples; ++r) {
        rng::Stream row_stream = rng::stream(
            spec.seed, {rng::hash_str("dataset-row"), static_cast<std::uint64_t>(r)});
        double* x = data.inputs.data() + r * data.n;
        for (int i = 0; i < data.n; ++i) x[i] = row_stream.normal();

        std::span<const double> xr{x, static_cast<std::size_t>(data.n)};
        std::vector<int> y = brute_force_argmin(
            [&](std::span<const int> cand) { return spec.energy.eval(xr, cand); },
            data.d);
        for (int i = 0; i < data.d; ++i) data.outputs[r * data.d + i] = y[i];
    }
    return data;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw ConfigError("cannot write " + csv_path.string());

    for (int i = 0; i < data.n; ++i) out << "x" << (i + 1) << ",";
    for (int i = 0; i < data.d; ++i)
        out << "y" << (i + 1) << (i + 1 == data.d ? "" : ",");
    out << "\n";

    for (long r = 0; r < data.num_samples(); ++r) {
        auto x = data.input_row(r);
        auto y = data.output_row(r);
        for (int i = 0; i < data.n; ++i) out << format_double(x[i]) << ",";
        for (int i = 0; i < data.d; ++i) out << y[i] << (i + 1 == data.d ? "" : ",");
        out << "\n";
    }
    if (!out) throw ConfigError("failed writing " + csv_path.string());
}

void write_dataset_meta(const Dataset& data, const std::filesystem::path& meta_path) {
    nlohmann::json j;
    j["energy"] = energy_kind_name(data.spec.energy.kind);
    j["input_dim"] = data.spec.input_dim;
    j["num_samples"] = data.spec.num_samples;
    j["seed"] = data.spec.seed;
    j["output_dim"] = data.d;
    j["ground_truth_features"] = data.ground_truth_features;

    std::ofstream out(meta_path);
    if (!out) throw ConfigError("cannot write " + meta_path.string());
    out << j.dump(2) << "\n";
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidInputError("bad number in csv: " + s);
    return v;
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& csv_path,
                     const std::filesystem::path& meta_path) {
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw ConfigError("cannot read " + meta_path.string());
    nlohmann::json meta = nlohmann::json::parse(meta_in);

    Dataset data;
    data.spec.energy.kind =
        energy_kind_from_name(meta.at("energy").get<std::string>());
    data.spec.input_dim = meta.at("input_dim").get<int>();
    data.spec.num_samples = meta.at("num_samples").get<long>();
    data.spec.seed = meta.at("seed").get<std::uint64_t>();
    data.n = data.spec.input_dim;
    data.d = data.spec.energy.output_dim();
    data.ground_truth_features =
        meta.at("ground_truth_features").get<std::vector<int>>();

    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot read " + csv_path.string());
    std::string line;
    if (!std::getline(in, line))
        throw InvalidInputError("csv missing header: " + csv_path.string());

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != data.n + data.d)
            throw InvalidInputError("csv row width mismatch in " + csv_path.string());
        for (int i = 0; i < data.n; ++i)
            data.inputs.push_back(parse_double(fields[i]));
        for (int i = 0; i < data.d; ++i) {
            const std::string& f = fields[data.n + i];
            if (f != "0" && f != "1")
                throw InvalidInputError("csv output must be 0/1, got: " + f);
            data.outputs.push_back(f == "1" ? 1 : 0);
        }
    }
    if (data.num_samples() != data.spec.num_samples)
        throw InvalidInputError("csv row count does not match metadata");
    return data;
}

}  // namespace soint
