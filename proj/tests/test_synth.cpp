#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "soint/error.hpp"
#include "soint/rng.hpp"
#include "soint/synth.hpp"

using namespace soint;

namespace {

// Exhaustive reference minimizer, written independently of the library: walks
// configurations in lexicographic order and keeps the first strict minimum.
std::vector<int> oracle_argmin(const SyntheticEnergy& energy,
                               std::span<const double> x) {
    const int d = energy.output_dim();
    std::vector<int> best;
    double best_e = 0.0;
    std::vector<int> y(d);
    for (int m = 0; m < (1 << d); ++m) {
        for (int i = 0; i < d; ++i) y[i] = (m >> (d - 1 - i)) & 1;
        const double e = energy.eval(x, y);
        if (best.empty() || e < best_e) {
            best = y;
            best_e = e;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("e1 spot values") {
    SyntheticEnergy e1{EnergyKind::e1};
    const std::vector<double> x{1, 2, 3, -1, 0};

    // (x1*y1 + x4)(1-y2) + (x2*(1-y1) + x3)*y2 at y=(0,0) is x4.
    CHECK(e1.eval(x, std::vector<int>{0, 0}) == -1.0);
    CHECK(e1.eval(x, std::vector<int>{1, 0}) == 0.0);   // x1 + x4
    CHECK(e1.eval(x, std::vector<int>{0, 1}) == 5.0);   // x2 + x3
    CHECK(e1.eval(x, std::vector<int>{1, 1}) == 3.0);   // x3

    const std::vector<double> zeros(5, 0.0);
    for (int m = 0; m < 4; ++m)
        CHECK(e1.eval(zeros, std::vector<int>{m >> 1, m & 1}) == 0.0);
}

TEST_CASE("e2 vanishes at the all-zero output") {
    SyntheticEnergy e2{EnergyKind::e2};
    rng::Stream s = rng::stream(5, {rng::hash_str("e2-zero")});
    const std::vector<int> y{0, 0, 0, 0};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(6);
        for (double& v : x) v = s.normal();
        CHECK(e2.eval(x, y) == 0.0);
    }
}

TEST_CASE("energy eval validates dimensions") {
    SyntheticEnergy e1{EnergyKind::e1};
    CHECK_THROWS_AS(e1.eval(std::vector<double>{1, 2, 3}, std::vector<int>{0, 0}),
                    InvalidInputError);
    CHECK_THROWS_AS(e1.eval(std::vector<double>{1, 2, 3, 4}, std::vector<int>{0}),
                    InvalidInputError);
}

TEST_CASE("brute force argmin enumerates and tie-breaks lexicographically") {
    SyntheticEnergy e1{EnergyKind::e1};
    const std::vector<double> x{1, 2, 3, -1, 0};
    auto fn = [&](std::span<const int> y) { return e1.eval(x, y); };
    CHECK(brute_force_argmin(fn, 2) == std::vector<int>{0, 0});

    // All-zero input ties all four configurations at 0.
    const std::vector<double> zeros{0, 0, 0, 0, 0};
    auto zfn = [&](std::span<const int> y) { return e1.eval(zeros, y); };
    CHECK(brute_force_argmin(zfn, 2) == std::vector<int>{0, 0});

    // Three-way tie at -2 resolved toward the smallest bit string.
    SyntheticEnergy e2{EnergyKind::e2};
    const std::vector<double> x2{0, 0, -2, 1, 0};
    auto fn2 = [&](std::span<const int> y) { return e2.eval(x2, y); };
    std::vector<int> got = brute_force_argmin(fn2, 4);
    CHECK(got == std::vector<int>{0, 1, 1, 0});
    CHECK(e2.eval(x2, got) == -2.0);
    CHECK(e2.eval(x2, std::vector<int>{1, 1, 0, 0}) == -2.0);
    CHECK(e2.eval(x2, std::vector<int>{1, 1, 1, 0}) == -2.0);
}

TEST_CASE("brute force argmin respects the capacity bound") {
    auto fn = [](std::span<const int>) { return 0.0; };
    CHECK_THROWS_AS(brute_force_argmin(fn, 21), CapacityError);
    CHECK_THROWS_AS(brute_force_argmin(fn, 0), InvalidInputError);
}

TEST_CASE("argmin agrees with the independent oracle on random inputs") {
    rng::Stream s = rng::stream(77, {rng::hash_str("argmin-cross")});
    for (EnergyKind kind : {EnergyKind::e1, EnergyKind::e2}) {
        SyntheticEnergy energy{kind};
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(7);
            for (double& v : x) v = s.normal();
            auto fn = [&](std::span<const int> y) { return energy.eval(x, y); };
            CHECK(brute_force_argmin(fn, energy.output_dim()) ==
                  oracle_argmin(energy, x));
        }
    }
}

TEST_CASE("empty dataset keeps ground truth metadata") {
    DatasetSpec spec{SyntheticEnergy{EnergyKind::e1}, 5, 0, 3};
    Dataset data = generate_dataset(spec);
    CHECK(data.num_samples() == 0);
    CHECK(data.ground_truth_features == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("generation is deterministic per spec") {
    DatasetSpec spec{SyntheticEnergy{EnergyKind::e2}, 8, 64, 11};
    Dataset a = generate_dataset(spec);
    Dataset b = generate_dataset(spec);
    CHECK(a.inputs == b.inputs);
    CHECK(a.outputs == b.outputs);

    spec.seed = 12;
    Dataset c = generate_dataset(spec);
    CHECK(a.inputs != c.inputs);
}

TEST_CASE("generated inputs look standard normal") {
    DatasetSpec spec{SyntheticEnergy{EnergyKind::e1}, 5, 10000, 21};
    Dataset data = generate_dataset(spec);
    for (int f = 0; f < 5; ++f) {
        double sum = 0.0, sq = 0.0;
        for (long r = 0; r < data.num_samples(); ++r) {
            const double v = data.input_row(r)[f];
            sum += v;
            sq += v * v;
        }
        const double mean = sum / data.num_samples();
        const double var = sq / data.num_samples() - mean * mean;
        CHECK(std::fabs(mean) < 0.05);
        CHECK(std::fabs(var - 1.0) < 0.1);
    }
}

TEST_CASE("every generated row is an exact energy minimizer") {
    for (EnergyKind kind : {EnergyKind::e1, EnergyKind::e2}) {
        DatasetSpec spec{SyntheticEnergy{kind}, 6, 200, 31};
        Dataset data = generate_dataset(spec);
        const int d = data.d;
        std::vector<int> y(d);
        for (long r = 0; r < data.num_samples(); ++r) {
            const double row_e = spec.energy.eval(data.input_row(r), data.output_row(r));
            for (int m = 0; m < (1 << d); ++m) {
                for (int i = 0; i < d; ++i) y[i] = (m >> (d - 1 - i)) & 1;
                CHECK(row_e <= spec.energy.eval(data.input_row(r), y));
            }
        }
    }
}

TEST_CASE("features beyond the fourth never influence the energy") {
    rng::Stream s = rng::stream(13, {rng::hash_str("irrelevance")});
    for (EnergyKind kind : {EnergyKind::e1, EnergyKind::e2}) {
        SyntheticEnergy energy{kind};
        const int d = energy.output_dim();
        std::vector<int> y(d);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> x(9);
            for (double& v : x) v = s.normal();
            for (int i = 0; i < d; ++i) y[i] = s.next_u64() & 1;
            const double base = energy.eval(x, y);
            for (int f = 4; f < 9; ++f) {
                std::vector<double> perturbed = x;
                perturbed[f] += s.normal() * 10.0;
                CHECK(energy.eval(perturbed, y) == base);
            }
        }
    }
}

TEST_CASE("dataset csv and metadata round-trip and are byte-stable") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "soint_synth_test";
    fs::create_directories(dir);
    const fs::path csv = dir / "d.csv";
    const fs::path meta = meta_path_for(csv);
    CHECK(meta.filename() == "d.meta.json");

    DatasetSpec spec{SyntheticEnergy{EnergyKind::e1}, 5, 50, 7};
    Dataset data = generate_dataset(spec);
    write_dataset_csv(data, csv);
    write_dataset_meta(data, meta);

    std::ifstream first(csv);
    std::string first_bytes((std::istreambuf_iterator<char>(first)),
                            std::istreambuf_iterator<char>());
    CHECK(first_bytes.rfind("x1,x2,x3,x4,x5,y1,y2\n", 0) == 0);

    write_dataset_csv(data, csv);
    std::ifstream second(csv);
    std::string second_bytes((std::istreambuf_iterator<char>(second)),
                             std::istreambuf_iterator<char>());
    CHECK(first_bytes == second_bytes);

    Dataset back = read_dataset(csv, meta);
    CHECK(back.inputs == data.inputs);
    CHECK(back.outputs == data.outputs);
    CHECK(back.spec.seed == data.spec.seed);
    CHECK(back.ground_truth_features == data.ground_truth_features);

    fs::remove_all(dir);
}
