// scratch calibration harness, replaced by the real CLI later
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "soint/blackbox.hpp"
#include "soint/eval.hpp"
#include "soint/rng.hpp"
#include "soint/synth.hpp"

using namespace soint;

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "spen";
    const auto t0 = std::chrono::steady_clock::now();

    DatasetSpec dspec{SyntheticEnergy{EnergyKind::e1}, 5, 10000, 1};
    Dataset train = generate_dataset(dspec);
    dspec.num_samples = 2000;
    dspec.seed = 2;
    Dataset held = generate_dataset(dspec);

    SpenTrainConfig cfg;
    cfg.seed = 3;
    if (argc > 2) cfg.epochs = std::atoi(argv[2]);
    if (argc > 3) cfg.learning_rate = std::atof(argv[3]);

    if (mode == "spen") {
        ValueTrainResult log;
        SpenBlackBox spen = train_spen(train, cfg, &log);
        BlackBox bb(spen);
        BlackBox oracle(OracleBlackBox{SyntheticEnergy{EnergyKind::e1}, 5});
        long hits = 0;
        for (long r = 0; r < held.num_samples(); ++r)
            hits += bb.predict(held.input_row(r)) == oracle.predict(held.input_row(r));
        std::printf("exact-match %.4f\n", double(hits) / held.num_samples());
        for (std::size_t e = 0; e < log.epoch_losses.size(); e += 5)
            std::printf("epoch %zu loss %.6f\n", e, log.epoch_losses[e]);
    } else {
        BlackBox oracle(OracleBlackBox{SyntheticEnergy{EnergyKind::e1}, 5});
        SurrogateEnergy esb = pretrain_surrogate(oracle, 10000, 4, cfg);
        long match = 0, pairs_ok = 0, pairs = 0;
        for (long r = 0; r < held.num_samples(); ++r) {
            auto x = held.input_row(r);
            auto pred = oracle.predict(x);
            match += esb.argmin(x) == pred;
            for (int m = 0; m < 4; ++m) {
                std::vector<int> y{(m >> 1) & 1, m & 1};
                if (y == pred) continue;
                ++pairs;
                pairs_ok += esb.energy(x, pred) <= esb.energy(x, y);
            }
        }
        std::printf("argmin-match %.4f pair-rank %.4f\n",
                    double(match) / held.num_samples(), double(pairs_ok) / pairs);
    }
    std::printf("%.1fs\n", std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - t0)
                               .count());
    return 0;
}
