#pragma once

#include "rawmix/descriptors/rawmixer.hpp"
#include "rawmix/radiance.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace rawmix {

struct TrainConfig {
    int epochs = 30;
    double lr = 2e-4;
    double weight_decay = 1e-5;
    int batch_size = 128;
    double val_fraction = 0.05;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;
    double train_acc = 0; ///< fraction in [0, 1]
    double val_loss = 0;
    double val_acc = 0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_acc = 0;
    int train_count = 0;
    int val_count = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Cross-entropy training with AdamW. The patches are shuffled once with
/// `cfg.seed`; the trailing val_fraction (at least one patch when positive)
/// is held out. The model ends up holding the state of the epoch with the
/// best validation accuracy (ties go to the lower validation loss, then the
/// earlier epoch). Data error when a class in [0, num_classes) is empty or a
/// label is out of range.
TrainResult train(RawMixer& model, const PatchSet& patches, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

} // namespace rawmix
