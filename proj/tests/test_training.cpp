#include "oracles.hpp"

#include "rawmix/descriptors/train.hpp"
#include "rawmix/error.hpp"

#include <gtest/gtest.h>

using namespace rawmix;

namespace {

RawMixerConfig tiny()
{
    RawMixerConfig c;
    c.pattern = MsfaPattern::imec4x4();
    c.n_kernels = 8;
    c.embed_dim = 8;
    c.heads = 2;
    c.ff_mult = 2;
    c.feature_dim = 4;
    c.num_classes = 2;
    return c;
}

PatchSet constant_patches(int per_class, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.01);
    PatchSet s;
    for (int i = 0; i < per_class; ++i)
        for (int label = 0; label < 2; ++label) {
            RawImage img(tiny().pattern, 16, 16);
            const double v = (label == 0 ? 0.2 : 0.8) + jitter(rng);
            std::fill(img.data().begin(), img.data().end(), v);
            s.patches.push_back(std::move(img));
            s.labels.push_back(label);
            s.origins.emplace_back(0, 0);
        }
    return s;
}

} // namespace

TEST(TrainConfigDefaults, ReferenceValues)
{
    TrainConfig c;
    EXPECT_EQ(c.epochs, 30);
    EXPECT_DOUBLE_EQ(c.lr, 2e-4);
    EXPECT_DOUBLE_EQ(c.weight_decay, 1e-5);
    EXPECT_EQ(c.batch_size, 128);
    EXPECT_DOUBLE_EQ(c.val_fraction, 0.05);
    EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
    EXPECT_THROW(TrainConfig::from_json({{"epochs", -1}}), Error);
    EXPECT_THROW(TrainConfig::from_json({{"val_fraction", 1.5}}), Error);
}

TEST(Training, ConstantPatchesSeparateWithinFiveEpochs)
{
    for (std::uint64_t seed : {0, 1, 2}) {
        RawMixer m(tiny(), seed);
        TrainConfig c;
        c.epochs = 5;
        c.lr = 1e-3;
        c.batch_size = 8;
        c.val_fraction = 0.2;
        c.seed = seed;
        TrainResult r = train(m, constant_patches(20, seed), c);
        ASSERT_EQ(r.history.size(), 5u);
        EXPECT_EQ(r.best_val_acc, 1.0) << "seed " << seed;
        EXPECT_EQ(r.val_count, 8);
        EXPECT_EQ(r.train_count, 32);
    }
}

TEST(Training, ZeroLearningRateKeepsParametersAndLoss)
{
    RawMixer m(tiny(), 3);
    const auto before = m.named_parameters();
    std::vector<std::vector<double>> values;
    for (auto& np : before)
        values.emplace_back(np.tensor.value().begin(), np.tensor.value().end());
    TrainConfig c;
    c.epochs = 4;
    c.lr = 0.0;
    c.batch_size = 64;
    c.val_fraction = 0.1;
    TrainResult r = train(m, constant_patches(10, 3), c);
    const auto after = m.named_parameters();
    for (std::size_t i = 0; i < after.size(); ++i)
        EXPECT_EQ(std::vector<double>(after[i].tensor.value().begin(), after[i].tensor.value().end()), values[i])
            << after[i].name;
    for (const auto& e : r.history)
        EXPECT_NEAR(e.train_loss, r.history[0].train_loss, 1e-9);
}

TEST(Training, DeterministicGivenSeed)
{
    auto run = [] {
        RawMixer m(tiny(), 4);
        TrainConfig c;
        c.epochs = 2;
        c.batch_size = 8;
        c.val_fraction = 0.2;
        c.seed = 9;
        TrainResult r = train(m, constant_patches(8, 4), c);
        std::vector<double> out;
        for (const auto& e : r.history)
            out.insert(out.end(), {e.train_loss, e.val_loss});
        for (auto& np : m.named_parameters())
            out.insert(out.end(), np.tensor.value().begin(), np.tensor.value().end());
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Training, EmptyClassIsDataError)
{
    RawMixerConfig cfg = tiny();
    cfg.num_classes = 3;
    RawMixer m(cfg, 0);
    try {
        train(m, constant_patches(5, 0), TrainConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
    }
}

TEST(Training, BadLabelsAreDataErrors)
{
    RawMixer m(tiny(), 0);
    PatchSet s = constant_patches(5, 0);
    s.labels[0] = 7;
    EXPECT_THROW(train(m, s, TrainConfig{}), Error);
    s = constant_patches(5, 0);
    s.labels.pop_back();
    EXPECT_THROW(train(m, s, TrainConfig{}), Error);
}
