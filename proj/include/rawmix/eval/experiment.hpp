#pragma once

// Cross-illuminant 1-NN protocol: train patches come from the top half of
// each scene under one illuminant, test patches from the bottom half under
// each test illuminant. Train-only and test-only augmentations are applied
// per patch, white balance runs per patch after augmentation.

#include "rawmix/augment.hpp"
#include "rawmix/descriptors/rawmixer.hpp"
#include "rawmix/descriptors/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace rawmix {

struct ExperimentConfig {
    std::string name = "experiment";
    std::string msfa = "imec5x5";
    int patch_size = 65;
    int classes = 8;
    /// Side of each synthetic scene; 0 picks the smallest multiple of B
    /// holding two patch rows.
    int scene_resolution = 0;
    std::uint64_t scene_seed = 7;
    std::uint64_t seed = 0;
    std::string illuminant_train = "daylight";
    std::vector<std::string> illuminant_test{"warm"};
    std::string descriptor = "rawmixer"; ///< rawmixer | mlbp
    bool wb_enabled = true;
    bool preserving_aug = true;
    /// Must be set for wb_enabled = false or preserving_aug = false.
    bool ablation = false;
    /// Keep the unaugmented patches next to their augmented copies.
    bool include_original = true;
    std::vector<AugmentSpec> train_augs;
    std::vector<AugmentSpec> test_augs;
    RawMixerConfig model;
    TrainConfig training;
    int extract_batch = 32;
    /// Optional dataset manifest; its scenes replace the synthetic ones.
    std::filesystem::path dataset;

    /// Reference protocol for n = patch_size / B: flips, y-translation by
    /// floor(0.6 n) patterns and remodeling for training; noise,
    /// x-translation and distortion for testing.
    static std::vector<AugmentSpec> default_train_augs(int n);
    static std::vector<AugmentSpec> default_test_augs(int n);

    /// Config error on inconsistent fields (alignment error when the patch
    /// size is not a multiple of B).
    void validate() const;
    int resolved_scene_resolution() const;
    nlohmann::json to_json() const;
    /// Relative paths resolve against `base`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
};

struct IlluminantResult {
    std::string illuminant;
    double accuracy = 0; ///< percent
    std::vector<double> per_class;
    std::vector<std::vector<int>> confusion; ///< [true][predicted]
    int test_patches = 0;
    double extract_seconds = 0;

    bool operator==(const IlluminantResult&) const = default;
};

struct EvalReport {
    std::string name;
    std::string descriptor;
    std::string msfa;
    int patch_size = 0;
    int classes = 0;
    double accuracy = 0; ///< percent over all test illuminants
    std::vector<double> per_class;
    std::vector<std::vector<int>> confusion;
    std::vector<IlluminantResult> results;
    int train_patches = 0;
    int feature_dim = 0;
    double train_seconds = 0;
    double gallery_extract_seconds = 0;
    nlohmann::json training; ///< history, empty for untrained descriptors
    nlohmann::json config;

    bool operator==(const EvalReport&) const = default;
    /// Equality ignoring wall-clock fields.
    bool same_outcome(const EvalReport& other) const;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

using ProgressFn = std::function<void(const std::string&)>;

/// Errors from a stage are rethrown with the stage name prefixed.
EvalReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

// Multi-seed runs with the ablation comparisons used as acceptance checks.
struct BenchConfig {
    ExperimentConfig base;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    bool wb_ablation = true;
    bool naive_ablation = true;
    bool mlbp_baseline = true;
    double min_wb_gain = 20.0;
    double min_wb_accuracy = 37.5;
    double min_naive_drop = 5.0;
    bool require_rawmixer_ge_mlbp = true;

    nlohmann::json to_json() const;
    static BenchConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
};

struct BenchRun {
    std::string variant; ///< baseline | no_wb | naive_aug | mlbp
    std::uint64_t seed = 0;
    EvalReport report;
};

struct BenchCheck {
    std::string name;
    double value = 0;
    double threshold = 0;
    bool passed = false;
};

struct BenchResult {
    std::vector<BenchRun> runs;
    std::vector<BenchCheck> checks;
    bool passed() const;
    /// Median over seeds of the accuracy of one variant.
    double median_accuracy(const std::string& variant) const;
    nlohmann::json to_json() const;
};

BenchResult run_bench(const BenchConfig& cfg, const ProgressFn& progress = {});

double median(std::vector<double> values);

} // namespace rawmix
