#pragma once

// RawMixer: MSFA-guided strided convolution, a ConvMixer-style mixing block,
// a positional-encoding-free transformer encoder over the pooled pixels, and
// a 128-d feature head.
//
//   raw_conv (B x B, stride B) -> SELU -> BN ------------------------+
//     -> depthwise 3x3 -> SELU -> BN -> pointwise -> (+ residual) <--+
//     -> maxpool 2x2 -> floor(m/2)^2 tokens x n_kernels
//     -> linear embed to embed_dim
//     -> encoder_layers x pre-LN [self-attention, feed-forward]
//     -> token mean -> FC + SELU (features) -> classifier (logits)

#include "rawmix/autodiff/checkpoint.hpp"
#include "rawmix/autodiff/ops.hpp"
#include "rawmix/descriptors/descriptor.hpp"
#include "rawmix/msfa.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace rawmix {

struct RawMixerConfig {
    MsfaPattern pattern = MsfaPattern::imec5x5();
    int n_kernels = 320;
    int embed_dim = 384;
    int heads = 6;
    int encoder_layers = 1;
    int ff_mult = 4;
    int mixer_kernel = 3;
    int feature_dim = 128;
    int num_classes = 8;

    /// Config error on non-positive sizes or heads not dividing embed_dim.
    void validate() const;
    nlohmann::json to_json() const;
    static RawMixerConfig from_json(const nlohmann::json& j);
};

enum class Mode { train, eval };

struct RawMixerOutput {
    ad::Tensor features; ///< [N, feature_dim]
    ad::Tensor logits;   ///< [N, num_classes]
};

/// [N, 1, H, W] batch tensor from equally sized raw images.
ad::Tensor images_to_tensor(std::span<const RawImage> imgs);

/// Stride-B, unpadded convolution of x [N, 1, m*B, m*B'] with kernels
/// [K, 1, B, B]. Config error when the kernel is not B x B.
ad::Tensor raw_conv(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& kernels,
                    const ad::Tensor& bias, int pattern_width);

class RawMixer {
public:
    RawMixer(RawMixerConfig cfg, std::uint64_t seed);

    const RawMixerConfig& config() const noexcept { return cfg_; }

    /// Trainable tensors in a fixed order.
    std::vector<ad::NamedTensor> named_parameters() const;
    std::vector<ad::Tensor> parameters() const;
    /// Parameters plus batch-norm running statistics.
    std::vector<ad::NamedTensor> state() const;
    std::size_t parameter_count() const;

    /// Deep copy of all state values into this model (shapes must match).
    void load_state(const std::vector<ad::NamedTensor>& state);
    std::vector<ad::NamedTensor> snapshot() const;

    /// x is [N, 1, H, W] with H, W multiples of B and m >= 2 along both axes.
    RawMixerOutput forward(ad::Tape& tape, const ad::Tensor& x, Mode mode);
    RawMixerOutput forward(ad::Tape& tape, std::span<const RawImage> batch, Mode mode);

    /// Eval-mode features without recording a tape.
    std::vector<std::vector<double>> extract(std::span<const RawImage> imgs, int batch_size = 32);

    void save(const std::filesystem::path& path) const;
    static RawMixer load(const std::filesystem::path& path);

private:
    struct EncoderLayer {
        ad::Tensor ln1_g, ln1_b;
        ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        ad::Tensor ln2_g, ln2_b;
        ad::Tensor ff1_w, ff1_b, ff2_w, ff2_b;
    };

    ad::Tensor encoder_layer(ad::Tape& tape, const EncoderLayer& layer, const ad::Tensor& x) const;

    RawMixerConfig cfg_;
    ad::Tensor raw_w_, raw_b_;
    ad::Tensor bn1_g_, bn1_b_;
    ad::BatchNormState bn1_;
    ad::Tensor dw_w_, dw_b_;
    ad::Tensor bn2_g_, bn2_b_;
    ad::BatchNormState bn2_;
    ad::Tensor pw_w_, pw_b_;
    ad::Tensor embed_w_, embed_b_;
    std::vector<EncoderLayer> layers_;
    ad::Tensor fc_w_, fc_b_;
    ad::Tensor cls_w_, cls_b_;
};

class RawMixerDescriptor final : public Descriptor {
public:
    explicit RawMixerDescriptor(std::shared_ptr<RawMixer> model) : model_(std::move(model)) {}

    std::string id() const override { return "rawmixer"; }
    int dim() const override { return model_->config().feature_dim; }
    std::vector<double> extract(const RawImage& img) const override;
    std::vector<std::vector<double>> extract_batch(std::span<const RawImage> imgs) const override;

private:
    std::shared_ptr<RawMixer> model_;
};

} // namespace rawmix
