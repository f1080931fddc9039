#pragma once

// Differentiable operators. Layouts: images NCHW, token sequences [N, T, D],
// linear weights [out, in]. Shape mismatches raise a structure error naming
// both shapes.

#include "rawmix/autodiff/tensor.hpp"

#include <span>

namespace rawmix::ad {

inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluScale = 1.0507009873554805;

/// x [N, Cin, H, W], w [Cout, Cin, k, k], bias [Cout] or undefined.
Tensor strided_conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                      int pad);
/// x [N, C, H, W], w [C, 1, k, k], stride 1, zero padding `pad`.
Tensor depthwise_conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int pad);
/// x [N, Cin, H, W], w [Cout, Cin].
Tensor pointwise_conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);
/// 2x2 window, stride 2; trailing odd row/column dropped.
Tensor maxpool2x2(Tape& tape, const Tensor& x);

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

/// Per-channel normalization over every axis except 1 (x is [N, C, ...]).
/// Training mode normalizes with batch statistics and updates the running
/// averages (unbiased variance); eval mode uses the running averages.
Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training);

Tensor selu(Tape& tape, const Tensor& x);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double s);
Tensor sum(Tape& tape, const Tensor& x);

/// a [M, K] x b [K, N].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// Batched: a [G, M, K] x b [G, K, N], or b [G, N, K] with transpose_b.
Tensor batched_matmul(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b);
/// x [..., in] * w^T + bias, w [out, in].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);

/// Over the last axis.
Tensor softmax(Tape& tape, const Tensor& x);
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor mean_axis(Tape& tape, const Tensor& x, int axis);
/// Mean over the batch of -log softmax(logits)[label]; logits [N, C].
Tensor cross_entropy_loss(Tape& tape, const Tensor& logits, std::span<const int> labels);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
/// [N, C, H, W] -> [N, H*W, C], tokens in row-major pixel order.
Tensor to_tokens(Tape& tape, const Tensor& x);
/// [N, T, H*d] -> [N*H, T, d]
Tensor split_heads(Tape& tape, const Tensor& x, int heads);
/// [N*H, T, d] -> [N, T, H*d]
Tensor merge_heads(Tape& tape, const Tensor& x, int heads);

} // namespace rawmix::ad
