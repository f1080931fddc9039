#pragma once

// Augmentations for raw mosaics. The MSFA-preserving family keeps the band
// map of every output pixel equal to the band map of its source pixel: flips
// run on the unshuffled cube, translations move whole basic patterns, and
// remodeling swaps pattern-aligned B x B blocks. Naive variants exist only to
// reproduce the pattern-breaking ablation.

#include "rawmix/msfa.hpp"

#include <json.hpp>

#include <cstdint>
#include <string_view>
#include <vector>

namespace rawmix {

/// horizontal mirrors left/right (x), vertical mirrors top/bottom (y).
enum class FlipAxis { horizontal, vertical };
enum class Axis { x, y };

/// For every output pixel, the linear index (y * width + x) of the source
/// pixel it was taken from in the input image.
struct Provenance {
    int source_width = 0;
    int source_height = 0;
    std::vector<std::int32_t> source;
};

struct Augmented {
    RawImage image;
    Provenance provenance;
};

Augmented preserving_flip(const RawImage& img, FlipAxis axis);
/// Cyclic shift by step_patterns * B pixels; range error when
/// |step_patterns| * B >= extent along the axis.
Augmented preserving_translate(const RawImage& img, Axis axis, int step_patterns);
/// Overwrites round(fraction * cells) distinct destination cells with copies
/// of uniformly drawn other cells of the input.
Augmented texture_remodel(const RawImage& img, double fraction, std::uint64_t seed);
/// i.i.d. N(mu, sigma) per pixel, clamped below at 0.
Augmented gaussian_noise(const RawImage& img, double mu, double sigma, std::uint64_t seed);
/// Radial model r' = r (1 + k1 r^2) on each unshuffled plane, nearest-neighbour
/// resampling with edge clamping. |k1| <= 0.5.
Augmented optical_distortion(const RawImage& img, double k1);

/// Direct mirror of the mosaic; breaks the pattern whenever B >= 2.
Augmented naive_flip(const RawImage& img, FlipAxis axis);
/// Cyclic shift by an arbitrary pixel count (pattern-breaking unless a multiple of B).
Augmented naive_translate(const RawImage& img, Axis axis, int pixels);

/// True iff every augmented pixel carries the same band as its source pixel.
bool verify_pattern(const RawImage& augmented, const Provenance& provenance);

enum class AugmentKind {
    hflip,
    vflip,
    translate_x,
    translate_y,
    remodel,
    gaussian_noise,
    optical_distortion,
};

std::string_view to_string(AugmentKind kind);
AugmentKind augment_kind_from_string(std::string_view s);

struct AugmentSpec {
    AugmentKind kind = AugmentKind::hflip;
    /// translate step, in basic patterns (in pixels when preserving == false)
    int step = 1;
    double fraction = 0.1;
    double mu = 0.0;
    double sigma = 0.25;
    double k1 = 0.05;
    std::uint64_t seed = 0;
    /// false selects the naive flip / pixel translate used by the ablation
    bool preserving = true;

    static AugmentSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

Augmented apply_augment(const AugmentSpec& spec, const RawImage& img);

} // namespace rawmix
