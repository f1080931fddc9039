#pragma once

// Max-Raw white balance: every unshuffled band is divided by the maximum of
// its 5x5 median-filtered plane.

#include "rawmix/msfa.hpp"

#include <span>
#include <vector>

namespace rawmix {

inline constexpr double kIlluminationFloor = 1e-8;
inline constexpr int kMedianWindow = 5;

struct IlluminationEstimate {
    std::vector<double> per_band;
};

/// 5x5 median of a single plane. When both sides are >= 5 the window is
/// replicate-padded (always 25 samples); otherwise it is clipped to the
/// plane. Even-sized windows take the lower of the two middle values.
std::vector<double> median_filter_5x5(std::span<const double> plane, int height, int width);

IlluminationEstimate estimate_illumination(const PlaneCube& cube);

RawImage white_balance(const RawImage& img);
/// Same, also reporting the per-band estimate used.
RawImage white_balance(const RawImage& img, IlluminationEstimate& estimate);

} // namespace rawmix
