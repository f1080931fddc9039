#include "rawmix/constancy.hpp"

#include <algorithm>
#include <array>

namespace rawmix {

std::vector<double> median_filter_5x5(std::span<const double> plane, int height, int width)
{
    constexpr int half = kMedianWindow / 2;
    const bool replicate = height >= kMedianWindow && width >= kMedianWindow;
    std::vector<double> out(plane.size());
    std::array<double, kMedianWindow * kMedianWindow> window{};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int n = 0;
            for (int dy = -half; dy <= half; ++dy) {
                int yy = y + dy;
                if (replicate)
                    yy = std::clamp(yy, 0, height - 1);
                else if (yy < 0 || yy >= height)
                    continue;
                for (int dx = -half; dx <= half; ++dx) {
                    int xx = x + dx;
                    if (replicate)
                        xx = std::clamp(xx, 0, width - 1);
                    else if (xx < 0 || xx >= width)
                        continue;
                    window[n++] = plane[static_cast<std::size_t>(yy) * width + xx];
                }
            }
            auto mid = window.begin() + (n - 1) / 2;
            std::nth_element(window.begin(), mid, window.begin() + n);
            out[static_cast<std::size_t>(y) * width + x] = *mid;
        }
    }
    return out;
}

IlluminationEstimate estimate_illumination(const PlaneCube& cube)
{
    IlluminationEstimate est;
    est.per_band.resize(cube.channels());
    for (int b = 0; b < cube.channels(); ++b) {
        const std::vector<double> med = median_filter_5x5(cube.plane(b), cube.height(), cube.width());
        const double peak = *std::max_element(med.begin(), med.end());
        est.per_band[b] = std::max(peak, kIlluminationFloor);
    }
    return est;
}

RawImage white_balance(const RawImage& img, IlluminationEstimate& estimate)
{
    PlaneCube cube = pixel_unshuffle(img);
    estimate = estimate_illumination(cube);
    for (int b = 0; b < cube.channels(); ++b) {
        const double d = estimate.per_band[b];
        for (double& v : cube.plane(b))
            v = std::max(v / d, 0.0);
    }
    return pixel_shuffle(cube);
}

RawImage white_balance(const RawImage& img)
{
    IlluminationEstimate unused;
    return white_balance(img, unused);
}

} // namespace rawmix
