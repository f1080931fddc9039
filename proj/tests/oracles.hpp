#pragma once

// Independent test-side reference implementations and small helpers.

#include "rawmix/msfa.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <random>
#include <vector>

namespace oracle {

inline rawmix::RawImage random_raw(const rawmix::MsfaPattern& p, int mh, int mw, std::mt19937_64& rng,
                                   double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    rawmix::RawImage img(p, mh * p.width(), mw * p.width());
    for (double& v : img.data())
        v = u(rng);
    return img;
}

inline std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v)
        x = u(rng);
    return v;
}

/// Band of pixel (x, y) by hand: row = y mod B, column = x mod B.
inline int band_of(const rawmix::MsfaPattern& p, int x, int y)
{
    return p.band_grid()[static_cast<std::size_t>(y % p.width()) * p.width() + x % p.width()];
}

/// Raw value of band `band` at unshuffled cell (cx, cy), found by scanning
/// the basic pattern rather than inverting the grid.
inline double cell_band_value(const rawmix::RawImage& img, int cx, int cy, int band)
{
    const int b = img.pattern().width();
    for (int j = 0; j < b; ++j)
        for (int i = 0; i < b; ++i)
            if (band_of(img.pattern(), cx * b + i, cy * b + j) == band)
                return img.at(cx * b + i, cy * b + j);
    return NAN;
}

/// Median of a list, lower middle for even counts.
inline double lower_median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace oracle
