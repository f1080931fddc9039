#include "rawmix/augment.hpp"

#include "rawmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rawmix {
namespace {

RawImage index_image(const RawImage& img)
{
    RawImage idx(img.pattern(), img.height(), img.width());
    std::iota(idx.data().begin(), idx.data().end(), 0.0);
    return idx;
}

// Runs a pure pixel rearrangement on the image and on an image of pixel
// indices, so the provenance is produced by exactly the same code path.
template <class Rearrange>
Augmented rearranged(const RawImage& img, Rearrange&& op)
{
    RawImage out = op(img);
    RawImage idx = op(index_image(img));
    Provenance prov{img.width(), img.height(), {}};
    prov.source.reserve(idx.data().size());
    for (double v : idx.data())
        prov.source.push_back(static_cast<std::int32_t>(v));
    return {std::move(out), std::move(prov)};
}

Provenance identity_provenance(const RawImage& img)
{
    Provenance prov{img.width(), img.height(), std::vector<std::int32_t>(img.data().size())};
    std::iota(prov.source.begin(), prov.source.end(), 0);
    return prov;
}

PlaneCube flip_planes(const PlaneCube& cube, FlipAxis axis)
{
    PlaneCube out(cube.pattern(), cube.height(), cube.width());
    const int h = cube.height(), w = cube.width();
    for (int c = 0; c < cube.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(c, x, y) = axis == FlipAxis::horizontal ? cube.at(c, w - 1 - x, y)
                                                               : cube.at(c, x, h - 1 - y);
    return out;
}

RawImage flip_pixels(const RawImage& img, FlipAxis axis)
{
    RawImage out(img.pattern(), img.height(), img.width());
    const int h = img.height(), w = img.width();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = axis == FlipAxis::horizontal ? img.at(w - 1 - x, y) : img.at(x, h - 1 - y);
    return out;
}

RawImage cyclic_shift(const RawImage& img, Axis axis, int pixels)
{
    RawImage out(img.pattern(), img.height(), img.width());
    const int h = img.height(), w = img.width();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int sx = axis == Axis::x ? ((x - pixels) % w + w) % w : x;
            const int sy = axis == Axis::y ? ((y - pixels) % h + h) % h : y;
            out.at(x, y) = img.at(sx, sy);
        }
    }
    return out;
}

PlaneCube distort_planes(const PlaneCube& cube, double k1)
{
    PlaneCube out(cube.pattern(), cube.height(), cube.width());
    const int h = cube.height(), w = cube.width();
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double norm = std::max(cx, cy);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int sx = x, sy = y;
            if (norm > 0.0) {
                const double u = (x - cx) / norm, v = (y - cy) / norm;
                const double f = 1.0 + k1 * (u * u + v * v);
                sx = std::clamp(static_cast<int>(std::lround(cx + u * f * norm)), 0, w - 1);
                sy = std::clamp(static_cast<int>(std::lround(cy + v * f * norm)), 0, h - 1);
            }
            for (int c = 0; c < cube.channels(); ++c)
                out.at(c, x, y) = cube.at(c, sx, sy);
        }
    }
    return out;
}

RawImage remodel_blocks(const RawImage& img, double fraction, std::uint64_t seed)
{
    const int b = img.pattern().width();
    const int mx = img.cells_x(), my = img.cells_y();
    const int cells = mx * my;
    const int count = static_cast<int>(std::lround(fraction * cells));
    RawImage out = img;
    if (count == 0 || cells < 2)
        return out;

    std::mt19937_64 rng(seed);
    std::vector<int> order(cells);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> pick(0, cells - 2);
    for (int k = 0; k < count; ++k) {
        const int dst = order[k];
        int src = pick(rng);
        if (src >= dst)
            ++src;
        const int dx = (dst % mx) * b, dy = (dst / mx) * b;
        const int sx = (src % mx) * b, sy = (src / mx) * b;
        for (int j = 0; j < b; ++j)
            for (int i = 0; i < b; ++i)
                out.at(dx + i, dy + j) = img.at(sx + i, sy + j);
    }
    return out;
}

} // namespace

Augmented preserving_flip(const RawImage& img, FlipAxis axis)
{
    return rearranged(img, [axis](const RawImage& in) {
        return pixel_shuffle(flip_planes(pixel_unshuffle(in), axis));
    });
}

Augmented preserving_translate(const RawImage& img, Axis axis, int step_patterns)
{
    const int b = img.pattern().width();
    const int extent = axis == Axis::x ? img.width() : img.height();
    if (std::abs(step_patterns) * b >= extent)
        fail(ErrorKind::range, "translation of " + std::to_string(step_patterns) +
                                   " patterns exceeds the image extent " + std::to_string(extent));
    return rearranged(img, [axis, pixels = step_patterns * b](const RawImage& in) {
        return cyclic_shift(in, axis, pixels);
    });
}

Augmented texture_remodel(const RawImage& img, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction <= 1.0))
        fail(ErrorKind::range, "remodel fraction must lie in (0, 1]");
    return rearranged(img, [fraction, seed](const RawImage& in) {
        return remodel_blocks(in, fraction, seed);
    });
}

Augmented gaussian_noise(const RawImage& img, double mu, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0))
        fail(ErrorKind::range, "noise sigma must be non-negative");
    RawImage out = img;
    if (sigma > 0.0 || mu != 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(mu, sigma > 0.0 ? sigma : 1.0);
        for (double& v : out.data()) {
            const double e = sigma > 0.0 ? n(rng) : mu;
            v = std::max(v + e, 0.0);
        }
    }
    return {std::move(out), identity_provenance(img)};
}

Augmented optical_distortion(const RawImage& img, double k1)
{
    if (!(std::abs(k1) <= 0.5))
        fail(ErrorKind::range, "distortion coefficient |k1| must be <= 0.5");
    return rearranged(img, [k1](const RawImage& in) {
        return pixel_shuffle(distort_planes(pixel_unshuffle(in), k1));
    });
}

Augmented naive_flip(const RawImage& img, FlipAxis axis)
{
    return rearranged(img, [axis](const RawImage& in) { return flip_pixels(in, axis); });
}

Augmented naive_translate(const RawImage& img, Axis axis, int pixels)
{
    return rearranged(img, [axis, pixels](const RawImage& in) { return cyclic_shift(in, axis, pixels); });
}

bool verify_pattern(const RawImage& augmented, const Provenance& provenance)
{
    const int n = augmented.width() * augmented.height();
    if (static_cast<int>(provenance.source.size()) != n || provenance.source_width <= 0)
        return false;
    const MsfaPattern& pat = augmented.pattern();
    const int b = pat.width();
    for (int i = 0; i < n; ++i) {
        const int src = provenance.source[i];
        if (src < 0 || src >= provenance.source_width * provenance.source_height)
            return false;
        const int x = i % augmented.width(), y = i / augmented.width();
        const int sx = src % provenance.source_width, sy = src / provenance.source_width;
        if (pat.band(y % b, x % b) != pat.band(sy % b, sx % b))
            return false;
    }
    return true;
}

std::string_view to_string(AugmentKind kind)
{
    switch (kind) {
    case AugmentKind::hflip: return "hflip";
    case AugmentKind::vflip: return "vflip";
    case AugmentKind::translate_x: return "translate_x";
    case AugmentKind::translate_y: return "translate_y";
    case AugmentKind::remodel: return "remodel";
    case AugmentKind::gaussian_noise: return "gaussian_noise";
    case AugmentKind::optical_distortion: return "optical_distortion";
    }
    return "hflip";
}

AugmentKind augment_kind_from_string(std::string_view s)
{
    for (AugmentKind k : {AugmentKind::hflip, AugmentKind::vflip, AugmentKind::translate_x,
                          AugmentKind::translate_y, AugmentKind::remodel,
                          AugmentKind::gaussian_noise, AugmentKind::optical_distortion})
        if (to_string(k) == s)
            return k;
    fail(ErrorKind::config, "unknown augmentation kind '" + std::string(s) + "'");
}

AugmentSpec AugmentSpec::from_json(const nlohmann::json& j)
{
    AugmentSpec spec;
    try {
        spec.kind = augment_kind_from_string(j.at("kind").get<std::string>());
        const nlohmann::json params = j.value("params", nlohmann::json::object());
        spec.step = params.value("step", spec.step);
        spec.fraction = params.value("fraction", spec.fraction);
        spec.mu = params.value("mu", spec.mu);
        spec.sigma = params.value("sigma", spec.sigma);
        spec.k1 = params.value("k1", spec.k1);
        spec.seed = j.value("seed", spec.seed);
        spec.preserving = j.value("preserving", spec.preserving);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("bad augmentation spec: ") + e.what());
    }
    if (!(spec.fraction > 0.0 && spec.fraction <= 1.0))
        fail(ErrorKind::config, "remodel fraction must lie in (0, 1]");
    return spec;
}

nlohmann::json AugmentSpec::to_json() const
{
    return {{"kind", std::string(to_string(kind))},
            {"params", {{"step", step}, {"fraction", fraction}, {"mu", mu}, {"sigma", sigma}, {"k1", k1}}},
            {"seed", seed},
            {"preserving", preserving}};
}

Augmented apply_augment(const AugmentSpec& spec, const RawImage& img)
{
    switch (spec.kind) {
    case AugmentKind::hflip:
        return spec.preserving ? preserving_flip(img, FlipAxis::horizontal)
                               : naive_flip(img, FlipAxis::horizontal);
    case AugmentKind::vflip:
        return spec.preserving ? preserving_flip(img, FlipAxis::vertical)
                               : naive_flip(img, FlipAxis::vertical);
    case AugmentKind::translate_x:
        return spec.preserving ? preserving_translate(img, Axis::x, spec.step)
                               : naive_translate(img, Axis::x, spec.step);
    case AugmentKind::translate_y:
        return spec.preserving ? preserving_translate(img, Axis::y, spec.step)
                               : naive_translate(img, Axis::y, spec.step);
    case AugmentKind::remodel:
        return texture_remodel(img, spec.fraction, spec.seed);
    case AugmentKind::gaussian_noise:
        return gaussian_noise(img, spec.mu, spec.sigma, spec.seed);
    case AugmentKind::optical_distortion:
        return optical_distortion(img, spec.k1);
    }
    fail(ErrorKind::config, "unhandled augmentation kind");
}

} // namespace rawmix
