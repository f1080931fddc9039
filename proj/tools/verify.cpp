#include "verify.hpp"

#include "rawmix/augment.hpp"
#include "rawmix/constancy.hpp"
#include "rawmix/descriptors/mlbp.hpp"
#include "rawmix/descriptors/rawmixer.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace rawmix::cli {
namespace {

RawImage random_raw(const MsfaPattern& p, int m, std::mt19937_64& rng, double lo = 0.0)
{
    std::uniform_real_distribution<double> u(lo, 1.0);
    RawImage img(p, m * p.width(), m * p.width());
    for (double& v : img.data())
        v = u(rng);
    return img;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

std::vector<PropertyResult> verify_pattern_properties(const MsfaPattern& p, int cases, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> side(3, 8);
    const int b = p.width(), bands = p.band_count();
    std::vector<PropertyResult> out;

    {
        bool ok = true;
        for (int c = 0; c < cases && ok; ++c) {
            RawImage img = random_raw(p, side(rng), rng);
            RawImage back = pixel_shuffle(pixel_unshuffle(img));
            ok = std::equal(img.data().begin(), img.data().end(), back.data().begin());
        }
        out.push_back({"shuffle(unshuffle(I)) == I", ok, ""});
    }
    {
        double worst = 0;
        std::normal_distribution<double> g;
        for (int c = 0; c < cases; ++c) {
            RawImage img = random_raw(p, side(rng), rng);
            const int k = 4;
            std::vector<double> w(static_cast<std::size_t>(k) * bands);
            for (double& v : w)
                v = g(rng);
            ad::Tape tape(false);
            ad::Tensor x = images_to_tensor(std::span<const RawImage>(&img, 1));
            ad::Tensor kt = ad::Tensor::from({k, 1, b, b}, w);
            ad::Tensor f = raw_conv(tape, x, kt, ad::Tensor::zeros({k}), b);
            PlaneCube cube = pixel_unshuffle(img);
            const int m = cube.width();
            for (int n = 0; n < k; ++n)
                for (int y = 0; y < m; ++y)
                    for (int xx = 0; xx < m; ++xx) {
                        double s = 0;
                        for (int j = 0; j < b; ++j)
                            for (int i = 0; i < b; ++i)
                                s += w[static_cast<std::size_t>(n) * bands + j * b + i] *
                                     cube.at(p.band(j, i), xx, y);
                        worst = std::max(worst, std::abs(s - f.value()[(static_cast<std::size_t>(n) * m + y) * m + xx]));
                    }
        }
        std::ostringstream os;
        os << "max |diff| " << worst;
        out.push_back({"raw_conv == unshuffle + 1x1 conv", worst <= 1e-12, os.str()});
    }
    {
        double worst = 0, idem = 0;
        std::uniform_real_distribution<double> l(0.05, 2.0);
        for (int c = 0; c < cases; ++c) {
            RawImage img = random_raw(p, side(rng) + 2, rng, 0.01);
            std::vector<double> ill(bands);
            for (double& v : ill)
                v = l(rng);
            RawImage lit = img;
            for (int y = 0; y < lit.height(); ++y)
                for (int x = 0; x < lit.width(); ++x)
                    lit.at(x, y) *= ill[p.band(y % b, x % b)];
            RawImage a = white_balance(img), bb = white_balance(lit);
            worst = std::max(worst, max_abs_diff(a.data(), bb.data()));
            idem = std::max(idem, max_abs_diff(a.data(), white_balance(a).data()));
        }
        std::ostringstream os;
        os << "max |diff| " << worst;
        out.push_back({"WB(I * L) == WB(I)", worst < 1e-6, os.str()});
        os.str("");
        os << "max |diff| " << idem;
        out.push_back({"WB idempotent", idem < 1e-6, os.str()});
    }
    {
        bool ok = true;
        std::string failed;
        for (int c = 0; c < cases; ++c) {
            RawImage img = random_raw(p, side(rng), rng);
            const int m = img.cells_x();
            const std::vector<Augmented> augs = {
                preserving_flip(img, FlipAxis::horizontal),
                preserving_flip(img, FlipAxis::vertical),
                preserving_translate(img, Axis::x, 1 + c % (m - 1)),
                preserving_translate(img, Axis::y, -(1 + c % (m - 1))),
                texture_remodel(img, 0.3, rng()),
                gaussian_noise(img, 0.0, 0.25, rng()),
                optical_distortion(img, 0.1),
            };
            for (std::size_t i = 0; i < augs.size(); ++i)
                if (!verify_pattern(augs[i].image, augs[i].provenance)) {
                    ok = false;
                    failed = "augmentation #" + std::to_string(i);
                }
        }
        out.push_back({"preserving augmentations keep the band map", ok, failed});
    }
    if (b >= 2) {
        bool broken = true;
        for (int c = 0; c < cases; ++c) {
            RawImage img = random_raw(p, side(rng), rng);
            for (FlipAxis a : {FlipAxis::horizontal, FlipAxis::vertical}) {
                Augmented n = naive_flip(img, a);
                broken = broken && !verify_pattern(n.image, n.provenance);
            }
        }
        out.push_back({"naive flips break the band map", broken, ""});
    }
    {
        RawImage img = random_raw(p, 3, rng);
        const std::size_t dim = mlbp(img).size();
        out.push_back({"M-LBP dimension 256 * B^2", dim == static_cast<std::size_t>(256 * bands),
                       std::to_string(dim)});
    }
    return out;
}

} // namespace rawmix::cli
