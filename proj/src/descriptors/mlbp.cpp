#include "rawmix/descriptors/mlbp.hpp"

#include "rawmix/error.hpp"

namespace rawmix {

std::vector<std::vector<double>> Descriptor::extract_batch(std::span<const RawImage> imgs) const
{
    std::vector<std::vector<double>> out;
    out.reserve(imgs.size());
    for (const RawImage& img : imgs)
        out.push_back(extract(img));
    return out;
}

std::vector<double> mlbp(const RawImage& img)
{
    const MsfaPattern& pat = img.pattern();
    const int b = pat.width();
    if (img.cells_x() < 3 || img.cells_y() < 3)
        fail(ErrorKind::size, "M-LBP needs at least 3 basic patterns per axis, image is " +
                                  std::to_string(img.width()) + "x" + std::to_string(img.height()));
    std::vector<double> hist(static_cast<std::size_t>(256) * pat.band_count(), 0.0);
    std::vector<double> counts(pat.band_count(), 0.0);
    for (int y = b; y + b < img.height(); ++y) {
        for (int x = b; x + b < img.width(); ++x) {
            const double centre = img.at(x, y);
            int code = 0;
            for (int k = 0; k < 8; ++k)
                if (img.at(x + kMlbpOffsets[k][0] * b, y + kMlbpOffsets[k][1] * b) >= centre)
                    code |= 1 << k;
            const int band = pat.band(y % b, x % b);
            hist[static_cast<std::size_t>(band) * 256 + code] += 1.0;
            counts[band] += 1.0;
        }
    }
    for (int band = 0; band < pat.band_count(); ++band)
        for (int c = 0; c < 256; ++c)
            hist[static_cast<std::size_t>(band) * 256 + c] /= counts[band];
    return hist;
}

} // namespace rawmix
