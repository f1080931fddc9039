#pragma once

// Mosaic LBP: one 256-bin LBP histogram per band, computed directly on the
// raw image by comparing each band-b pixel with its 8 same-band neighbours
// one basic pattern away, concatenated in band order.

#include "rawmix/descriptors/descriptor.hpp"

namespace rawmix {

/// Neighbour offsets in units of B, in bit order (bit k set when
/// neighbour k >= centre): clockwise from the top-left.
inline constexpr int kMlbpOffsets[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0},
                                           {1, 1},   {0, 1},  {-1, 1}, {-1, 0}};

/// 256 * B^2 values; each band histogram sums to 1. Size error when the
/// image has fewer than 3 basic patterns along either axis.
std::vector<double> mlbp(const RawImage& img);

inline int mlbp_dim(const MsfaPattern& pattern) { return 256 * pattern.band_count(); }

class MlbpDescriptor final : public Descriptor {
public:
    explicit MlbpDescriptor(MsfaPattern pattern) : pattern_(std::move(pattern)) {}

    std::string id() const override { return "mlbp"; }
    int dim() const override { return mlbp_dim(pattern_); }
    std::vector<double> extract(const RawImage& img) const override { return mlbp(img); }

private:
    MsfaPattern pattern_;
};

} // namespace rawmix
