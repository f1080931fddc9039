#pragma once

#include "rawmix/msfa.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rawmix::cli {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Randomized property checks for one MSFA: unshuffle/shuffle round trip,
/// raw conv against unshuffle + 1x1 conv, white-balance invariance and
/// idempotence, pattern preservation of every preserving augmentation,
/// naive flips breaking the pattern, and descriptor dimensions.
std::vector<PropertyResult> verify_pattern_properties(const MsfaPattern& pattern, int cases,
                                                      std::uint64_t seed);

} // namespace rawmix::cli
