#pragma once

#include "rawmix/msfa.hpp"

#include <span>
#include <string>
#include <vector>

namespace rawmix {

/// Fixed-length feature extractor over raw patches.
class Descriptor {
public:
    virtual ~Descriptor() = default;

    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    virtual std::vector<double> extract(const RawImage& img) const = 0;
    /// Default: one extract() per patch.
    virtual std::vector<std::vector<double>> extract_batch(std::span<const RawImage> imgs) const;
};

} // namespace rawmix
