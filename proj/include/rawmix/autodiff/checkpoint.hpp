#pragma once

// Parameter checkpoint:
//   bytes 0..7   ASCII magic "RAWMXCKP"
//   bytes 8..11  uint32 little-endian header length L
//   next L bytes JSON {"dtype": "f64", "meta": {...},
//                      "tensors": [{"name": ..., "shape": [...]}, ...]}
//   payload      the tensors' values back to back, little-endian f64

#include "rawmix/autodiff/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace rawmix::ad {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<NamedTensor>& tensors);

struct Checkpoint {
    nlohmann::json meta;
    std::vector<NamedTensor> tensors;

    /// Structure error when `name` is absent.
    const Tensor& get(const std::string& name) const;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace rawmix::ad
