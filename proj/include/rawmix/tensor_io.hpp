#pragma once

// Portable tensor file:
//   bytes 0..7   ASCII magic "MSFATNSR"
//   bytes 8..11  uint32 little-endian length L of the JSON header
//   next L bytes UTF-8 JSON header: {"dtype": "f32" | "f64", "shape": [...], ...}
//   payload      product(shape) little-endian IEEE floats of that dtype
//
// Raw mosaics use shape [H, W] and kind "raw"; cubes use [C, H, W] and kind
// "cube". Both carry "msfa", "band_grid" and "wavelengths" so that files are
// self-describing.

#include "rawmix/msfa.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <vector>

namespace rawmix {

struct TensorFile {
    nlohmann::json header;
    std::vector<std::int64_t> shape;
    std::vector<double> values;
};

enum class Dtype { f32, f64 };

/// `header` gets "dtype" and "shape" filled in; other keys pass through.
void write_tensor_file(const std::filesystem::path& path, nlohmann::json header,
                       std::span<const std::int64_t> shape, std::span<const double> values,
                       Dtype dtype = Dtype::f32);
TensorFile read_tensor_file(const std::filesystem::path& path);

nlohmann::json pattern_to_json(const MsfaPattern& pattern);
MsfaPattern pattern_from_json(const nlohmann::json& j);

/// Raw and cube files are written as f64 so that a save/load round trip is exact.
void save_raw(const RawImage& img, const std::filesystem::path& path);
RawImage load_raw(const std::filesystem::path& path);
void save_cube(const PlaneCube& cube, const std::filesystem::path& path);
PlaneCube load_cube(const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples). Values are
/// clamped to [0, 1] and scaled by 65535 on export.
void save_pgm16(const RawImage& img, const std::filesystem::path& path);
/// Samples are divided by the file's maxval.
RawImage load_pgm16(const std::filesystem::path& path, const MsfaPattern& pattern);

} // namespace rawmix
