#pragma once

// Scene simulation under the narrow-band model: a raw value is the scene
// reflectance of band MSFA(p) at p times the illuminant power of that band.

#include "rawmix/msfa.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rawmix {

/// Sampled relative spectral power distribution.
class Illuminant {
public:
    /// Wavelengths strictly increasing, powers >= 0, at least two samples.
    Illuminant(std::string name, std::vector<std::pair<double, double>> samples);

    /// Equal energy over [400, 1000] nm.
    static Illuminant flat_white();
    /// Stand-in for an incandescent (A-like) source: blackbody at 2856 K,
    /// monotonically increasing over [400, 1000] nm.
    static Illuminant warm();
    /// Stand-in for a D65-like source: flat with a mild blue lift around 460 nm.
    static Illuminant daylight();
    static Illuminant by_name(std::string_view name);
    static std::vector<std::string> builtin_names();

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::pair<double, double>>& samples() const noexcept { return samples_; }

    /// Linear interpolation of the RSPD; range error outside the sampled span.
    double power_at(double wavelength_nm) const;

private:
    std::string name_;
    std::vector<std::pair<double, double>> samples_;
};

/// L^b for every band of `pattern`, interpolated at the band centres and
/// rescaled so that max_b L^b = 1.
std::vector<double> illuminant_vector(const Illuminant& ill, const MsfaPattern& pattern);

/// Fully-defined reflectance image, one plane per MSFA band, values in [0, 1].
class SceneCube {
public:
    explicit SceneCube(PlaneCube reflectance);

    const PlaneCube& reflectance() const noexcept { return reflectance_; }
    const MsfaPattern& pattern() const noexcept { return reflectance_.pattern(); }

private:
    PlaneCube reflectance_;
};

RawImage render_raw(const SceneCube& scene, const Illuminant& ill);
/// Same with an explicit per-band illumination vector (length B^2, positive).
RawImage render_raw(const SceneCube& scene, std::span<const double> band_illumination);

/// Seeded procedural textures, one scene per class. Classes come in pairs
/// sharing the same two texture fields; within a pair the fields are spread
/// over the basic pattern in mirrored order (along rows for even pairs,
/// along columns for odd pairs), and each class has its own reflectance level
/// and mild spectral tilt.
std::vector<SceneCube> synth_textures(const MsfaPattern& pattern, int num_classes, int resolution,
                                      std::uint64_t seed);

enum class Split { top, bottom };
enum class Role { train, validation, test };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct PatchSet {
    std::vector<RawImage> patches;
    std::vector<int> labels;
    /// Top-left pixel of each patch in the source image.
    std::vector<std::pair<int, int>> origins;
    Role role = Role::train;
    std::string illuminant;
    int patch_size = 0;

    std::size_t size() const noexcept { return patches.size(); }
    void append(const PatchSet& other);
};

/// Row index at which an image is split into top and bottom halves: the
/// largest pattern-aligned row not exceeding height / 2.
int split_row(const RawImage& img);

/// Non-overlapping X x X tiles of one horizontal half, row-major tile order,
/// every tile starting on a basic-pattern boundary. Top -> train, bottom -> test.
PatchSet extract_patches(const RawImage& img, int patch_size, Split split, int label = 0,
                         std::string illuminant = {});

/// Dataset manifest consumed by the `patches` subcommand:
/// {
///   "msfa": "imec5x5", "patch_size": 65,
///   "scenes":  [{"file": "scene_00.bin", "label": 0}, ...],
///   "renders": [{"illuminant": "daylight", "split": "top", "role": "train"},
///               {"illuminant": "warm", "split": "bottom", "role": "test"}]
/// }
/// Relative scene paths resolve against the manifest's directory.
struct DatasetManifest {
    struct Scene {
        std::filesystem::path file;
        int label = 0;
    };
    struct Render {
        std::string illuminant;
        Split split = Split::top;
        Role role = Role::train;
    };
    std::string msfa;
    int patch_size = 0;
    std::vector<Scene> scenes;
    std::vector<Render> renders;

    static DatasetManifest from_json(const nlohmann::json& j, const std::filesystem::path& base);
    static DatasetManifest load(const std::filesystem::path& path);
};

} // namespace rawmix
