#include "rawmix/radiance.hpp"

#include "rawmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace rawmix {
namespace {

std::vector<std::pair<double, double>> sample_curve(double (*f)(double))
{
    std::vector<std::pair<double, double>> s;
    for (int nm = 400; nm <= 1000; nm += 5)
        s.emplace_back(nm, f(nm));
    return s;
}

double planck_2856(double nm)
{
    constexpr double c2 = 1.4387769e7; // nm K
    const double x = c2 / (nm * 2856.0);
    return std::pow(560.0 / nm, 5.0) / std::expm1(x);
}

double daylight_curve(double nm)
{
    const double d = (nm - 460.0) / 60.0;
    return 1.0 + 0.25 * std::exp(-d * d);
}

// Smooth random field on a coarse lattice, bicubic-free (smoothstep) interpolation.
class ValueNoise {
public:
    ValueNoise(std::mt19937_64& rng, double cell, int extent)
        : cell_(cell), n_(static_cast<int>(std::ceil(extent / cell)) + 2)
    {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        lattice_.resize(static_cast<std::size_t>(n_) * n_);
        for (double& v : lattice_)
            v = u(rng);
    }

    double operator()(double x, double y) const
    {
        const double gx = x / cell_, gy = y / cell_;
        const int ix = static_cast<int>(std::floor(gx)), iy = static_cast<int>(std::floor(gy));
        const double fx = smooth(gx - ix), fy = smooth(gy - iy);
        auto l = [&](int i, int j) { return lattice_[static_cast<std::size_t>(j) * n_ + i]; };
        const double top = l(ix, iy) * (1 - fx) + l(ix + 1, iy) * fx;
        const double bot = l(ix, iy + 1) * (1 - fx) + l(ix + 1, iy + 1) * fx;
        return top * (1 - fy) + bot * fy;
    }

private:
    static double smooth(double t) { return t * t * (3 - 2 * t); }
    double cell_;
    int n_;
    std::vector<double> lattice_;
};

// One texture field in [0, 1], rendered at full resolution.
std::vector<double> texture_field(std::mt19937_64& rng, int kind, int res)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> f(static_cast<std::size_t>(res) * res);
    const double theta = u(rng) * std::numbers::pi;
    const double ct = std::cos(theta), st = std::sin(theta);
    switch (kind % 3) {
    case 0: { // sinusoidal grating
        const double period = 8.0 + 16.0 * u(rng);
        const double phase = 2.0 * std::numbers::pi * u(rng);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                f[static_cast<std::size_t>(y) * res + x] =
                    0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (x * ct + y * st) / period + phase);
        break;
    }
    case 1: { // rotated checkerboard
        const double size = 6.0 + 10.0 * u(rng);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                const double a = (x * ct + y * st) / size;
                const double b = (-x * st + y * ct) / size;
                const long parity = static_cast<long>(std::floor(a)) + static_cast<long>(std::floor(b));
                f[static_cast<std::size_t>(y) * res + x] = (parity & 1) ? 0.85 : 0.15;
            }
        break;
    }
    default: { // two-octave value noise
        const double cell = 6.0 + 10.0 * u(rng);
        ValueNoise coarse(rng, cell, res), fine(rng, cell / 2.0, res);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                f[static_cast<std::size_t>(y) * res + x] =
                    (2.0 * coarse(x, y) + fine(x, y)) / 3.0;
        break;
    }
    }
    return f;
}

} // namespace

Illuminant::Illuminant(std::string name, std::vector<std::pair<double, double>> samples)
    : name_(std::move(name)), samples_(std::move(samples))
{
    if (samples_.size() < 2)
        fail(ErrorKind::structure, "illuminant '" + name_ + "' needs at least two samples");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (samples_[i].second < 0.0)
            fail(ErrorKind::structure, "illuminant '" + name_ + "' has negative power");
        if (i > 0 && !(samples_[i].first > samples_[i - 1].first))
            fail(ErrorKind::structure,
                 "illuminant '" + name_ + "' wavelengths must be strictly increasing");
    }
}

Illuminant Illuminant::flat_white()
{
    return Illuminant("flat-white", {{400.0, 1.0}, {1000.0, 1.0}});
}

Illuminant Illuminant::warm()
{
    return Illuminant("warm", sample_curve(planck_2856));
}

Illuminant Illuminant::daylight()
{
    return Illuminant("daylight", sample_curve(daylight_curve));
}

Illuminant Illuminant::by_name(std::string_view name)
{
    if (name == "flat-white")
        return flat_white();
    if (name == "warm")
        return warm();
    if (name == "daylight")
        return daylight();
    fail(ErrorKind::config, "unknown illuminant '" + std::string(name) + "'");
}

std::vector<std::string> Illuminant::builtin_names()
{
    return {"flat-white", "warm", "daylight"};
}

double Illuminant::power_at(double nm) const
{
    if (nm < samples_.front().first || nm > samples_.back().first)
        fail(ErrorKind::range, "wavelength " + std::to_string(nm) + " nm outside illuminant '" +
                                   name_ + "' range");
    auto hi = std::lower_bound(samples_.begin(), samples_.end(), nm,
                               [](const auto& s, double v) { return s.first < v; });
    if (hi->first == nm)
        return hi->second;
    auto lo = hi - 1;
    const double t = (nm - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

std::vector<double> illuminant_vector(const Illuminant& ill, const MsfaPattern& pattern)
{
    std::vector<double> l(pattern.band_count());
    for (int b = 0; b < pattern.band_count(); ++b)
        l[b] = ill.power_at(pattern.wavelength(b));
    const double peak = *std::max_element(l.begin(), l.end());
    if (!(peak > 0.0))
        fail(ErrorKind::range, "illuminant '" + ill.name() + "' has no power over the MSFA bands");
    for (double& v : l)
        v /= peak;
    return l;
}

SceneCube::SceneCube(PlaneCube reflectance) : reflectance_(std::move(reflectance))
{
    for (double v : reflectance_.data())
        if (!(v >= 0.0 && v <= 1.0))
            fail(ErrorKind::range, "scene reflectance must lie in [0, 1]");
}

RawImage render_raw(const SceneCube& scene, const Illuminant& ill)
{
    const std::vector<double> l = illuminant_vector(ill, scene.pattern());
    return render_raw(scene, l);
}

RawImage render_raw(const SceneCube& scene, std::span<const double> band_illumination)
{
    const MsfaPattern& pat = scene.pattern();
    if (static_cast<int>(band_illumination.size()) != pat.band_count())
        fail(ErrorKind::structure, "illumination vector length must equal B^2");
    RawImage img = mosaic(scene.reflectance());
    const int b = pat.width();
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            img.at(x, y) *= band_illumination[pat.band(y % b, x % b)];
    return img;
}

std::vector<SceneCube> synth_textures(const MsfaPattern& pattern, int num_classes, int resolution,
                                      std::uint64_t seed)
{
    if (num_classes < 1)
        fail(ErrorKind::config, "num_classes must be at least 1");
    const int b = pattern.width();
    if (resolution <= 0 || resolution % b != 0)
        fail(ErrorKind::structure, "resolution " + std::to_string(resolution) +
                                       " is not a multiple of the basic pattern width " +
                                       std::to_string(b));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Distinct reflectance levels, geometrically spaced and shuffled over classes.
    std::vector<double> levels(num_classes);
    for (int c = 0; c < num_classes; ++c)
        levels[c] = 0.95 * std::pow(0.82, c);
    std::shuffle(levels.begin(), levels.end(), rng);

    const int bands = pattern.band_count();
    const double lmin = pattern.wavelengths().front();
    const double lmax = pattern.wavelengths().back();

    std::vector<SceneCube> scenes;
    scenes.reserve(num_classes);
    std::vector<double> field_a, field_b;
    for (int c = 0; c < num_classes; ++c) {
        const int pair = c / 2;
        const bool mirrored = (c % 2) == 1;
        if (!mirrored) {
            field_a = texture_field(rng, pair, resolution);
            field_b = texture_field(rng, pair + 1, resolution);
        }
        const double tilt = 0.3 * (u(rng) - 0.5);

        PlaneCube cube(pattern, resolution, resolution);
        for (int band = 0; band < bands; ++band) {
            const int pos = (pair % 2 == 0) ? pattern.row_of(band) : pattern.col_of(band);
            double w = b > 1 ? static_cast<double>(pos) / (b - 1) : 0.5;
            if (mirrored)
                w = 1.0 - w;
            const double span = lmax > lmin ? (pattern.wavelength(band) - lmin) / (lmax - lmin) : 0.5;
            const double gain = levels[c] * (1.0 + tilt * (span - 0.5));
            std::span<double> plane = cube.plane(band);
            for (std::size_t i = 0; i < plane.size(); ++i) {
                const double mix = w * field_a[i] + (1.0 - w) * field_b[i];
                plane[i] = std::clamp(gain * (0.3 + 0.7 * mix), 0.0, 1.0);
            }
        }
        scenes.emplace_back(std::move(cube));
    }
    return scenes;
}

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::train: return "train";
    case Role::validation: return "validation";
    case Role::test: return "test";
    }
    return "train";
}

Role role_from_string(std::string_view s)
{
    if (s == "train")
        return Role::train;
    if (s == "validation")
        return Role::validation;
    if (s == "test")
        return Role::test;
    fail(ErrorKind::config, "unknown role '" + std::string(s) + "'");
}

void PatchSet::append(const PatchSet& other)
{
    patches.insert(patches.end(), other.patches.begin(), other.patches.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    origins.insert(origins.end(), other.origins.begin(), other.origins.end());
}

int split_row(const RawImage& img)
{
    const int b = img.pattern().width();
    return (img.cells_y() / 2) * b;
}

PatchSet extract_patches(const RawImage& img, int patch_size, Split split, int label,
                         std::string illuminant)
{
    const int b = img.pattern().width();
    if (patch_size <= 0 || patch_size % b != 0)
        fail(ErrorKind::alignment, "patch size " + std::to_string(patch_size) +
                                       " is not a multiple of the basic pattern width " +
                                       std::to_string(b));
    const int cut = split_row(img);
    const int y0 = split == Split::top ? 0 : cut;
    const int y1 = split == Split::top ? cut : img.height();
    if (patch_size > y1 - y0 || patch_size > img.width())
        fail(ErrorKind::range, "patch size " + std::to_string(patch_size) +
                                   " exceeds the " + std::to_string(img.width()) + "x" +
                                   std::to_string(y1 - y0) + " sub-image");

    PatchSet set;
    set.role = split == Split::top ? Role::train : Role::test;
    set.illuminant = std::move(illuminant);
    set.patch_size = patch_size;
    for (int ty = y0; ty + patch_size <= y1; ty += patch_size) {
        for (int tx = 0; tx + patch_size <= img.width(); tx += patch_size) {
            RawImage patch(img.pattern(), patch_size, patch_size);
            for (int y = 0; y < patch_size; ++y)
                std::copy_n(img.data().begin() + static_cast<std::size_t>(ty + y) * img.width() + tx,
                            patch_size,
                            patch.data().begin() + static_cast<std::size_t>(y) * patch_size);
            set.patches.push_back(std::move(patch));
            set.labels.push_back(label);
            set.origins.emplace_back(tx, ty);
        }
    }
    return set;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, const std::filesystem::path& base)
{
    DatasetManifest m;
    try {
        m.msfa = j.at("msfa").get<std::string>();
        m.patch_size = j.at("patch_size").get<int>();
        for (const auto& s : j.at("scenes")) {
            Scene scene;
            scene.file = s.at("file").get<std::string>();
            if (scene.file.is_relative())
                scene.file = base / scene.file;
            scene.label = s.at("label").get<int>();
            m.scenes.push_back(std::move(scene));
        }
        for (const auto& r : j.at("renders")) {
            Render render;
            render.illuminant = r.at("illuminant").get<std::string>();
            const std::string split = r.value("split", "top");
            if (split != "top" && split != "bottom")
                fail(ErrorKind::config, "split must be 'top' or 'bottom'");
            render.split = split == "top" ? Split::top : Split::bottom;
            render.role = role_from_string(r.value("role", split == "top" ? "train" : "test"));
            m.renders.push_back(std::move(render));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("bad dataset manifest: ") + e.what());
    }
    return m;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::io, "cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, "manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
}

} // namespace rawmix
