#include "rawmix/msfa.hpp"

#include "rawmix/error.hpp"

#include <numeric>

namespace rawmix {
namespace {

std::vector<int> row_major_grid(int width)
{
    std::vector<int> grid(static_cast<std::size_t>(width) * width);
    std::iota(grid.begin(), grid.end(), 0);
    return grid;
}

std::vector<double> evenly_spaced(double first, double last, int count)
{
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i)
        out[i] = first + (last - first) * i / (count - 1);
    return out;
}

void check_dims(const MsfaPattern& pattern, int height, int width)
{
    const int b = pattern.width();
    if (height <= 0 || width <= 0 || height % b != 0 || width % b != 0)
        fail(ErrorKind::structure, "image size " + std::to_string(width) + "x" +
                                       std::to_string(height) +
                                       " is not a positive multiple of the basic pattern width " +
                                       std::to_string(b));
}

} // namespace

MsfaPattern::MsfaPattern(std::string id, int width, std::vector<int> band_grid,
                         std::vector<double> wavelengths)
    : id_(std::move(id)), width_(width), grid_(std::move(band_grid)),
      wavelengths_(std::move(wavelengths))
{
    if (width_ < 1)
        fail(ErrorKind::structure, "MSFA width must be positive");
    const int bands = width_ * width_;
    if (static_cast<int>(grid_.size()) != bands)
        fail(ErrorKind::structure, "band grid must have B^2 = " + std::to_string(bands) + " cells");
    if (static_cast<int>(wavelengths_.size()) != bands)
        fail(ErrorKind::structure,
             "expected " + std::to_string(bands) + " wavelengths, got " +
                 std::to_string(wavelengths_.size()));
    cell_row_.assign(bands, -1);
    cell_col_.assign(bands, -1);
    for (int r = 0; r < width_; ++r) {
        for (int c = 0; c < width_; ++c) {
            const int b = grid_[r * width_ + c];
            if (b < 0 || b >= bands || cell_row_[b] != -1)
                fail(ErrorKind::structure, "band grid is not a bijection onto [0, B^2)");
            cell_row_[b] = r;
            cell_col_[b] = c;
        }
    }
    for (double w : wavelengths_)
        if (!(w > 0.0))
            fail(ErrorKind::structure, "wavelengths must be strictly positive");
}

MsfaPattern MsfaPattern::imec2x2()
{
    // VIS-NIR RGB+NIR sensor: 465 nm .. 811 nm
    return MsfaPattern("imec2x2", 2, row_major_grid(2), {465.0, 546.0, 630.0, 811.0});
}

MsfaPattern MsfaPattern::imec4x4()
{
    return MsfaPattern("imec4x4", 4, row_major_grid(4), evenly_spaced(469.0, 633.0, 16));
}

MsfaPattern MsfaPattern::imec5x5()
{
    return MsfaPattern("imec5x5", 5, row_major_grid(5), evenly_spaced(678.0, 960.0, 25));
}

MsfaPattern MsfaPattern::by_id(std::string_view id)
{
    if (id == "imec2x2")
        return imec2x2();
    if (id == "imec4x4")
        return imec4x4();
    if (id == "imec5x5")
        return imec5x5();
    fail(ErrorKind::config, "unknown MSFA id '" + std::string(id) + "'");
}

std::vector<std::string> MsfaPattern::builtin_ids()
{
    return {"imec2x2", "imec4x4", "imec5x5"};
}

RawImage::RawImage(MsfaPattern pattern, int height, int width)
    : pattern_(std::move(pattern)), height_(height), width_(width)
{
    check_dims(pattern_, height_, width_);
    data_.assign(static_cast<std::size_t>(height_) * width_, 0.0);
}

RawImage::RawImage(MsfaPattern pattern, int height, int width, std::vector<double> data)
    : pattern_(std::move(pattern)), height_(height), width_(width), data_(std::move(data))
{
    check_dims(pattern_, height_, width_);
    if (data_.size() != static_cast<std::size_t>(height_) * width_)
        fail(ErrorKind::structure, "raw data length does not match " + std::to_string(width_) +
                                       "x" + std::to_string(height_));
}

PlaneCube::PlaneCube(MsfaPattern pattern, int height, int width)
    : pattern_(std::move(pattern)), height_(height), width_(width)
{
    if (height_ <= 0 || width_ <= 0)
        fail(ErrorKind::structure, "plane size must be positive");
    data_.assign(static_cast<std::size_t>(channels()) * plane_size(), 0.0);
}

PlaneCube::PlaneCube(MsfaPattern pattern, int channels, int height, int width,
                     std::vector<double> data)
    : pattern_(std::move(pattern)), height_(height), width_(width), data_(std::move(data))
{
    if (channels != pattern_.band_count())
        fail(ErrorKind::structure, "cube has " + std::to_string(channels) +
                                       " channels, MSFA requires " +
                                       std::to_string(pattern_.band_count()));
    if (height_ <= 0 || width_ <= 0)
        fail(ErrorKind::structure, "plane size must be positive");
    if (data_.size() != static_cast<std::size_t>(channels) * plane_size())
        fail(ErrorKind::structure, "cube data length does not match its shape");
}

int band_at(const RawImage& img, int x, int y)
{
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height())
        fail(ErrorKind::coordinate, "pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                        ") outside " + std::to_string(img.width()) + "x" +
                                        std::to_string(img.height()));
    const int b = img.pattern().width();
    return img.pattern().band(y % b, x % b);
}

PlaneCube pixel_unshuffle(const RawImage& img)
{
    const MsfaPattern& pat = img.pattern();
    const int b = pat.width();
    const int mx = img.cells_x();
    const int my = img.cells_y();
    PlaneCube cube(pat, my, mx);
    for (int j = 0; j < b; ++j) {
        for (int i = 0; i < b; ++i) {
            std::span<double> plane = cube.plane(pat.band(j, i));
            for (int y = 0; y < my; ++y) {
                const double* src = img.data().data() + static_cast<std::size_t>(y * b + j) * img.width() + i;
                double* dst = plane.data() + static_cast<std::size_t>(y) * mx;
                for (int x = 0; x < mx; ++x)
                    dst[x] = src[static_cast<std::size_t>(x) * b];
            }
        }
    }
    return cube;
}

RawImage pixel_shuffle(const PlaneCube& cube)
{
    const MsfaPattern& pat = cube.pattern();
    const int b = pat.width();
    const int mx = cube.width();
    const int my = cube.height();
    RawImage img(pat, my * b, mx * b);
    const int w = img.width();
    for (int j = 0; j < b; ++j) {
        for (int i = 0; i < b; ++i) {
            std::span<const double> plane = cube.plane(pat.band(j, i));
            for (int y = 0; y < my; ++y) {
                const double* src = plane.data() + static_cast<std::size_t>(y) * mx;
                double* dst = img.data().data() + static_cast<std::size_t>(y * b + j) * w + i;
                for (int x = 0; x < mx; ++x)
                    dst[static_cast<std::size_t>(x) * b] = src[x];
            }
        }
    }
    return img;
}

RawImage mosaic(const PlaneCube& full)
{
    const MsfaPattern& pat = full.pattern();
    const int b = pat.width();
    check_dims(pat, full.height(), full.width());
    RawImage img(pat, full.height(), full.width());
    for (int y = 0; y < full.height(); ++y)
        for (int x = 0; x < full.width(); ++x)
            img.at(x, y) = full.at(pat.band(y % b, x % b), x, y);
    return img;
}

RawImage tile_band_values(const MsfaPattern& pattern, int height, int width,
                          std::span<const double> values)
{
    if (static_cast<int>(values.size()) != pattern.band_count())
        fail(ErrorKind::structure, "need one value per band");
    RawImage img(pattern, height, width);
    const int b = pattern.width();
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at(x, y) = values[pattern.band(y % b, x % b)];
    return img;
}

} // namespace rawmix
