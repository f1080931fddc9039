#pragma once

// MSFA sampling model: the B x B basic pattern, raw mosaics, and the exact
// pixel unshuffle/shuffle rearrangements between them.
//
// Conventions used throughout the toolkit:
//   * band_grid is indexed [row][col] = [y mod B][x mod B];
//   * images are row-major, value(x, y) = data[y * width + x];
//   * cube planes are ordered by band index.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rawmix {

class MsfaPattern {
public:
    /// Validates that band_grid is a bijection onto [0, B^2) and that there is
    /// one strictly positive wavelength per band.
    MsfaPattern(std::string id, int width, std::vector<int> band_grid,
                std::vector<double> wavelengths);

    static MsfaPattern imec2x2();
    static MsfaPattern imec4x4();
    static MsfaPattern imec5x5();
    /// "imec2x2" | "imec4x4" | "imec5x5"
    static MsfaPattern by_id(std::string_view id);
    static std::vector<std::string> builtin_ids();

    const std::string& id() const noexcept { return id_; }
    int width() const noexcept { return width_; }
    int band_count() const noexcept { return width_ * width_; }
    int band(int row, int col) const noexcept { return grid_[row * width_ + col]; }
    std::span<const int> band_grid() const noexcept { return grid_; }
    std::span<const double> wavelengths() const noexcept { return wavelengths_; }
    double wavelength(int band) const { return wavelengths_.at(band); }

    /// Cell of `band` inside the basic pattern.
    int row_of(int band) const { return cell_row_.at(band); }
    int col_of(int band) const { return cell_col_.at(band); }

    friend bool operator==(const MsfaPattern& a, const MsfaPattern& b)
    {
        return a.width_ == b.width_ && a.grid_ == b.grid_ && a.wavelengths_ == b.wavelengths_;
    }

private:
    std::string id_;
    int width_;
    std::vector<int> grid_;
    std::vector<double> wavelengths_;
    std::vector<int> cell_row_;
    std::vector<int> cell_col_;
};

/// Single-channel mosaic; pixel (x, y) samples band band_grid[y mod B][x mod B].
class RawImage {
public:
    RawImage(MsfaPattern pattern, int height, int width);
    RawImage(MsfaPattern pattern, int height, int width, std::vector<double> data);

    const MsfaPattern& pattern() const noexcept { return pattern_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    /// Basic patterns per row / per column (m along x and y).
    int cells_x() const noexcept { return width_ / pattern_.width(); }
    int cells_y() const noexcept { return height_ / pattern_.width(); }

    double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

private:
    MsfaPattern pattern_;
    int height_;
    int width_;
    std::vector<double> data_;
};

/// B^2 planes of identical size, plane b holding band b. Used both for the
/// unshuffled m x m cube and for fully-defined (m*B) x (m*B) images.
class PlaneCube {
public:
    PlaneCube(MsfaPattern pattern, int height, int width);
    /// `channels` must equal B^2 (structure error otherwise).
    PlaneCube(MsfaPattern pattern, int channels, int height, int width, std::vector<double> data);

    const MsfaPattern& pattern() const noexcept { return pattern_; }
    int channels() const noexcept { return pattern_.band_count(); }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }

    double at(int channel, int x, int y) const
    {
        return data_[channel * plane_size() + static_cast<std::size_t>(y) * width_ + x];
    }
    double& at(int channel, int x, int y)
    {
        return data_[channel * plane_size() + static_cast<std::size_t>(y) * width_ + x];
    }

    std::span<const double> plane(int channel) const
    {
        return std::span<const double>(data_).subspan(channel * plane_size(), plane_size());
    }
    std::span<double> plane(int channel)
    {
        return std::span<double>(data_).subspan(channel * plane_size(), plane_size());
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

private:
    MsfaPattern pattern_;
    int height_;
    int width_;
    std::vector<double> data_;
};

/// MSFA(p): band sampled at pixel (x, y). Coordinate error when out of bounds.
int band_at(const RawImage& img, int x, int y);

PlaneCube pixel_unshuffle(const RawImage& img);
RawImage pixel_shuffle(const PlaneCube& cube);

/// Spatio-spectral subsampling of a fully-defined image: the raw value at p is
/// channel MSFA(p) of `full` at p. Structure error if sides are not multiples of B.
RawImage mosaic(const PlaneCube& full);

/// Raw image whose every pixel carries values[MSFA(p)].
RawImage tile_band_values(const MsfaPattern& pattern, int height, int width,
                          std::span<const double> values);

/// 16-bit ingestion convention: value / 65535.
inline double normalize_u16(std::uint16_t v) { return static_cast<double>(v) / 65535.0; }

} // namespace rawmix
