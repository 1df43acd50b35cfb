#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xlab {

// W x H (x C) raster of doubles, row-major within a channel, channels stored
// as consecutive blocks. All values are finite.
class FloatGrid {
public:
    FloatGrid() = default;

    // Zero-filled grid.
    FloatGrid(std::size_t width, std::size_t height, std::size_t channels = 1);

    // Throws DataError if the value count does not match or a value is not finite.
    FloatGrid(std::size_t width, std::size_t height, std::size_t channels, std::vector<double> values);

    static FloatGrid filled(std::size_t width, std::size_t height, std::size_t channels, double value);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t pixels() const noexcept { return width_ * height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    double operator()(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return values_[(c * height_ + y) * width_ + x];
    }
    double& operator()(std::size_t x, std::size_t y, std::size_t c = 0) {
        return values_[(c * height_ + y) * width_ + x];
    }

    bool same_shape(const FloatGrid& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    bool same_spatial(const FloatGrid& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    // Throws DataError if any value is NaN or infinite.
    void check_finite() const;

    std::string shape_string() const;

    friend bool operator==(const FloatGrid&, const FloatGrid&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> values_;
};

// Single-channel grid with every value in [0, 1].
class SaliencyMap {
public:
    // Throws DataError on channels != 1 or any value outside [0, 1].
    explicit SaliencyMap(FloatGrid grid);

    const FloatGrid& grid() const noexcept { return grid_; }

private:
    FloatGrid grid_;
};

// Shortest decimal string that parses back to exactly `value`.
std::string format_real(double value);

// Strict parse of a finite decimal; returns false on any trailing garbage,
// NaN or infinity.
bool parse_real(std::string_view text, double& out);

// FGRID text codec:
//   fgrid <width> <height> <channels>
//   then channels blocks of height lines, each with width values.
std::string encode_fgrid(const FloatGrid& grid);
FloatGrid decode_fgrid(std::string_view text);

FloatGrid read_grid(const std::filesystem::path& path);
void write_grid(const FloatGrid& grid, const std::filesystem::path& path);

struct GridShape {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
};

// Parses only the header line.
GridShape read_grid_shape(const std::filesystem::path& path);

}  // namespace xlab
