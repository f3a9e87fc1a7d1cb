#pragma once

#include "dmgmap/affine.hpp"
#include "dmgmap/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmgmap {

/// Per-pixel binary map, row-major, one byte per pixel (0 or 1).
struct Mask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(std::size_t h, std::size_t w, bool value = false) : height(h), width(w), bits(h * w, value ? 1 : 0) {}

    bool get(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v = true) { bits[y * width + x] = v ? 1 : 0; }
    std::size_t count() const;
    bool same_shape(const Mask& o) const noexcept { return height == o.height && width == o.width; }

    friend bool operator==(const Mask&, const Mask&) = default;
};

/// C x H x W samples stored channel-major, with an optional per-pixel nodata
/// mask (shared by all channels) and an optional pixel-to-map geotransform.
class RasterGrid {
public:
    RasterGrid() = default;
    RasterGrid(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f);
    RasterGrid(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return height_ * width_; }

    float& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * height_ + y) * width_ + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * height_ + y) * width_ + x]; }

    std::span<float> channel(std::size_t c) { return {data_.data() + c * pixel_count(), pixel_count()}; }
    std::span<const float> channel(std::size_t c) const { return {data_.data() + c * pixel_count(), pixel_count()}; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool has_nodata() const noexcept { return nodata_.has_value(); }
    /// Row-major, 1 = nodata. Length is height * width.
    const std::optional<std::vector<std::uint8_t>>& nodata_mask() const noexcept { return nodata_; }
    void set_nodata_mask(std::vector<std::uint8_t> mask);
    void clear_nodata_mask() noexcept { nodata_.reset(); }
    bool is_nodata(std::size_t y, std::size_t x) const { return nodata_ && (*nodata_)[y * width_ + x] != 0; }

    const std::optional<AffineTransform2D>& geotransform() const noexcept { return geotransform_; }
    void set_geotransform(std::optional<AffineTransform2D> t) noexcept { geotransform_ = t; }

    /// Sample-for-sample equality of bit patterns (NaN payloads included).
    bool bitwise_equal(const RasterGrid& other) const;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
    std::optional<std::vector<std::uint8_t>> nodata_;
    std::optional<AffineTransform2D> geotransform_;
};

enum class PixelClass : std::uint8_t {
    Background = 0,
    Intact = 1,
    Damaged = 2,
    Invalid = 255,
};

constexpr bool is_valid_class_code(std::uint8_t v) noexcept { return v <= 2 || v == 255; }
constexpr bool is_building_code(std::uint8_t v) noexcept { return v == 1 || v == 2; }

/// Per-pixel damage map. Codes: 0 background, 1 intact, 2 damaged, 255 invalid.
class ClassMap {
public:
    ClassMap() = default;
    ClassMap(std::size_t height, std::size_t width, PixelClass fill = PixelClass::Background);
    /// Throws DataError if any value is outside {0, 1, 2, 255}.
    ClassMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> values);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::uint8_t at(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
    void set(std::size_t y, std::size_t x, PixelClass c) { values_[y * width_ + x] = static_cast<std::uint8_t>(c); }
    std::span<const std::uint8_t> values() const noexcept { return values_; }

    Mask building_mask() const;
    Mask invalid_mask() const;
    /// Marks every set pixel of `mask` as invalid.
    void apply_invalid(const Mask& mask);

    friend bool operator==(const ClassMap&, const ClassMap&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> values_;
};

struct ChannelStats {
    double p1 = 0.0;
    double p99 = 1.0;

    friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

struct NormStats {
    std::vector<ChannelStats> channels;

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

class DegenerateChannelError : public DataError {
public:
    DegenerateChannelError(std::size_t channel, double value);
    std::size_t channel() const noexcept { return channel_; }

private:
    std::size_t channel_;
};

inline constexpr int kDefaultLanczosLobes = 3;

/// Separable Lanczos resampling with pixel-centre alignment. The kernel is
/// stretched when downsampling. Taps outside the grid or flagged nodata are
/// dropped and the remaining weights renormalised; an output pixel with no
/// usable taps becomes nodata.
RasterGrid lanczos_resample(const RasterGrid& src, std::size_t out_height, std::size_t out_width,
                            int lobes = kDefaultLanczosLobes);

/// Union of `mask` translated by every offset with max(|dx|, |dy|) <= radius.
Mask dilate_mask(const Mask& mask, int radius);

/// Percentile in [0, 100] of an ascending-sorted sample, linear interpolation
/// between the closest order statistics.
double sorted_percentile(std::span<const float> sorted, double percent);

/// Per-channel 1st/99th percentiles over all non-nodata samples of the given
/// grids. Throws DegenerateChannelError when p99 == p1 for some channel.
NormStats fit_norm_stats(std::span<const RasterGrid* const> patches);
NormStats fit_norm_stats(std::span<const RasterGrid> patches);

/// clip((x - p1) / (p99 - p1), 0, 1) per channel; nodata samples are left as is.
RasterGrid normalize(const RasterGrid& grid, const NormStats& stats);
void normalize_in_place(RasterGrid& grid, const NormStats& stats);

std::string norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(std::string_view text);

} // namespace dmgmap
