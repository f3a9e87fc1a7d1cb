#include "dmgmap/raster.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace dmgmap {

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

// ---------------------------------------------------------------------------
// RasterGrid

RasterGrid::RasterGrid(std::size_t channels, std::size_t height, std::size_t width, float fill)
    : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

RasterGrid::RasterGrid(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != channels * height * width) {
        throw DataError("raster data length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width));
    }
}

void RasterGrid::set_nodata_mask(std::vector<std::uint8_t> mask) {
    if (mask.size() != pixel_count()) {
        throw DataError("nodata mask length does not match raster dimensions");
    }
    nodata_ = std::move(mask);
}

bool RasterGrid::bitwise_equal(const RasterGrid& other) const {
    if (channels_ != other.channels_ || height_ != other.height_ || width_ != other.width_) {
        return false;
    }
    if (nodata_ != other.nodata_ || geotransform_ != other.geotransform_) {
        return false;
    }
    return data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// ClassMap

ClassMap::ClassMap(std::size_t height, std::size_t width, PixelClass fill)
    : height_(height), width_(width), values_(height * width, static_cast<std::uint8_t>(fill)) {}

ClassMap::ClassMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height * width) {
        throw DataError("class map length does not match dimensions");
    }
    for (auto v : values_) {
        if (!is_valid_class_code(v)) {
            throw DataError("invalid class code " + std::to_string(v));
        }
    }
}

Mask ClassMap::building_mask() const {
    Mask m(height_, width_);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        m.bits[i] = is_building_code(values_[i]) ? 1 : 0;
    }
    return m;
}

Mask ClassMap::invalid_mask() const {
    Mask m(height_, width_);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        m.bits[i] = values_[i] == 255 ? 1 : 0;
    }
    return m;
}

void ClassMap::apply_invalid(const Mask& mask) {
    if (mask.height != height_ || mask.width != width_) {
        throw DataError("invalid mask shape does not match class map");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (mask.bits[i]) {
            values_[i] = 255;
        }
    }
}

DegenerateChannelError::DegenerateChannelError(std::size_t channel, double value)
    : DataError("degenerate channel " + std::to_string(channel) + ": p1 == p99 == " + std::to_string(value)),
      channel_(channel) {}

// ---------------------------------------------------------------------------
// Lanczos resampling

namespace {

double lanczos(double x, int lobes) {
    const double ax = std::abs(x);
    if (ax >= lobes) {
        return 0.0;
    }
    if (ax == 0.0) {
        return 1.0;
    }
    if (ax == std::round(ax)) {
        return 0.0;
    }
    const double px = std::numbers::pi * x;
    return lobes * std::sin(px) * std::sin(px / lobes) / (px * px);
}

struct Taps {
    std::ptrdiff_t first = 0;
    std::vector<double> weights;
};

// Tap positions and raw kernel weights for every output index along one axis.
std::vector<Taps> axis_taps(std::size_t in_size, std::size_t out_size, int lobes) {
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
    const double stretch = std::max(1.0, scale);
    const double support = lobes * stretch;
    std::vector<Taps> taps(out_size);
    for (std::size_t o = 0; o < out_size; ++o) {
        const double centre = (static_cast<double>(o) + 0.5) * scale - 0.5;
        auto lo = static_cast<std::ptrdiff_t>(std::ceil(centre - support));
        auto hi = static_cast<std::ptrdiff_t>(std::floor(centre + support));
        lo = std::max<std::ptrdiff_t>(lo, 0);
        hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(in_size) - 1);
        taps[o].first = lo;
        for (std::ptrdiff_t k = lo; k <= hi; ++k) {
            taps[o].weights.push_back(lanczos((static_cast<double>(k) - centre) / stretch, lobes));
        }
    }
    return taps;
}

} // namespace

RasterGrid lanczos_resample(const RasterGrid& src, std::size_t out_height, std::size_t out_width, int lobes) {
    if (out_height == 0 || out_width == 0) {
        throw DataError("lanczos_resample: zero-size target");
    }
    if (src.height() == 0 || src.width() == 0) {
        throw DataError("lanczos_resample: empty source grid");
    }
    if (lobes < 1) {
        throw DataError("lanczos_resample: lobes must be >= 1");
    }

    const std::size_t in_h = src.height();
    const std::size_t in_w = src.width();
    const auto col_taps = axis_taps(in_w, out_width, lobes);
    const auto row_taps = axis_taps(in_h, out_height, lobes);

    // Horizontal pass of the validity weights: den_h[y][ox] = sum_x w_x * valid,
    // cnt_h counts valid taps so that an all-nodata footprint is detected exactly.
    std::vector<double> den_h(in_h * out_width, 0.0);
    std::vector<std::uint32_t> cnt_h(in_h * out_width, 0);
    for (std::size_t y = 0; y < in_h; ++y) {
        for (std::size_t ox = 0; ox < out_width; ++ox) {
            const auto& t = col_taps[ox];
            double den = 0.0;
            std::uint32_t cnt = 0;
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const auto x = static_cast<std::size_t>(t.first) + k;
                if (!src.is_nodata(y, x)) {
                    den += t.weights[k];
                    ++cnt;
                }
            }
            den_h[y * out_width + ox] = den;
            cnt_h[y * out_width + ox] = cnt;
        }
    }

    std::vector<double> den(out_height * out_width, 0.0);
    std::vector<std::uint8_t> nodata(out_height * out_width, 0);
    bool any_nodata = false;
    for (std::size_t oy = 0; oy < out_height; ++oy) {
        const auto& t = row_taps[oy];
        for (std::size_t ox = 0; ox < out_width; ++ox) {
            double d = 0.0;
            std::uint32_t cnt = 0;
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const auto y = static_cast<std::size_t>(t.first) + k;
                d += t.weights[k] * den_h[y * out_width + ox];
                cnt += cnt_h[y * out_width + ox];
            }
            den[oy * out_width + ox] = d;
            if (cnt == 0 || !(d > 1e-12)) {
                nodata[oy * out_width + ox] = 1;
                any_nodata = true;
            }
        }
    }

    RasterGrid out(src.channels(), out_height, out_width);
    std::vector<double> num_h(in_h * out_width);
    for (std::size_t c = 0; c < src.channels(); ++c) {
        for (std::size_t y = 0; y < in_h; ++y) {
            for (std::size_t ox = 0; ox < out_width; ++ox) {
                const auto& t = col_taps[ox];
                double num = 0.0;
                for (std::size_t k = 0; k < t.weights.size(); ++k) {
                    const auto x = static_cast<std::size_t>(t.first) + k;
                    if (!src.is_nodata(y, x)) {
                        num += t.weights[k] * static_cast<double>(src.at(c, y, x));
                    }
                }
                num_h[y * out_width + ox] = num;
            }
        }
        for (std::size_t oy = 0; oy < out_height; ++oy) {
            const auto& t = row_taps[oy];
            for (std::size_t ox = 0; ox < out_width; ++ox) {
                const std::size_t o = oy * out_width + ox;
                if (nodata[o]) {
                    out.at(c, oy, ox) = 0.0f;
                    continue;
                }
                double num = 0.0;
                for (std::size_t k = 0; k < t.weights.size(); ++k) {
                    const auto y = static_cast<std::size_t>(t.first) + k;
                    num += t.weights[k] * num_h[y * out_width + ox];
                }
                out.at(c, oy, ox) = static_cast<float>(num / den[o]);
            }
        }
    }

    if (any_nodata) {
        out.set_nodata_mask(std::move(nodata));
    }
    if (src.geotransform()) {
        const double sx = static_cast<double>(in_w) / static_cast<double>(out_width);
        const double sy = static_cast<double>(in_h) / static_cast<double>(out_height);
        out.set_geotransform(src.geotransform()->compose({sx, 0.0, 0.0, 0.0, sy, 0.0}));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Morphology

Mask dilate_mask(const Mask& mask, int radius) {
    if (radius < 0) {
        throw DataError("dilate_mask: radius must be >= 0");
    }
    if (radius == 0 || mask.bits.empty()) {
        return mask;
    }
    const std::size_t h = mask.height;
    const std::size_t w = mask.width;
    const auto r = static_cast<std::ptrdiff_t>(radius);

    // The square element is separable: a row pass followed by a column pass,
    // each a sliding-window OR computed from prefix counts.
    Mask rows(h, w);
    std::vector<std::size_t> prefix(std::max(h, w) + 1);
    for (std::size_t y = 0; y < h; ++y) {
        prefix[0] = 0;
        for (std::size_t x = 0; x < w; ++x) {
            prefix[x + 1] = prefix[x] + (mask.get(y, x) ? 1 : 0);
        }
        for (std::size_t x = 0; x < w; ++x) {
            const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(x) - r));
            const auto hi = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1, static_cast<std::ptrdiff_t>(x) + r));
            rows.set(y, x, prefix[hi + 1] > prefix[lo]);
        }
    }
    Mask out(h, w);
    for (std::size_t x = 0; x < w; ++x) {
        prefix[0] = 0;
        for (std::size_t y = 0; y < h; ++y) {
            prefix[y + 1] = prefix[y] + (rows.get(y, x) ? 1 : 0);
        }
        for (std::size_t y = 0; y < h; ++y) {
            const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(y) - r));
            const auto hi = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1, static_cast<std::ptrdiff_t>(y) + r));
            out.set(y, x, prefix[hi + 1] > prefix[lo]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalisation

double sorted_percentile(std::span<const float> sorted, double percent) {
    if (sorted.empty()) {
        throw DataError("percentile of empty sample");
    }
    const double pos = percent / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

NormStats fit_norm_stats(std::span<const RasterGrid* const> patches) {
    if (patches.empty()) {
        throw DataError("fit_norm_stats: no training patches");
    }
    const std::size_t channels = patches.front()->channels();
    for (const auto* p : patches) {
        if (p->channels() != channels) {
            throw DataError("fit_norm_stats: patches disagree on channel count");
        }
    }
    NormStats stats;
    std::vector<float> sample;
    for (std::size_t c = 0; c < channels; ++c) {
        sample.clear();
        for (const auto* p : patches) {
            const auto values = p->channel(c);
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (!p->has_nodata() || (*p->nodata_mask())[i] == 0) {
                    sample.push_back(values[i]);
                }
            }
        }
        if (sample.empty()) {
            throw DataError("fit_norm_stats: channel " + std::to_string(c) + " has no valid samples");
        }
        std::sort(sample.begin(), sample.end());
        const double p1 = sorted_percentile(sample, 1.0);
        const double p99 = sorted_percentile(sample, 99.0);
        if (!(p99 > p1)) {
            throw DegenerateChannelError(c, p1);
        }
        stats.channels.push_back({p1, p99});
    }
    return stats;
}

NormStats fit_norm_stats(std::span<const RasterGrid> patches) {
    std::vector<const RasterGrid*> ptrs;
    ptrs.reserve(patches.size());
    for (const auto& p : patches) {
        ptrs.push_back(&p);
    }
    return fit_norm_stats(std::span<const RasterGrid* const>(ptrs));
}

void normalize_in_place(RasterGrid& grid, const NormStats& stats) {
    if (stats.channels.size() != grid.channels()) {
        throw DataError("normalize: stats have " + std::to_string(stats.channels.size()) + " channels, grid has " +
                        std::to_string(grid.channels()));
    }
    const auto& nodata = grid.nodata_mask();
    for (std::size_t c = 0; c < grid.channels(); ++c) {
        const double p1 = stats.channels[c].p1;
        const double range = stats.channels[c].p99 - p1;
        auto values = grid.channel(c);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (nodata && (*nodata)[i]) {
                continue;
            }
            const double v = (static_cast<double>(values[i]) - p1) / range;
            values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
}

RasterGrid normalize(const RasterGrid& grid, const NormStats& stats) {
    RasterGrid out = grid;
    normalize_in_place(out, stats);
    return out;
}

std::string norm_stats_to_json(const NormStats& stats) {
    nlohmann::json doc;
    doc["channels"] = nlohmann::json::array();
    for (const auto& ch : stats.channels) {
        doc["channels"].push_back({{"p1", ch.p1}, {"p99", ch.p99}});
    }
    return doc.dump(2);
}

NormStats norm_stats_from_json(std::string_view text) {
    NormStats stats;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& ch : doc.at("channels")) {
            ChannelStats s{ch.at("p1").get<double>(), ch.at("p99").get<double>()};
            if (!(s.p99 > s.p1)) {
                throw DataError("normalisation stats: p99 must exceed p1");
            }
            stats.channels.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("normalisation stats: ") + e.what());
    }
    return stats;
}

} // namespace dmgmap
