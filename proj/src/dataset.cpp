#include "dmgmap/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace dmgmap {

namespace {

constexpr std::string_view kDisasterNames[] = {"earthquake", "flood", "storm", "volcano", "wildfire", "tsunami"};

void check_grid(const RasterGrid& g, std::size_t channels, const char* name) {
    if (g.channels() != channels || g.height() != kPatchSize || g.width() != kPatchSize) {
        throw DataError(std::string("bundle grid ") + name + " must be " + std::to_string(channels) + "x128x128, got " +
                        std::to_string(g.channels()) + "x" + std::to_string(g.height()) + "x" +
                        std::to_string(g.width()));
    }
    if (g.has_nodata()) {
        throw DataError(std::string("bundle grid ") + name + " carries a nodata mask; fold it into the label");
    }
}

bool point_in_polygon(const FootprintPolygon& poly, Point2 p) {
    bool inside = false;
    for (const auto& ring : poly.rings) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point2 a = ring[i];
            const Point2 b = ring[j];
            if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

Point2 pixel_centre(const GeoRect& fp, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
    return {fp.west + (static_cast<double>(x) + 0.5) * fp.width() / static_cast<double>(w),
            fp.north - (static_cast<double>(y) + 0.5) * fp.height() / static_cast<double>(h)};
}

std::vector<Point2> parse_ring(const nlohmann::json& coords) {
    std::vector<Point2> ring;
    for (const auto& pt : coords) {
        ring.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
    }
    if (ring.size() < 3) {
        throw DataError("footprint ring with fewer than 3 vertices");
    }
    return ring;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
        s.pop_back();
    }
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) {
        ++i;
    }
    return s.substr(i);
}

} // namespace

std::string_view disaster_type_name(DisasterType t) { return kDisasterNames[static_cast<int>(t)]; }

DisasterType parse_disaster_type(std::string_view name) {
    for (int i = 0; i < 6; ++i) {
        if (kDisasterNames[i] == name) {
            return static_cast<DisasterType>(i);
        }
    }
    throw DataError("unknown disaster type '" + std::string(name) + "'");
}

std::string_view orbit_direction_name(OrbitDirection d) {
    return d == OrbitDirection::Ascending ? "ascending" : "descending";
}

OrbitDirection parse_orbit_direction(std::string_view name) {
    if (name == "ascending") return OrbitDirection::Ascending;
    if (name == "descending") return OrbitDirection::Descending;
    throw DataError("unknown orbit direction '" + std::string(name) + "'");
}

void PatchBundle::validate() const {
    check_grid(s1_pre, kS1Channels, "s1_pre");
    check_grid(s1_post, kS1Channels, "s1_post");
    check_grid(s2_pre, kS2Channels, "s2_pre");
    check_grid(s2_post, kS2Channels, "s2_post");
    if (label.height() != kPatchSize || label.width() != kPatchSize) {
        throw DataError("bundle label must be 128x128");
    }
    for (auto v : label.values()) {
        if (!is_valid_class_code(v)) {
            throw DataError("bundle label holds code " + std::to_string(v));
        }
    }
    if (patch_id.empty()) {
        throw DataError("bundle without patch_id");
    }
}

bool PatchBundle::bitwise_equal(const PatchBundle& o) const {
    return patch_id == o.patch_id && event_id == o.event_id && disaster_type == o.disaster_type &&
           s1_pre.bitwise_equal(o.s1_pre) && s1_post.bitwise_equal(o.s1_post) && s2_pre.bitwise_equal(o.s2_pre) &&
           s2_post.bitwise_equal(o.s2_post) && label == o.label && s1_pre_date == o.s1_pre_date &&
           s1_post_date == o.s1_post_date && s2_pre_date == o.s2_pre_date && s2_post_date == o.s2_post_date &&
           orbit_direction == o.orbit_direction;
}

// ---------------------------------------------------------------------------

DamageGrade parse_damage_grade(std::string_view name) {
    if (name == "no-damage" || name == "no_damage" || name == "intact") return DamageGrade::NoDamage;
    if (name == "minor-damage" || name == "minor") return DamageGrade::Minor;
    if (name == "major-damage" || name == "major") return DamageGrade::Major;
    if (name == "destroyed") return DamageGrade::Destroyed;
    if (name == "un-classified" || name == "unclassified") return DamageGrade::Unclassified;
    throw DataError("unknown damage grade '" + std::string(name) + "'");
}

FootprintLabelSource parse_footprints_geojson(std::string_view text) {
    FootprintLabelSource src;
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.value("type", std::string{}) != "FeatureCollection") {
            throw DataError("footprints: expected a GeoJSON FeatureCollection");
        }
        for (const auto& feature : doc.at("features")) {
            const auto grade = parse_damage_grade(feature.at("properties").at("damage").get<std::string>());
            const auto& geom = feature.at("geometry");
            const auto type = geom.at("type").get<std::string>();
            auto add_polygon = [&](const nlohmann::json& rings) {
                FootprintPolygon poly;
                poly.grade = grade;
                for (const auto& ring : rings) {
                    poly.rings.push_back(parse_ring(ring));
                }
                src.polygons.push_back(std::move(poly));
            };
            if (type == "Polygon") {
                add_polygon(geom.at("coordinates"));
            } else if (type == "MultiPolygon") {
                for (const auto& rings : geom.at("coordinates")) {
                    add_polygon(rings);
                }
            } else {
                throw DataError("footprints: unsupported geometry type " + type);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("footprints: ") + e.what());
    }
    return src;
}

GradeMap rasterize_footprints(const FootprintLabelSource& source, const GeoRect& footprint, std::size_t height,
                              std::size_t width) {
    GradeMap map{height, width, std::vector<std::uint8_t>(height * width, 0)};
    for (const auto& poly : source.polygons) {
        if (poly.rings.empty()) {
            continue;
        }
        double lo_x = poly.rings[0][0].x, hi_x = lo_x, lo_y = poly.rings[0][0].y, hi_y = lo_y;
        for (const auto& p : poly.rings[0]) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
        const auto code = static_cast<std::uint8_t>(poly.grade);
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const Point2 c = pixel_centre(footprint, y, x, height, width);
                if (c.x < lo_x || c.x > hi_x || c.y < lo_y || c.y > hi_y) {
                    continue;
                }
                auto& v = map.values[y * width + x];
                if (code > v && point_in_polygon(poly, c)) {
                    v = code;
                }
            }
        }
    }
    return map;
}

ClassMap simplify_labels(const GradeMap& grades) {
    std::vector<std::uint8_t> out(grades.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        switch (grades.values[i]) {
        case 0: out[i] = 0; break;
        case 1: out[i] = 1; break;
        case 2:
        case 3:
        case 4: out[i] = 2; break;
        case 5: out[i] = 255; break;
        default: throw DataError("unknown source damage code " + std::to_string(grades.values[i]));
        }
    }
    return ClassMap(grades.height, grades.width, std::move(out));
}

Mask build_invalid_mask(const Mask& coverage_gap, const Mask& unclassified) {
    if (!coverage_gap.same_shape(unclassified)) {
        throw DataError("build_invalid_mask: mask dimensions differ");
    }
    Mask out(coverage_gap.height, coverage_gap.width);
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
        out.bits[i] = (coverage_gap.bits[i] || unclassified.bits[i]) ? 1 : 0;
    }
    return out;
}

Mask coverage_gap_mask(const GeoRect& vhr_coverage, const GeoRect& footprint, std::size_t height, std::size_t width) {
    Mask gap(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const Point2 c = pixel_centre(footprint, y, x, height, width);
            const bool covered = c.x >= vhr_coverage.west && c.x <= vhr_coverage.east && c.y >= vhr_coverage.south &&
                                 c.y <= vhr_coverage.north;
            gap.set(y, x, !covered);
        }
    }
    return gap;
}

// ---------------------------------------------------------------------------

RasterGrid extract_patch(const RasterGrid& tile, const GeoRect& footprint, const AffineTransform2D& transform,
                         std::size_t out_size, int lobes) {
    if (footprint.empty()) {
        throw DataError("extract_patch: empty footprint");
    }
    const auto inv = transform.inverse();
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    bool first = true;
    for (Point2 corner : {Point2{footprint.west, footprint.north}, Point2{footprint.east, footprint.north},
                          Point2{footprint.east, footprint.south}, Point2{footprint.west, footprint.south}}) {
        const Point2 p = inv.apply(corner);
        if (first) {
            min_x = max_x = p.x;
            min_y = max_y = p.y;
            first = false;
        }
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    constexpr double snap = 1e-9;
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(min_x + snap));
    const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(max_x - snap));
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(min_y + snap));
    const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(max_y - snap));
    const auto tw = static_cast<std::ptrdiff_t>(tile.width());
    const auto th = static_cast<std::ptrdiff_t>(tile.height());
    if (x1 <= 0 || y1 <= 0 || x0 >= tw || y0 >= th || x1 <= x0 || y1 <= y0) {
        throw DataError("extract_patch: footprint does not intersect the tile");
    }

    const auto wc = static_cast<std::size_t>(x1 - x0);
    const auto hc = static_cast<std::size_t>(y1 - y0);
    RasterGrid crop(tile.channels(), hc, wc);
    std::vector<std::uint8_t> nodata(hc * wc, 0);
    bool any_nodata = false;
    for (std::size_t y = 0; y < hc; ++y) {
        const std::ptrdiff_t sy = y0 + static_cast<std::ptrdiff_t>(y);
        for (std::size_t x = 0; x < wc; ++x) {
            const std::ptrdiff_t sx = x0 + static_cast<std::ptrdiff_t>(x);
            const bool inside = sx >= 0 && sy >= 0 && sx < tw && sy < th;
            if (!inside || tile.is_nodata(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx))) {
                nodata[y * wc + x] = 1;
                any_nodata = true;
                continue;
            }
            for (std::size_t c = 0; c < tile.channels(); ++c) {
                crop.at(c, y, x) = tile.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        }
    }
    if (any_nodata) {
        crop.set_nodata_mask(std::move(nodata));
    }
    crop.set_geotransform(transform.compose(AffineTransform2D::translation(static_cast<double>(x0), static_cast<double>(y0))));

    RasterGrid out = lanczos_resample(crop, out_size, out_size, lobes);

    // Output pixels whose centre lies outside the tile are nodata regardless of
    // how far the kernel reached.
    std::vector<std::uint8_t> mask = out.nodata_mask().value_or(std::vector<std::uint8_t>(out_size * out_size, 0));
    bool any = out.has_nodata();
    const double sx = static_cast<double>(wc) / static_cast<double>(out_size);
    const double sy = static_cast<double>(hc) / static_cast<double>(out_size);
    for (std::size_t oy = 0; oy < out_size; ++oy) {
        const double ty = static_cast<double>(y0) + (static_cast<double>(oy) + 0.5) * sy;
        for (std::size_t ox = 0; ox < out_size; ++ox) {
            const double tx = static_cast<double>(x0) + (static_cast<double>(ox) + 0.5) * sx;
            if (tx < 0.0 || ty < 0.0 || tx >= static_cast<double>(tw) || ty >= static_cast<double>(th)) {
                mask[oy * out_size + ox] = 1;
                for (std::size_t c = 0; c < out.channels(); ++c) {
                    out.at(c, oy, ox) = 0.0f;
                }
                any = true;
            }
        }
    }
    if (any) {
        out.set_nodata_mask(std::move(mask));
    }
    return out;
}

PatchBundle assemble_bundle(const PatchSource& src) {
    PatchBundle b;
    b.patch_id = src.patch_id;
    b.event_id = src.event_id;
    b.disaster_type = src.disaster_type;
    b.orbit_direction = src.orbit_direction;
    b.s1_pre_date = src.s1_pre.date;
    b.s1_post_date = src.s1_post.date;
    b.s2_pre_date = src.s2_pre.date;
    b.s2_post_date = src.s2_post.date;

    const auto grades = rasterize_footprints(src.footprints, src.footprint);
    Mask unclassified(kPatchSize, kPatchSize);
    for (std::size_t i = 0; i < grades.values.size(); ++i) {
        unclassified.bits[i] = grades.values[i] == static_cast<std::uint8_t>(DamageGrade::Unclassified) ? 1 : 0;
    }
    const Mask gap = src.vhr_coverage ? coverage_gap_mask(*src.vhr_coverage, src.footprint) : Mask(kPatchSize, kPatchSize);
    Mask invalid = build_invalid_mask(gap, unclassified);

    auto take = [&](const StagedRaster& staged, std::size_t channels, const char* name) {
        if (staged.grid.channels() != channels) {
            throw DataError(std::string("staged raster ") + name + " has " + std::to_string(staged.grid.channels()) +
                            " channels, expected " + std::to_string(channels));
        }
        if (!staged.grid.geotransform()) {
            throw DataError(std::string("staged raster ") + name + " has no geotransform");
        }
        RasterGrid g = extract_patch(staged.grid, src.footprint, *staged.grid.geotransform());
        if (g.has_nodata()) {
            const auto& nd = *g.nodata_mask();
            for (std::size_t i = 0; i < nd.size(); ++i) {
                if (nd[i]) {
                    invalid.bits[i] = 1;
                }
            }
            g.clear_nodata_mask();
        }
        return g;
    };
    b.s1_pre = take(src.s1_pre, kS1Channels, "s1_pre");
    b.s1_post = take(src.s1_post, kS1Channels, "s1_post");
    b.s2_pre = take(src.s2_pre, kS2Channels, "s2_pre");
    b.s2_post = take(src.s2_post, kS2Channels, "s2_post");

    b.label = simplify_labels(grades);
    b.label.apply_invalid(invalid);
    b.validate();
    return b;
}

// ---------------------------------------------------------------------------

std::string_view split_name(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

SplitKind parse_split_kind(std::string_view name) {
    if (name == "xview2") return SplitKind::XView2;
    if (name == "event_based") return SplitKind::EventBased;
    throw ConfigError("unknown split scheme '" + std::string(name) + "' (expected xview2 or event_based)");
}

std::vector<std::string> SplitScheme::patches_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, split] : assignment) {
        if (split == s) {
            out.push_back(id);
        }
    }
    return out;
}

SplitScheme parse_split_csv(std::string_view text, SplitKind kind) {
    SplitScheme scheme;
    scheme.kind = kind;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || trim(line) != "patch_id,event_id,split") {
        throw DataError("split file must start with the header patch_id,event_id,split");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string col;
        while (std::getline(ls, col, ',')) {
            cols.push_back(trim(col));
        }
        if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
            throw DataError("split file line " + std::to_string(line_no) + ": expected 3 columns");
        }
        Split s;
        if (cols[2] == "train") {
            s = Split::Train;
        } else if (cols[2] == "val") {
            s = Split::Val;
        } else if (cols[2] == "test") {
            s = Split::Test;
        } else {
            throw DataError("split file line " + std::to_string(line_no) + ": unknown split '" + cols[2] + "'");
        }
        if (!scheme.assignment.emplace(cols[0], s).second) {
            throw DataError("split file: duplicate patch " + cols[0]);
        }
        scheme.event_of[cols[0]] = cols[1];
    }
    validate_split(scheme);
    return scheme;
}

std::string split_to_csv(const SplitScheme& scheme) {
    std::string out = "patch_id,event_id,split\n";
    for (const auto& [id, s] : scheme.assignment) {
        out += id + "," + scheme.event_of.at(id) + "," + std::string(split_name(s)) + "\n";
    }
    return out;
}

void validate_split(const SplitScheme& scheme) {
    if (scheme.kind != SplitKind::EventBased) {
        return;
    }
    std::set<std::string> fit_events;
    std::set<std::string> test_events;
    for (const auto& [id, s] : scheme.assignment) {
        (s == Split::Test ? test_events : fit_events).insert(scheme.event_of.at(id));
    }
    for (const auto& e : test_events) {
        if (fit_events.count(e)) {
            throw DataError("event-based split: event " + e + " appears in both train/val and test");
        }
    }
}

std::map<std::string, SplitProportions> split_proportions(const SplitScheme& scheme) {
    std::map<std::string, SplitProportions> out;
    for (const auto& [id, s] : scheme.assignment) {
        auto& p = out[scheme.event_of.at(id)];
        (s == Split::Train ? p.train : s == Split::Val ? p.val : p.test) += 1;
    }
    return out;
}

} // namespace dmgmap
