#pragma once

#include "dmgmap/affine.hpp"
#include "dmgmap/raster.hpp"
#include "dmgmap/scene_select.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmgmap {

inline constexpr std::size_t kPatchSize = 128;
inline constexpr std::size_t kS1Channels = 2;  // VV, VH
inline constexpr std::size_t kS2Channels = 12; // Level-2A bands

enum class DisasterType { Earthquake, Flood, Storm, Volcano, Wildfire, Tsunami };

std::string_view disaster_type_name(DisasterType t);
DisasterType parse_disaster_type(std::string_view name);
std::string_view orbit_direction_name(OrbitDirection d);
OrbitDirection parse_orbit_direction(std::string_view name);

/// One training example: four co-registered Sentinel patches and their label.
/// Pixels without data in any input are folded into the label's invalid code.
struct PatchBundle {
    std::string patch_id;
    std::string event_id;
    DisasterType disaster_type = DisasterType::Storm;
    RasterGrid s1_pre;
    RasterGrid s1_post;
    RasterGrid s2_pre;
    RasterGrid s2_post;
    ClassMap label;
    Date s1_pre_date{};
    Date s1_post_date{};
    Date s2_pre_date{};
    Date s2_post_date{};
    OrbitDirection orbit_direction = OrbitDirection::Ascending;

    /// Throws DataError when shapes or channel counts are wrong.
    void validate() const;
    bool bitwise_equal(const PatchBundle& other) const;
};

// ---------------------------------------------------------------------------
// Labels

/// Source damage grades as annotated on the footprints.
enum class DamageGrade : std::uint8_t {
    None = 0, // no building
    NoDamage = 1,
    Minor = 2,
    Major = 3,
    Destroyed = 4,
    Unclassified = 5,
};

DamageGrade parse_damage_grade(std::string_view name);

struct FootprintPolygon {
    std::vector<std::vector<Point2>> rings; // outer ring first, then holes (lon/lat)
    DamageGrade grade = DamageGrade::NoDamage;
};

struct FootprintLabelSource {
    std::vector<FootprintPolygon> polygons;
};

/// GeoJSON FeatureCollection of Polygon/MultiPolygon features carrying a
/// "damage" property.
FootprintLabelSource parse_footprints_geojson(std::string_view text);

/// Per-pixel grade map, row-major, values are DamageGrade codes.
struct GradeMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> values;
};

/// A pixel belongs to a polygon when its centre lies inside it. Overlaps keep
/// the most severe grade; unclassified outranks every grade.
GradeMap rasterize_footprints(const FootprintLabelSource& source, const GeoRect& footprint,
                              std::size_t height = kPatchSize, std::size_t width = kPatchSize);

/// no-damage -> intact, minor/major/destroyed -> damaged, no building ->
/// background, unclassified -> invalid.
ClassMap simplify_labels(const GradeMap& grades);

/// Pixel-wise OR of the VHR coverage-gap map and the unclassified map.
Mask build_invalid_mask(const Mask& coverage_gap, const Mask& unclassified);

/// Pixels whose centre falls outside the VHR coverage rectangle.
Mask coverage_gap_mask(const GeoRect& vhr_coverage, const GeoRect& footprint, std::size_t height = kPatchSize,
                       std::size_t width = kPatchSize);

// ---------------------------------------------------------------------------
// Patch extraction

/// Crops the smallest pixel window of `tile` covering `footprint` (map
/// coordinates through `transform`, pixel-corner convention) and resamples it
/// to out_size x out_size. Output pixels whose centre falls outside the tile
/// are nodata. Throws DataError when footprint and tile do not intersect.
RasterGrid extract_patch(const RasterGrid& tile, const GeoRect& footprint, const AffineTransform2D& transform,
                         std::size_t out_size = kPatchSize, int lobes = kDefaultLanczosLobes);

struct StagedRaster {
    RasterGrid grid; // must carry a geotransform
    Date date{};
};

struct PatchSource {
    std::string patch_id;
    std::string event_id;
    DisasterType disaster_type = DisasterType::Storm;
    OrbitDirection orbit_direction = OrbitDirection::Ascending;
    GeoRect footprint;
    std::optional<GeoRect> vhr_coverage;
    FootprintLabelSource footprints;
    StagedRaster s1_pre;
    StagedRaster s1_post;
    StagedRaster s2_pre;
    StagedRaster s2_post;
};

/// Extracts all four patches, rasterises and simplifies the labels and folds
/// coverage gaps, unclassified footprints and nodata into the invalid code.
PatchBundle assemble_bundle(const PatchSource& source);

// ---------------------------------------------------------------------------
// Splits

enum class Split { Train, Val, Test };
enum class SplitKind { XView2, EventBased };

std::string_view split_name(Split s);
SplitKind parse_split_kind(std::string_view name);

struct SplitScheme {
    SplitKind kind = SplitKind::XView2;
    std::map<std::string, Split> assignment;
    std::map<std::string, std::string> event_of;

    std::vector<std::string> patches_in(Split s) const;
};

/// CSV with header patch_id,event_id,split. Throws DataError on malformed rows
/// or when an event-based scheme mixes an event across train/val and test.
SplitScheme parse_split_csv(std::string_view text, SplitKind kind);
std::string split_to_csv(const SplitScheme& scheme);
void validate_split(const SplitScheme& scheme);

struct SplitProportions {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};
std::map<std::string, SplitProportions> split_proportions(const SplitScheme& scheme);

} // namespace dmgmap
