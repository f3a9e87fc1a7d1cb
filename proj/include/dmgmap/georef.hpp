#pragma once

#include "dmgmap/affine.hpp"
#include "dmgmap/errors.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dmgmap {

inline constexpr double kTileSize = 1024.0;

/// A footprint vertex known both in tile pixel coordinates and on the ground.
struct GroundControlPoint {
    double image_x = 0.0;
    double image_y = 0.0;
    double lon = 0.0;
    double lat = 0.0;
};

/// GCPs of one tile. `col_off`/`row_off` place the tile inside its source
/// acquisition's pixel frame, so tiles cut from the same acquisition share a
/// single pixel-to-ground transform.
struct TileGCPSet {
    std::string tile_id;
    std::string source_image_id;
    double col_off = 0.0;
    double row_off = 0.0;
    std::vector<GroundControlPoint> gcps;

    Point2 source_pixel(const GroundControlPoint& g) const { return {g.image_x + col_off, g.image_y + row_off}; }
};

class RankDeficientError : public DataError {
public:
    using DataError::DataError;
};

/// Least-squares affine map between two point sets (normal equations).
/// Needs at least 3 non-collinear source points.
AffineTransform2D fit_affine(std::span<const Point2> from, std::span<const Point2> to);

/// Per-tile fit from source-frame pixel coordinates to lon/lat.
AffineTransform2D fit_tile_affine(const TileGCPSet& tile);

/// Element-wise median of the six parameters (mean of the middle pair for
/// even counts).
AffineTransform2D aggregate_global(std::span<const AffineTransform2D> transforms);

enum class GeoAxis { Lon, Lat };

/// A GCP sitting on a tile edge: after correction its mapped coordinate along
/// `axis` must equal `boundary`.
struct EdgeObservation {
    Point2 source_pixel;
    GeoAxis axis = GeoAxis::Lon;
    double boundary = 0.0;
};

struct EdgeSnap {
    AffineTransform2D transform;
    double shift_lon = 0.0;
    double shift_lat = 0.0;
    std::size_t lon_observations = 0;
    std::size_t lat_observations = 0;
};

bool is_edge_gcp(const GroundControlPoint& g) noexcept;

/// Composes `global` with the translation that cancels the per-axis median
/// residual of the observations. Axes without observations are left alone.
EdgeSnap snap_edges(const AffineTransform2D& global, std::span<const EdgeObservation> observations);

/// Single-tile form: boundaries come from a north-up tile rectangle
/// (x = 0 -> west, x = 1024 -> east, y = 0 -> north, y = 1024 -> south).
AffineTransform2D snap_edges(const AffineTransform2D& global, std::span<const GroundControlPoint> edge_gcps,
                             const GeoRect& tile_bounds);

struct GeorefOptions {
    std::size_t min_gcps_per_tile = 6;
};

struct ResidualStats {
    std::size_t count = 0;
    double rms = 0.0;
    double median = 0.0;
    double max = 0.0;
};

struct SourceCorrection {
    std::string source_image_id;
    AffineTransform2D global;    // after median aggregation
    AffineTransform2D corrected; // after edge snapping
    EdgeSnap snap;
    std::vector<std::string> fitted_tiles;
    std::vector<std::string> sparse_tiles;
    ResidualStats residuals_before_snap;
    ResidualStats residuals;
    /// Tile pixel -> ground transform for every tile of the source, including
    /// sparse tiles that could not be fitted on their own.
    std::map<std::string, AffineTransform2D> tile_transforms;
};

/// Fit -> median -> snap, grouped by source acquisition. Throws DataError when
/// a source image has no tile with enough GCPs.
std::map<std::string, SourceCorrection> correct_georeference(std::span<const TileGCPSet> tiles,
                                                             const GeorefOptions& options = {});

ResidualStats residual_stats(const AffineTransform2D& t, std::span<const TileGCPSet> tiles);

/// Line-delimited JSON, one GCP per line:
/// {"tile_id","source_image_id","x","y","lon","lat"[,"col_off","row_off"]}.
std::vector<TileGCPSet> read_gcps_ndjson(std::istream& in);
std::vector<TileGCPSet> read_gcps_ndjson_file(const std::string& path);
void write_gcps_ndjson(std::ostream& out, std::span<const TileGCPSet> tiles);

/// {"source_image_id": [a,b,c,d,e,f], ...}
std::string corrected_transforms_json(const std::map<std::string, SourceCorrection>& corrections);

} // namespace dmgmap
