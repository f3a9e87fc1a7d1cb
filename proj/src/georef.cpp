#include "dmgmap/georef.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace dmgmap {

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

AffineTransform2D fit_affine(std::span<const Point2> from, std::span<const Point2> to) {
    if (from.size() != to.size()) {
        throw DataError("fit_affine: point lists differ in length");
    }
    if (from.size() < 3) {
        throw DataError("fit_affine: at least 3 control points required, got " + std::to_string(from.size()));
    }
    const double n = static_cast<double>(from.size());
    Point2 mf{};
    Point2 mt{};
    for (std::size_t i = 0; i < from.size(); ++i) {
        mf.x += from[i].x / n;
        mf.y += from[i].y / n;
        mt.x += to[i].x / n;
        mt.y += to[i].y / n;
    }

    // Normal equations in centred coordinates: N p = r for each output axis,
    // design rows [u, v, 1].
    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs_x = Eigen::Vector3d::Zero();
    Eigen::Vector3d rhs_y = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < from.size(); ++i) {
        const Eigen::Vector3d row(from[i].x - mf.x, from[i].y - mf.y, 1.0);
        normal += row * row.transpose();
        rhs_x += row * (to[i].x - mt.x);
        rhs_y += row * (to[i].y - mt.y);
    }
    const double sxx = normal(0, 0);
    const double syy = normal(1, 1);
    const double sxy = normal(0, 1);
    const double scale = (sxx + syy) * (sxx + syy);
    if (!(scale > 0.0) || sxx * syy - sxy * sxy <= 1e-12 * scale) {
        throw RankDeficientError("fit_affine: control points are collinear");
    }
    const auto solver = normal.ldlt();
    const Eigen::Vector3d px = solver.solve(rhs_x);
    const Eigen::Vector3d py = solver.solve(rhs_y);

    AffineTransform2D t;
    t.a = px(0);
    t.b = px(1);
    t.c = mt.x + px(2) - px(0) * mf.x - px(1) * mf.y;
    t.d = py(0);
    t.e = py(1);
    t.f = mt.y + py(2) - py(0) * mf.x - py(1) * mf.y;
    return t;
}

AffineTransform2D fit_tile_affine(const TileGCPSet& tile) {
    std::vector<Point2> from;
    std::vector<Point2> to;
    from.reserve(tile.gcps.size());
    to.reserve(tile.gcps.size());
    for (const auto& g : tile.gcps) {
        from.push_back(tile.source_pixel(g));
        to.push_back({g.lon, g.lat});
    }
    try {
        return fit_affine(from, to);
    } catch (const RankDeficientError& e) {
        throw RankDeficientError("tile " + tile.tile_id + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("tile " + tile.tile_id + ": " + e.what());
    }
}

AffineTransform2D aggregate_global(std::span<const AffineTransform2D> transforms) {
    if (transforms.empty()) {
        throw DataError("aggregate_global: no transforms to aggregate");
    }
    std::array<double, 6> out{};
    std::vector<double> column(transforms.size());
    for (std::size_t k = 0; k < 6; ++k) {
        for (std::size_t i = 0; i < transforms.size(); ++i) {
            column[i] = transforms[i].to_array()[k];
        }
        out[k] = median_of(column);
    }
    return AffineTransform2D::from_array(out);
}

bool is_edge_gcp(const GroundControlPoint& g) noexcept {
    return g.image_x == 0.0 || g.image_x == kTileSize || g.image_y == 0.0 || g.image_y == kTileSize;
}

EdgeSnap snap_edges(const AffineTransform2D& global, std::span<const EdgeObservation> observations) {
    std::vector<double> lon_res;
    std::vector<double> lat_res;
    for (const auto& o : observations) {
        const Point2 mapped = global.apply(o.source_pixel);
        if (o.axis == GeoAxis::Lon) {
            lon_res.push_back(mapped.x - o.boundary);
        } else {
            lat_res.push_back(mapped.y - o.boundary);
        }
    }
    EdgeSnap snap;
    snap.lon_observations = lon_res.size();
    snap.lat_observations = lat_res.size();
    snap.shift_lon = lon_res.empty() ? 0.0 : -median_of(std::move(lon_res));
    snap.shift_lat = lat_res.empty() ? 0.0 : -median_of(std::move(lat_res));
    snap.transform = global;
    snap.transform.c += snap.shift_lon;
    snap.transform.f += snap.shift_lat;
    return snap;
}

AffineTransform2D snap_edges(const AffineTransform2D& global, std::span<const GroundControlPoint> edge_gcps,
                             const GeoRect& tile_bounds) {
    std::vector<EdgeObservation> obs;
    for (const auto& g : edge_gcps) {
        const Point2 px{g.image_x, g.image_y};
        if (g.image_x == 0.0) {
            obs.push_back({px, GeoAxis::Lon, tile_bounds.west});
        } else if (g.image_x == kTileSize) {
            obs.push_back({px, GeoAxis::Lon, tile_bounds.east});
        }
        if (g.image_y == 0.0) {
            obs.push_back({px, GeoAxis::Lat, tile_bounds.north});
        } else if (g.image_y == kTileSize) {
            obs.push_back({px, GeoAxis::Lat, tile_bounds.south});
        }
    }
    return snap_edges(global, obs).transform;
}

ResidualStats residual_stats(const AffineTransform2D& t, std::span<const TileGCPSet> tiles) {
    std::vector<double> res;
    for (const auto& tile : tiles) {
        for (const auto& g : tile.gcps) {
            const Point2 m = t.apply(tile.source_pixel(g));
            res.push_back(std::hypot(m.x - g.lon, m.y - g.lat));
        }
    }
    ResidualStats s;
    s.count = res.size();
    if (res.empty()) {
        return s;
    }
    double sq = 0.0;
    for (double r : res) {
        sq += r * r;
        s.max = std::max(s.max, r);
    }
    s.rms = std::sqrt(sq / static_cast<double>(res.size()));
    s.median = median_of(std::move(res));
    return s;
}

std::map<std::string, SourceCorrection> correct_georeference(std::span<const TileGCPSet> tiles,
                                                             const GeorefOptions& options) {
    if (tiles.empty()) {
        throw DataError("georeference correction: no GCPs");
    }
    std::map<std::string, std::vector<const TileGCPSet*>> by_source;
    for (const auto& t : tiles) {
        by_source[t.source_image_id].push_back(&t);
    }

    std::map<std::string, SourceCorrection> out;
    for (const auto& [source, members] : by_source) {
        SourceCorrection corr;
        corr.source_image_id = source;
        std::vector<AffineTransform2D> fits;
        for (const auto* tile : members) {
            if (tile->gcps.size() < options.min_gcps_per_tile) {
                corr.sparse_tiles.push_back(tile->tile_id);
                continue;
            }
            try {
                fits.push_back(fit_tile_affine(*tile));
                corr.fitted_tiles.push_back(tile->tile_id);
            } catch (const RankDeficientError&) {
                corr.sparse_tiles.push_back(tile->tile_id);
            }
        }
        if (fits.empty()) {
            throw DataError("source image " + source + ": no tile has at least " +
                            std::to_string(options.min_gcps_per_tile) + " usable GCPs");
        }
        corr.global = aggregate_global(fits);

        // Footprints clipped at a tile edge have their true ground coordinate on
        // the tile boundary, so each edge GCP pins the boundary it lies on.
        std::vector<EdgeObservation> obs;
        for (const auto* tile : members) {
            for (const auto& g : tile->gcps) {
                const Point2 px = tile->source_pixel(g);
                if (g.image_x == 0.0 || g.image_x == kTileSize) {
                    obs.push_back({px, GeoAxis::Lon, g.lon});
                }
                if (g.image_y == 0.0 || g.image_y == kTileSize) {
                    obs.push_back({px, GeoAxis::Lat, g.lat});
                }
            }
        }
        corr.snap = snap_edges(corr.global, obs);
        corr.corrected = corr.snap.transform;

        std::vector<TileGCPSet> copies;
        copies.reserve(members.size());
        for (const auto* tile : members) {
            copies.push_back(*tile);
            corr.tile_transforms[tile->tile_id] =
                corr.corrected.compose(AffineTransform2D::translation(tile->col_off, tile->row_off));
        }
        corr.residuals_before_snap = residual_stats(corr.global, copies);
        corr.residuals = residual_stats(corr.corrected, copies);
        out.emplace(source, std::move(corr));
    }
    return out;
}

std::vector<TileGCPSet> read_gcps_ndjson(std::istream& in) {
    std::vector<TileGCPSet> tiles;
    std::map<std::string, std::size_t> index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto obj = nlohmann::json::parse(line);
            const auto tile_id = obj.at("tile_id").get<std::string>();
            const auto source = obj.at("source_image_id").get<std::string>();
            GroundControlPoint g{obj.at("x").get<double>(), obj.at("y").get<double>(), obj.at("lon").get<double>(),
                                 obj.at("lat").get<double>()};
            if (!(g.image_x >= 0.0 && g.image_x <= kTileSize && g.image_y >= 0.0 && g.image_y <= kTileSize)) {
                throw DataError("pixel coordinates outside [0, 1024]");
            }
            auto [it, inserted] = index.emplace(tile_id, tiles.size());
            if (inserted) {
                TileGCPSet t;
                t.tile_id = tile_id;
                t.source_image_id = source;
                t.col_off = obj.value("col_off", 0.0);
                t.row_off = obj.value("row_off", 0.0);
                tiles.push_back(std::move(t));
            }
            auto& tile = tiles[it->second];
            if (tile.source_image_id != source) {
                throw DataError("tile " + tile_id + " mixes source images " + tile.source_image_id + " and " + source);
            }
            tile.gcps.push_back(g);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("GCP line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("GCP line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return tiles;
}

std::vector<TileGCPSet> read_gcps_ndjson_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open GCP file " + path);
    }
    return read_gcps_ndjson(in);
}

void write_gcps_ndjson(std::ostream& out, std::span<const TileGCPSet> tiles) {
    for (const auto& t : tiles) {
        for (const auto& g : t.gcps) {
            nlohmann::json obj{{"tile_id", t.tile_id}, {"source_image_id", t.source_image_id},
                               {"x", g.image_x},       {"y", g.image_y},
                               {"lon", g.lon},         {"lat", g.lat}};
            if (t.col_off != 0.0 || t.row_off != 0.0) {
                obj["col_off"] = t.col_off;
                obj["row_off"] = t.row_off;
            }
            out << obj.dump() << '\n';
        }
    }
}

std::string corrected_transforms_json(const std::map<std::string, SourceCorrection>& corrections) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [source, corr] : corrections) {
        doc[source] = corr.corrected.to_array();
    }
    return doc.dump(2);
}

} // namespace dmgmap
