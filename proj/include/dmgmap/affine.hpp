#pragma once

#include <array>
#include <span>
#include <vector>

namespace dmgmap {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned geographic rectangle (west/south/east/north in degrees, or any
/// planar unit consistent with the transform in use).
struct GeoRect {
    double west = 0.0;
    double south = 0.0;
    double east = 0.0;
    double north = 0.0;

    double width() const noexcept { return east - west; }
    double height() const noexcept { return north - south; }
    bool empty() const noexcept { return !(east > west) || !(north > south); }

    friend bool operator==(const GeoRect&, const GeoRect&) = default;
};

/// The planar map (x, y) -> (a*x + b*y + c, d*x + e*y + f).
///
/// For raster geotransforms (x, y) is the pixel-corner coordinate (column,
/// row), so the centre of pixel (i, j) sits at (i + 0.5, j + 0.5).
struct AffineTransform2D {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    double e = 1.0;
    double f = 0.0;

    static AffineTransform2D identity() { return {}; }
    static AffineTransform2D translation(double dx, double dy) { return {1.0, 0.0, dx, 0.0, 1.0, dy}; }
    static AffineTransform2D from_array(const std::array<double, 6>& p) {
        return {p[0], p[1], p[2], p[3], p[4], p[5]};
    }

    std::array<double, 6> to_array() const { return {a, b, c, d, e, f}; }

    double determinant() const noexcept { return a * e - b * d; }

    Point2 apply(Point2 p) const noexcept { return {a * p.x + b * p.y + c, d * p.x + e * p.y + f}; }

    /// Throws DataError when the linear part is singular.
    AffineTransform2D inverse() const;

    /// Returns the transform equivalent to applying `inner` first, then `*this`.
    AffineTransform2D compose(const AffineTransform2D& inner) const noexcept;

    friend bool operator==(const AffineTransform2D&, const AffineTransform2D&) = default;
};

std::vector<Point2> apply_transform(const AffineTransform2D& t, std::span<const Point2> points);

} // namespace dmgmap
