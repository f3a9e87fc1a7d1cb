#include "dmgmap/affine.hpp"

#include "dmgmap/errors.hpp"

#include <cmath>

namespace dmgmap {

AffineTransform2D AffineTransform2D::inverse() const {
    const double det = determinant();
    if (det == 0.0 || !std::isfinite(det)) {
        throw DataError("affine transform is not invertible (determinant 0)");
    }
    const double ia = e / det;
    const double ib = -b / det;
    const double id = -d / det;
    const double ie = a / det;
    return {ia, ib, -(ia * c + ib * f), id, ie, -(id * c + ie * f)};
}

AffineTransform2D AffineTransform2D::compose(const AffineTransform2D& inner) const noexcept {
    return {
        a * inner.a + b * inner.d,
        a * inner.b + b * inner.e,
        a * inner.c + b * inner.f + c,
        d * inner.a + e * inner.d,
        d * inner.b + e * inner.e,
        d * inner.c + e * inner.f + f,
    };
}

std::vector<Point2> apply_transform(const AffineTransform2D& t, std::span<const Point2> points) {
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        out.push_back(t.apply(p));
    }
    return out;
}

} // namespace dmgmap
