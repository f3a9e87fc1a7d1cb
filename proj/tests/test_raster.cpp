#include "doctest.h"

#include "dmgmap/raster.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace dmgmap;

namespace {

// Closed-form Lanczos kernel, evaluated directly.
double lanczos_oracle(double x, int a) {
    if (x == 0.0) {
        return 1.0;
    }
    if (std::abs(x) >= a) {
        return 0.0;
    }
    const double px = std::numbers::pi * x;
    return (std::sin(px) / px) * (std::sin(px / a) / (px / a));
}

// Weight received by source index `src` when output index `o` is produced,
// after renormalising over the in-bounds taps.
double normalized_tap(std::size_t o, std::size_t src, std::size_t in_size, double scale, int a) {
    const double centre = (o + 0.5) * scale - 0.5;
    double total = 0.0;
    for (int k = 0; k < static_cast<int>(in_size); ++k) {
        if (std::abs(k - centre) < a) {
            total += lanczos_oracle(k - centre, a);
        }
    }
    return lanczos_oracle(static_cast<double>(src) - centre, a) / total;
}

Mask brute_dilate(const Mask& m, int r) {
    Mask out(m.height, m.width);
    for (int y = 0; y < static_cast<int>(m.height); ++y) {
        for (int x = 0; x < static_cast<int>(m.width); ++x) {
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int sy = y + dy;
                    const int sx = x + dx;
                    if (sy >= 0 && sx >= 0 && sy < static_cast<int>(m.height) && sx < static_cast<int>(m.width) &&
                        m.get(sy, sx)) {
                        out.set(y, x);
                    }
                }
            }
        }
    }
    return out;
}

Mask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double density) {
    std::bernoulli_distribution bit(density);
    Mask m(h, w);
    for (auto& b : m.bits) {
        b = bit(rng) ? 1 : 0;
    }
    return m;
}

bool subset(const Mask& a, const Mask& b) {
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        if (a.bits[i] && !b.bits[i]) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("lanczos_resample reproduces a constant grid") {
    RasterGrid src(2, 50, 50, 3.25f);
    const auto out = lanczos_resample(src, 128, 128);
    REQUIRE(out.height() == 128);
    REQUIRE(out.width() == 128);
    CHECK_FALSE(out.has_nodata());
    for (float v : out.data()) {
        CHECK(std::abs(v - 3.25f) < 1e-5);
    }
}

TEST_CASE("lanczos_resample accepts the 48..52 pixel patch range") {
    for (std::size_t n : {48u, 50u, 52u}) {
        RasterGrid src(12, n, n, 1.0f);
        const auto out = lanczos_resample(src, 128, 128);
        CHECK(out.channels() == 12);
        CHECK(out.height() == 128);
        CHECK(out.width() == 128);
    }
}

TEST_CASE("lanczos_resample of a centred impulse matches the closed-form kernel") {
    const std::size_t n = 9;
    const std::size_t factor = 9;
    RasterGrid src(1, n, n, 0.0f);
    src.at(0, 4, 4) = 1.0f;
    const auto out = lanczos_resample(src, n * factor, n * factor);
    const double scale = 1.0 / factor;
    for (std::size_t oy = 0; oy < n * factor; ++oy) {
        for (std::size_t ox = 0; ox < n * factor; ++ox) {
            const double expected = normalized_tap(oy, 4, n, scale, 3) * normalized_tap(ox, 4, n, scale, 3);
            REQUIRE(std::abs(out.at(0, oy, ox) - expected) < 1e-6);
        }
    }
    // Output samples landing exactly on source centres reproduce the impulse.
    CHECK(out.at(0, 40, 40) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::abs(out.at(0, 40, 31)) < 1e-7);
    CHECK(std::abs(out.at(0, 49, 40)) < 1e-7);
    // Negative side lobes survive the upscale.
    CHECK(out.at(0, 40, 40 - 12) < 0.0f);
}

TEST_CASE("lanczos_resample at identical size reproduces the input") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-5.0f, 5.0f);
    RasterGrid src(3, 20, 17);
    for (auto& v : src.data()) {
        v = u(rng);
    }
    const auto out = lanczos_resample(src, 20, 17);
    for (std::size_t i = 0; i < src.data().size(); ++i) {
        CHECK(std::abs(out.data()[i] - src.data()[i]) < 1e-5);
    }
}

TEST_CASE("lanczos_resample handles nodata") {
    SUBCASE("all-nodata footprint becomes nodata") {
        RasterGrid src(1, 10, 10, 2.0f);
        std::vector<std::uint8_t> nd(100, 0);
        for (std::size_t y = 0; y < 10; ++y) {
            for (std::size_t x = 0; x < 5; ++x) {
                nd[y * 10 + x] = 1;
            }
        }
        src.set_nodata_mask(nd);
        const auto out = lanczos_resample(src, 40, 40);
        REQUIRE(out.has_nodata());
        // The leftmost output columns only see nodata taps.
        for (std::size_t y = 0; y < 40; ++y) {
            CHECK(out.is_nodata(y, 0));
            CHECK_FALSE(out.is_nodata(y, 39));
            CHECK(out.at(0, y, 39) == doctest::Approx(2.0f));
        }
    }
    SUBCASE("valid samples are renormalised around holes") {
        RasterGrid src(1, 12, 12, -1.5f);
        std::vector<std::uint8_t> nd(144, 0);
        nd[5 * 12 + 5] = 1;
        src.at(0, 5, 5) = 1000.0f;
        src.set_nodata_mask(nd);
        const auto out = lanczos_resample(src, 30, 30);
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            CHECK(std::abs(out.data()[i] + 1.5f) < 1e-4);
        }
    }
    SUBCASE("zero-size target is rejected") {
        RasterGrid src(1, 4, 4);
        CHECK_THROWS_AS(lanczos_resample(src, 0, 4), DataError);
    }
}

TEST_CASE("lanczos_resample rescales the geotransform") {
    RasterGrid src(1, 50, 50, 1.0f);
    src.set_geotransform(AffineTransform2D{10.0, 0.0, 500.0, 0.0, -10.0, 900.0});
    const auto out = lanczos_resample(src, 128, 128);
    REQUIRE(out.geotransform());
    const auto corner = out.geotransform()->apply({128.0, 128.0});
    CHECK(corner.x == doctest::Approx(1000.0));
    CHECK(corner.y == doctest::Approx(400.0));
}

TEST_CASE("dilate_mask examples") {
    SUBCASE("radius 0 is the identity") {
        std::mt19937_64 rng(1);
        const auto m = random_mask(rng, 13, 9, 0.3);
        CHECK(dilate_mask(m, 0) == m);
    }
    SUBCASE("single pixel radius 1 gives a 3x3 block") {
        Mask m(11, 11);
        m.set(5, 5);
        const auto d = dilate_mask(m, 1);
        CHECK(d.count() == 9);
        for (std::size_t y = 4; y <= 6; ++y) {
            for (std::size_t x = 4; x <= 6; ++x) {
                CHECK(d.get(y, x));
            }
        }
    }
    SUBCASE("corner pixel radius 3 is clipped to a 4x4 quadrant") {
        Mask m(10, 10);
        m.set(0, 0);
        const auto d = dilate_mask(m, 3);
        CHECK(d.count() == 16);
        CHECK(d == brute_dilate(m, 3));
        CHECK(d.get(3, 3));
        CHECK_FALSE(d.get(4, 0));
    }
    SUBCASE("negative radius rejected") {
        CHECK_THROWS(dilate_mask(Mask(3, 3), -1));
    }
}

TEST_CASE("dilate_mask properties on random masks") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> dim(1, 24);
    std::uniform_int_distribution<int> rad(0, 4);
    for (int trial = 0; trial < 300; ++trial) {
        const auto h = static_cast<std::size_t>(dim(rng));
        const auto w = static_cast<std::size_t>(dim(rng));
        const int r1 = rad(rng);
        const int r2 = rad(rng);
        const auto a = random_mask(rng, h, w, 0.1);
        auto b = a;
        const auto extra = random_mask(rng, h, w, 0.1);
        for (std::size_t i = 0; i < b.bits.size(); ++i) {
            b.bits[i] |= extra.bits[i];
        }
        const auto da = dilate_mask(a, r1);
        REQUIRE(da == brute_dilate(a, r1));
        CHECK(subset(a, da));
        CHECK(subset(da, dilate_mask(b, r1)));
        CHECK(dilate_mask(da, r2) == dilate_mask(a, r1 + r2));
    }
}

TEST_CASE("fit_norm_stats uses linear interpolation between order statistics") {
    std::vector<float> v(100);
    for (int i = 0; i < 100; ++i) {
        v[i] = static_cast<float>(i + 1);
    }
    std::vector<RasterGrid> patches{RasterGrid(1, 10, 10, v)};
    const auto stats = fit_norm_stats(std::span<const RasterGrid>(patches));
    REQUIRE(stats.channels.size() == 1);
    CHECK(stats.channels[0].p1 == doctest::Approx(1.99).epsilon(1e-12));
    CHECK(stats.channels[0].p99 == doctest::Approx(99.01).epsilon(1e-12));
}

TEST_CASE("fit_norm_stats rejects degenerate channels") {
    std::vector<RasterGrid> patches{RasterGrid(2, 4, 4, 1.0f)};
    for (auto& v : patches[0].channel(0)) {
        v = static_cast<float>(&v - patches[0].channel(0).data());
    }
    try {
        fit_norm_stats(std::span<const RasterGrid>(patches));
        FAIL("expected DegenerateChannelError");
    } catch (const DegenerateChannelError& e) {
        CHECK(e.channel() == 1);
    }
}

TEST_CASE("fit_norm_stats pools patches and skips nodata") {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> n(0.0f, 2.0f);
    RasterGrid a(2, 6, 5);
    RasterGrid b(2, 7, 5);
    for (auto& v : a.data()) v = n(rng);
    for (auto& v : b.data()) v = n(rng);
    RasterGrid joined(2, 13, 5);
    for (std::size_t c = 0; c < 2; ++c) {
        std::copy(a.channel(c).begin(), a.channel(c).end(), joined.channel(c).begin());
        std::copy(b.channel(c).begin(), b.channel(c).end(), joined.channel(c).begin() + 30);
    }
    std::vector<RasterGrid> two{a, b};
    std::vector<RasterGrid> one{joined};
    CHECK(fit_norm_stats(std::span<const RasterGrid>(two)) == fit_norm_stats(std::span<const RasterGrid>(one)));

    RasterGrid with_nodata = a;
    std::vector<std::uint8_t> nd(30, 0);
    nd[0] = 1;
    with_nodata.at(0, 0, 0) = 1e9f;
    with_nodata.at(1, 0, 0) = 1e9f;
    with_nodata.set_nodata_mask(nd);
    std::vector<RasterGrid> masked{with_nodata};
    const auto s = fit_norm_stats(std::span<const RasterGrid>(masked));
    CHECK(s.channels[0].p99 < 100.0);
}

TEST_CASE("normalize endpoints, midpoint and clipping") {
    NormStats stats{{{10.0, 30.0}}};
    RasterGrid g(1, 1, 5, std::vector<float>{10.0f, 30.0f, 20.0f, 40.0f, -3.0f});
    const auto n = normalize(g, stats);
    CHECK(n.at(0, 0, 0) == 0.0f);
    CHECK(n.at(0, 0, 1) == 1.0f);
    CHECK(n.at(0, 0, 2) == doctest::Approx(0.5f));
    CHECK(n.at(0, 0, 3) == 1.0f);
    CHECK(n.at(0, 0, 4) == 0.0f);
}

TEST_CASE("normalize preserves nodata and rejects channel mismatch") {
    NormStats stats{{{0.0, 1.0}}};
    RasterGrid g(1, 1, 2, std::vector<float>{-7.0f, 0.25f});
    g.set_nodata_mask({1, 0});
    const auto n = normalize(g, stats);
    CHECK(n.at(0, 0, 0) == -7.0f);
    CHECK(n.at(0, 0, 1) == 0.25f);
    CHECK_THROWS_AS(normalize(RasterGrid(2, 1, 1), stats), DataError);
}

TEST_CASE("normalize is bounded and monotone") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> u(-100.0f, 100.0f);
    NormStats stats{{{-20.0, 35.0}}};
    std::vector<float> values(500);
    for (auto& v : values) v = u(rng);
    std::sort(values.begin(), values.end());
    const auto n = normalize(RasterGrid(1, 1, values.size(), values), stats);
    for (std::size_t i = 0; i < values.size(); ++i) {
        CHECK(n.data()[i] >= 0.0f);
        CHECK(n.data()[i] <= 1.0f);
        if (i > 0) {
            CHECK(n.data()[i] >= n.data()[i - 1]);
        }
    }
}

TEST_CASE("NormStats JSON document") {
    NormStats stats{{{0.5, 2.25}, {-1.0, 7.125}}};
    const auto text = norm_stats_to_json(stats);
    CHECK(text.find("\"channels\"") != std::string::npos);
    CHECK(norm_stats_from_json(text) == stats);
    CHECK_THROWS_AS(norm_stats_from_json(R"({"channels":[{"p1":1,"p99":1}]})"), DataError);
    CHECK_THROWS_AS(norm_stats_from_json("{"), DataError);
}

TEST_CASE("ClassMap rejects unknown codes") {
    CHECK_THROWS_AS(ClassMap(1, 2, std::vector<std::uint8_t>{0, 3}), DataError);
    ClassMap ok(1, 4, std::vector<std::uint8_t>{0, 1, 2, 255});
    CHECK(ok.building_mask().count() == 2);
    CHECK(ok.invalid_mask().count() == 1);
}
