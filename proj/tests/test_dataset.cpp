#include "doctest.h"

#include "dmgmap/dataset.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace dmgmap;

namespace {

// 0.1-degree pixels, north-up, origin (10, 50).
const AffineTransform2D kTileTransform{0.1, 0.0, 10.0, 0.0, -0.1, 50.0};

RasterGrid staged_tile(std::size_t channels, std::size_t size, float value) {
    RasterGrid g(channels, size, size, value);
    g.set_geotransform(kTileTransform);
    return g;
}

FootprintPolygon square(double w, double s, double e, double n, DamageGrade g) {
    return {{{{w, s}, {e, s}, {e, n}, {w, n}}}, g};
}

} // namespace

TEST_CASE("simplify_labels merges damage grades") {
    GradeMap all_intact{2, 2, {1, 1, 1, 1}};
    CHECK(simplify_labels(all_intact).values()[3] == 1);

    GradeMap mixed{1, 4, {2, 4, 3, 0}};
    const auto m = simplify_labels(mixed);
    CHECK(std::vector<std::uint8_t>(m.values().begin(), m.values().end()) == std::vector<std::uint8_t>{2, 2, 2, 0});

    GradeMap unclassified{1, 2, {5, 1}};
    CHECK(simplify_labels(unclassified).values()[0] == 255);

    GradeMap unknown{1, 1, {9}};
    CHECK_THROWS_AS(simplify_labels(unknown), DataError);
}

TEST_CASE("build_invalid_mask is the pixel-wise union") {
    Mask empty(4, 4);
    CHECK(build_invalid_mask(empty, empty).count() == 0);

    Mask gap(4, 4);
    gap.set(0, 0);
    gap.set(1, 0);
    CHECK(build_invalid_mask(gap, empty) == gap);

    Mask uncl(4, 4);
    uncl.set(1, 0);
    uncl.set(3, 3);
    const auto u = build_invalid_mask(gap, uncl);
    CHECK(u.count() == 3);
    CHECK(u.get(3, 3));

    CHECK_THROWS_AS(build_invalid_mask(gap, Mask(3, 4)), DataError);
}

TEST_CASE("footprint rasterisation uses pixel centres") {
    const GeoRect fp{0.0, 0.0, 8.0, 8.0}; // 1 unit per pixel on an 8x8 grid
    FootprintLabelSource src;
    // Covers centres x = 1.5..3.5 and rows whose centre lat is in (4, 7).
    src.polygons.push_back(square(1.2, 4.0, 3.9, 7.0, DamageGrade::NoDamage));
    const auto g = rasterize_footprints(src, fp, 8, 8);
    int count = 0;
    for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
            const double cx = x + 0.5;
            const double cy = 8.0 - (y + 0.5);
            const bool inside = cx > 1.2 && cx < 3.9 && cy > 4.0 && cy < 7.0;
            CHECK(g.values[y * 8 + x] == (inside ? 1 : 0));
            count += inside;
        }
    }
    CHECK(count == 9);
}

TEST_CASE("holes and overlaps") {
    const GeoRect fp{0.0, 0.0, 8.0, 8.0};
    FootprintLabelSource src;
    FootprintPolygon donut = square(0.0, 0.0, 8.0, 8.0, DamageGrade::Minor);
    donut.rings.push_back({{3, 3}, {5, 3}, {5, 5}, {3, 5}});
    src.polygons.push_back(donut);
    auto g = rasterize_footprints(src, fp, 8, 8);
    CHECK(g.values[0] == 2);
    CHECK(g.values[3 * 8 + 3] == 0); // centre (3.5, 4.5) lies in the hole

    src.polygons.push_back(square(0.0, 0.0, 2.0, 2.0, DamageGrade::Destroyed));
    src.polygons.push_back(square(0.0, 0.0, 1.0, 1.0, DamageGrade::NoDamage));
    g = rasterize_footprints(src, fp, 8, 8);
    CHECK(g.values[7 * 8 + 0] == 4); // worst grade wins over minor and no-damage

    src.polygons.push_back(square(6.0, 6.0, 8.0, 8.0, DamageGrade::Unclassified));
    g = rasterize_footprints(src, fp, 8, 8);
    CHECK(g.values[0 * 8 + 7] == 5);
}

TEST_CASE("GeoJSON footprints") {
    const std::string doc = R"({"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"damage":"major-damage"},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
        {"type":"Feature","properties":{"damage":"un-classified"},
         "geometry":{"type":"MultiPolygon","coordinates":[[[[2,2],[3,2],[3,3],[2,2]]],[[[4,4],[5,4],[5,5],[4,4]]]]}}
    ]})";
    const auto src = parse_footprints_geojson(doc);
    REQUIRE(src.polygons.size() == 3);
    CHECK(src.polygons[0].grade == DamageGrade::Major);
    CHECK(src.polygons[2].grade == DamageGrade::Unclassified);

    CHECK_THROWS_AS(parse_footprints_geojson(R"({"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"damage":"smashed"},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}}]})"),
                    DataError);
    CHECK_THROWS_AS(parse_footprints_geojson(R"({"type":"Feature"})"), DataError);
    CHECK_THROWS_AS(parse_footprints_geojson("{"), DataError);
}

TEST_CASE("coverage gap mask") {
    const GeoRect fp{0.0, 0.0, 8.0, 8.0};
    const auto gap = coverage_gap_mask({0.0, 0.0, 4.0, 8.0}, fp, 8, 8);
    CHECK(gap.count() == 32);
    CHECK(!gap.get(0, 3));
    CHECK(gap.get(0, 4));
}

TEST_CASE("extract_patch over the whole tile") {
    const auto tile = staged_tile(2, 50, 3.0f);
    const auto out = extract_patch(tile, {10.0, 45.0, 15.0, 50.0}, kTileTransform);
    CHECK(out.height() == 128);
    CHECK(out.width() == 128);
    CHECK(!out.has_nodata());
    for (float v : out.data()) {
        CHECK(v == doctest::Approx(3.0).epsilon(1e-5));
    }
    REQUIRE(out.geotransform());
    const auto corner = out.geotransform()->apply({128.0, 128.0});
    CHECK(corner.x == doctest::Approx(15.0));
    CHECK(corner.y == doctest::Approx(45.0));
}

TEST_CASE("extract_patch half outside the tile") {
    const auto tile = staged_tile(1, 100, 1.0f);
    // Columns 50..150 of a 100-column tile.
    const auto out = extract_patch(tile, {15.0, 40.0, 25.0, 50.0}, kTileTransform);
    REQUIRE(out.has_nodata());
    std::size_t nodata = 0;
    for (std::size_t y = 0; y < 128; ++y) {
        for (std::size_t x = 0; x < 128; ++x) {
            const double centre_col = 50.0 + (x + 0.5) * 100.0 / 128.0;
            CHECK(out.is_nodata(y, x) == (centre_col >= 100.0));
            nodata += out.is_nodata(y, x);
        }
    }
    CHECK(nodata == 64 * 128);

    CHECK_THROWS_AS(extract_patch(tile, {30.0, 40.0, 31.0, 41.0}, kTileTransform), DataError);
}

TEST_CASE("extract_patch upsamples a 50-pixel window to 128") {
    const auto tile = staged_tile(1, 200, 2.0f);
    const auto out = extract_patch(tile, {12.0, 43.0, 17.0, 48.0}, kTileTransform);
    CHECK(out.height() == 128);
    CHECK(out.width() == 128);
    CHECK(out.geotransform()->a == doctest::Approx(5.0 / 128.0));
}

TEST_CASE("extract_patch preserves the mean of random grids") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> u(1.0f, 2.0f);
    for (std::size_t size : {48u, 50u, 52u}) {
        RasterGrid tile(1, size, size);
        for (auto& v : tile.data()) {
            v = u(rng);
        }
        tile.set_geotransform(kTileTransform);
        const double extent = size * 0.1;
        const auto out = extract_patch(tile, {10.0, 50.0 - extent, 10.0 + extent, 50.0}, kTileTransform);
        const double in_mean = std::accumulate(tile.data().begin(), tile.data().end(), 0.0) / tile.data().size();
        const double out_mean = std::accumulate(out.data().begin(), out.data().end(), 0.0) / out.data().size();
        CHECK(std::abs(out_mean - in_mean) / in_mean < 0.01);
    }
}

TEST_CASE("assemble_bundle folds gaps into the label") {
    PatchSource src;
    src.patch_id = "p1";
    src.event_id = "ev";
    src.footprint = {10.0, 45.0, 15.0, 50.0};
    src.vhr_coverage = GeoRect{10.0, 45.0, 12.5, 50.0};
    src.footprints.polygons.push_back(square(10.0, 49.0, 11.0, 50.0, DamageGrade::Destroyed));
    src.s1_pre = {staged_tile(kS1Channels, 50, 1.0f), parse_date("2020-01-01")};
    src.s1_post = {staged_tile(kS1Channels, 50, 2.0f), parse_date("2020-02-01")};
    src.s2_pre = {staged_tile(kS2Channels, 50, 3.0f), parse_date("2020-01-02")};
    src.s2_post = {staged_tile(kS2Channels, 50, 4.0f), parse_date("2020-02-02")};
    const auto b = assemble_bundle(src);
    CHECK(b.label.height() == 128);
    CHECK(b.label.at(0, 0) == 2);
    CHECK(b.label.at(0, 127) == 255);
    CHECK(b.label.at(127, 10) == 0);
    CHECK(b.label.invalid_mask().count() == 64 * 128);
    CHECK(!b.s2_post.has_nodata());
    CHECK(b.s2_post_date == parse_date("2020-02-02"));

    src.s2_post.grid = staged_tile(3, 50, 0.0f);
    CHECK_THROWS_AS(assemble_bundle(src), DataError);
}

TEST_CASE("split files") {
    const std::string csv = "patch_id,event_id,split\na,e1,train\nb,e1,val\nc,e2,test\n";
    const auto s = parse_split_csv(csv, SplitKind::EventBased);
    CHECK(s.patches_in(Split::Train) == std::vector<std::string>{"a"});
    CHECK(s.event_of.at("c") == "e2");
    CHECK(parse_split_csv(split_to_csv(s), SplitKind::EventBased).assignment == s.assignment);

    CHECK_THROWS_AS(parse_split_csv("patch_id,event_id,split\na,e1,train\nb,e1,test\n", SplitKind::EventBased),
                    DataError);
    CHECK_NOTHROW(parse_split_csv("patch_id,event_id,split\na,e1,train\nb,e1,test\n", SplitKind::XView2));
    CHECK_THROWS_AS(parse_split_csv("id,split\n", SplitKind::XView2), DataError);
    CHECK_THROWS_AS(parse_split_csv("patch_id,event_id,split\na,e1,holdout\n", SplitKind::XView2), DataError);
    CHECK_THROWS_AS(parse_split_csv("patch_id,event_id,split\na,e1,train\na,e1,test\n", SplitKind::XView2),
                    DataError);
    CHECK_THROWS_AS(parse_split_kind("random"), ConfigError);
}

TEST_CASE("xview2 split proportions per event") {
    std::string csv = "patch_id,event_id,split\n";
    for (int i = 0; i < 50; ++i) {
        const char* split = i < 40 ? "train" : i < 45 ? "val" : "test";
        csv += "p" + std::to_string(i) + ",e" + std::to_string(i % 2) + "," + split + "\n";
    }
    const auto props = split_proportions(parse_split_csv(csv, SplitKind::XView2));
    REQUIRE(props.size() == 2);
    for (const auto& [event, p] : props) {
        const double n = static_cast<double>(p.train + p.val + p.test);
        CHECK(p.train / n == doctest::Approx(0.8).epsilon(0.05));
        CHECK(p.val / n == doctest::Approx(0.1).epsilon(0.05));
    }
}
