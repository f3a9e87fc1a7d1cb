#include "doctest.h"

#include "dmgmap/artifact_io.hpp"
#include "dmgmap/checkpoint.hpp"
#include "dmgmap/synthetic.hpp"

#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

using namespace dmgmap;

namespace {

const Magic kTestMagic{'T', 'E', 'S', 'T', 'M', 'A', 'G', 'C'};

Container small_container() {
    return {R"({"schema_version":1})", {{1, 2, 3, 4, 5}, {}, {9, 8, 7}}};
}

// Little-endian u32 read, independent of the library.
std::uint32_t le32(const Bytes& b, std::size_t at) {
    return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

} // namespace

TEST_CASE("crc32 matches the standard check value") {
    const std::string s = "123456789";
    CHECK(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xCBF43926u);
}

TEST_CASE("container layout") {
    const auto bytes = encode_container(kTestMagic, 1, small_container());
    CHECK(std::memcmp(bytes.data(), "TESTMAGC", 8) == 0);
    CHECK(le32(bytes, 8) == 1);
    CHECK(le32(bytes, 12) == 3);
    CHECK(le32(bytes, 16) == 20);
    for (std::size_t i = 28; i < 60; ++i) {
        CHECK(bytes[i] == 0);
    }
    CHECK(le32(bytes, 60) == crc32({bytes.data(), 60}));
    CHECK(bytes.size() == 64 + 20 + 3 * 12 + 5 + 3);

    const auto c = decode_container(bytes, kTestMagic, 1, 3);
    CHECK(c.metadata == small_container().metadata);
    CHECK(c.sections == small_container().sections);
}

TEST_CASE("container errors are typed") {
    const auto good = encode_container(kTestMagic, 1, small_container());

    for (std::size_t n = 0; n < good.size(); ++n) {
        CHECK_THROWS_AS(decode_container({good.data(), n}, kTestMagic, 1, 3), TruncatedError);
    }

    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_container(trailing, kTestMagic, 1, 3), FormatError);

    CHECK_THROWS_AS(decode_container(good, kBundleMagic, 1, 3), FormatError);
    CHECK_THROWS_AS(decode_container(good, kTestMagic, 1, 4), FormatError);
    CHECK_THROWS_AS(decode_container(encode_container(kTestMagic, 2, small_container()), kTestMagic, 1, 3),
                    SchemaVersionError);

    auto header = good;
    header[40] ^= 1;
    CHECK_THROWS_AS(decode_container(header, kTestMagic, 1, 3), FormatError);

    auto meta = good;
    meta[70] ^= 0x10;
    CHECK_THROWS_AS(decode_container(meta, kTestMagic, 1, 3), ChecksumError);

    auto payload = good;
    payload[64 + 20 + 8 + 2] ^= 0x80;
    CHECK_THROWS_AS(decode_container(payload, kTestMagic, 1, 3), ChecksumError);

    // Any single flipped bit anywhere must be caught.
    for (std::size_t i = 0; i < good.size(); ++i) {
        for (int bit = 0; bit < 8; ++bit) {
            auto b = good;
            b[i] ^= static_cast<std::uint8_t>(1u << bit);
            CHECK_THROWS_AS(decode_container(b, kTestMagic, 1, 3), DataError);
        }
    }
}

TEST_CASE("f32 encoding keeps bit patterns") {
    const std::vector<float> v{0.0f, -0.0f, 1.5f, std::numeric_limits<float>::quiet_NaN(),
                               std::numeric_limits<float>::infinity(), std::numeric_limits<float>::denorm_min()};
    const auto bytes = encode_f32(v);
    CHECK(bytes.size() == 24);
    CHECK(bytes[8] == 0x00);
    CHECK(bytes[11] == 0x3f); // 1.5f = 0x3fc00000
    const auto back = decode_f32(bytes);
    REQUIRE(back.size() == v.size());
    CHECK(std::memcmp(back.data(), v.data(), 24) == 0);
    CHECK_THROWS_AS(decode_f32(std::span<const std::uint8_t>(bytes.data(), 7)), FormatError);
}

TEST_CASE("bundle round trip") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        const auto b = random_bundle(rng, "patch-" + std::to_string(i));
        const auto back = decode_bundle(encode_bundle(b));
        CHECK(back.bitwise_equal(b));
        CHECK(encode_bundle(back) == encode_bundle(b));
    }
}

TEST_CASE("bundle metadata is checked") {
    std::mt19937_64 rng(6);
    auto b = random_bundle(rng, "x");
    auto bytes = encode_bundle(b);
    auto c = decode_container(bytes, kBundleMagic, kArtifactVersion, 5);
    auto meta = nlohmann::json::parse(c.metadata);
    meta["schema_version"] = 7;
    c.metadata = meta.dump();
    CHECK_THROWS_AS(decode_bundle(encode_container(kBundleMagic, kArtifactVersion, c)), SchemaVersionError);

    meta["schema_version"] = 1;
    meta["grids"]["s2_pre"]["channels"] = 3;
    c.metadata = meta.dump();
    CHECK_THROWS_AS(decode_bundle(encode_container(kBundleMagic, kArtifactVersion, c)), DataError);
}

TEST_CASE("grid and class map files") {
    const auto dir = std::filesystem::temp_directory_path() / "dmgmap_test_artifact_io";
    std::filesystem::create_directories(dir);

    RasterGrid g(3, 5, 7, 1.25f);
    g.at(2, 4, 6) = -3.0f;
    std::vector<std::uint8_t> nodata(35, 0);
    nodata[3] = 1;
    g.set_nodata_mask(nodata);
    g.set_geotransform(AffineTransform2D{0.5, 0.0, 1.0, 0.0, -0.5, 2.0});
    write_grid(g, dir / "g.grid");
    CHECK(read_grid(dir / "g.grid").bitwise_equal(g));

    RasterGrid plain(1, 2, 2, 0.0f);
    CHECK(decode_grid(encode_grid(plain)).bitwise_equal(plain));

    ClassMap m(4, 4, std::vector<std::uint8_t>{0, 1, 2, 255, 0, 0, 1, 1, 2, 2, 0, 0, 255, 255, 1, 0});
    write_class_map(m, "tile-9", dir / "m.pred");
    std::string id;
    CHECK(read_class_map(dir / "m.pred", &id) == m);
    CHECK(id == "tile-9");
    CHECK_THROWS_AS(decode_grid(encode_class_map(m, "tile-9")), FormatError);
    CHECK_THROWS_AS(read_class_map(dir / "missing.pred"), DataError);

    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint round trip") {
    Checkpoint c;
    c.model.role = HeadRole::Damage;
    c.model.width1 = 4;
    c.model.width2 = 6;
    Network<float> net(c.model);
    net.init(3);
    c.params.assign(net.params().begin(), net.params().end());
    c.norm.channels.assign(14, ChannelStats{0.1, 0.9});
    c.seed = 3;
    c.epoch = 12;
    c.selection_score = 0.75;
    c.training = {{"lr", 5e-4}};
    const auto back = decode_checkpoint(encode_checkpoint(c));
    CHECK(back.model.role == HeadRole::Damage);
    CHECK(back.model.width2 == 6);
    CHECK(back.params == c.params);
    CHECK(back.norm == c.norm);
    CHECK(back.epoch == 12);
    CHECK(back.selection_score == 0.75);
    CHECK(back.training == c.training);
    CHECK(encode_checkpoint(back) == encode_checkpoint(c));

    c.params.pop_back();
    CHECK_THROWS_AS(encode_checkpoint(c), DataError);
}
