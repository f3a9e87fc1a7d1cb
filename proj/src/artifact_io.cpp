#include "dmgmap/artifact_io.hpp"

#include "json.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace dmgmap {

namespace {

using nlohmann::json;

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

json transform_json(const std::optional<AffineTransform2D>& t) {
    if (!t) {
        return nullptr;
    }
    return t->to_array();
}

std::optional<AffineTransform2D> transform_from(const json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return AffineTransform2D::from_array(j.get<std::array<double, 6>>());
}

RasterGrid grid_from_section(const Bytes& section, const json& shape, const char* name) {
    const auto c = shape.at("channels").get<std::size_t>();
    const auto h = shape.at("height").get<std::size_t>();
    const auto w = shape.at("width").get<std::size_t>();
    if (section.size() != c * h * w * 4) {
        throw FormatError(std::string("section ") + name + " length does not match its declared shape");
    }
    RasterGrid g(c, h, w, decode_f32(section));
    g.set_geotransform(transform_from(shape.value("geotransform", json(nullptr))));
    return g;
}

json grid_shape(const RasterGrid& g) {
    return {{"channels", g.channels()},
            {"height", g.height()},
            {"width", g.width()},
            {"geotransform", transform_json(g.geotransform())}};
}

json parse_metadata(const std::string& text) {
    try {
        auto j = json::parse(text);
        if (!j.is_object()) {
            throw FormatError("artifact metadata is not a JSON object");
        }
        if (j.value("schema_version", 0) != static_cast<int>(kArtifactVersion)) {
            throw SchemaVersionError("artifact schema_version " + j.value("schema_version", json(nullptr)).dump() +
                                     " is not supported (expected " + std::to_string(kArtifactVersion) + ")");
        }
        return j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("artifact metadata: ") + e.what());
    }
}

} // namespace

std::uint32_t crc32(std::span<const std::uint8_t> data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for very large buffers.
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
        crc = ::crc32(crc, data.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

Bytes read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void atomic_write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::random_device rd;
    auto tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw DataError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

void atomic_write_text(const std::filesystem::path& path, std::string_view text) {
    atomic_write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Bytes encode_container(const Magic& magic, std::uint32_t version, const Container& c) {
    Bytes out;
    std::size_t total = kContainerHeaderSize + c.metadata.size();
    for (const auto& s : c.sections) {
        total += 12 + s.size();
    }
    out.reserve(total);
    out.insert(out.end(), magic.begin(), magic.end());
    put_u32(out, version);
    put_u32(out, static_cast<std::uint32_t>(c.sections.size()));
    put_u64(out, c.metadata.size());
    const auto* meta = reinterpret_cast<const std::uint8_t*>(c.metadata.data());
    put_u32(out, crc32({meta, c.metadata.size()}));
    out.resize(60, 0);
    put_u32(out, crc32({out.data(), 60}));
    out.insert(out.end(), meta, meta + c.metadata.size());
    for (const auto& s : c.sections) {
        put_u64(out, s.size());
        out.insert(out.end(), s.begin(), s.end());
        put_u32(out, crc32(s));
    }
    return out;
}

Container decode_container(std::span<const std::uint8_t> bytes, const Magic& magic, std::uint32_t version,
                           std::size_t expected_sections) {
    if (bytes.size() < kContainerHeaderSize) {
        throw TruncatedError("artifact shorter than its 64-byte header");
    }
    if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
        throw FormatError("bad magic: not a " + std::string(magic.data(), magic.size()) + " artifact");
    }
    if (get_u32(bytes.data() + 60) != crc32(bytes.first(60))) {
        throw FormatError("corrupt header (header checksum mismatch)");
    }
    const auto file_version = get_u32(bytes.data() + 8);
    if (file_version != version) {
        throw SchemaVersionError("artifact format version " + std::to_string(file_version) + " is not supported (expected " +
                                 std::to_string(version) + ")");
    }
    const auto n_sections = get_u32(bytes.data() + 12);
    if (n_sections != expected_sections) {
        throw FormatError("artifact declares " + std::to_string(n_sections) + " sections, expected " +
                          std::to_string(expected_sections));
    }
    const auto meta_len = get_u64(bytes.data() + 16);
    std::size_t pos = kContainerHeaderSize;
    if (meta_len > bytes.size() - pos) {
        throw TruncatedError("artifact truncated inside metadata");
    }
    const auto meta = bytes.subspan(pos, meta_len);
    if (crc32(meta) != get_u32(bytes.data() + 24)) {
        throw ChecksumError("metadata checksum mismatch");
    }
    Container c;
    c.metadata.assign(meta.begin(), meta.end());
    pos += meta_len;
    for (std::uint32_t s = 0; s < n_sections; ++s) {
        if (bytes.size() - pos < 8) {
            throw TruncatedError("artifact truncated before section " + std::to_string(s));
        }
        const auto len = get_u64(bytes.data() + pos);
        pos += 8;
        if (len > bytes.size() - pos || bytes.size() - pos - len < 4) {
            throw TruncatedError("artifact truncated inside section " + std::to_string(s));
        }
        const auto payload = bytes.subspan(pos, len);
        pos += len;
        if (crc32(payload) != get_u32(bytes.data() + pos)) {
            throw ChecksumError("section " + std::to_string(s) + " checksum mismatch");
        }
        pos += 4;
        c.sections.emplace_back(payload.begin(), payload.end());
    }
    if (pos != bytes.size()) {
        throw FormatError("trailing bytes after the last section");
    }
    return c;
}

Bytes encode_f32(std::span<const float> values) {
    Bytes out(values.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), values.data(), out.size());
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto u = std::bit_cast<std::uint32_t>(values[i]);
            for (int k = 0; k < 4; ++k) {
                out[4 * i + k] = static_cast<std::uint8_t>(u >> (8 * k));
            }
        }
    }
    return out;
}

std::vector<float> decode_f32(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 4 != 0) {
        throw FormatError("f32 payload length is not a multiple of 4");
    }
    std::vector<float> out(bytes.size() / 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), bytes.data(), bytes.size());
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = std::bit_cast<float>(get_u32(bytes.data() + 4 * i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Bytes encode_bundle(const PatchBundle& b) {
    b.validate();
    json meta{
        {"schema_version", kArtifactVersion},
        {"kind", "patch_bundle"},
        {"patch_id", b.patch_id},
        {"event_id", b.event_id},
        {"disaster_type", disaster_type_name(b.disaster_type)},
        {"orbit_direction", orbit_direction_name(b.orbit_direction)},
        {"dates",
         {{"s1_pre", format_date(b.s1_pre_date)},
          {"s1_post", format_date(b.s1_post_date)},
          {"s2_pre", format_date(b.s2_pre_date)},
          {"s2_post", format_date(b.s2_post_date)}}},
        {"grids",
         {{"s1_pre", grid_shape(b.s1_pre)},
          {"s1_post", grid_shape(b.s1_post)},
          {"s2_pre", grid_shape(b.s2_pre)},
          {"s2_post", grid_shape(b.s2_post)}}},
        {"label", {{"height", b.label.height()}, {"width", b.label.width()}}},
    };
    Container c;
    c.metadata = meta.dump();
    c.sections.push_back(encode_f32(b.s1_pre.data()));
    c.sections.push_back(encode_f32(b.s1_post.data()));
    c.sections.push_back(encode_f32(b.s2_pre.data()));
    c.sections.push_back(encode_f32(b.s2_post.data()));
    const auto labels = b.label.values();
    c.sections.emplace_back(labels.begin(), labels.end());
    return encode_container(kBundleMagic, kArtifactVersion, c);
}

PatchBundle decode_bundle(std::span<const std::uint8_t> bytes) {
    const auto c = decode_container(bytes, kBundleMagic, kArtifactVersion, 5);
    const auto meta = parse_metadata(c.metadata);
    PatchBundle b;
    try {
        b.patch_id = meta.at("patch_id").get<std::string>();
        b.event_id = meta.at("event_id").get<std::string>();
        b.disaster_type = parse_disaster_type(meta.at("disaster_type").get<std::string>());
        b.orbit_direction = parse_orbit_direction(meta.at("orbit_direction").get<std::string>());
        const auto& dates = meta.at("dates");
        b.s1_pre_date = parse_date(dates.at("s1_pre").get<std::string>());
        b.s1_post_date = parse_date(dates.at("s1_post").get<std::string>());
        b.s2_pre_date = parse_date(dates.at("s2_pre").get<std::string>());
        b.s2_post_date = parse_date(dates.at("s2_post").get<std::string>());
        const auto& grids = meta.at("grids");
        b.s1_pre = grid_from_section(c.sections[0], grids.at("s1_pre"), "s1_pre");
        b.s1_post = grid_from_section(c.sections[1], grids.at("s1_post"), "s1_post");
        b.s2_pre = grid_from_section(c.sections[2], grids.at("s2_pre"), "s2_pre");
        b.s2_post = grid_from_section(c.sections[3], grids.at("s2_post"), "s2_post");
        const auto h = meta.at("label").at("height").get<std::size_t>();
        const auto w = meta.at("label").at("width").get<std::size_t>();
        if (c.sections[4].size() != h * w) {
            throw FormatError("label section length does not match its declared shape");
        }
        b.label = ClassMap(h, w, c.sections[4]);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bundle metadata: ") + e.what());
    }
    b.validate();
    return b;
}

void write_bundle(const PatchBundle& b, const std::filesystem::path& path) {
    atomic_write_file(path, encode_bundle(b));
}

PatchBundle read_bundle(const std::filesystem::path& path) { return decode_bundle(read_file_bytes(path)); }

// ---------------------------------------------------------------------------

Bytes encode_grid(const RasterGrid& g) {
    json meta = grid_shape(g);
    meta["schema_version"] = kArtifactVersion;
    meta["kind"] = "raster_grid";
    meta["has_nodata"] = g.has_nodata();
    Container c;
    c.metadata = meta.dump();
    c.sections.push_back(encode_f32(g.data()));
    c.sections.push_back(g.has_nodata() ? *g.nodata_mask() : Bytes{});
    return encode_container(kGridMagic, kArtifactVersion, c);
}

RasterGrid decode_grid(std::span<const std::uint8_t> bytes) {
    const auto c = decode_container(bytes, kGridMagic, kArtifactVersion, 2);
    const auto meta = parse_metadata(c.metadata);
    try {
        RasterGrid g = grid_from_section(c.sections[0], meta, "data");
        if (meta.at("has_nodata").get<bool>()) {
            if (c.sections[1].size() != g.pixel_count()) {
                throw FormatError("nodata section length does not match the grid");
            }
            g.set_nodata_mask(c.sections[1]);
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("grid metadata: ") + e.what());
    }
}

void write_grid(const RasterGrid& g, const std::filesystem::path& path) { atomic_write_file(path, encode_grid(g)); }

RasterGrid read_grid(const std::filesystem::path& path) { return decode_grid(read_file_bytes(path)); }

Bytes encode_class_map(const ClassMap& m, std::string_view patch_id) {
    json meta{{"schema_version", kArtifactVersion},
              {"kind", "class_map"},
              {"patch_id", patch_id},
              {"height", m.height()},
              {"width", m.width()}};
    Container c;
    c.metadata = meta.dump();
    c.sections.emplace_back(m.values().begin(), m.values().end());
    return encode_container(kClassMapMagic, kArtifactVersion, c);
}

ClassMap decode_class_map(std::span<const std::uint8_t> bytes, std::string* patch_id) {
    const auto c = decode_container(bytes, kClassMapMagic, kArtifactVersion, 1);
    const auto meta = parse_metadata(c.metadata);
    try {
        const auto h = meta.at("height").get<std::size_t>();
        const auto w = meta.at("width").get<std::size_t>();
        if (c.sections[0].size() != h * w) {
            throw FormatError("class map section length does not match its declared shape");
        }
        if (patch_id != nullptr) {
            *patch_id = meta.at("patch_id").get<std::string>();
        }
        return ClassMap(h, w, c.sections[0]);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("class map metadata: ") + e.what());
    }
}

void write_class_map(const ClassMap& m, std::string_view patch_id, const std::filesystem::path& path) {
    atomic_write_file(path, encode_class_map(m, patch_id));
}

ClassMap read_class_map(const std::filesystem::path& path, std::string* patch_id) {
    return decode_class_map(read_file_bytes(path), patch_id);
}

} // namespace dmgmap
