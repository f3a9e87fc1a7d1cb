#include "dmgmap/checkpoint.hpp"

namespace dmgmap {

Network<float> Checkpoint::network() const {
    Network<float> net(model);
    net.set_params(params);
    return net;
}

Bytes encode_checkpoint(const Checkpoint& c) {
    if (c.params.size() != c.model.param_count()) {
        throw DataError("checkpoint parameter count does not match its architecture");
    }
    nlohmann::json meta{
        {"schema_version", kArtifactVersion},
        {"kind", "checkpoint"},
        {"model", c.model.to_json()},
        {"norm_stats", nlohmann::json::parse(norm_stats_to_json(c.norm))},
        {"seed", c.seed},
        {"epoch", c.epoch},
        {"selection_score", c.selection_score ? nlohmann::json(*c.selection_score) : nlohmann::json(nullptr)},
        {"training", c.training},
    };
    Container box;
    box.metadata = meta.dump();
    box.sections.push_back(encode_f32(c.params));
    return encode_container(kCheckpointMagic, kArtifactVersion, box);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    const auto box = decode_container(bytes, kCheckpointMagic, kArtifactVersion, 1);
    Checkpoint c;
    try {
        const auto meta = nlohmann::json::parse(box.metadata);
        if (meta.value("schema_version", 0) != static_cast<int>(kArtifactVersion)) {
            throw SchemaVersionError("checkpoint schema_version mismatch");
        }
        c.model = ModelConfig::from_json(meta.at("model"));
        c.norm = norm_stats_from_json(meta.at("norm_stats").dump());
        c.seed = meta.at("seed").get<std::uint64_t>();
        c.epoch = meta.at("epoch").get<int>();
        if (!meta.at("selection_score").is_null()) {
            c.selection_score = meta.at("selection_score").get<double>();
        }
        c.training = meta.at("training");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
    c.params = decode_f32(box.sections[0]);
    if (c.params.size() != c.model.param_count()) {
        throw FormatError("checkpoint parameter payload does not match its architecture");
    }
    if (c.norm.channels.size() != c.model.epoch_channels) {
        throw FormatError("checkpoint normalisation stats do not match the input channels");
    }
    return c;
}

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    atomic_write_file(path, encode_checkpoint(c));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

} // namespace dmgmap
