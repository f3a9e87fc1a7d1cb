#pragma once

#include "dmgmap/artifact_io.hpp"
#include "dmgmap/network.hpp"
#include "dmgmap/raster.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace dmgmap {

inline constexpr Magic kCheckpointMagic{'D', 'M', 'G', 'C', 'K', 'P', 'T', '1'};

/// Trained weights plus everything needed to run them: architecture, input
/// normalisation and the settings they were trained with.
struct Checkpoint {
    ModelConfig model;
    NormStats norm;
    std::vector<float> params;
    std::uint64_t seed = 0;
    int epoch = 0;
    std::optional<double> selection_score;
    nlohmann::json training = nlohmann::json::object();

    Network<float> network() const;
};

Bytes encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace dmgmap
