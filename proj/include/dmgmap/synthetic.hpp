#pragma once

#include "dmgmap/dataset.hpp"
#include "dmgmap/georef.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dmgmap {

/// Tiles cut from one acquisition whose GCPs follow a hidden affine map;
/// a fraction of tiles carry GCPs generated from a grossly wrong map.
struct GcpCorpus {
    std::vector<TileGCPSet> tiles;
    AffineTransform2D truth;
    std::vector<std::string> corrupted;
};

GcpCorpus synthetic_gcp_corpus(std::size_t n_tiles, double corrupt_fraction, std::uint64_t seed,
                               std::size_t gcps_per_tile = 12);

/// Largest corner displacement between `estimate` and the corpus truth over
/// every tile, in units of tile width.
double max_tile_error(const AffineTransform2D& estimate, const GcpCorpus& corpus);

struct ScenarioConfig {
    std::size_t n_patches = 200;
    std::size_t n_train = 160;
    std::size_t n_val = 0;
    std::uint64_t seed = 1;
    std::string event_id = "synthetic-storm";
};

/// One synthetic disaster: rectangular buildings with a distinct spectral and
/// backscatter signature, damaged buildings shifting in the post-event image,
/// plus coverage gaps and unclassified footprints marked invalid. The first
/// n_train patches are train, then n_val val, the rest test.
struct Scenario {
    std::vector<PatchBundle> bundles;
    SplitScheme split;
};

Scenario synthetic_scenario(const ScenarioConfig& cfg);

/// Arbitrary valid bundle with random samples, labels and metadata.
PatchBundle random_bundle(std::mt19937_64& rng, const std::string& patch_id);

} // namespace dmgmap
