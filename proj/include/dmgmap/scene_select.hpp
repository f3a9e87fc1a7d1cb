#pragma once

#include "dmgmap/errors.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dmgmap {

using Date = std::chrono::sys_days;

/// Parses an ISO "YYYY-MM-DD" date. Throws DataError on malformed input.
Date parse_date(std::string_view text);
std::string format_date(Date d);

enum class Platform { S1, S2 };
enum class OrbitDirection { Ascending, Descending };

struct SceneCandidate {
    std::string scene_id;
    Platform platform = Platform::S2;
    Date acquisition_date{};
    std::optional<double> cloud_score;             // S2 only
    std::optional<OrbitDirection> orbit_direction; // S1 only
    std::optional<std::string> orbit_path;         // S1 only
    std::size_t temporal_index = 0;                // post-event S2 candidates
};

struct SelectionPolicy {
    double alpha_cloud = 0.4;
    double alpha_time = 0.6;
    double cs_threshold = 0.5;
    bool require_same_orbit = true;
};

class NoPairError : public DataError {
public:
    using DataError::DataError;
};

/// 1 / sqrt(i + 1).
double temporal_score(std::size_t index);

/// alpha_cloud * CS_i + alpha_time * TS_i.
double cloud_temporal_score(const SceneCandidate& c, const SelectionPolicy& policy);

struct PostSelection {
    SceneCandidate scene;
    double score = 0.0;
    bool used_fallback = false; // every candidate failed the cloud threshold
};

/// Argmax of the cloud-temporal score over candidates with CS > threshold,
/// falling back to all candidates if none pass. Ties: smaller temporal index,
/// then scene_id.
PostSelection select_post_scene(std::span<const SceneCandidate> candidates, const SelectionPolicy& policy);

/// Argmax of cloud score. Ties: later date, then scene_id.
SceneCandidate select_pre_scene(std::span<const SceneCandidate> candidates);

/// Pre/post Sentinel-1 pair on a shared orbit path minimising the summed day
/// offsets to the chosen Sentinel-2 dates. Throws NoPairError when no path is
/// shared and the policy requires one.
std::pair<SceneCandidate, SceneCandidate> pair_s1_scenes(std::span<const SceneCandidate> pre_candidates,
                                                         std::span<const SceneCandidate> post_candidates,
                                                         Date s2_pre_date, Date s2_post_date,
                                                         const SelectionPolicy& policy);

/// Catalog entry for one patch. Candidates acquired on or after the event end
/// date are post-event; post-event S2 temporal indices follow date order
/// unless given explicitly.
struct PatchCatalog {
    std::string patch_id;
    std::string event_id;
    Date event_end_date{};
    std::vector<SceneCandidate> s2_pre;
    std::vector<SceneCandidate> s2_post;
    std::vector<SceneCandidate> s1_pre;
    std::vector<SceneCandidate> s1_post;
};

struct PatchSelection {
    std::string patch_id;
    SceneCandidate s2_pre;
    PostSelection s2_post;
    SceneCandidate s1_pre;
    SceneCandidate s1_post;
    SelectionPolicy policy_used;
};

PatchSelection select_patch_scenes(const PatchCatalog& catalog, const SelectionPolicy& policy);

/// Catalog document: {"<patch_id>": {"event_id": ..., "event_end_date": ...,
/// "candidates": [SceneCandidate, ...]}, ...}.
std::vector<PatchCatalog> parse_catalog(std::string_view json_text);

struct ManifestResult {
    std::string json;
    std::map<std::string, std::string> failures; // patch_id -> reason
};

/// Selects every patch and renders the manifest {patch_id: {s2_pre, s2_post,
/// s1_pre, s1_post, policy_used}}. `threshold_overrides` maps event ids to a
/// replacement cloud threshold.
ManifestResult build_scene_manifest(std::span<const PatchCatalog> catalog, const SelectionPolicy& policy,
                                    const std::map<std::string, double>& threshold_overrides = {});

} // namespace dmgmap
