#include "dmgmap/scene_select.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace dmgmap {

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        throw DataError("malformed date '" + s + "' (expected YYYY-MM-DD)");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        throw DataError("invalid calendar date '" + s + "'");
    }
    return Date{ymd};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

double temporal_score(std::size_t index) { return 1.0 / std::sqrt(static_cast<double>(index) + 1.0); }

double cloud_temporal_score(const SceneCandidate& c, const SelectionPolicy& policy) {
    if (!c.cloud_score) {
        throw DataError("scene " + c.scene_id + " has no cloud score");
    }
    return policy.alpha_cloud * *c.cloud_score + policy.alpha_time * temporal_score(c.temporal_index);
}

PostSelection select_post_scene(std::span<const SceneCandidate> candidates, const SelectionPolicy& policy) {
    if (candidates.empty()) {
        throw DataError("select_post_scene: no post-event candidates");
    }
    auto better = [](double score, const SceneCandidate& c, double best_score, const SceneCandidate& best) {
        if (score != best_score) {
            return score > best_score;
        }
        if (c.temporal_index != best.temporal_index) {
            return c.temporal_index < best.temporal_index;
        }
        return c.scene_id < best.scene_id;
    };
    auto pick = [&](bool apply_threshold) -> std::optional<PostSelection> {
        std::optional<PostSelection> best;
        for (const auto& c : candidates) {
            const double score = cloud_temporal_score(c, policy);
            if (apply_threshold && !(*c.cloud_score > policy.cs_threshold)) {
                continue;
            }
            if (!best || better(score, c, best->score, best->scene)) {
                best = PostSelection{c, score, !apply_threshold};
            }
        }
        return best;
    };
    if (auto filtered = pick(true)) {
        return *filtered;
    }
    return *pick(false);
}

SceneCandidate select_pre_scene(std::span<const SceneCandidate> candidates) {
    if (candidates.empty()) {
        throw DataError("select_pre_scene: no pre-event candidates");
    }
    const SceneCandidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!c.cloud_score) {
            throw DataError("scene " + c.scene_id + " has no cloud score");
        }
        if (best == nullptr) {
            best = &c;
            continue;
        }
        const double cs = *c.cloud_score;
        const double bs = *best->cloud_score;
        if (cs > bs || (cs == bs && (c.acquisition_date > best->acquisition_date ||
                                     (c.acquisition_date == best->acquisition_date && c.scene_id < best->scene_id)))) {
            best = &c;
        }
    }
    return *best;
}

std::pair<SceneCandidate, SceneCandidate> pair_s1_scenes(std::span<const SceneCandidate> pre_candidates,
                                                         std::span<const SceneCandidate> post_candidates,
                                                         Date s2_pre_date, Date s2_post_date,
                                                         const SelectionPolicy& policy) {
    if (pre_candidates.empty() || post_candidates.empty()) {
        throw DataError("pair_s1_scenes: empty Sentinel-1 candidate list");
    }
    const SceneCandidate* best_pre = nullptr;
    const SceneCandidate* best_post = nullptr;
    long long best_cost = std::numeric_limits<long long>::max();
    for (const auto& pre : pre_candidates) {
        for (const auto& post : post_candidates) {
            if (policy.require_same_orbit) {
                if (!pre.orbit_path || !post.orbit_path || *pre.orbit_path != *post.orbit_path) {
                    continue;
                }
            }
            const long long cost = std::abs((pre.acquisition_date - s2_pre_date).count()) +
                                   std::abs((post.acquisition_date - s2_post_date).count());
            bool take = best_pre == nullptr || cost < best_cost;
            if (!take && cost == best_cost) {
                take = pre.scene_id < best_pre->scene_id ||
                       (pre.scene_id == best_pre->scene_id && post.scene_id < best_post->scene_id);
            }
            if (take) {
                best_pre = &pre;
                best_post = &post;
                best_cost = cost;
            }
        }
    }
    if (best_pre == nullptr) {
        throw NoPairError("no pre/post Sentinel-1 pair shares an orbit path; relax the policy "
                          "(require_same_orbit = false) to pair across orbits");
    }
    return {*best_pre, *best_post};
}

PatchSelection select_patch_scenes(const PatchCatalog& catalog, const SelectionPolicy& policy) {
    PatchSelection sel;
    sel.patch_id = catalog.patch_id;
    sel.policy_used = policy;
    sel.s2_pre = select_pre_scene(catalog.s2_pre);
    sel.s2_post = select_post_scene(catalog.s2_post, policy);
    auto [s1_pre, s1_post] = pair_s1_scenes(catalog.s1_pre, catalog.s1_post, sel.s2_pre.acquisition_date,
                                            sel.s2_post.scene.acquisition_date, policy);
    sel.s1_pre = std::move(s1_pre);
    sel.s1_post = std::move(s1_post);
    return sel;
}

namespace {

SceneCandidate parse_candidate(const nlohmann::json& obj) {
    SceneCandidate c;
    c.scene_id = obj.at("scene_id").get<std::string>();
    const auto platform = obj.at("platform").get<std::string>();
    if (platform == "S1") {
        c.platform = Platform::S1;
    } else if (platform == "S2") {
        c.platform = Platform::S2;
    } else {
        throw DataError("scene " + c.scene_id + ": unknown platform '" + platform + "'");
    }
    c.acquisition_date = parse_date(obj.at("acquisition_date").get<std::string>());
    if (obj.contains("cloud_score")) {
        const double cs = obj.at("cloud_score").get<double>();
        if (!(cs >= 0.0 && cs <= 1.0)) {
            throw DataError("scene " + c.scene_id + ": cloud_score outside [0, 1]");
        }
        c.cloud_score = cs;
    }
    if (obj.contains("orbit_direction")) {
        const auto dir = obj.at("orbit_direction").get<std::string>();
        if (dir == "ascending") {
            c.orbit_direction = OrbitDirection::Ascending;
        } else if (dir == "descending") {
            c.orbit_direction = OrbitDirection::Descending;
        } else {
            throw DataError("scene " + c.scene_id + ": unknown orbit direction '" + dir + "'");
        }
    }
    if (obj.contains("orbit_path")) {
        const auto& p = obj.at("orbit_path");
        c.orbit_path = p.is_string() ? p.get<std::string>() : p.dump();
    }
    if (c.platform == Platform::S2 && !c.cloud_score) {
        throw DataError("Sentinel-2 scene " + c.scene_id + " lacks cloud_score");
    }
    if (c.platform == Platform::S1 && (!c.orbit_direction || !c.orbit_path)) {
        throw DataError("Sentinel-1 scene " + c.scene_id + " lacks orbit fields");
    }
    if (obj.contains("temporal_index")) {
        c.temporal_index = obj.at("temporal_index").get<std::size_t>();
    }
    return c;
}

const char* direction_name(OrbitDirection d) { return d == OrbitDirection::Ascending ? "ascending" : "descending"; }

nlohmann::json scene_json(const SceneCandidate& c) {
    nlohmann::json j{{"scene_id", c.scene_id}, {"acquisition_date", format_date(c.acquisition_date)}};
    if (c.cloud_score) {
        j["cloud_score"] = *c.cloud_score;
    }
    if (c.orbit_direction) {
        j["orbit_direction"] = direction_name(*c.orbit_direction);
    }
    if (c.orbit_path) {
        j["orbit_path"] = *c.orbit_path;
    }
    return j;
}

} // namespace

std::vector<PatchCatalog> parse_catalog(std::string_view json_text) {
    std::vector<PatchCatalog> out;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        if (!doc.is_object()) {
            throw DataError("catalog must be a JSON object keyed by patch id");
        }
        for (const auto& [patch_id, entry] : doc.items()) {
            PatchCatalog pc;
            pc.patch_id = patch_id;
            pc.event_id = entry.value("event_id", std::string{});
            pc.event_end_date = parse_date(entry.at("event_end_date").get<std::string>());
            for (const auto& obj : entry.at("candidates")) {
                auto c = parse_candidate(obj);
                const bool post = c.acquisition_date >= pc.event_end_date;
                if (c.platform == Platform::S2) {
                    (post ? pc.s2_post : pc.s2_pre).push_back(std::move(c));
                } else {
                    (post ? pc.s1_post : pc.s1_pre).push_back(std::move(c));
                }
            }
            // Temporal index = rank by date among post-event S2 candidates.
            std::vector<std::size_t> order(pc.s2_post.size());
            for (std::size_t i = 0; i < order.size(); ++i) {
                order[i] = i;
            }
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return pc.s2_post[a].acquisition_date < pc.s2_post[b].acquisition_date;
            });
            const auto& raw = entry.at("candidates");
            std::map<std::string, bool> explicit_index;
            for (const auto& obj : raw) {
                explicit_index[obj.at("scene_id").get<std::string>()] = obj.contains("temporal_index");
            }
            for (std::size_t rank = 0; rank < order.size(); ++rank) {
                auto& c = pc.s2_post[order[rank]];
                if (!explicit_index[c.scene_id]) {
                    c.temporal_index = rank;
                }
            }
            out.push_back(std::move(pc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("catalog: ") + e.what());
    }
    return out;
}

ManifestResult build_scene_manifest(std::span<const PatchCatalog> catalog, const SelectionPolicy& policy,
                                    const std::map<std::string, double>& threshold_overrides) {
    ManifestResult result;
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& patch : catalog) {
        SelectionPolicy p = policy;
        if (auto it = threshold_overrides.find(patch.event_id); it != threshold_overrides.end()) {
            p.cs_threshold = it->second;
        }
        try {
            const auto sel = select_patch_scenes(patch, p);
            auto post = scene_json(sel.s2_post.scene);
            post["temporal_index"] = sel.s2_post.scene.temporal_index;
            post["score"] = sel.s2_post.score;
            post["threshold_fallback"] = sel.s2_post.used_fallback;
            doc[patch.patch_id] = {
                {"s2_pre", scene_json(sel.s2_pre)},
                {"s2_post", post},
                {"s1_pre", scene_json(sel.s1_pre)},
                {"s1_post", scene_json(sel.s1_post)},
                {"policy_used",
                 {{"alpha_cloud", p.alpha_cloud},
                  {"alpha_time", p.alpha_time},
                  {"cs_threshold", p.cs_threshold},
                  {"require_same_orbit", p.require_same_orbit}}},
            };
        } catch (const DataError& e) {
            result.failures[patch.patch_id] = e.what();
        }
    }
    result.json = doc.dump(2);
    return result;
}

} // namespace dmgmap
