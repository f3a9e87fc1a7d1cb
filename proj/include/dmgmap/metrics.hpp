#pragma once

#include "dmgmap/dataset.hpp"
#include "dmgmap/raster.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmgmap {

struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// 2tp / (2tp + fp + fn); undefined when there are no positives in either
/// prediction or truth.
std::optional<double> f1_score(const Confusion& c);

struct LocCounts {
    Confusion confusion;
    std::uint64_t ignored_invalid = 0;
    std::uint64_t ignored_ring = 0;
};

/// Building (pred in {1,2}) vs background over truth-valid pixels, excluding
/// the ring dilate(true buildings, B) minus true buildings when B > 0.
LocCounts loc_counts(const ClassMap& pred, const ClassMap& truth, int buffer);

struct DamageCounts {
    Confusion intact;
    Confusion damaged;

    DamageCounts& operator+=(const DamageCounts& o) noexcept {
        intact += o.intact;
        damaged += o.damaged;
        return *this;
    }
    friend bool operator==(const DamageCounts&, const DamageCounts&) = default;
};

/// One-vs-rest counts for intact and damaged over true building pixels; a
/// background prediction is a miss for the true class.
DamageCounts damage_counts(const ClassMap& pred, const ClassMap& truth);

struct DamageScores {
    std::optional<double> intact;
    std::optional<double> damaged;
    std::optional<double> dmg;
    bool partial = false; // one class F1 undefined and left out of the harmonic mean
};

DamageScores damage_scores(const DamageCounts& c);

std::optional<double> f1_loc(const ClassMap& pred, const ClassMap& truth, int buffer);
DamageScores f1_dmg(const ClassMap& pred, const ClassMap& truth);

/// 0.3 * f1_loc + 0.7 * f1_dmg
double f1_comp(double f1_loc, double f1_dmg);
std::optional<double> f1_comp(std::optional<double> f1_loc, std::optional<double> f1_dmg);

struct EventRow {
    std::string event_id; // "ALL" for the aggregate
    int buffer = 0;
    std::size_t n_patches = 0;
    LocCounts loc;        // ring excluded at `buffer`
    LocCounts loc_strict; // B = 0
    DamageCounts dmg;
    std::optional<double> f1_loc;
    std::optional<double> f1_loc_strict;
    DamageScores damage;
    std::optional<double> f1_comp;
    std::optional<double> f1_comp_strict;
};

struct PatchScore {
    std::string patch_id;
    std::string event_id;
    int buffer = 0;
    std::optional<double> f1_loc;
    std::optional<double> f1_loc_strict;
    DamageScores damage;
    std::optional<double> f1_comp;
};

inline constexpr const char* kAggregateEvent = "ALL";

/// Confusion counts are pooled over all patches of an event before any F1 is
/// computed (micro averaging); the aggregate row pools every event.
struct EvalReport {
    std::vector<int> buffers;
    std::vector<EventRow> rows; // events in id order, then ALL, per buffer
    std::vector<PatchScore> patches;
    std::vector<std::string> missing; // test patches without a prediction
    std::vector<std::string> warnings;

    const EventRow* find(std::string_view event_id, int buffer) const;
};

EventRow finalize_row(EventRow row);

EvalReport per_event_report(const std::map<std::string, ClassMap>& predictions,
                            const std::map<std::string, ClassMap>& truths, const SplitScheme& split,
                            std::span<const int> buffers, Split which = Split::Test);

/// Columns: event_id,buffer,n_patches,pooling,tp_loc,fp_loc,fn_loc,tn_loc,
/// ignored_invalid,ignored_ring,f1_loc,f1_loc_strict,f1_intact,f1_damaged,
/// f1_dmg,f1_dmg_partial,f1_comp,f1_comp_strict. Undefined values are written
/// as "undefined".
std::string report_csv(const EvalReport& r);
nlohmann::json report_json(const EvalReport& r);

} // namespace dmgmap
