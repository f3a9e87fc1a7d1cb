#include "dmgmap/metrics.hpp"

#include <cstdio>
#include <set>

namespace dmgmap {

namespace {

void check_aligned(const ClassMap& pred, const ClassMap& truth) {
    if (pred.height() != truth.height() || pred.width() != truth.width()) {
        throw DataError("prediction and truth maps differ in size");
    }
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string opt_csv(const std::optional<double>& v) {
    if (!v) {
        return "undefined";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

nlohmann::json confusion_json(const Confusion& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

} // namespace

std::optional<double> f1_score(const Confusion& c) {
    const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) {
        return std::nullopt;
    }
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

LocCounts loc_counts(const ClassMap& pred, const ClassMap& truth, int buffer) {
    check_aligned(pred, truth);
    if (buffer < 0) {
        throw DataError("evaluation buffer must be non-negative");
    }
    LocCounts out;
    Mask ring(truth.height(), truth.width());
    if (buffer > 0) {
        const Mask buildings = truth.building_mask();
        ring = dilate_mask(buildings, buffer);
        for (std::size_t i = 0; i < ring.bits.size(); ++i) {
            ring.bits[i] = ring.bits[i] && !buildings.bits[i];
        }
    }
    const auto p = pred.values();
    const auto t = truth.values();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == 255) {
            ++out.ignored_invalid;
            continue;
        }
        if (ring.bits[i]) {
            ++out.ignored_ring;
            continue;
        }
        const bool tb = is_building_code(t[i]);
        const bool pb = is_building_code(p[i]);
        auto& c = out.confusion;
        if (tb && pb) {
            ++c.tp;
        } else if (pb) {
            ++c.fp;
        } else if (tb) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return out;
}

DamageCounts damage_counts(const ClassMap& pred, const ClassMap& truth) {
    check_aligned(pred, truth);
    DamageCounts out;
    const auto p = pred.values();
    const auto t = truth.values();
    auto tally = [](Confusion& c, bool truth_pos, bool pred_pos) {
        if (truth_pos && pred_pos) {
            ++c.tp;
        } else if (pred_pos) {
            ++c.fp;
        } else if (truth_pos) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    };
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!is_building_code(t[i])) {
            continue;
        }
        tally(out.intact, t[i] == 1, p[i] == 1);
        tally(out.damaged, t[i] == 2, p[i] == 2);
    }
    return out;
}

DamageScores damage_scores(const DamageCounts& c) {
    DamageScores s;
    s.intact = f1_score(c.intact);
    s.damaged = f1_score(c.damaged);
    if (s.intact && s.damaged) {
        const double a = *s.intact;
        const double b = *s.damaged;
        s.dmg = a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b);
    } else if (s.intact || s.damaged) {
        s.dmg = s.intact ? s.intact : s.damaged;
        s.partial = true;
    }
    return s;
}

std::optional<double> f1_loc(const ClassMap& pred, const ClassMap& truth, int buffer) {
    return f1_score(loc_counts(pred, truth, buffer).confusion);
}

DamageScores f1_dmg(const ClassMap& pred, const ClassMap& truth) { return damage_scores(damage_counts(pred, truth)); }

double f1_comp(double f1_loc, double f1_dmg) { return 0.3 * f1_loc + 0.7 * f1_dmg; }

std::optional<double> f1_comp(std::optional<double> f1_loc, std::optional<double> f1_dmg) {
    if (!f1_loc || !f1_dmg) {
        return std::nullopt;
    }
    return f1_comp(*f1_loc, *f1_dmg);
}

const EventRow* EvalReport::find(std::string_view event_id, int buffer) const {
    for (const auto& r : rows) {
        if (r.event_id == event_id && r.buffer == buffer) {
            return &r;
        }
    }
    return nullptr;
}

EventRow finalize_row(EventRow row) {
    row.f1_loc = f1_score(row.loc.confusion);
    row.f1_loc_strict = f1_score(row.loc_strict.confusion);
    row.damage = damage_scores(row.dmg);
    row.f1_comp = f1_comp(row.f1_loc, row.damage.dmg);
    row.f1_comp_strict = f1_comp(row.f1_loc_strict, row.damage.dmg);
    return row;
}

EvalReport per_event_report(const std::map<std::string, ClassMap>& predictions,
                            const std::map<std::string, ClassMap>& truths, const SplitScheme& split,
                            std::span<const int> buffers, Split which) {
    EvalReport report;
    report.buffers.assign(buffers.begin(), buffers.end());
    if (buffers.empty()) {
        throw ConfigError("evaluation needs at least one buffer size");
    }

    std::map<std::string, std::vector<std::string>> by_event;
    for (const auto& id : split.patches_in(which)) {
        by_event[split.event_of.at(id)].push_back(id);
    }
    std::set<std::string> skipped;
    for (const auto& [event, ids] : by_event) {
        for (const auto& id : ids) {
            if (!truths.count(id)) {
                throw DataError("no ground truth for patch " + id);
            }
            if (!predictions.count(id)) {
                report.missing.push_back(id);
                skipped.insert(event);
            }
        }
    }
    for (const auto& e : skipped) {
        report.warnings.push_back("event " + e + " skipped: missing predictions");
    }

    // Strict and damage counts do not depend on the buffer.
    std::map<std::string, LocCounts> strict;
    std::map<std::string, DamageCounts> dmg;
    for (const auto& [event, ids] : by_event) {
        if (skipped.count(event)) {
            continue;
        }
        for (const auto& id : ids) {
            strict[id] = loc_counts(predictions.at(id), truths.at(id), 0);
            dmg[id] = damage_counts(predictions.at(id), truths.at(id));
        }
    }

    for (int b : buffers) {
        EventRow all;
        all.event_id = kAggregateEvent;
        all.buffer = b;
        for (const auto& [event, ids] : by_event) {
            if (skipped.count(event)) {
                continue;
            }
            EventRow row;
            row.event_id = event;
            row.buffer = b;
            for (const auto& id : ids) {
                const LocCounts lc = b == 0 ? strict[id] : loc_counts(predictions.at(id), truths.at(id), b);
                const LocCounts& sc = strict[id];
                ++row.n_patches;
                row.loc.confusion += lc.confusion;
                row.loc.ignored_invalid += lc.ignored_invalid;
                row.loc.ignored_ring += lc.ignored_ring;
                row.loc_strict.confusion += sc.confusion;
                row.loc_strict.ignored_invalid += sc.ignored_invalid;
                row.dmg += dmg[id];

                PatchScore ps;
                ps.patch_id = id;
                ps.event_id = event;
                ps.buffer = b;
                ps.f1_loc = f1_score(lc.confusion);
                ps.f1_loc_strict = f1_score(sc.confusion);
                ps.damage = damage_scores(dmg[id]);
                ps.f1_comp = f1_comp(ps.f1_loc, ps.damage.dmg);
                report.patches.push_back(std::move(ps));
            }
            all.n_patches += row.n_patches;
            all.loc.confusion += row.loc.confusion;
            all.loc.ignored_invalid += row.loc.ignored_invalid;
            all.loc.ignored_ring += row.loc.ignored_ring;
            all.loc_strict.confusion += row.loc_strict.confusion;
            all.loc_strict.ignored_invalid += row.loc_strict.ignored_invalid;
            all.dmg += row.dmg;
            report.rows.push_back(finalize_row(std::move(row)));
        }
        report.rows.push_back(finalize_row(std::move(all)));
    }
    return report;
}

std::string report_csv(const EvalReport& r) {
    std::string out = "event_id,buffer,n_patches,pooling,tp_loc,fp_loc,fn_loc,tn_loc,ignored_invalid,ignored_ring,"
                      "f1_loc,f1_loc_strict,f1_intact,f1_damaged,f1_dmg,f1_dmg_partial,f1_comp,f1_comp_strict\n";
    for (const auto& row : r.rows) {
        const auto& c = row.loc.confusion;
        out += row.event_id + "," + std::to_string(row.buffer) + "," + std::to_string(row.n_patches) + ",micro," +
               std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.fn) + "," +
               std::to_string(c.tn) + "," + std::to_string(row.loc.ignored_invalid) + "," +
               std::to_string(row.loc.ignored_ring) + "," + opt_csv(row.f1_loc) + "," + opt_csv(row.f1_loc_strict) +
               "," + opt_csv(row.damage.intact) + "," + opt_csv(row.damage.damaged) + "," + opt_csv(row.damage.dmg) +
               "," + (row.damage.partial ? "1" : "0") + "," + opt_csv(row.f1_comp) + "," +
               opt_csv(row.f1_comp_strict) + "\n";
    }
    return out;
}

nlohmann::json report_json(const EvalReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({
            {"event_id", row.event_id},
            {"buffer", row.buffer},
            {"n_patches", row.n_patches},
            {"loc", confusion_json(row.loc.confusion)},
            {"loc_strict", confusion_json(row.loc_strict.confusion)},
            {"intact", confusion_json(row.dmg.intact)},
            {"damaged", confusion_json(row.dmg.damaged)},
            {"ignored_invalid", row.loc.ignored_invalid},
            {"ignored_ring", row.loc.ignored_ring},
            {"f1_loc", opt_json(row.f1_loc)},
            {"f1_loc_strict", opt_json(row.f1_loc_strict)},
            {"f1_intact", opt_json(row.damage.intact)},
            {"f1_damaged", opt_json(row.damage.damaged)},
            {"f1_dmg", opt_json(row.damage.dmg)},
            {"f1_dmg_partial", row.damage.partial},
            {"f1_comp", opt_json(row.f1_comp)},
            {"f1_comp_strict", opt_json(row.f1_comp_strict)},
        });
    }
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& p : r.patches) {
        patches.push_back({{"patch_id", p.patch_id},
                           {"event_id", p.event_id},
                           {"buffer", p.buffer},
                           {"f1_loc", opt_json(p.f1_loc)},
                           {"f1_loc_strict", opt_json(p.f1_loc_strict)},
                           {"f1_intact", opt_json(p.damage.intact)},
                           {"f1_damaged", opt_json(p.damage.damaged)},
                           {"f1_dmg", opt_json(p.damage.dmg)},
                           {"f1_comp", opt_json(p.f1_comp)}});
    }
    return {{"schema_version", 1},
            {"pooling", "micro"},
            {"buffers", r.buffers},
            {"rows", rows},
            {"patches", patches},
            {"missing", r.missing},
            {"warnings", r.warnings}};
}

} // namespace dmgmap
