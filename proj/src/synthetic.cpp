#include "dmgmap/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace dmgmap {

GcpCorpus synthetic_gcp_corpus(std::size_t n_tiles, double corrupt_fraction, std::uint64_t seed,
                               std::size_t gcps_per_tile) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> shift(-2e-4, 2e-4);
    GcpCorpus corpus;
    corpus.truth = {4.5e-6, 3e-8, -85.61234 + shift(rng), -2e-8, -4.4e-6, 30.18765 + shift(rng)};

    std::vector<std::size_t> order(n_tiles);
    for (std::size_t i = 0; i < n_tiles; ++i) {
        order[i] = i;
    }
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_bad = static_cast<std::size_t>(std::llround(corrupt_fraction * static_cast<double>(n_tiles)));
    std::vector<bool> bad(n_tiles, false);
    for (std::size_t i = 0; i < n_bad; ++i) {
        bad[order[i]] = true;
    }

    std::uniform_real_distribution<double> px(1.0, kTileSize - 1.0);
    std::uniform_real_distribution<double> gross(-1e-3, 1e-3);
    std::uniform_real_distribution<double> skew(-0.05, 0.05);
    for (std::size_t i = 0; i < n_tiles; ++i) {
        TileGCPSet t;
        t.tile_id = "tile" + std::to_string(i);
        t.source_image_id = "acq0";
        t.col_off = kTileSize * static_cast<double>(i % 8);
        t.row_off = kTileSize * static_cast<double>(i / 8);
        AffineTransform2D map = corpus.truth;
        if (bad[i]) {
            map.a *= 1.0 + skew(rng);
            map.b += map.a * skew(rng);
            map.c += gross(rng);
            map.e *= 1.0 + skew(rng);
            map.f += gross(rng);
            corpus.corrupted.push_back(t.tile_id);
        }
        for (std::size_t k = 0; k < gcps_per_tile; ++k) {
            Point2 p{px(rng), px(rng)};
            switch (k) {
            case 0: p.x = 0.0; break;
            case 1: p.y = kTileSize; break;
            case 2: p.x = kTileSize; break;
            case 3: p.y = 0.0; break;
            default: break;
            }
            GroundControlPoint g{p.x, p.y, 0.0, 0.0};
            const Point2 ground = map.apply(t.source_pixel(g));
            g.lon = ground.x;
            g.lat = ground.y;
            t.gcps.push_back(g);
        }
        corpus.tiles.push_back(std::move(t));
    }
    return corpus;
}

double max_tile_error(const AffineTransform2D& estimate, const GcpCorpus& corpus) {
    const double tile_width = std::hypot(corpus.truth.a, corpus.truth.d) * kTileSize;
    double worst = 0.0;
    for (const auto& t : corpus.tiles) {
        for (Point2 p : {Point2{0, 0}, Point2{kTileSize, 0}, Point2{0, kTileSize}, Point2{kTileSize, kTileSize}}) {
            const Point2 src{p.x + t.col_off, p.y + t.row_off};
            const Point2 a = estimate.apply(src);
            const Point2 b = corpus.truth.apply(src);
            worst = std::max(worst, std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) / tile_width);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------

namespace {

struct Rect {
    std::size_t y0, x0, y1, x1; // half-open
};

// Per-channel background level, building offset and damage shift. Channels are
// S1 VV, VH (dB) then the twelve S2 bands (reflectance).
struct Signature {
    float background;
    float texture;
    float noise;
    float building;
    float damage;
};

constexpr Signature kS1Sig[kS1Channels] = {
    {-12.0f, 1.5f, 0.8f, 7.0f, -5.0f},
    {-18.0f, 1.5f, 0.8f, 5.0f, -3.5f},
};

constexpr Signature kS2Sig[kS2Channels] = {
    {0.06f, 0.02f, 0.010f, 0.10f, 0.08f},  {0.08f, 0.02f, 0.010f, 0.10f, 0.08f},
    {0.07f, 0.02f, 0.010f, 0.12f, 0.10f},  {0.10f, 0.03f, 0.012f, 0.10f, 0.10f},
    {0.18f, 0.04f, 0.012f, 0.02f, 0.06f},  {0.24f, 0.05f, 0.012f, -0.06f, 0.02f},
    {0.28f, 0.05f, 0.012f, -0.10f, -0.02f}, {0.30f, 0.05f, 0.012f, -0.12f, -0.04f},
    {0.31f, 0.05f, 0.012f, -0.12f, -0.04f}, {0.09f, 0.02f, 0.010f, 0.00f, 0.00f},
    {0.20f, 0.04f, 0.012f, 0.06f, 0.10f},  {0.14f, 0.03f, 0.012f, 0.08f, 0.12f},
};

void paint(RasterGrid& g, const Signature* sig, const std::vector<std::uint8_t>& state, bool post,
           const std::vector<float>& texture, std::mt19937_64& rng) {
    std::normal_distribution<float> noise(0.0f, 1.0f);
    const std::size_t plane = g.pixel_count();
    for (std::size_t c = 0; c < g.channels(); ++c) {
        auto ch = g.channel(c);
        const Signature& s = sig[c];
        for (std::size_t i = 0; i < plane; ++i) {
            float v = s.background + s.texture * texture[i] + s.noise * noise(rng);
            if (state[i] != 0) {
                v += s.building;
                if (post && state[i] == 2) {
                    v += s.damage;
                }
            }
            ch[i] = v;
        }
    }
}

} // namespace

Scenario synthetic_scenario(const ScenarioConfig& cfg) {
    if (cfg.n_train + cfg.n_val > cfg.n_patches) {
        throw ConfigError("synthetic scenario: more train/val patches than patches");
    }
    Scenario out;
    out.split.kind = SplitKind::XView2;
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = kPatchSize;
    std::uniform_int_distribution<int> n_buildings(6, 14);
    std::uniform_int_distribution<std::size_t> side(5, 14);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);

    for (std::size_t p = 0; p < cfg.n_patches; ++p) {
        const std::string id = cfg.event_id + "_" + std::to_string(p);
        // 0 background, 1 intact, 2 damaged
        std::vector<std::uint8_t> state(n * n, 0);
        std::vector<std::uint8_t> label(n * n, 0);
        std::vector<Rect> placed;
        const double damage_rate = 0.15 + 0.6 * unit(rng);
        const int want = n_buildings(rng);
        for (int tries = 0; tries < 200 && static_cast<int>(placed.size()) < want; ++tries) {
            const std::size_t h = side(rng);
            const std::size_t w = side(rng);
            std::uniform_int_distribution<std::size_t> y0d(1, n - h - 1);
            std::uniform_int_distribution<std::size_t> x0d(1, n - w - 1);
            const Rect r{y0d(rng), x0d(rng), 0, 0};
            const Rect full{r.y0, r.x0, r.y0 + h, r.x0 + w};
            bool clear = true;
            for (const auto& q : placed) {
                if (full.y0 < q.y1 + 4 && q.y0 < full.y1 + 4 && full.x0 < q.x1 + 4 && q.x0 < full.x1 + 4) {
                    clear = false;
                    break;
                }
            }
            if (!clear) {
                continue;
            }
            placed.push_back(full);
            const std::uint8_t grade = unit(rng) < damage_rate ? 2 : 1;
            const bool unclassified = unit(rng) < 0.05;
            for (std::size_t y = full.y0; y < full.y1; ++y) {
                for (std::size_t x = full.x0; x < full.x1; ++x) {
                    state[y * n + x] = grade;
                    label[y * n + x] = unclassified ? 255 : grade;
                }
            }
        }
        // Coverage gap along one edge for a fifth of the patches.
        if (unit(rng) < 0.2) {
            const auto depth = static_cast<std::size_t>(8 + unit(rng) * 24);
            const bool vertical = unit(rng) < 0.5;
            for (std::size_t y = 0; y < n; ++y) {
                for (std::size_t x = 0; x < n; ++x) {
                    if ((vertical ? x : y) < depth) {
                        label[y * n + x] = 255;
                    }
                }
            }
        }

        std::vector<float> texture(n * n);
        const double fx = 0.02 + 0.08 * unit(rng);
        const double fy = 0.02 + 0.08 * unit(rng);
        const double px = phase(rng);
        const double py = phase(rng);
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                texture[y * n + x] = static_cast<float>(std::sin(fx * static_cast<double>(x) + px) *
                                                        std::cos(fy * static_cast<double>(y) + py));
            }
        }

        PatchBundle b;
        b.patch_id = id;
        b.event_id = cfg.event_id;
        b.disaster_type = DisasterType::Storm;
        b.orbit_direction = OrbitDirection::Descending;
        b.s1_pre_date = parse_date("2021-08-20");
        b.s2_pre_date = parse_date("2021-08-18");
        b.s1_post_date = parse_date("2021-09-03");
        b.s2_post_date = parse_date("2021-09-02");
        b.s1_pre = RasterGrid(kS1Channels, n, n);
        b.s1_post = RasterGrid(kS1Channels, n, n);
        b.s2_pre = RasterGrid(kS2Channels, n, n);
        b.s2_post = RasterGrid(kS2Channels, n, n);
        paint(b.s1_pre, kS1Sig, state, false, texture, rng);
        paint(b.s1_post, kS1Sig, state, true, texture, rng);
        paint(b.s2_pre, kS2Sig, state, false, texture, rng);
        paint(b.s2_post, kS2Sig, state, true, texture, rng);
        b.label = ClassMap(n, n, std::move(label));
        b.validate();

        const Split s = p < cfg.n_train ? Split::Train : p < cfg.n_train + cfg.n_val ? Split::Val : Split::Test;
        out.split.assignment[id] = s;
        out.split.event_of[id] = cfg.event_id;
        out.bundles.push_back(std::move(b));
    }
    return out;
}

PatchBundle random_bundle(std::mt19937_64& rng, const std::string& patch_id) {
    std::normal_distribution<float> value(0.0f, 100.0f);
    std::uniform_int_distribution<int> code(0, 3);
    std::uniform_int_distribution<int> day(0, 2000);
    std::uniform_int_distribution<int> pick(0, 5);
    auto grid = [&](std::size_t c) {
        RasterGrid g(c, kPatchSize, kPatchSize);
        for (auto& v : g.data()) {
            v = value(rng);
        }
        if (pick(rng) < 2) {
            g.set_geotransform(AffineTransform2D{value(rng), 0.0, value(rng), 0.0, -value(rng), value(rng)});
        }
        return g;
    };
    PatchBundle b;
    b.patch_id = patch_id;
    b.event_id = "event" + std::to_string(pick(rng));
    b.disaster_type = static_cast<DisasterType>(pick(rng));
    b.orbit_direction = pick(rng) < 3 ? OrbitDirection::Ascending : OrbitDirection::Descending;
    const Date base = parse_date("2016-01-01");
    b.s1_pre_date = base + std::chrono::days(day(rng));
    b.s1_post_date = base + std::chrono::days(day(rng));
    b.s2_pre_date = base + std::chrono::days(day(rng));
    b.s2_post_date = base + std::chrono::days(day(rng));
    b.s1_pre = grid(kS1Channels);
    b.s1_post = grid(kS1Channels);
    b.s2_pre = grid(kS2Channels);
    b.s2_post = grid(kS2Channels);
    std::vector<std::uint8_t> labels(kPatchSize * kPatchSize);
    for (auto& l : labels) {
        const int c = code(rng);
        l = static_cast<std::uint8_t>(c == 3 ? 255 : c);
    }
    b.label = ClassMap(kPatchSize, kPatchSize, std::move(labels));
    return b;
}

} // namespace dmgmap
