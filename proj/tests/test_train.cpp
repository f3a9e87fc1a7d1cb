#include "doctest.h"

#include "dmgmap/synthetic.hpp"
#include "dmgmap/train.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <random>

using namespace dmgmap;

namespace {

ModelConfig tiny(HeadRole role) {
    ModelConfig c;
    c.role = role;
    c.epoch_channels = 2;
    c.width1 = 4;
    c.width2 = 4;
    return c;
}

// Buildings are bright squares in channel 0; damaged ones also light up
// channel 1 of the post image.
std::vector<PreparedSample> toy_samples(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> noise(0.0f, 0.1f);
    std::vector<PreparedSample> out;
    const std::size_t s = 16, plane = s * s;
    for (std::size_t i = 0; i < n; ++i) {
        PreparedSample p;
        p.patch_id = "toy" + std::to_string(i);
        p.event_id = "toy";
        p.input = {s, s, std::vector<float>(2 * plane), std::vector<float>(2 * plane)};
        std::vector<std::uint8_t> label(plane, 0);
        const std::size_t y0 = 2 + rng() % 8, x0 = 2 + rng() % 8;
        const bool damaged = rng() % 2;
        for (std::size_t y = y0; y < y0 + 5; ++y)
            for (std::size_t x = x0; x < x0 + 5; ++x) label[y * s + x] = damaged ? 2 : 1;
        for (std::size_t q = 0; q < plane; ++q) {
            const bool b = label[q] != 0;
            p.input.pre[q] = (b ? 0.8f : 0.1f) + noise(rng);
            p.input.pre[plane + q] = noise(rng);
            p.input.post[q] = p.input.pre[q];
            p.input.post[plane + q] = (label[q] == 2 ? 0.9f : 0.1f) + noise(rng);
        }
        label[0] = 255;
        p.label = ClassMap(s, s, std::move(label));
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<double> softmax_col(const std::vector<float>& logits, std::size_t k, std::size_t plane, std::size_t p) {
    std::vector<double> e(k);
    double z = 0;
    for (std::size_t c = 0; c < k; ++c) z += e[c] = std::exp(static_cast<double>(logits[c * plane + p]));
    for (auto& v : e) v /= z;
    return e;
}

} // namespace

TEST_CASE("parallel_for visits every index once and forwards errors") {
    for (unsigned threads : {1u, 3u, 8u}) {
        std::vector<std::atomic<int>> seen(37);
        parallel_for(seen.size(), threads, [&](std::size_t i) { ++seen[i]; });
        for (auto& s : seen) CHECK(s.load() == 1);
        CHECK_THROWS_AS(parallel_for(10, threads, [](std::size_t i) {
                            if (i == 7) throw DataError("boom");
                        }),
                        DataError);
    }
}

TEST_CASE("training is deterministic across thread counts") {
    const auto train = toy_samples(10, 1);
    OptimizerConfig opt;
    opt.epochs = 3;
    opt.warmup_epochs = 1;
    opt.learning_rate = 5e-3;
    TrainingConfig tc;
    tc.batch_size = 4;
    tc.buffer_radius = 1;
    const auto a = train_model(tiny(HeadRole::Joint), opt, tc, train, {}, 9);
    tc.threads = 3;
    const auto b = train_model(tiny(HeadRole::Joint), opt, tc, train, {}, 9);
    CHECK(a.params == b.params);
    const auto c = train_model(tiny(HeadRole::Joint), opt, tc, train, {}, 10);
    CHECK(a.params != c.params);
    CHECK(a.selected_epoch == 3);
    CHECK(!a.selection_score);
    CHECK(a.epochs.size() == 3);
}

TEST_CASE("training reduces the loss and selects on validation") {
    const auto train = toy_samples(16, 2);
    const auto val = toy_samples(4, 3);
    OptimizerConfig opt;
    opt.epochs = 40;
    opt.warmup_epochs = 1;
    opt.learning_rate = 3e-3;
    TrainingConfig tc;
    tc.batch_size = 4;
    tc.buffer_radius = 1;
    tc.eval_buffer = 1;
    int calls = 0;
    const auto r = train_model(tiny(HeadRole::Localization), opt, tc, train, val, 4,
                               [&](const EpochReport& e, const TrainResult& so_far) {
                                   ++calls;
                                   CHECK(e.epoch == calls);
                                   CHECK(so_far.selected_epoch <= e.epoch);
                               });
    CHECK(calls == 40);
    CHECK(r.epochs.back().mean_loss < r.epochs.front().mean_loss);
    REQUIRE(r.selection_score);
    double best = -1;
    int best_epoch = 0;
    for (const auto& e : r.epochs) {
        REQUIRE(e.val_score);
        if (*e.val_score > best) {
            best = *e.val_score;
            best_epoch = e.epoch;
        }
    }
    CHECK(*r.selection_score == best);
    CHECK(r.selected_epoch == best_epoch);
    CHECK(best > 0.8);
}

TEST_CASE("damage heads only learn from building pixels") {
    auto train = toy_samples(6, 5);
    OptimizerConfig opt;
    opt.epochs = 2;
    opt.warmup_epochs = 0;
    TrainingConfig tc;
    tc.batch_size = 3;
    const auto r = train_model(tiny(HeadRole::Damage), opt, tc, train, {}, 1);
    CHECK(r.params.size() == tiny(HeadRole::Damage).param_count());

    // All-background training data: every damage target is ignored.
    for (auto& s : train) s.label = ClassMap(16, 16);
    CHECK_THROWS_AS(train_model(tiny(HeadRole::Damage), opt, tc, train, {}, 1), DataError);
}

TEST_CASE("training rejects bad inputs") {
    auto train = toy_samples(4, 6);
    OptimizerConfig opt;
    opt.epochs = 1;
    opt.warmup_epochs = 0;
    TrainingConfig tc;
    CHECK_THROWS_AS(train_model(tiny(HeadRole::Joint), opt, tc, {}, {}, 1), DataError);
    tc.batch_size = 0;
    CHECK_THROWS_AS(train_model(tiny(HeadRole::Joint), opt, tc, train, {}, 1), ConfigError);
    tc.batch_size = 2;
    train[1].input.pre[5] = std::numeric_limits<float>::quiet_NaN();
    train[2].input.pre[5] = std::numeric_limits<float>::quiet_NaN();
    train[3].input.pre[5] = std::numeric_limits<float>::quiet_NaN();
    train[0].input.pre[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train_model(tiny(HeadRole::Joint), opt, tc, train, {}, 1), NumericError);
}

TEST_CASE("mean_softmax averages logits") {
    Network<float> a(tiny(HeadRole::Joint)), b(tiny(HeadRole::Joint));
    a.init(1);
    b.init(2);
    const auto x = toy_samples(1, 7)[0].input;
    const std::size_t plane = x.height * x.width;
    const Network<float>* one[] = {&a};
    const Network<float>* three[] = {&a, &a, &a};
    const auto p1 = mean_softmax(one, x);
    CHECK(mean_softmax(three, x) == p1);

    const auto la = a.forward(x), lb = b.forward(x);
    std::vector<float> avg(la.size());
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = 0.5f * (la[i] + lb[i]);
    const Network<float>* two[] = {&a, &b};
    const auto p2 = mean_softmax(two, x);
    for (std::size_t p = 0; p < plane; p += 17) {
        const auto want = softmax_col(avg, 3, plane, p);
        for (std::size_t c = 0; c < 3; ++c) CHECK(p2[c * plane + p] == doctest::Approx(want[c]).epsilon(1e-6));
    }

    Network<float> loc(tiny(HeadRole::Localization));
    const Network<float>* mixed[] = {&a, &loc};
    CHECK_THROWS_AS(mean_softmax(mixed, x), DataError);
}

TEST_CASE("argmax ties go to the lowest class") {
    const std::vector<double> probs{0.4, 0.2, 0.5, 0.4, 0.4, 0.3, 0.2, 0.4, 0.2};
    const auto m = argmax_map(probs, 3, 1, 3);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(0, 1) == 1);
    CHECK(m.at(0, 2) == 0);
}

TEST_CASE("two-step combination") {
    const std::vector<double> loc{0.2, 0.5, 0.9, 0.9};
    const std::vector<double> dmg{0.9, 0.1, 0.5, 0.49};
    const auto m = two_step_combine(loc, dmg, 2, 2);
    CHECK(std::vector<std::uint8_t>(m.values().begin(), m.values().end()) == std::vector<std::uint8_t>{0, 1, 2, 1});
    const auto strict = two_step_combine(loc, dmg, 2, 2, 0.95, 0.5);
    CHECK(strict.values()[2] == 0);
    CHECK_THROWS_AS(two_step_combine(loc, std::vector<double>{0.1}, 2, 2), DataError);
}

TEST_CASE("ensemble prediction") {
    Network<float> j(tiny(HeadRole::Joint)), l(tiny(HeadRole::Localization)), d(tiny(HeadRole::Damage));
    j.init(1);
    l.init(2);
    d.init(3);
    const auto x = toy_samples(1, 8)[0].input;
    Ensemble joint{{&j}, {}, {}};
    Ensemble joint3{{&j, &j, &j}, {}, {}};
    CHECK(ensemble_predict(joint, x) == ensemble_predict(joint3, x));

    Ensemble two{{}, {&l}, {&d}};
    const auto m = ensemble_predict(two, x);
    const std::size_t plane = x.height * x.width;
    const auto lo = l.forward(x), da = d.forward(x);
    for (std::size_t p = 0; p < plane; ++p) {
        const double pl = softmax_col(lo, 2, plane, p)[1];
        const double pd = softmax_col(da, 2, plane, p)[1];
        const std::uint8_t want = pl < 0.5 ? 0 : (pd >= 0.5 ? 2 : 1);
        if (std::abs(pl - 0.5) > 1e-6 && std::abs(pd - 0.5) > 1e-6) CHECK(m.values()[p] == want);
    }

    CHECK_THROWS_AS(ensemble_predict(Ensemble{{&j}, {&l}, {&d}}, x), DataError);
    CHECK_THROWS_AS(ensemble_predict(Ensemble{{}, {&l}, {}}, x), DataError);
    CHECK_THROWS_AS(ensemble_predict(Ensemble{{}, {&d}, {&d}}, x), DataError);
    CHECK_THROWS_AS(ensemble_predict(Ensemble{{&l}, {}, {}}, x), DataError);
}

TEST_CASE("input preparation") {
    ScenarioConfig sc;
    sc.n_patches = 4;
    sc.n_train = 4;
    const auto scen = synthetic_scenario(sc);
    const auto stats = fit_input_stats(scen.bundles);
    CHECK(stats.channels.size() == 14);
    const auto s = prepare_sample(scen.bundles[0], stats);
    CHECK(s.input.height == 128);
    CHECK(s.input.pre.size() == 14 * 128 * 128);
    for (float v : s.input.post) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(s.label == scen.bundles[0].label);
    // Channel 2 of the stack is the first S2 band.
    const auto& c = stats.channels[2];
    const float raw = scen.bundles[0].s2_pre.at(0, 5, 5);
    const double want = std::clamp((raw - c.p1) / (c.p99 - c.p1), 0.0, 1.0);
    CHECK(s.input.pre[2 * 128 * 128 + 5 * 128 + 5] == doctest::Approx(want).epsilon(1e-6));
}
