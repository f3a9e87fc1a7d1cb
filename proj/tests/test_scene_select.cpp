#include "doctest.h"

#include "dmgmap/scene_select.hpp"

#include "json.hpp"

#include <algorithm>
#include <random>

using namespace dmgmap;

namespace {

SceneCandidate s2(std::string id, double cs, std::size_t index, std::string date = "2018-10-20") {
    SceneCandidate c;
    c.scene_id = std::move(id);
    c.platform = Platform::S2;
    c.cloud_score = cs;
    c.temporal_index = index;
    c.acquisition_date = parse_date(date);
    return c;
}

SceneCandidate s1(std::string id, std::string path, std::string date) {
    SceneCandidate c;
    c.scene_id = std::move(id);
    c.platform = Platform::S1;
    c.orbit_path = std::move(path);
    c.orbit_direction = OrbitDirection::Ascending;
    c.acquisition_date = parse_date(date);
    return c;
}

long long day_cost(const SceneCandidate& pre, const SceneCandidate& post, Date d_pre, Date d_post) {
    return std::abs((pre.acquisition_date - d_pre).count()) + std::abs((post.acquisition_date - d_post).count());
}

} // namespace

TEST_CASE("temporal_score") {
    CHECK(temporal_score(0) == 1.0);
    CHECK(temporal_score(3) == 0.5);
    CHECK(temporal_score(1) == doctest::Approx(0.70710678).epsilon(1e-8));
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(temporal_score(i + 1) < temporal_score(i));
    }
}

TEST_CASE("select_post_scene worked examples") {
    const SelectionPolicy policy;
    SUBCASE("clearer later scene loses to the first one") {
        std::vector<SceneCandidate> c{s2("a", 0.6, 0), s2("b", 0.7, 1)};
        const auto sel = select_post_scene(c, policy);
        CHECK(sel.scene.scene_id == "a");
        CHECK(sel.score == doctest::Approx(0.84));
        CHECK(cloud_temporal_score(c[1], policy) == doctest::Approx(0.7043).epsilon(1e-4));
        CHECK_FALSE(sel.used_fallback);
    }
    SUBCASE("threshold excludes the cloudy first scene") {
        std::vector<SceneCandidate> c{s2("a", 0.4, 0), s2("b", 0.9, 1)};
        CHECK(select_post_scene(c, policy).scene.scene_id == "b");
    }
    SUBCASE("fallback when every scene is cloudy") {
        std::vector<SceneCandidate> c{s2("a", 0.2, 0), s2("b", 0.3, 1)};
        const auto sel = select_post_scene(c, policy);
        CHECK(sel.scene.scene_id == "a");
        CHECK(sel.used_fallback);
        CHECK(sel.score == doctest::Approx(0.68));
        CHECK(cloud_temporal_score(c[1], policy) == doctest::Approx(0.5443).epsilon(1e-4));
    }
    SUBCASE("threshold is exclusive") {
        std::vector<SceneCandidate> c{s2("a", 0.5, 0), s2("b", 0.51, 5)};
        CHECK(select_post_scene(c, policy).scene.scene_id == "b");
    }
    SUBCASE("ties go to the smaller index then the scene id") {
        std::vector<SceneCandidate> c{s2("z", 0.8, 0), s2("a", 0.8, 0)};
        CHECK(select_post_scene(c, policy).scene.scene_id == "a");
    }
    SUBCASE("empty list") {
        CHECK_THROWS_AS(select_post_scene({}, policy), DataError);
    }
}

TEST_CASE("select_post_scene properties") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> cs(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 8);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<SceneCandidate> c;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            c.push_back(s2("s" + std::to_string(i), cs(rng), static_cast<std::size_t>(i)));
        }
        SelectionPolicy p1;
        p1.cs_threshold = cs(rng);
        SelectionPolicy p2 = p1;
        p2.cs_threshold = p1.cs_threshold + 0.5 * (1.0 - p1.cs_threshold) * cs(rng);

        const auto sel = select_post_scene(c, p1);
        const bool all_fail = std::all_of(c.begin(), c.end(), [&](auto& x) { return *x.cloud_score <= p1.cs_threshold; });
        CHECK((*sel.scene.cloud_score > p1.cs_threshold || all_fail));
        CHECK(sel.used_fallback == all_fail);

        const bool any_pass_t2 =
            std::any_of(c.begin(), c.end(), [&](auto& x) { return *x.cloud_score > p2.cs_threshold; });
        if (any_pass_t2) {
            const auto sel2 = select_post_scene(c, p2);
            CHECK(cloud_temporal_score(sel2.scene, SelectionPolicy{}) <= cloud_temporal_score(sel.scene, SelectionPolicy{}));
        }
    }
}

TEST_CASE("select_pre_scene") {
    std::vector<SceneCandidate> c{s2("a", 0.99, 0, "2018-01-01"), s2("b", 0.80, 0, "2018-02-01")};
    CHECK(select_pre_scene(c).scene_id == "a");
    std::vector<SceneCandidate> tie{s2("a", 0.9, 0, "2018-01-01"), s2("b", 0.9, 0, "2018-03-01")};
    CHECK(select_pre_scene(tie).scene_id == "b");
    std::vector<SceneCandidate> one{s2("only", 0.1, 0)};
    CHECK(select_pre_scene(one).scene_id == "only");
    CHECK_THROWS_AS(select_pre_scene({}), DataError);
}

TEST_CASE("pair_s1_scenes") {
    const auto d_pre = parse_date("2018-09-01");
    const auto d_post = parse_date("2018-10-15");
    SelectionPolicy policy;

    SUBCASE("nearest pair on the shared path") {
        std::vector<SceneCandidate> pre{s1("p1", "A", "2018-08-30"), s1("p2", "B", "2018-09-01"),
                                        s1("p3", "A", "2018-08-10")};
        std::vector<SceneCandidate> post{s1("q1", "A", "2018-10-20"), s1("q2", "C", "2018-10-15")};
        const auto [a, b] = pair_s1_scenes(pre, post, d_pre, d_post, policy);
        CHECK(a.scene_id == "p1");
        CHECK(b.scene_id == "q1");
    }
    SUBCASE("disjoint paths") {
        std::vector<SceneCandidate> pre{s1("p1", "A", "2018-08-30"), s1("p2", "A", "2018-09-03")};
        std::vector<SceneCandidate> post{s1("q1", "B", "2018-10-20"), s1("q2", "C", "2018-10-16")};
        CHECK_THROWS_AS(pair_s1_scenes(pre, post, d_pre, d_post, policy), NoPairError);
        policy.require_same_orbit = false;
        const auto [a, b] = pair_s1_scenes(pre, post, d_pre, d_post, policy);
        CHECK(a.scene_id == "p1");
        CHECK(b.scene_id == "q2");
    }
}

TEST_CASE("pair_s1_scenes matches exhaustive enumeration and is order invariant") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> day(0, 120);
    std::uniform_int_distribution<int> path(0, 2);
    std::uniform_int_distribution<int> count(1, 6);
    const auto base = parse_date("2019-01-01");
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SceneCandidate> pre;
        std::vector<SceneCandidate> post;
        for (int i = count(rng); i > 0; --i) {
            auto c = s1("pre" + std::to_string(i), std::string(1, static_cast<char>('A' + path(rng))), "2019-01-01");
            c.acquisition_date = base + std::chrono::days(day(rng));
            pre.push_back(c);
        }
        for (int i = count(rng); i > 0; --i) {
            auto c = s1("post" + std::to_string(i), std::string(1, static_cast<char>('A' + path(rng))), "2019-01-01");
            c.acquisition_date = base + std::chrono::days(day(rng) + 100);
            post.push_back(c);
        }
        const auto d_pre = base + std::chrono::days(day(rng));
        const auto d_post = base + std::chrono::days(day(rng) + 100);
        SelectionPolicy policy;
        policy.require_same_orbit = trial % 2 == 0;

        long long best = -1;
        for (const auto& a : pre) {
            for (const auto& b : post) {
                if (policy.require_same_orbit && *a.orbit_path != *b.orbit_path) {
                    continue;
                }
                const auto cost = day_cost(a, b, d_pre, d_post);
                if (best < 0 || cost < best) {
                    best = cost;
                }
            }
        }
        if (best < 0) {
            CHECK_THROWS_AS(pair_s1_scenes(pre, post, d_pre, d_post, policy), NoPairError);
            continue;
        }
        const auto ref = pair_s1_scenes(pre, post, d_pre, d_post, policy);
        CHECK(day_cost(ref.first, ref.second, d_pre, d_post) == best);
        if (policy.require_same_orbit) {
            CHECK(*ref.first.orbit_path == *ref.second.orbit_path);
        }
        std::shuffle(pre.begin(), pre.end(), rng);
        std::shuffle(post.begin(), post.end(), rng);
        const auto again = pair_s1_scenes(pre, post, d_pre, d_post, policy);
        CHECK(again.first.scene_id == ref.first.scene_id);
        CHECK(again.second.scene_id == ref.second.scene_id);
    }
}

TEST_CASE("catalog parsing assigns phases and temporal indices") {
    const char* text = R"({
      "p1": {"event_id": "ev", "event_end_date": "2018-10-10", "candidates": [
        {"scene_id": "s2c", "platform": "S2", "acquisition_date": "2018-10-20", "cloud_score": 0.9},
        {"scene_id": "s2a", "platform": "S2", "acquisition_date": "2018-10-10", "cloud_score": 0.6},
        {"scene_id": "s2b", "platform": "S2", "acquisition_date": "2018-10-15", "cloud_score": 0.7},
        {"scene_id": "s2pre", "platform": "S2", "acquisition_date": "2018-09-01", "cloud_score": 0.95},
        {"scene_id": "s1pre", "platform": "S1", "acquisition_date": "2018-09-02", "orbit_direction": "ascending", "orbit_path": 12},
        {"scene_id": "s1post", "platform": "S1", "acquisition_date": "2018-10-12", "orbit_direction": "ascending", "orbit_path": 12}
      ]}})";
    const auto cat = parse_catalog(text);
    REQUIRE(cat.size() == 1);
    CHECK(cat[0].s2_pre.size() == 1);
    REQUIRE(cat[0].s2_post.size() == 3);
    for (const auto& c : cat[0].s2_post) {
        if (c.scene_id == "s2a") CHECK(c.temporal_index == 0);
        if (c.scene_id == "s2b") CHECK(c.temporal_index == 1);
        if (c.scene_id == "s2c") CHECK(c.temporal_index == 2);
    }
    const auto manifest = build_scene_manifest(cat, SelectionPolicy{});
    CHECK(manifest.failures.empty());
    const auto doc = nlohmann::json::parse(manifest.json);
    CHECK(doc["p1"]["s2_post"]["scene_id"] == "s2a");
    CHECK(doc["p1"]["s2_pre"]["scene_id"] == "s2pre");
    CHECK(doc["p1"]["s1_pre"]["scene_id"] == "s1pre");
    CHECK(doc["p1"]["policy_used"]["cs_threshold"] == 0.5);

    const auto overridden = build_scene_manifest(cat, SelectionPolicy{}, {{"ev", 0.35}});
    CHECK(nlohmann::json::parse(overridden.json)["p1"]["policy_used"]["cs_threshold"] == 0.35);
}

TEST_CASE("catalog errors") {
    CHECK_THROWS_AS(parse_catalog("[1,2]"), DataError);
    CHECK_THROWS_AS(parse_catalog(R"({"p": {"event_end_date": "2018-13-01", "candidates": []}})"), DataError);
    CHECK_THROWS_AS(
        parse_catalog(R"({"p": {"event_end_date": "2018-01-01", "candidates": [{"scene_id":"x","platform":"S2","acquisition_date":"2018-01-02"}]}})"),
        DataError);
    const auto cat = parse_catalog(R"({"p": {"event_end_date": "2018-01-01", "candidates": []}})");
    const auto manifest = build_scene_manifest(cat, SelectionPolicy{});
    CHECK(manifest.failures.count("p") == 1);
}

TEST_CASE("dates") {
    CHECK(format_date(parse_date("2020-02-29")) == "2020-02-29");
    CHECK_THROWS_AS(parse_date("2019-02-29"), DataError);
    CHECK_THROWS_AS(parse_date("20190101"), DataError);
    CHECK((parse_date("2018-03-01") - parse_date("2018-02-27")).count() == 2);
}
