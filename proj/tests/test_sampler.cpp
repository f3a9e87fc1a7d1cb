#include "doctest.h"

#include "dmgmap/sampler.hpp"

#include <vector>

using namespace dmgmap;

TEST_CASE("class counts skip invalid pixels") {
    ClassMap m(2, 3, std::vector<std::uint8_t>{0, 0, 1, 2, 255, 2});
    CHECK(class_counts(m) == ClassCounts{2, 1, 2});
}

TEST_CASE("patch weights") {
    // Frequencies over the set: background 0.7, intact 0.05, damaged 0.25.
    const std::vector<ClassCounts> counts{{90, 10, 0}, {50, 0, 50}};
    BiasedSampler s(counts, 1);
    REQUIRE(s.weights().size() == 2);
    CHECK(s.weights()[0] == doctest::Approx(0.9 / 0.7 + 0.1 / 0.05));
    CHECK(s.weights()[1] == doctest::Approx(0.5 / 0.7 + 0.5 / 0.25));
    CHECK(s.warnings().empty());
    const auto p = s.probabilities();
    CHECK(p[0] + p[1] == doctest::Approx(1.0));
}

TEST_CASE("draw frequencies follow the weights") {
    const std::vector<ClassCounts> counts{{100, 0, 0}, {90, 10, 0}, {80, 0, 20}, {0, 0, 0}, {50, 25, 25}};
    BiasedSampler s(counts, 7);
    const auto p = s.probabilities();
    CHECK(p[3] == 0.0);
    std::vector<int> hits(counts.size(), 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++hits[s.next()];
    for (std::size_t i = 0; i < counts.size(); ++i) {
        CHECK(static_cast<double>(hits[i]) / n == doctest::Approx(p[i]).epsilon(0.01).scale(1.0));
    }
    // Rare classes are oversampled relative to uniform draws.
    CHECK(p[4] > 0.2);
    CHECK(p[0] < 0.2);
}

TEST_CASE("same seed, same sequence") {
    const std::vector<ClassCounts> counts{{10, 1, 1}, {5, 5, 0}, {1, 0, 9}};
    BiasedSampler a(counts, 42), b(counts, 42), c(counts, 43);
    std::vector<std::size_t> sa, sb, sc;
    for (int i = 0; i < 100; ++i) {
        sa.push_back(a.next());
        sb.push_back(b.next());
        sc.push_back(c.next());
    }
    CHECK(sa == sb);
    CHECK(sa != sc);
}

TEST_CASE("absent classes are skipped with a warning") {
    const std::vector<ClassCounts> counts{{90, 10, 0}, {60, 40, 0}};
    BiasedSampler s(counts, 1);
    REQUIRE(s.warnings().size() == 1);
    CHECK(s.warnings()[0].find("damaged") != std::string::npos);
    CHECK(s.weights()[0] == doctest::Approx(0.9 / 0.75 + 0.1 / 0.25));
}

TEST_CASE("degenerate sets are rejected") {
    CHECK_THROWS_AS(BiasedSampler(std::vector<ClassCounts>{}, 1), DataError);
    CHECK_THROWS_AS(BiasedSampler(std::vector<ClassCounts>{{0, 0, 0}}, 1), DataError);
}
