#include "dmgmap/sampler.hpp"

#include <numeric>

namespace dmgmap {

ClassCounts class_counts(const ClassMap& label) {
    ClassCounts c{0, 0, 0};
    for (auto v : label.values()) {
        if (v <= 2) {
            ++c[v];
        }
    }
    return c;
}

BiasedSampler::BiasedSampler(std::span<const ClassCounts> per_patch, std::uint64_t seed) : rng_(seed) {
    if (per_patch.empty()) {
        throw DataError("biased sampler: empty training set");
    }
    ClassCounts total{0, 0, 0};
    for (const auto& c : per_patch) {
        for (int k = 0; k < 3; ++k) {
            total[k] += c[k];
        }
    }
    const double all = static_cast<double>(total[0] + total[1] + total[2]);
    if (all == 0.0) {
        throw DataError("biased sampler: training set has no valid pixels");
    }
    static constexpr const char* kNames[] = {"background", "intact", "damaged"};
    std::array<double, 3> freq{};
    for (int k = 0; k < 3; ++k) {
        freq[k] = static_cast<double>(total[k]) / all;
        if (total[k] == 0) {
            warnings_.push_back(std::string("class ") + kNames[k] +
                                " is absent from the training set; its sampling term is skipped");
        }
    }
    weights_.reserve(per_patch.size());
    for (const auto& c : per_patch) {
        const double n = static_cast<double>(c[0] + c[1] + c[2]);
        double w = 0.0;
        if (n > 0.0) {
            for (int k = 0; k < 3; ++k) {
                if (total[k] > 0) {
                    w += (static_cast<double>(c[k]) / n) / freq[k];
                }
            }
        }
        weights_.push_back(w);
    }
    dist_ = std::discrete_distribution<std::size_t>(weights_.begin(), weights_.end());
}

std::size_t BiasedSampler::next() { return dist_(rng_); }

std::vector<double> BiasedSampler::probabilities() const {
    const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    std::vector<double> p(weights_.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = weights_[i] / sum;
    }
    return p;
}

} // namespace dmgmap
