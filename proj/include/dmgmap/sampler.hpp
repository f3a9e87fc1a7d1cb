#pragma once

#include "dmgmap/raster.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dmgmap {

/// Valid-pixel counts of background, intact and damaged in one patch.
using ClassCounts = std::array<std::uint64_t, 3>;

ClassCounts class_counts(const ClassMap& label);

/// Draws patch indices with replacement, each patch weighted by
/// sum_c share_c(patch) / freq_c(training set). Classes absent from the whole
/// training set are skipped with a warning.
class BiasedSampler {
public:
    BiasedSampler(std::span<const ClassCounts> per_patch, std::uint64_t seed);

    std::size_t next();
    const std::vector<double>& weights() const noexcept { return weights_; }
    /// weights normalised to sum 1
    std::vector<double> probabilities() const;
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    std::vector<double> weights_;
    std::vector<std::string> warnings_;
    std::mt19937_64 rng_;
    std::discrete_distribution<std::size_t> dist_;
};

} // namespace dmgmap
