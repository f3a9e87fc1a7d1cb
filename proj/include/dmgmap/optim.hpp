#pragma once

#include "dmgmap/errors.hpp"

#include "json.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dmgmap {

struct OptimizerConfig {
    double learning_rate = 5e-4;
    double weight_decay = 1e-4;
    int epochs = 40;
    int warmup_epochs = 3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// Throws ConfigError unless 0 <= warmup_epochs < epochs and the rates are sane.
    void validate() const;
    double warmup_fraction() const noexcept { return static_cast<double>(warmup_epochs) / epochs; }

    nlohmann::json to_json() const;
};

/// Linear warm-up from 0 to the base rate over the warm-up fraction of
/// training, then half-cosine decay to 0 at t = 1.
double lr_at(double t, const OptimizerConfig& config);

/// AdamW with decoupled weight decay applied to every parameter.
class AdamW {
public:
    AdamW(std::size_t n, const OptimizerConfig& config);

    /// One update at learning rate `lr`. Throws NumericError (parameters
    /// untouched) if any gradient is non-finite.
    void step(std::span<float> params, std::span<const float> grads, double lr);
    void step(std::span<double> params, std::span<const double> grads, double lr);

    std::size_t steps_taken() const noexcept { return t_; }

private:
    template <class T>
    void step_impl(std::span<T> params, std::span<const T> grads, double lr);

    OptimizerConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

} // namespace dmgmap
