#include "dmgmap/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dmgmap {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("optimizer.learning_rate must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("optimizer.weight_decay must be non-negative");
    }
    if (epochs <= 0) {
        throw ConfigError("optimizer.epochs must be positive");
    }
    if (warmup_epochs < 0 || warmup_epochs >= epochs) {
        throw ConfigError("optimizer.warmup_epochs must satisfy 0 <= warmup_epochs < epochs");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
        throw ConfigError("optimizer moment constants out of range");
    }
}

nlohmann::json OptimizerConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"weight_decay", weight_decay}, {"epochs", epochs},
            {"warmup_epochs", warmup_epochs}, {"beta1", beta1},               {"beta2", beta2},
            {"eps", eps}};
}

double lr_at(double t, const OptimizerConfig& config) {
    const double w = config.warmup_fraction();
    const double lr = config.learning_rate;
    t = std::clamp(t, 0.0, 1.0);
    if (w > 0.0 && t < w) {
        return lr * t / w;
    }
    if (w >= 1.0) {
        return lr;
    }
    return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - w) / (1.0 - w)));
}

AdamW::AdamW(std::size_t n, const OptimizerConfig& config) : cfg_(config), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(std::span<float> params, std::span<const float> grads, double lr) { step_impl(params, grads, lr); }

void AdamW::step(std::span<double> params, std::span<const double> grads, double lr) { step_impl(params, grads, lr); }

template <class T>
void AdamW::step_impl(std::span<T> params, std::span<const T> grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw DataError("AdamW: parameter count changed");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(static_cast<double>(grads[i]))) {
            throw NumericError("non-finite gradient at parameter " + std::to_string(i) + " (value " +
                               std::to_string(static_cast<double>(grads[i])) + ") at step " + std::to_string(t_ + 1));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double shrink = 1.0 - lr * cfg_.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        double p = static_cast<double>(params[i]) * shrink;
        p -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        params[i] = static_cast<T>(p);
    }
}

} // namespace dmgmap
