#pragma once

#include "dmgmap/dataset.hpp"
#include "dmgmap/network.hpp"
#include "dmgmap/optim.hpp"
#include "dmgmap/raster.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmgmap {

struct PreparedSample {
    std::string patch_id;
    std::string event_id;
    ModelInput<float> input;
    ClassMap label;
};

/// 14-channel percentile statistics pooled over the pre and post stacks of
/// the training bundles.
NormStats fit_input_stats(std::span<const PatchBundle> train);
PreparedSample prepare_sample(const PatchBundle& b, const NormStats& stats);

struct TrainingConfig {
    std::size_t batch_size = 8;
    int buffer_radius = 3;
    bool augment = true;
    unsigned threads = 1;
    int eval_buffer = 3; // ring used for the validation F1_loc
    double tau_loc = 0.5;
    double tau_dmg = 0.5;
};

struct EpochReport {
    int epoch = 0; // 1-based
    double mean_loss = 0.0;
    std::optional<double> val_score;
    std::size_t empty_batches = 0; // batches without a single valid pixel
};

struct TrainResult {
    std::vector<float> params; // selected checkpoint
    int selected_epoch = 0;
    std::optional<double> selection_score;
    std::vector<EpochReport> epochs;
    std::vector<std::string> warnings;
};

/// Called after each epoch with the currently selected parameters.
using EpochCallback = std::function<void(const EpochReport&, const TrainResult&)>;

/// Deterministic for a given seed: per-patch gradients are reduced in batch
/// order regardless of the thread count. Keeps the epoch with the best
/// validation score (F1_comp for joint heads, F1_loc for localization, F1_dmg
/// for damage heads) or the last epoch when `val` is empty. Throws
/// NumericError on a non-finite loss.
TrainResult train_model(const ModelConfig& model, const OptimizerConfig& opt, const TrainingConfig& tc,
                        std::span<const PreparedSample> train, std::span<const PreparedSample> val,
                        std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Inference

/// Per-pixel class probabilities (K x H x W) from logits averaged in double
/// precision over all models.
std::vector<double> mean_softmax(std::span<const Network<float>* const> models, const ModelInput<float>& x);

/// Per-pixel argmax over K planes; ties go to the lowest class index.
ClassMap argmax_map(std::span<const double> probs, std::size_t k, std::size_t height, std::size_t width);

/// Background where loc < tau_loc, otherwise damaged where dmg >= tau_dmg and
/// intact elsewhere.
ClassMap two_step_combine(std::span<const double> loc_probs, std::span<const double> dmg_probs, std::size_t height,
                          std::size_t width, double tau_loc = 0.5, double tau_dmg = 0.5);

struct Ensemble {
    std::vector<const Network<float>*> joint;
    std::vector<const Network<float>*> loc;
    std::vector<const Network<float>*> dmg;
};

/// Joint ensembles average the 3-class logits; two-step ensembles average each
/// head separately and then combine. A single model is an ensemble of one.
ClassMap ensemble_predict(const Ensemble& e, const ModelInput<float>& x, double tau_loc = 0.5, double tau_dmg = 0.5);

} // namespace dmgmap
