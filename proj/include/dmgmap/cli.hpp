#pragma once

#include "dmgmap/dataset.hpp"
#include "dmgmap/network.hpp"
#include "dmgmap/optim.hpp"
#include "dmgmap/scene_select.hpp"
#include "dmgmap/synthetic.hpp"
#include "dmgmap/train.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dmgmap {

inline constexpr int kConfigSchemaVersion = 1;

struct PipelinePaths {
    std::filesystem::path gcps;
    std::filesystem::path transforms;
    std::filesystem::path catalog;
    std::filesystem::path manifest;
    std::filesystem::path staging;
    std::filesystem::path bundles;
    std::filesystem::path split;
    std::filesystem::path checkpoints;
    std::filesystem::path predictions;
    std::filesystem::path reports;
};

struct PipelineConfig {
    PipelinePaths paths;
    SelectionPolicy selection;
    std::map<std::string, double> cs_threshold_overrides;
    std::size_t min_gcps = 6;
    OptimizerConfig optimizer;
    ModelConfig model;
    TaskMode task = TaskMode::TwoStep;
    TrainingConfig training;
    std::vector<int> eval_buffers{0, 3};
    SplitKind split = SplitKind::XView2;
    std::vector<std::uint64_t> seeds{0};

    nlohmann::json to_json() const;
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Unknown keys anywhere are rejected with ConfigError.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

/// Stage commands. Outputs are written atomically; each returns a short
/// human-readable summary.
std::string cmd_georef(const PipelineConfig& cfg);
std::string cmd_select(const PipelineConfig& cfg);
std::string cmd_build(const PipelineConfig& cfg, const RunOptions& run);
std::string cmd_train(const PipelineConfig& cfg, const RunOptions& run);
std::string cmd_predict(const PipelineConfig& cfg, const RunOptions& run);
std::string cmd_ensemble(const PipelineConfig& cfg, const RunOptions& run);
std::string cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& predictions_dir);
void cmd_render(const std::filesystem::path& class_map, const std::filesystem::path& image);

std::filesystem::path checkpoint_path(const PipelineConfig& cfg, HeadRole role, std::uint64_t seed);
std::filesystem::path bundle_path(const PipelineConfig& cfg, const std::string& patch_id);
std::filesystem::path seed_predictions_dir(const PipelineConfig& cfg, std::uint64_t seed);
std::filesystem::path ensemble_predictions_dir(const PipelineConfig& cfg);

/// 8-bit RGB, one pixel per cell. Writes PNG, or binary PPM for a .ppm path.
void render_class_map(const ClassMap& map, const std::filesystem::path& image);
std::array<std::uint8_t, 3> class_color(std::uint8_t code);

/// Synthetic scenario written as bundles, split CSV and a config file
/// (config.json) ready for train/predict/ensemble/eval.
std::filesystem::path write_synthetic_workspace(const std::filesystem::path& dir, const ScenarioConfig& scenario,
                                                const PipelineConfig& base);

/// Full command-line front end. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dmgmap
