#include "dmgmap/cli.hpp"

#include "CLI11.hpp"

#include <ostream>

namespace dmgmap {

namespace fs = std::filesystem;

namespace {

void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("threshold override '" + o + "' must look like EVENT=VALUE");
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(o.substr(eq + 1), &used);
            if (used != o.size() - eq - 1 || !(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("range");
            }
            cfg.cs_threshold_overrides[o.substr(0, eq)] = v;
        } catch (const std::exception&) {
            throw ConfigError("threshold override '" + o + "' needs a value in [0, 1]");
        }
    }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Building-damage mapping pipeline: georeferencing, scene selection, patch bundles, training, "
                 "prediction and evaluation.",
                 "dmgmap"};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    app.add_option("--config", config_path, "Pipeline config (JSON)");
    app.add_option("--seed", seed, "Seed for train/predict (defaults to the first configured seed)");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.require_subcommand(1);

    auto* georef = app.add_subcommand("georef", "Fit, aggregate and edge-snap per-acquisition transforms");
    auto* select = app.add_subcommand("select", "Choose pre/post Sentinel-1 and Sentinel-2 scenes per patch");
    std::vector<std::string> overrides;
    select->add_option("--cs-threshold-override", overrides, "EVENT=VALUE cloud threshold for one event");
    auto* build = app.add_subcommand("build", "Assemble patch bundles from staged rasters and footprints");
    auto* train = app.add_subcommand("train", "Train the model(s) for one seed");
    auto* predict = app.add_subcommand("predict", "Predict the test split with one seed's checkpoints");
    auto* ensemble = app.add_subcommand("ensemble", "Predict the test split by averaging all configured seeds");
    auto* eval = app.add_subcommand("eval", "Score predictions and write the CSV/JSON report");
    std::string predictions_dir;
    eval->add_option("--predictions", predictions_dir,
                     "Prediction directory (default: the ensemble output, or the --seed output)");
    auto* render = app.add_subcommand("render", "Render a class map to an RGB image");
    std::string render_in;
    std::string render_out;
    render->add_option("map", render_in, "Class map file")->required();
    render->add_option("image", render_out, "Output image (.png or .ppm)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::ConfigError);
    }

    try {
        if (render->parsed()) {
            cmd_render(render_in, render_out);
            out << "rendered " << render_out << "\n";
            return 0;
        }
        if (config_path.empty()) {
            throw ConfigError("--config is required for this command");
        }
        PipelineConfig cfg = load_config(config_path);
        RunOptions run{seed, threads};
        if (georef->parsed()) {
            out << cmd_georef(cfg);
        } else if (select->parsed()) {
            apply_overrides(cfg, overrides);
            out << cmd_select(cfg);
        } else if (build->parsed()) {
            out << cmd_build(cfg, run);
        } else if (train->parsed()) {
            out << cmd_train(cfg, run);
        } else if (predict->parsed()) {
            out << cmd_predict(cfg, run);
        } else if (ensemble->parsed()) {
            out << cmd_ensemble(cfg, run);
        } else if (eval->parsed()) {
            fs::path dir = predictions_dir;
            if (dir.empty()) {
                dir = seed ? seed_predictions_dir(cfg, *seed) : ensemble_predictions_dir(cfg);
            }
            out << cmd_eval(cfg, dir);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::DataError);
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return static_cast<int>(ExitCode::DataError);
    }
    return 0;
}

} // namespace dmgmap
