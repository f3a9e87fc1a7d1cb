// Writes synthetic inputs for exercising the pipeline end to end.
#include "dmgmap/cli.hpp"
#include "dmgmap/georef.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    using namespace dmgmap;
    CLI::App app{"Synthetic data for the dmgmap pipeline", "dmgmap-synth"};
    app.require_subcommand(1);

    auto* scenario = app.add_subcommand("scenario", "Bundles, split and config for a synthetic disaster");
    std::string out_dir;
    ScenarioConfig sc;
    PipelineConfig base;
    base.model.width1 = 8;
    base.model.width2 = 16;
    base.seeds = {0, 1, 2};
    scenario->add_option("--out", out_dir, "Workspace directory")->required();
    scenario->add_option("--patches", sc.n_patches, "Number of patches");
    scenario->add_option("--train", sc.n_train, "Training patches");
    scenario->add_option("--val", sc.n_val, "Validation patches");
    scenario->add_option("--seed", sc.seed, "Generator seed");
    scenario->add_option("--width1", base.model.width1, "First encoder width");
    scenario->add_option("--width2", base.model.width2, "Second encoder width");
    scenario->add_option("--epochs", base.optimizer.epochs, "Training epochs");

    auto* gcps = app.add_subcommand("gcps", "Line-delimited GCPs for tiles sharing a hidden transform");
    std::string gcp_out;
    std::size_t tiles = 40;
    double corrupt = 0.2;
    std::uint64_t gcp_seed = 1;
    gcps->add_option("--out", gcp_out, "Output .ndjson file")->required();
    gcps->add_option("--tiles", tiles, "Number of tiles");
    gcps->add_option("--corrupt", corrupt, "Fraction of tiles with corrupted GCPs");
    gcps->add_option("--seed", gcp_seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);
    try {
        if (scenario->parsed()) {
            const auto path = write_synthetic_workspace(out_dir, sc, base);
            std::cout << "wrote " << sc.n_patches << " bundles and " << path.string() << "\n";
        } else {
            const auto corpus = synthetic_gcp_corpus(tiles, corrupt, gcp_seed);
            std::ofstream out(gcp_out);
            if (!out) {
                throw DataError("cannot write " + gcp_out);
            }
            write_gcps_ndjson(out, corpus.tiles);
            const auto t = corpus.truth.to_array();
            std::cout.precision(12);
            std::cout << "true transform: [" << t[0] << ", " << t[1] << ", " << t[2] << ", " << t[3] << ", " << t[4]
                      << ", " << t[5] << "]; corrupted tiles: " << corpus.corrupted.size() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    }
    return 0;
}
