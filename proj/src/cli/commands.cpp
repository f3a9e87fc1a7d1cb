#include "dmgmap/cli.hpp"

#include "dmgmap/artifact_io.hpp"
#include "dmgmap/checkpoint.hpp"
#include "dmgmap/georef.hpp"
#include "dmgmap/metrics.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace dmgmap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void only_keys(const json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    for (const auto& [k, v] : j.items()) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            throw ConfigError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
        }
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) {
        return {};
    }
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void require_path(const fs::path& p, const char* key) {
    if (p.empty()) {
        throw ConfigError(std::string("paths.") + key + " is not configured");
    }
    if (!fs::exists(p)) {
        throw ConfigError(std::string("paths.") + key + ": " + p.string() + " does not exist");
    }
}

void require_set(const fs::path& p, const char* key) {
    if (p.empty()) {
        throw ConfigError(std::string("paths.") + key + " is not configured");
    }
}

GeoRect rect_from(const json& j) {
    const auto v = j.get<std::array<double, 4>>();
    return {v[0], v[1], v[2], v[3]};
}

SplitScheme load_split(const PipelineConfig& cfg) {
    require_path(cfg.paths.split, "split");
    return parse_split_csv(read_text_file(cfg.paths.split), cfg.split);
}

std::vector<HeadRole> roles_for(TaskMode task) {
    return task == TaskMode::Joint ? std::vector<HeadRole>{HeadRole::Joint}
                                   : std::vector<HeadRole>{HeadRole::Localization, HeadRole::Damage};
}

std::uint64_t active_seed(const PipelineConfig& cfg, const RunOptions& run) {
    if (run.seed) {
        return *run.seed;
    }
    if (cfg.seeds.empty()) {
        throw ConfigError("no seed given: set seeds in the config or pass --seed");
    }
    return cfg.seeds.front();
}

std::string fmt(std::optional<double> v) {
    if (!v) {
        return "undefined";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

struct LoadedModels {
    std::vector<Checkpoint> checkpoints;
    std::vector<Network<float>> networks;
    Ensemble ensemble;
    NormStats norm;
};

LoadedModels load_models(const PipelineConfig& cfg, std::span<const std::uint64_t> seeds) {
    LoadedModels m;
    for (auto seed : seeds) {
        for (auto role : roles_for(cfg.task)) {
            const auto path = checkpoint_path(cfg, role, seed);
            if (!fs::exists(path)) {
                throw DataError("missing checkpoint " + path.string() + " (run train first)");
            }
            m.checkpoints.push_back(read_checkpoint(path));
            if (m.checkpoints.back().model.role != role) {
                throw DataError("checkpoint " + path.string() + " holds a " +
                                std::string(role_name(m.checkpoints.back().model.role)) + " head");
            }
        }
    }
    m.norm = m.checkpoints.front().norm;
    m.networks.reserve(m.checkpoints.size());
    for (const auto& c : m.checkpoints) {
        if (!(c.norm == m.norm)) {
            throw DataError("ensemble members were trained with different normalisation statistics");
        }
        m.networks.push_back(c.network());
    }
    for (const auto& n : m.networks) {
        switch (n.config().role) {
        case HeadRole::Joint: m.ensemble.joint.push_back(&n); break;
        case HeadRole::Localization: m.ensemble.loc.push_back(&n); break;
        case HeadRole::Damage: m.ensemble.dmg.push_back(&n); break;
        }
    }
    return m;
}

std::string predict_split(const PipelineConfig& cfg, const LoadedModels& models, const fs::path& out_dir,
                          unsigned threads) {
    const auto split = load_split(cfg);
    const auto ids = split.patches_in(Split::Test);
    parallel_for(ids.size(), threads, [&](std::size_t i) {
        const auto bundle = read_bundle(bundle_path(cfg, ids[i]));
        const auto sample = prepare_sample(bundle, models.norm);
        const auto pred =
            ensemble_predict(models.ensemble, sample.input, cfg.training.tau_loc, cfg.training.tau_dmg);
        write_class_map(pred, ids[i], out_dir / (ids[i] + ".pred"));
    });
    return "wrote " + std::to_string(ids.size()) + " predictions to " + out_dir.string();
}

} // namespace

// ---------------------------------------------------------------------------
// Config

json PipelineConfig::to_json() const {
    json p = json::object();
    auto put = [&](const char* key, const fs::path& v) {
        if (!v.empty()) {
            p[key] = v.generic_string();
        }
    };
    put("gcps", paths.gcps);
    put("transforms", paths.transforms);
    put("catalog", paths.catalog);
    put("manifest", paths.manifest);
    put("staging", paths.staging);
    put("bundles", paths.bundles);
    put("split", paths.split);
    put("checkpoints", paths.checkpoints);
    put("predictions", paths.predictions);
    put("reports", paths.reports);
    return {
        {"schema_version", kConfigSchemaVersion},
        {"paths", p},
        {"selection",
         {{"alpha_cloud", selection.alpha_cloud},
          {"alpha_time", selection.alpha_time},
          {"cs_threshold", selection.cs_threshold},
          {"require_same_orbit", selection.require_same_orbit},
          {"cs_threshold_overrides", cs_threshold_overrides}}},
        {"georef", {{"min_gcps", min_gcps}}},
        {"optimizer", optimizer.to_json()},
        {"model",
         {{"fusion", fusion_name(model.fusion)},
          {"task", task_name(task)},
          {"inputs", input_mode_name(model.inputs)},
          {"width1", model.width1},
          {"width2", model.width2}}},
        {"training",
         {{"batch_size", training.batch_size},
          {"buffer_radius", training.buffer_radius},
          {"augment", training.augment}}},
        {"evaluation", {{"buffers", eval_buffers}, {"tau_loc", training.tau_loc}, {"tau_dmg", training.tau_dmg}}},
        {"split", split == SplitKind::XView2 ? "xview2" : "event_based"},
        {"seeds", seeds},
    };
}

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
    PipelineConfig cfg;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        only_keys(doc, {"schema_version", "paths", "selection", "georef", "optimizer", "model", "training",
                        "evaluation", "split", "seeds"},
                  "");
        if (!doc.contains("schema_version") || doc.at("schema_version").get<int>() != kConfigSchemaVersion) {
            throw ConfigError("config schema_version must be " + std::to_string(kConfigSchemaVersion));
        }
        if (doc.contains("paths")) {
            const auto& p = doc.at("paths");
            only_keys(p, {"gcps", "transforms", "catalog", "manifest", "staging", "bundles", "split", "checkpoints",
                          "predictions", "reports"},
                      "paths");
            auto get = [&](const char* key) { return resolve(base_dir, p.value(key, std::string{})); };
            cfg.paths = {get("gcps"),    get("transforms"),  get("catalog"),     get("manifest"), get("staging"),
                         get("bundles"), get("split"),       get("checkpoints"), get("predictions"),
                         get("reports")};
        }
        if (doc.contains("selection")) {
            const auto& s = doc.at("selection");
            only_keys(s, {"alpha_cloud", "alpha_time", "cs_threshold", "require_same_orbit", "cs_threshold_overrides"},
                      "selection");
            cfg.selection.alpha_cloud = s.value("alpha_cloud", cfg.selection.alpha_cloud);
            cfg.selection.alpha_time = s.value("alpha_time", cfg.selection.alpha_time);
            cfg.selection.cs_threshold = s.value("cs_threshold", cfg.selection.cs_threshold);
            cfg.selection.require_same_orbit = s.value("require_same_orbit", cfg.selection.require_same_orbit);
            if (s.contains("cs_threshold_overrides")) {
                cfg.cs_threshold_overrides = s.at("cs_threshold_overrides").get<std::map<std::string, double>>();
            }
        }
        if (doc.contains("georef")) {
            only_keys(doc.at("georef"), {"min_gcps"}, "georef");
            cfg.min_gcps = doc.at("georef").value("min_gcps", cfg.min_gcps);
            if (cfg.min_gcps < 3) {
                throw ConfigError("georef.min_gcps must be at least 3");
            }
        }
        if (doc.contains("optimizer")) {
            const auto& o = doc.at("optimizer");
            only_keys(o, {"learning_rate", "weight_decay", "epochs", "warmup_epochs", "beta1", "beta2", "eps"},
                      "optimizer");
            auto& c = cfg.optimizer;
            c.learning_rate = o.value("learning_rate", c.learning_rate);
            c.weight_decay = o.value("weight_decay", c.weight_decay);
            c.epochs = o.value("epochs", c.epochs);
            c.warmup_epochs = o.value("warmup_epochs", c.warmup_epochs);
            c.beta1 = o.value("beta1", c.beta1);
            c.beta2 = o.value("beta2", c.beta2);
            c.eps = o.value("eps", c.eps);
        }
        cfg.optimizer.validate();
        if (doc.contains("model")) {
            const auto& m = doc.at("model");
            only_keys(m, {"fusion", "task", "inputs", "width1", "width2"}, "model");
            cfg.model.fusion = parse_fusion(m.value("fusion", std::string(fusion_name(cfg.model.fusion))));
            cfg.task = parse_task(m.value("task", std::string(task_name(cfg.task))));
            cfg.model.inputs = parse_input_mode(m.value("inputs", std::string(input_mode_name(cfg.model.inputs))));
            cfg.model.width1 = m.value("width1", cfg.model.width1);
            cfg.model.width2 = m.value("width2", cfg.model.width2);
            if (cfg.model.width1 == 0 || cfg.model.width2 == 0) {
                throw ConfigError("model widths must be positive");
            }
        }
        if (doc.contains("training")) {
            const auto& t = doc.at("training");
            only_keys(t, {"batch_size", "buffer_radius", "augment"}, "training");
            cfg.training.batch_size = t.value("batch_size", cfg.training.batch_size);
            cfg.training.buffer_radius = t.value("buffer_radius", cfg.training.buffer_radius);
            cfg.training.augment = t.value("augment", cfg.training.augment);
            if (cfg.training.batch_size == 0 || cfg.training.buffer_radius < 0) {
                throw ConfigError("training.batch_size must be positive and buffer_radius non-negative");
            }
        }
        cfg.training.eval_buffer = cfg.training.buffer_radius;
        if (doc.contains("evaluation")) {
            const auto& e = doc.at("evaluation");
            only_keys(e, {"buffers", "tau_loc", "tau_dmg"}, "evaluation");
            cfg.eval_buffers = e.value("buffers", cfg.eval_buffers);
            cfg.training.tau_loc = e.value("tau_loc", cfg.training.tau_loc);
            cfg.training.tau_dmg = e.value("tau_dmg", cfg.training.tau_dmg);
            if (cfg.eval_buffers.empty() ||
                std::any_of(cfg.eval_buffers.begin(), cfg.eval_buffers.end(), [](int b) { return b < 0; })) {
                throw ConfigError("evaluation.buffers must be a non-empty list of non-negative radii");
            }
        }
        if (doc.contains("split")) {
            cfg.split = parse_split_kind(doc.at("split").get<std::string>());
        }
        if (doc.contains("seeds")) {
            cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) {
        throw ConfigError("config file " + path.string() + " does not exist");
    }
    return parse_config(read_text_file(path), path.parent_path());
}

fs::path checkpoint_path(const PipelineConfig& cfg, HeadRole role, std::uint64_t seed) {
    require_set(cfg.paths.checkpoints, "checkpoints");
    return cfg.paths.checkpoints / (std::string(role_name(role)) + "_seed" + std::to_string(seed) + ".ckpt");
}

fs::path bundle_path(const PipelineConfig& cfg, const std::string& patch_id) {
    require_set(cfg.paths.bundles, "bundles");
    return cfg.paths.bundles / (patch_id + ".bundle");
}

fs::path seed_predictions_dir(const PipelineConfig& cfg, std::uint64_t seed) {
    require_set(cfg.paths.predictions, "predictions");
    return cfg.paths.predictions / ("seed" + std::to_string(seed));
}

fs::path ensemble_predictions_dir(const PipelineConfig& cfg) {
    require_set(cfg.paths.predictions, "predictions");
    return cfg.paths.predictions / "ensemble";
}

// ---------------------------------------------------------------------------
// Stages

std::string cmd_georef(const PipelineConfig& cfg) {
    require_path(cfg.paths.gcps, "gcps");
    require_set(cfg.paths.transforms, "transforms");
    const auto tiles = read_gcps_ndjson_file(cfg.paths.gcps.string());
    if (tiles.empty()) {
        throw DataError("GCP file " + cfg.paths.gcps.string() + " holds no control points");
    }
    GeorefOptions opts;
    opts.min_gcps_per_tile = cfg.min_gcps;
    const auto corrections = correct_georeference(tiles, opts);
    atomic_write_text(cfg.paths.transforms, corrected_transforms_json(corrections));
    std::ostringstream out;
    for (const auto& [src, c] : corrections) {
        out << src << ": " << c.fitted_tiles.size() << " fitted tiles, " << c.sparse_tiles.size()
            << " sparse tiles, residual rms " << c.residuals.rms << " (before snap " << c.residuals_before_snap.rms
            << "), max " << c.residuals.max << "\n";
    }
    return out.str();
}

std::string cmd_select(const PipelineConfig& cfg) {
    require_path(cfg.paths.catalog, "catalog");
    require_set(cfg.paths.manifest, "manifest");
    const auto catalog = parse_catalog(read_text_file(cfg.paths.catalog));
    const auto result = build_scene_manifest(catalog, cfg.selection, cfg.cs_threshold_overrides);
    atomic_write_text(cfg.paths.manifest, result.json);
    std::string summary = "selected scenes for " + std::to_string(catalog.size() - result.failures.size()) + " of " +
                          std::to_string(catalog.size()) + " patches\n";
    if (!result.failures.empty()) {
        std::string msg;
        for (const auto& [patch, why] : result.failures) {
            msg += "  " + patch + ": " + why + "\n";
        }
        throw DataError(summary + "selection failed for " + std::to_string(result.failures.size()) +
                        " patch(es):\n" + msg);
    }
    return summary;
}

std::string cmd_build(const PipelineConfig& cfg, const RunOptions& run) {
    require_path(cfg.paths.staging, "staging");
    require_set(cfg.paths.bundles, "bundles");
    const fs::path base = cfg.paths.staging.parent_path();
    json doc;
    try {
        doc = json::parse(read_text_file(cfg.paths.staging));
    } catch (const json::exception& e) {
        throw DataError(std::string("staging file: ") + e.what());
    }
    std::vector<PatchSource> sources;
    try {
        if (doc.value("schema_version", 0) != static_cast<int>(kArtifactVersion)) {
            throw SchemaVersionError("staging file schema_version must be " + std::to_string(kArtifactVersion));
        }
        for (const auto& p : doc.at("patches")) {
            PatchSource s;
            s.patch_id = p.at("patch_id").get<std::string>();
            s.event_id = p.at("event_id").get<std::string>();
            s.disaster_type = parse_disaster_type(p.at("disaster_type").get<std::string>());
            s.orbit_direction = parse_orbit_direction(p.at("orbit_direction").get<std::string>());
            s.footprint = rect_from(p.at("footprint"));
            if (p.contains("vhr_coverage")) {
                s.vhr_coverage = rect_from(p.at("vhr_coverage"));
            }
            s.footprints =
                parse_footprints_geojson(read_text_file(resolve(base, p.at("polygons").get<std::string>())));
            auto staged = [&](const char* key) {
                const auto& g = p.at(key);
                return StagedRaster{read_grid(resolve(base, g.at("grid").get<std::string>())),
                                    parse_date(g.at("date").get<std::string>())};
            };
            s.s1_pre = staged("s1_pre");
            s.s1_post = staged("s1_post");
            s.s2_pre = staged("s2_pre");
            s.s2_post = staged("s2_post");
            sources.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("staging file: ") + e.what());
    }
    parallel_for(sources.size(), run.threads, [&](std::size_t i) {
        write_bundle(assemble_bundle(sources[i]), bundle_path(cfg, sources[i].patch_id));
    });
    return "built " + std::to_string(sources.size()) + " bundles in " + cfg.paths.bundles.string() + "\n";
}

std::string cmd_train(const PipelineConfig& cfg, const RunOptions& run) {
    const std::uint64_t seed = active_seed(cfg, run);
    const auto split = load_split(cfg);
    const auto train_ids = split.patches_in(Split::Train);
    const auto val_ids = split.patches_in(Split::Val);
    if (train_ids.empty()) {
        throw DataError("split has no training patches");
    }

    std::vector<PreparedSample> train;
    std::vector<PreparedSample> val;
    NormStats norm;
    {
        std::vector<PatchBundle> bundles(train_ids.size());
        parallel_for(train_ids.size(), run.threads,
                     [&](std::size_t i) { bundles[i] = read_bundle(bundle_path(cfg, train_ids[i])); });
        norm = fit_input_stats(bundles);
        train.resize(bundles.size());
        for (std::size_t i = 0; i < bundles.size(); ++i) {
            train[i] = prepare_sample(bundles[i], norm);
            bundles[i] = PatchBundle{};
        }
    }
    for (const auto& id : val_ids) {
        val.push_back(prepare_sample(read_bundle(bundle_path(cfg, id)), norm));
    }
    require_set(cfg.paths.checkpoints, "checkpoints");
    fs::create_directories(cfg.paths.checkpoints);
    atomic_write_text(cfg.paths.checkpoints / "norm_stats.json", norm_stats_to_json(norm));

    TrainingConfig tc = cfg.training;
    tc.threads = run.threads;
    const json training_json{{"task", task_name(cfg.task)},
                             {"optimizer", cfg.optimizer.to_json()},
                             {"batch_size", tc.batch_size},
                             {"buffer_radius", tc.buffer_radius},
                             {"augment", tc.augment},
                             {"split", cfg.split == SplitKind::XView2 ? "xview2" : "event_based"},
                             {"n_train", train.size()},
                             {"n_val", val.size()}};

    json log = json::object();
    std::ostringstream summary;
    for (auto role : roles_for(cfg.task)) {
        ModelConfig model = cfg.model;
        model.role = role;
        const auto path = checkpoint_path(cfg, role, seed);
        auto save = [&](const TrainResult& r) {
            Checkpoint c;
            c.model = model;
            c.norm = norm;
            c.params = r.params;
            c.seed = seed;
            c.epoch = r.selected_epoch;
            c.selection_score = r.selection_score;
            c.training = training_json;
            write_checkpoint(c, path);
        };
        const auto result = train_model(model, cfg.optimizer, tc, train, val, seed,
                                        [&](const EpochReport&, const TrainResult& r) { save(r); });
        json epochs = json::array();
        for (const auto& e : result.epochs) {
            epochs.push_back({{"epoch", e.epoch},
                              {"mean_loss", e.mean_loss},
                              {"val_score", e.val_score ? json(*e.val_score) : json(nullptr)},
                              {"empty_batches", e.empty_batches}});
        }
        log[std::string(role_name(role))] = {{"selected_epoch", result.selected_epoch},
                                             {"epochs", epochs},
                                             {"warnings", result.warnings}};
        summary << role_name(role) << ": " << result.epochs.size() << " epochs, final loss "
                << result.epochs.back().mean_loss << ", kept epoch " << result.selected_epoch << " -> "
                << path.string() << "\n";
        for (const auto& w : result.warnings) {
            summary << "warning: " << w << "\n";
        }
    }
    atomic_write_text(cfg.paths.checkpoints / ("train_seed" + std::to_string(seed) + ".json"), log.dump(2));
    return summary.str();
}

std::string cmd_predict(const PipelineConfig& cfg, const RunOptions& run) {
    const std::uint64_t seed = active_seed(cfg, run);
    const std::uint64_t one[] = {seed};
    const auto models = load_models(cfg, one);
    return predict_split(cfg, models, seed_predictions_dir(cfg, seed), run.threads) + "\n";
}

std::string cmd_ensemble(const PipelineConfig& cfg, const RunOptions& run) {
    if (cfg.seeds.empty()) {
        throw ConfigError("ensemble needs a non-empty seeds list");
    }
    const auto models = load_models(cfg, cfg.seeds);
    return predict_split(cfg, models, ensemble_predictions_dir(cfg), run.threads) + " (" +
           std::to_string(cfg.seeds.size()) + " seeds)\n";
}

std::string cmd_eval(const PipelineConfig& cfg, const fs::path& predictions_dir) {
    const auto split = load_split(cfg);
    if (!fs::is_directory(predictions_dir)) {
        throw DataError("prediction directory " + predictions_dir.string() + " does not exist");
    }
    require_set(cfg.paths.reports, "reports");
    std::map<std::string, ClassMap> truths;
    std::map<std::string, ClassMap> preds;
    for (const auto& id : split.patches_in(Split::Test)) {
        truths[id] = read_bundle(bundle_path(cfg, id)).label;
        const auto p = predictions_dir / (id + ".pred");
        if (fs::exists(p)) {
            std::string stored;
            preds[id] = read_class_map(p, &stored);
            if (stored != id) {
                throw DataError("prediction file " + p.string() + " belongs to patch " + stored);
            }
        }
    }
    const auto report = per_event_report(preds, truths, split, cfg.eval_buffers);
    const std::string name = predictions_dir.filename().empty() ? predictions_dir.parent_path().filename().string()
                                                                : predictions_dir.filename().string();
    atomic_write_text(cfg.paths.reports / (name + ".csv"), report_csv(report));
    atomic_write_text(cfg.paths.reports / (name + ".json"), report_json(report).dump(2));
    std::ostringstream out;
    for (const auto& row : report.rows) {
        if (row.event_id != kAggregateEvent) {
            continue;
        }
        out << "B=" << row.buffer << ": f1_loc " << fmt(row.f1_loc) << " (strict " << fmt(row.f1_loc_strict)
            << "), f1_dmg " << fmt(row.damage.dmg) << ", f1_comp " << fmt(row.f1_comp) << "\n";
    }
    for (const auto& w : report.warnings) {
        out << "warning: " << w << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Rendering

std::array<std::uint8_t, 3> class_color(std::uint8_t code) {
    switch (code) {
    case 0: return {0xea, 0xcf, 0xb8};
    case 1: return {0x39, 0x76, 0xaf};
    case 2: return {0xc7, 0x3a, 0x31};
    case 255: return {0x00, 0x00, 0x00};
    default: throw DataError("cannot render class code " + std::to_string(code));
    }
}

void render_class_map(const ClassMap& map, const fs::path& image) {
    if (map.height() == 0 || map.width() == 0) {
        throw DataError("cannot render an empty class map");
    }
    std::vector<std::uint8_t> rgb;
    rgb.reserve(map.size() * 3);
    for (auto v : map.values()) {
        const auto c = class_color(v);
        rgb.insert(rgb.end(), c.begin(), c.end());
    }
    Bytes file;
    if (image.extension() == ".ppm") {
        const std::string header =
            "P6\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
        file.assign(header.begin(), header.end());
        file.insert(file.end(), rgb.begin(), rgb.end());
    } else {
        png_image img;
        std::memset(&img, 0, sizeof img);
        img.version = PNG_IMAGE_VERSION;
        img.width = static_cast<png_uint_32>(map.width());
        img.height = static_cast<png_uint_32>(map.height());
        img.format = PNG_FORMAT_RGB;
        png_alloc_size_t size = 0;
        if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
            throw DataError(std::string("PNG encoding failed: ") + img.message);
        }
        file.resize(size);
        if (!png_image_write_to_memory(&img, file.data(), &size, 0, rgb.data(), 0, nullptr)) {
            throw DataError(std::string("PNG encoding failed: ") + img.message);
        }
        file.resize(size);
    }
    atomic_write_file(image, file);
}

void cmd_render(const fs::path& class_map, const fs::path& image) {
    if (!fs::exists(class_map)) {
        throw DataError("class map " + class_map.string() + " does not exist");
    }
    render_class_map(read_class_map(class_map), image);
}

// ---------------------------------------------------------------------------

fs::path write_synthetic_workspace(const fs::path& dir, const ScenarioConfig& scenario, const PipelineConfig& base) {
    fs::create_directories(dir / "bundles");
    const auto s = synthetic_scenario(scenario);
    for (const auto& b : s.bundles) {
        write_bundle(b, dir / "bundles" / (b.patch_id + ".bundle"));
    }
    atomic_write_text(dir / "split.csv", split_to_csv(s.split));
    PipelineConfig cfg = base;
    cfg.paths = {};
    cfg.paths.bundles = "bundles";
    cfg.paths.split = "split.csv";
    cfg.paths.checkpoints = "checkpoints";
    cfg.paths.predictions = "predictions";
    cfg.paths.reports = "reports";
    cfg.split = SplitKind::XView2;
    const auto path = dir / "config.json";
    atomic_write_text(path, cfg.to_json().dump(2));
    return path;
}

} // namespace dmgmap
