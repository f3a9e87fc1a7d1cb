#include "dmgmap/train.hpp"

#include "dmgmap/metrics.hpp"
#include "dmgmap/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace dmgmap {

NormStats fit_input_stats(std::span<const PatchBundle> train) {
    std::vector<const RasterGrid*> s1;
    std::vector<const RasterGrid*> s2;
    for (const auto& b : train) {
        s1.push_back(&b.s1_pre);
        s1.push_back(&b.s1_post);
        s2.push_back(&b.s2_pre);
        s2.push_back(&b.s2_post);
    }
    NormStats out = fit_norm_stats(std::span<const RasterGrid* const>(s1));
    try {
        const NormStats s2_stats = fit_norm_stats(std::span<const RasterGrid* const>(s2));
        out.channels.insert(out.channels.end(), s2_stats.channels.begin(), s2_stats.channels.end());
    } catch (const DegenerateChannelError& e) {
        throw DegenerateChannelError(e.channel() + kS1Channels, 0.0);
    }
    return out;
}

PreparedSample prepare_sample(const PatchBundle& b, const NormStats& stats) {
    PreparedSample s;
    s.patch_id = b.patch_id;
    s.event_id = b.event_id;
    s.label = b.label;
    RasterGrid pre = stack_epoch(b.s1_pre, b.s2_pre);
    RasterGrid post = stack_epoch(b.s1_post, b.s2_post);
    normalize_in_place(pre, stats);
    normalize_in_place(post, stats);
    s.input.height = pre.height();
    s.input.width = pre.width();
    s.input.pre.assign(pre.data().begin(), pre.data().end());
    s.input.post.assign(post.data().begin(), post.data().end());
    return s;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) {
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

namespace {

std::optional<double> validation_score(const Network<float>& net, const TrainingConfig& tc,
                                       std::span<const PreparedSample> val) {
    const auto& cfg = net.config();
    std::vector<ClassMap> preds(val.size());
    const Network<float>* one[] = {&net};
    parallel_for(val.size(), tc.threads, [&](std::size_t i) {
        const auto& s = val[i];
        const auto probs = mean_softmax(one, s.input);
        const std::size_t h = s.input.height;
        const std::size_t w = s.input.width;
        const std::size_t plane = h * w;
        if (cfg.role == HeadRole::Joint) {
            preds[i] = argmax_map(probs, 3, h, w);
            return;
        }
        std::vector<std::uint8_t> v(plane, 0);
        const auto truth = s.label.values();
        for (std::size_t p = 0; p < plane; ++p) {
            const double pos = probs[plane + p];
            if (cfg.role == HeadRole::Localization) {
                v[p] = pos >= tc.tau_loc ? 1 : 0;
            } else if (is_building_code(truth[p])) {
                v[p] = pos >= tc.tau_dmg ? 2 : 1;
            }
        }
        preds[i] = ClassMap(h, w, std::move(v));
    });
    LocCounts loc;
    DamageCounts dmg;
    for (std::size_t i = 0; i < val.size(); ++i) {
        loc.confusion += loc_counts(preds[i], val[i].label, tc.eval_buffer).confusion;
        dmg += damage_counts(preds[i], val[i].label);
    }
    switch (cfg.role) {
    case HeadRole::Localization: return f1_score(loc.confusion);
    case HeadRole::Damage: return damage_scores(dmg).dmg;
    case HeadRole::Joint: return f1_comp(f1_score(loc.confusion), damage_scores(dmg).dmg);
    }
    return std::nullopt;
}

} // namespace

TrainResult train_model(const ModelConfig& model, const OptimizerConfig& opt, const TrainingConfig& tc,
                        std::span<const PreparedSample> train, std::span<const PreparedSample> val,
                        std::uint64_t seed, const EpochCallback& on_epoch) {
    opt.validate();
    if (train.empty()) {
        throw DataError("training split is empty");
    }
    if (tc.batch_size == 0) {
        throw ConfigError("training.batch_size must be positive");
    }
    if (tc.buffer_radius < 0) {
        throw ConfigError("training.buffer_radius must be non-negative");
    }
    const std::size_t n = train[0].input.height;
    for (const auto& s : train) {
        if (s.input.height != n || s.input.width != n) {
            throw DataError("training patches must share one square size");
        }
    }

    Network<float> net(model);
    net.init(seed);
    const std::size_t P = net.params().size();

    std::vector<TargetMap> targets;
    std::vector<ClassCounts> counts;
    for (const auto& s : train) {
        targets.push_back(make_target(s.label, model.role, tc.buffer_radius));
        counts.push_back(class_counts(s.label));
    }

    const bool any_valid = std::any_of(targets.begin(), targets.end(), [](const TargetMap& t) {
        return std::any_of(t.begin(), t.end(), [](auto v) { return v >= 0; });
    });
    if (!any_valid) {
        throw DataError(std::string("no training pixel is valid for the ") + std::string(role_name(model.role)) +
                        " head");
    }

    TrainResult result;
    BiasedSampler sampler(counts, seed ^ 0x9e3779b97f4a7c15ULL);
    result.warnings = sampler.warnings();
    std::mt19937_64 aug_rng(seed + 0x632be59bd9b4e019ULL);
    std::uniform_int_distribution<int> aug_dist(0, 7);

    AdamW adam(P, opt);
    const std::size_t steps_per_epoch = (train.size() + tc.batch_size - 1) / tc.batch_size;
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(opt.epochs);
    std::size_t step = 0;

    double best = -std::numeric_limits<double>::infinity();
    std::vector<float> grad(P);
    std::vector<std::vector<float>> sample_grads(tc.batch_size, std::vector<float>(P));
    std::vector<ModelInput<float>> inputs(tc.batch_size);
    std::vector<TargetMap> batch_targets(tc.batch_size);
    std::vector<float> sample_loss(tc.batch_size);

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        EpochReport rep;
        rep.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t drawn = 0;
        while (drawn < train.size()) {
            const std::size_t bs = std::min(tc.batch_size, train.size() - drawn);
            std::size_t valid = 0;
            for (std::size_t b = 0; b < bs; ++b) {
                const std::size_t idx = sampler.next();
                const int k = tc.augment ? aug_dist(aug_rng) : 0;
                if (k == 0) {
                    inputs[b] = train[idx].input;
                    batch_targets[b] = targets[idx];
                } else {
                    inputs[b] = augment(train[idx].input, k);
                    batch_targets[b] = dihedral<std::int32_t>(targets[idx], 1, n, k);
                }
                valid += static_cast<std::size_t>(
                    std::count_if(batch_targets[b].begin(), batch_targets[b].end(), [](auto t) { return t >= 0; }));
            }
            drawn += bs;

            std::fill(grad.begin(), grad.end(), 0.0f);
            double batch_loss = 0.0;
            if (valid == 0) {
                ++rep.empty_batches;
            } else {
                const float scale = 1.0f / static_cast<float>(valid);
                parallel_for(bs, tc.threads, [&](std::size_t b) {
                    std::fill(sample_grads[b].begin(), sample_grads[b].end(), 0.0f);
                    sample_loss[b] = net.loss_and_grad(inputs[b], batch_targets[b], scale, sample_grads[b]);
                });
                for (std::size_t b = 0; b < bs; ++b) {
                    batch_loss += static_cast<double>(sample_loss[b]);
                    for (std::size_t i = 0; i < P; ++i) {
                        grad[i] += sample_grads[b][i];
                    }
                }
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(step + 1));
            }
            loss_sum += batch_loss;
            const double t = static_cast<double>(step) / static_cast<double>(total_steps);
            adam.step(std::span<float>(net.params()), std::span<const float>(grad), lr_at(t, opt));
            ++step;
        }
        rep.mean_loss = loss_sum / static_cast<double>(steps_per_epoch);

        if (val.empty()) {
            result.params = net.params();
            result.selected_epoch = epoch;
        } else {
            rep.val_score = validation_score(net, tc, val);
            const double score = rep.val_score.value_or(-std::numeric_limits<double>::infinity());
            if (result.params.empty() || score > best) {
                best = score;
                result.params = net.params();
                result.selected_epoch = epoch;
                result.selection_score = rep.val_score;
            }
        }
        result.epochs.push_back(rep);
        if (on_epoch) {
            on_epoch(rep, result);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

std::vector<double> mean_softmax(std::span<const Network<float>* const> models, const ModelInput<float>& x) {
    if (models.empty()) {
        throw DataError("ensemble has no models");
    }
    const std::size_t k = models[0]->config().num_classes();
    const std::size_t plane = x.height * x.width;
    std::vector<double> sum(k * plane, 0.0);
    for (const auto* m : models) {
        if (m->config().num_classes() != k || m->config().role != models[0]->config().role) {
            throw DataError("ensemble members have heterogeneous heads");
        }
        const auto logits = m->forward(x);
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += static_cast<double>(logits[i]);
        }
    }
    const double n = static_cast<double>(models.size());
    std::vector<double> probs(k * plane);
    for (std::size_t p = 0; p < plane; ++p) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            mx = std::max(mx, sum[c * plane + p] / n);
        }
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            probs[c * plane + p] = std::exp(sum[c * plane + p] / n - mx);
            z += probs[c * plane + p];
        }
        for (std::size_t c = 0; c < k; ++c) {
            probs[c * plane + p] /= z;
        }
    }
    return probs;
}

ClassMap argmax_map(std::span<const double> probs, std::size_t k, std::size_t height, std::size_t width) {
    const std::size_t plane = height * width;
    if (probs.size() != k * plane || k == 0 || k > 3) {
        throw DataError("argmax_map: probability planes do not match the map size");
    }
    std::vector<std::uint8_t> out(plane);
    for (std::size_t p = 0; p < plane; ++p) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c) {
            if (probs[c * plane + p] > probs[best * plane + p]) {
                best = c;
            }
        }
        out[p] = static_cast<std::uint8_t>(best);
    }
    return ClassMap(height, width, std::move(out));
}

ClassMap two_step_combine(std::span<const double> loc_probs, std::span<const double> dmg_probs, std::size_t height,
                          std::size_t width, double tau_loc, double tau_dmg) {
    const std::size_t plane = height * width;
    if (loc_probs.size() != plane || dmg_probs.size() != plane) {
        throw DataError("two_step_combine: maps are not aligned");
    }
    std::vector<std::uint8_t> out(plane);
    for (std::size_t p = 0; p < plane; ++p) {
        if (loc_probs[p] < tau_loc) {
            out[p] = 0;
        } else {
            out[p] = dmg_probs[p] >= tau_dmg ? 2 : 1;
        }
    }
    return ClassMap(height, width, std::move(out));
}

ClassMap ensemble_predict(const Ensemble& e, const ModelInput<float>& x, double tau_loc, double tau_dmg) {
    const bool joint = !e.joint.empty();
    const bool two_step = !e.loc.empty() || !e.dmg.empty();
    if (joint == two_step) {
        throw DataError("ensemble must hold either joint models or localization and damage models");
    }
    if (joint) {
        for (const auto* m : e.joint) {
            if (m->config().role != HeadRole::Joint) {
                throw DataError("ensemble members have heterogeneous heads");
            }
        }
        return argmax_map(mean_softmax(e.joint, x), 3, x.height, x.width);
    }
    if (e.loc.empty() || e.dmg.empty()) {
        throw DataError("two-step ensemble needs localization and damage models");
    }
    for (const auto* m : e.loc) {
        if (m->config().role != HeadRole::Localization) {
            throw DataError("ensemble members have heterogeneous heads");
        }
    }
    for (const auto* m : e.dmg) {
        if (m->config().role != HeadRole::Damage) {
            throw DataError("ensemble members have heterogeneous heads");
        }
    }
    const std::size_t plane = x.height * x.width;
    const auto loc = mean_softmax(e.loc, x);
    const auto dmg = mean_softmax(e.dmg, x);
    return two_step_combine(std::span<const double>(loc).subspan(plane, plane),
                            std::span<const double>(dmg).subspan(plane, plane), x.height, x.width, tau_loc, tau_dmg);
}

} // namespace dmgmap
