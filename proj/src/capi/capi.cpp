#include "masklab/masklab.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "common/json.hpp"
#include "common/parallel.hpp"
#include "evalkit/counterfactual.hpp"
#include "evalkit/evaluate.hpp"
#include "evalkit/report.hpp"
#include "explainer/model.hpp"
#include "numeric/ops.hpp"
#include "trainer/train.hpp"
#include "worlds/beacon.hpp"
#include "worlds/dataset.hpp"

using masklab::Error;
using masklab::ErrorCode;

struct ml_env {
    masklab::worlds::BeaconConfig config;
};

struct ml_policy {
    std::unique_ptr<masklab::worlds::Policy> policy;
};

struct ml_dataset {
    masklab::worlds::Dataset dataset;
    std::string dir;  // set when loaded from disk
};

struct ml_explainer {
    masklab::explainer::ExplainerModel model;
};

namespace {

thread_local std::string t_last_error;

ml_status map_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return ML_ERR_INVALID;
        case ErrorCode::Io: return ML_ERR_IO;
        case ErrorCode::Numeric: return ML_ERR_NUMERIC;
        case ErrorCode::NotFound: return ML_ERR_NOT_FOUND;
        case ErrorCode::TrainingFailure: return ML_ERR_TRAINING;
        case ErrorCode::Internal: return ML_ERR_INTERNAL;
    }
    return ML_ERR_INTERNAL;
}

template <typename Fn>
ml_status guarded(Fn&& fn) {
    try {
        fn();
        return ML_OK;
    } catch (const Error& e) {
        t_last_error = e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return ML_ERR_INTERNAL;
    } catch (...) {
        t_last_error = "unknown error";
        return ML_ERR_INTERNAL;
    }
}

void check_arg(bool ok, const char* msg) {
    masklab::require(ok, ErrorCode::InvalidArgument, msg);
}

}  // namespace

extern "C" {

const char* ml_last_error(void) { return t_last_error.c_str(); }

void ml_set_threads(int n) { masklab::set_max_threads(n); }

void ml_env_config_init(ml_env_config* config) {
    if (!config) return;
    masklab::worlds::BeaconConfig defaults;
    config->width = defaults.width;
    config->height = defaults.height;
    config->num_actions = defaults.num_actions;
    config->num_beacons = defaults.num_beacons;
    config->beacon_size = defaults.beacon_size;
}

ml_status ml_env_create_beacon(const ml_env_config* config, ml_env** out) {
    return guarded([&] {
        check_arg(config && out, "null argument");
        masklab::worlds::BeaconConfig cfg;
        cfg.width = config->width;
        cfg.height = config->height;
        cfg.num_actions = config->num_actions;
        cfg.num_beacons = config->num_beacons;
        cfg.beacon_size = config->beacon_size;
        masklab::worlds::BeaconWorld validate(cfg);  // throws on bad config
        *out = new ml_env{cfg};
    });
}

void ml_env_destroy(ml_env* env) { delete env; }

ml_status ml_policy_create_analytic(const ml_env* env, ml_policy** out) {
    return guarded([&] {
        check_arg(env && out, "null argument");
        *out = new ml_policy{std::make_unique<masklab::worlds::BeaconPolicy>(env->config)};
    });
}

void ml_tiny_train_config_init(ml_tiny_train_config* config) {
    if (!config) return;
    masklab::worlds::TinyCnnConfig defaults;
    config->max_epochs = defaults.max_epochs;
    config->seed = defaults.seed;
}

ml_status ml_policy_train_tiny(const ml_dataset* dataset, const ml_tiny_train_config* config,
                               ml_policy** out) {
    return guarded([&] {
        check_arg(dataset && config && out, "null argument");
        masklab::worlds::TinyCnnConfig cfg;
        cfg.max_epochs = config->max_epochs;
        cfg.seed = config->seed;
        auto [policy, agreement] = masklab::worlds::train_tiny_cnn_policy(dataset->dataset, cfg);
        *out = new ml_policy{std::move(policy)};
    });
}

ml_status ml_policy_save(const ml_policy* policy, const char* path) {
    return guarded([&] {
        check_arg(policy && path, "null argument");
        masklab::worlds::save_policy(*policy->policy, path);
    });
}

ml_status ml_policy_load(const char* path, ml_policy** out) {
    return guarded([&] {
        check_arg(path && out, "null argument");
        *out = new ml_policy{masklab::worlds::load_policy(path)};
    });
}

int ml_policy_num_actions(const ml_policy* policy) {
    return policy ? policy->policy->num_actions() : 0;
}

void ml_policy_destroy(ml_policy* policy) { delete policy; }

ml_status ml_dataset_collect(const ml_env* env, const ml_policy* policy, int n, uint64_t seed,
                             ml_dataset** out) {
    return guarded([&] {
        check_arg(env && policy && out, "null argument");
        masklab::worlds::BeaconWorld world(env->config);
        *out = new ml_dataset{
            masklab::worlds::collect_demonstrations(*policy->policy, world, n, seed), ""};
    });
}

ml_status ml_dataset_save(const ml_dataset* dataset, const char* dir, int force) {
    return guarded([&] {
        check_arg(dataset && dir, "null argument");
        masklab::worlds::save_dataset(dataset->dataset, dir, force != 0);
    });
}

ml_status ml_dataset_load(const char* dir, ml_dataset** out) {
    return guarded([&] {
        check_arg(dir && out, "null argument");
        *out = new ml_dataset{masklab::worlds::load_dataset(dir), dir};
    });
}

ml_status ml_dataset_stats(const ml_dataset* dataset, ml_dataset_info* out) {
    return guarded([&] {
        check_arg(dataset && out, "null argument");
        const auto& ds = dataset->dataset;
        out->count = ds.count();
        out->num_actions = ds.num_actions;
        out->width = ds.width();
        out->height = ds.height();
        out->n_train = static_cast<int>(ds.train_idx.size());
        out->n_valid = static_cast<int>(ds.valid_idx.size());
        out->n_test = static_cast<int>(ds.test_idx.size());
        out->seed = ds.seed;
    });
}

ml_status ml_dataset_env(const ml_dataset* dataset, ml_env** out) {
    return guarded([&] {
        check_arg(dataset && out, "null argument");
        *out = new ml_env{dataset->dataset.env};
    });
}

ml_status ml_dataset_expert_policy(const ml_dataset* dataset, ml_policy** out) {
    return guarded([&] {
        check_arg(dataset && out, "null argument");
        const auto& ds = dataset->dataset;
        if (ds.policy_kind == "analytic-beacon") {
            *out = new ml_policy{std::make_unique<masklab::worlds::BeaconPolicy>(ds.env)};
            return;
        }
        masklab::require(!dataset->dir.empty(), ErrorCode::NotFound,
                         "dataset expert is '" + ds.policy_kind +
                             "'; load the dataset from disk so its policy file can be found");
        *out = new ml_policy{masklab::worlds::load_policy(
            (std::filesystem::path(dataset->dir) / "policy.vmp").string())};
    });
}

void ml_dataset_destroy(ml_dataset* dataset) { delete dataset; }

ml_status ml_explainer_create(int num_actions, int height, int width, int channels, uint64_t seed,
                              ml_explainer** out) {
    return guarded([&] {
        check_arg(out != nullptr, "null argument");
        masklab::explainer::ExplainerConfig cfg;
        cfg.num_actions = num_actions;
        cfg.height = height;
        cfg.width = width;
        cfg.channels = channels;
        cfg.seed = seed;
        *out = new ml_explainer{masklab::explainer::ExplainerModel(cfg)};
    });
}

ml_status ml_explainer_load(const char* path, ml_explainer** out) {
    return guarded([&] {
        check_arg(path && out, "null argument");
        *out = new ml_explainer{masklab::explainer::ExplainerModel::load(path)};
    });
}

ml_status ml_explainer_save(const ml_explainer* explainer, const char* path, int epoch) {
    return guarded([&] {
        check_arg(explainer && path, "null argument");
        explainer->model.save(path, epoch);
    });
}

void ml_explainer_destroy(ml_explainer* explainer) { delete explainer; }

ml_status ml_explainer_masks(const ml_explainer* explainer, const float* state, size_t state_len,
                             float* out, size_t out_len) {
    return guarded([&] {
        check_arg(explainer && state && out, "null argument");
        const auto& cfg = explainer->model.config();
        const size_t hw = static_cast<size_t>(cfg.height) * cfg.width;
        check_arg(state_len == hw, "state length must equal H*W");
        check_arg(out_len == hw * static_cast<size_t>(cfg.num_actions),
                  "output length must equal K*H*W");
        masklab::numeric::Tensor s({1, cfg.height, cfg.width},
                                   std::vector<float>(state, state + state_len));
        masklab::numeric::Tensor masks = explainer->model.forward(s);
        std::memcpy(out, masks.data().data(), out_len * sizeof(float));
    });
}

void ml_train_config_init(ml_train_config* config) {
    if (!config) return;
    masklab::trainer::TrainConfig defaults;
    config->learning_rate = defaults.learning_rate;
    config->batch_size = defaults.batch_size;
    config->epochs = defaults.epochs;
    config->seed = defaults.seed;
    config->lambda_e = defaults.weights.entropy;
    config->lambda_avg = defaults.weights.mask_avg;
    config->lambda_smooth = defaults.weights.smooth;
    config->lambda_l2 = defaults.weights.l2;
}

ml_status ml_train(ml_explainer* explainer, const ml_policy* policy, const ml_dataset* dataset,
                   const ml_train_config* config, const char* log_csv, const char* checkpoint_out,
                   float* best_valid_loss) {
    return guarded([&] {
        check_arg(explainer && policy && dataset && config, "null argument");
        masklab::trainer::TrainConfig cfg;
        cfg.learning_rate = config->learning_rate;
        cfg.batch_size = config->batch_size;
        cfg.epochs = config->epochs;
        cfg.seed = config->seed;
        cfg.weights.entropy = config->lambda_e;
        cfg.weights.mask_avg = config->lambda_avg;
        cfg.weights.smooth = config->lambda_smooth;
        cfg.weights.l2 = config->lambda_l2;
        if (log_csv) cfg.log_csv = log_csv;
        if (checkpoint_out) cfg.checkpoint_path = checkpoint_out;
        auto result =
            masklab::trainer::train(explainer->model, *policy->policy, dataset->dataset, cfg);
        if (best_valid_loss) *best_valid_loss = result.best_valid_total;
    });
}

void ml_eval_config_init(ml_eval_config* config) {
    if (!config) return;
    std::memset(config, 0, sizeof(*config));
    masklab::evalkit::EvalConfig defaults;
    config->fractions = nullptr;
    config->n_fractions = 0;
    config->per_pixel_steps = 0;
    config->with_baselines = 0;
    config->n_overlays = defaults.n_overlays;
    config->overlay_scale = defaults.overlay_scale;
    config->cf_examples = defaults.cf_examples;
    config->cf_regions = defaults.cf.top_regions;
    config->cf_threshold = defaults.cf.threshold;
    config->rise_masks = defaults.rise.n_masks;
    config->rise_cell = defaults.rise.cell_grid;
    config->rise_p_keep = defaults.rise.p_keep;
    config->rise_seed = defaults.rise.seed;
    config->blur_stride = defaults.blur.stride;
    config->blur_sigma = defaults.blur.sigma;
    config->occlusion_patch = defaults.occlusion_patch;
}

ml_status ml_evaluate(const ml_explainer* const* checkpoints, const char* const* names,
                      int n_checkpoints, const ml_policy* policy, const ml_dataset* dataset,
                      const ml_eval_config* config, const char* out_dir) {
    return guarded([&] {
        check_arg(checkpoints && names && policy && dataset && config && out_dir, "null argument");
        check_arg(n_checkpoints >= 1, "need at least one checkpoint");
        masklab::evalkit::EvalConfig cfg;
        if (config->fractions && config->n_fractions > 0)
            cfg.fractions.assign(config->fractions, config->fractions + config->n_fractions);
        cfg.per_pixel = config->per_pixel_steps != 0;
        cfg.with_baselines = config->with_baselines != 0;
        cfg.n_overlays = config->n_overlays;
        cfg.overlay_scale = config->overlay_scale;
        cfg.cf_examples = config->cf_examples;
        cfg.cf.top_regions = config->cf_regions;
        cfg.cf.threshold = config->cf_threshold;
        cfg.rise.n_masks = config->rise_masks;
        cfg.rise.cell_grid = config->rise_cell;
        cfg.rise.p_keep = config->rise_p_keep;
        cfg.rise.seed = config->rise_seed;
        cfg.blur.stride = config->blur_stride;
        cfg.blur.sigma = config->blur_sigma;
        cfg.occlusion_patch = config->occlusion_patch;
        for (int i = 0; i < config->n_echo; ++i)
            cfg.config_echo.emplace_back(config->echo_keys[i], config->echo_values[i]);

        std::vector<const masklab::explainer::ExplainerModel*> models;
        std::vector<std::string> model_names;
        for (int i = 0; i < n_checkpoints; ++i) {
            check_arg(checkpoints[i] != nullptr && names[i] != nullptr, "null checkpoint");
            models.push_back(&checkpoints[i]->model);
            model_names.push_back(names[i]);
        }
        masklab::evalkit::evaluate(models, model_names, *policy->policy, dataset->dataset, cfg,
                                   out_dir);
    });
}

ml_status ml_emit_explanation(const ml_explainer* explainer, const ml_dataset* dataset, int index,
                              int scale, const char* out_dir) {
    return guarded([&] {
        check_arg(explainer && dataset && out_dir, "null argument");
        const auto& ds = dataset->dataset;
        check_arg(index >= 0 && index < ds.count(), "record index out of range");
        const auto& rec = ds.records[static_cast<std::size_t>(index)];
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        masklab::require(!ec, ErrorCode::Io, "cannot create output directory");
        masklab::numeric::Tensor masks = explainer->model.forward(rec.state);
        for (int a = 0; a < ds.num_actions; ++a) {
            masklab::numeric::Tensor mask = masklab::numeric::index_row(masks, a);
            auto rgb = masklab::evalkit::render_overlay(rec.state, mask, scale);
            const std::string name =
                std::to_string(index) + "_action" + std::to_string(a) + ".ppm";
            masklab::evalkit::write_ppm((fs::path(out_dir) / name).string(), rgb,
                                        rec.state.dim(2) * scale, rec.state.dim(1) * scale);
        }
    });
}

ml_status ml_counterfactual(const ml_explainer* explainer, const ml_policy* policy,
                            const ml_dataset* dataset, int index, float threshold, int top_regions,
                            const char* out_json) {
    return guarded([&] {
        check_arg(explainer && policy && dataset && out_json, "null argument");
        const auto& ds = dataset->dataset;
        check_arg(index >= 0 && index < ds.count(), "record index out of range");
        const auto& rec = ds.records[static_cast<std::size_t>(index)];
        masklab::evalkit::CfConfig cfg;
        cfg.threshold = threshold;
        cfg.top_regions = top_regions;
        const auto reference = masklab::worlds::reference_value_for(ds.env);
        masklab::numeric::Tensor masks = explainer->model.forward(rec.state);
        auto records = masklab::evalkit::counterfactual(*policy->policy, rec.state, masks,
                                                        rec.action, reference, cfg);

        // share of mask mass on each annotated environment region
        masklab::worlds::BeaconWorld world(ds.env);
        masklab::worlds::BeaconState annotated =
            masklab::worlds::regenerate_record(world, ds, index);
        std::vector<std::vector<int>> regions;
        for (const auto& region : annotated.beacons) regions.push_back(region.pixels);
        auto importance = masklab::evalkit::region_importance(
            masklab::numeric::index_row(masks, rec.action), regions);

        std::ofstream os(out_json);
        masklab::require(bool(os), ErrorCode::Io,
                         "cannot write '" + std::string(out_json) + "'");
        masklab::JsonWriter json(os);
        json.begin_object();
        json.kv("index", index);
        json.kv("original_action", rec.action);
        json.key("annotated_region_importance").begin_array();
        for (const auto& [region_idx, share] : importance) {
            json.begin_object();
            json.kv("region", static_cast<std::int64_t>(region_idx));
            json.kv("drives_action", annotated.beacons[region_idx].action);
            json.kv("share", share);
            json.end_object();
        }
        json.end_array();
        json.key("regions").begin_array();
        for (const auto& r : records) {
            json.begin_object();
            json.kv("rank", r.rank);
            json.kv("mass", r.mass);
            json.kv("pixel_count", static_cast<std::int64_t>(r.pixels.size()));
            json.key("pixels").begin_array();
            for (int p : r.pixels) json.value(p);
            json.end_array();
            json.kv("new_action", r.new_action);
            json.kv("changed", r.changed);
            json.end_object();
        }
        json.end_array();
        json.end_object();
        os << "\n";
    });
}

void ml_baseline_config_init(ml_baseline_config* config) {
    if (!config) return;
    masklab::evalkit::EvalConfig defaults;
    config->method = ML_BASELINE_RISE;
    config->rise_masks = defaults.rise.n_masks;
    config->rise_cell = defaults.rise.cell_grid;
    config->rise_p_keep = defaults.rise.p_keep;
    config->rise_seed = defaults.rise.seed;
    config->blur_stride = defaults.blur.stride;
    config->blur_sigma = defaults.blur.sigma;
    config->occlusion_patch = defaults.occlusion_patch;
}

ml_status ml_baseline_saliency(const ml_policy* policy, const ml_dataset* dataset, int index,
                               int action, const ml_baseline_config* config, const char* prefix) {
    return guarded([&] {
        check_arg(policy && dataset && config && prefix, "null argument");
        const auto& ds = dataset->dataset;
        check_arg(index >= 0 && index < ds.count(), "record index out of range");
        const auto& rec = ds.records[static_cast<std::size_t>(index)];
        const int target = action < 0 ? rec.action : action;
        check_arg(target >= 0 && target < ds.num_actions, "action out of range");
        const auto reference = masklab::worlds::reference_value_for(ds.env);

        masklab::baselines::SaliencyMap map;
        std::vector<std::pair<std::string, std::string>> params;
        switch (config->method) {
            case ML_BASELINE_RISE: {
                masklab::baselines::RiseConfig rc;
                rc.n_masks = config->rise_masks;
                rc.cell_grid = config->rise_cell;
                rc.p_keep = config->rise_p_keep;
                rc.seed = config->rise_seed;
                map = masklab::baselines::rise_saliency(*policy->policy, rec.state, target, rc,
                                                        reference);
                params = {{"n_masks", std::to_string(rc.n_masks)},
                          {"cell_grid", std::to_string(rc.cell_grid)},
                          {"p_keep", std::to_string(rc.p_keep)},
                          {"seed", std::to_string(rc.seed)}};
                break;
            }
            case ML_BASELINE_BLUR: {
                masklab::baselines::BlurConfig bc;
                bc.stride = config->blur_stride;
                bc.sigma = config->blur_sigma;
                map = masklab::baselines::blur_saliency(*policy->policy, rec.state, target, bc);
                params = {{"stride", std::to_string(bc.stride)},
                          {"sigma", std::to_string(bc.sigma)}};
                break;
            }
            case ML_BASELINE_OCCLUSION:
                map = masklab::baselines::occlusion_saliency(*policy->policy, rec.state, target,
                                                             config->occlusion_patch, reference);
                params = {{"patch", std::to_string(config->occlusion_patch)}};
                break;
            case ML_BASELINE_NORMALIZED_DELTA:
                map = masklab::baselines::normalized_delta_saliency(
                    *policy->policy, rec.state, target, config->occlusion_patch, reference);
                params = {{"patch", std::to_string(config->occlusion_patch)}};
                break;
            default:
                check_arg(false, "unknown baseline method");
        }
        masklab::baselines::save_saliency(map, prefix, params);
    });
}

}  // extern "C"
