// masklab command-line front end. Drives everything through the public C API
// in masklab/masklab.h; all machine-readable output goes to files, stdout is
// for humans.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "masklab/masklab.h"

namespace fs = std::filesystem;

namespace {

// documented exit codes
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitNotFound = 5;
constexpr int kExitTraining = 6;

int exit_code_for(ml_status status) {
    switch (status) {
        case ML_OK: return 0;
        case ML_ERR_INVALID: return kExitConfig;
        case ML_ERR_IO: return kExitIo;
        case ML_ERR_NUMERIC: return kExitNumeric;
        case ML_ERR_NOT_FOUND: return kExitNotFound;
        case ML_ERR_TRAINING: return kExitTraining;
        default: return 1;
    }
}

[[noreturn]] void die(ml_status status, const std::string& context) {
    std::fprintf(stderr, "masklab: %s: %s\n", context.c_str(), ml_last_error());
    std::exit(exit_code_for(status));
}

void check(ml_status status, const std::string& context) {
    if (status != ML_OK) die(status, context);
}

std::string default_out(const std::string& leaf) {
    const char* root = std::getenv("MASKLAB_OUT");
    return (fs::path(root ? root : ".") / leaf).string();
}

// every command writes its fully resolved configuration next to its outputs
void write_echo(const std::string& out_dir,
                const std::map<std::string, std::string>& resolved) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::fprintf(stderr, "masklab: cannot create '%s'\n", out_dir.c_str());
        std::exit(kExitIo);
    }
    std::ofstream os(fs::path(out_dir) / "config_echo.txt");
    if (!os) {
        std::fprintf(stderr, "masklab: cannot write config echo in '%s'\n", out_dir.c_str());
        std::exit(kExitIo);
    }
    for (const auto& [key, value] : resolved) os << key << " = " << value << "\n";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct DatasetHandle {
    ml_dataset* ds = nullptr;
    ~DatasetHandle() { ml_dataset_destroy(ds); }
};

struct PolicyHandle {
    ml_policy* p = nullptr;
    ~PolicyHandle() { ml_policy_destroy(p); }
};

struct ExplainerHandle {
    ml_explainer* e = nullptr;
    ~ExplainerHandle() { ml_explainer_destroy(e); }
};

struct EnvHandle {
    ml_env* env = nullptr;
    ~EnvHandle() { ml_env_destroy(env); }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"masklab: action-wise saliency masks for vision policies"};
    app.require_subcommand(1);
    app.set_config("--config", "", "plain key = value configuration file (sections per command)");

    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = hardware)")
        ->default_val(0);

    // ---- collect ----
    auto* collect = app.add_subcommand("collect", "generate states and expert demonstrations");
    std::string c_env = "beacon", c_policy = "analytic", c_out;
    int c_n = 2000, c_grid = 28, c_k = 4, c_beacons = 2, c_beacon_size = 6, c_tiny_epochs = 40;
    std::uint64_t c_seed = 42;
    bool c_force = false;
    collect->add_option("--env", c_env, "environment kind")->default_val("beacon");
    collect->add_option("--n", c_n, "number of demonstrations")->default_val(2000);
    collect->add_option("--seed", c_seed, "generation + split seed")->default_val(42);
    collect->add_option("--grid", c_grid, "state width/height")->default_val(28);
    collect->add_option("--k", c_k, "number of actions")->default_val(4);
    collect->add_option("--beacons", c_beacons, "beacons per state")->default_val(2);
    collect->add_option("--beacon-size", c_beacon_size, "beacon side length")->default_val(6);
    collect->add_option("--policy", c_policy, "expert kind: analytic | tiny-cnn")
        ->default_val("analytic");
    collect->add_option("--tiny-epochs", c_tiny_epochs, "tiny-cnn training epoch cap")
        ->default_val(40);
    collect->add_option("--out", c_out, "dataset directory (default $MASKLAB_OUT/dataset)");
    collect->add_flag("--force", c_force, "overwrite an existing dataset");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train the explainer against a frozen expert");
    std::string t_dataset, t_out;
    int t_epochs = 50, t_batch = 16, t_channels = 8;
    double t_lr = 1e-5, t_le = 1.0, t_lavg = 0.3, t_lsmooth = 1.0, t_l2 = 0.01;
    std::uint64_t t_seed = 42;
    std::vector<std::uint64_t> t_seeds;
    train->add_option("--dataset", t_dataset, "dataset directory")->required();
    train->add_option("--epochs", t_epochs)->default_val(50);
    train->add_option("--batch", t_batch)->default_val(16);
    train->add_option("--lr", t_lr, "learning rate")->default_val(1e-5);
    train->add_option("--lambda-e", t_le)->default_val(1.0);
    train->add_option("--lambda-avg", t_lavg)->default_val(0.3);
    train->add_option("--lambda-smooth", t_lsmooth)->default_val(1.0);
    train->add_option("--lambda-l2", t_l2)->default_val(0.01);
    train->add_option("--channels", t_channels, "explainer hidden channels")->default_val(8);
    train->add_option("--seed", t_seed, "training seed")->default_val(42);
    train->add_option("--seeds", t_seeds, "multiple seeds (one run per seed, overrides --seed)")
        ->delimiter(',');
    train->add_option("--out", t_out, "output directory for checkpoints + logs");

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "fidelity + insertion/deletion + counterfactuals");
    std::string e_dataset, e_out;
    std::vector<std::string> e_checkpoints;
    std::vector<double> e_fractions{0.25, 0.5, 1.0};
    bool e_per_pixel = false, e_baselines = false;
    int e_overlays = 2, e_scale = 8, e_rise_masks = 2000, e_rise_cell = 7, e_blur_stride = 4,
        e_patch = 4, e_cf_regions = 3;
    double e_rise_p = 0.5, e_blur_sigma = 3.0, e_cf_threshold = 0.5;
    std::uint64_t e_rise_seed = 0;
    evaluate->add_option("--dataset", e_dataset, "dataset directory")->required();
    evaluate->add_option("--checkpoint", e_checkpoints, "explainer checkpoint(s)")
        ->required()
        ->delimiter(',');
    evaluate->add_option("--fractions", e_fractions, "insertion/deletion fractions")
        ->delimiter(',')
        ->default_val(std::vector<double>{0.25, 0.5, 1.0});
    evaluate->add_flag("--per-pixel-steps", e_per_pixel, "exact per-pixel curve stepping");
    evaluate->add_flag("--baselines", e_baselines, "also evaluate perturbation baselines");
    evaluate->add_option("--overlays", e_overlays, "test samples rendered as overlays")
        ->default_val(2);
    evaluate->add_option("--scale", e_scale, "overlay upscale factor")->default_val(8);
    evaluate->add_option("--rise-masks", e_rise_masks)->default_val(2000);
    evaluate->add_option("--rise-cell", e_rise_cell)->default_val(7);
    evaluate->add_option("--rise-p-keep", e_rise_p)->default_val(0.5);
    evaluate->add_option("--rise-seed", e_rise_seed)->default_val(0);
    evaluate->add_option("--blur-stride", e_blur_stride)->default_val(4);
    evaluate->add_option("--blur-sigma", e_blur_sigma)->default_val(3.0);
    evaluate->add_option("--patch", e_patch, "occlusion patch size")->default_val(4);
    evaluate->add_option("--cf-regions", e_cf_regions)->default_val(3);
    evaluate->add_option("--cf-threshold", e_cf_threshold)->default_val(0.5);
    evaluate->add_option("--out", e_out, "report directory");

    // ---- explain ----
    auto* explain = app.add_subcommand("explain", "emit per-action overlay images for one state");
    std::string x_dataset, x_checkpoint, x_out;
    int x_index = 0, x_scale = 8;
    explain->add_option("--dataset", x_dataset)->required();
    explain->add_option("--checkpoint", x_checkpoint)->required();
    explain->add_option("--index", x_index, "dataset record index")->required();
    explain->add_option("--scale", x_scale)->default_val(8);
    explain->add_option("--out", x_out, "output directory");

    // ---- counterfactual ----
    auto* counterfactual = app.add_subcommand("counterfactual",
                                              "region-removal counterfactuals for one state");
    std::string f_dataset, f_checkpoint, f_out;
    int f_index = 0, f_regions = 3;
    double f_threshold = 0.5;
    counterfactual->add_option("--dataset", f_dataset)->required();
    counterfactual->add_option("--checkpoint", f_checkpoint)->required();
    counterfactual->add_option("--index", f_index)->required();
    counterfactual->add_option("--regions", f_regions, "top regions to test")->default_val(3);
    counterfactual->add_option("--threshold", f_threshold, "binarization threshold on max")
        ->default_val(0.5);
    counterfactual->add_option("--out", f_out, "output directory");

    // ---- baseline ----
    auto* baseline = app.add_subcommand("baseline", "run one perturbation baseline on one state");
    std::string b_dataset, b_method = "rise", b_out;
    int b_index = 0, b_action = -1, b_rise_masks = 2000, b_rise_cell = 7, b_blur_stride = 4,
        b_patch = 4;
    double b_rise_p = 0.5, b_blur_sigma = 3.0;
    std::uint64_t b_rise_seed = 0;
    baseline->add_option("--dataset", b_dataset)->required();
    baseline->add_option("--index", b_index)->required();
    baseline->add_option("--method", b_method, "rise | blur | occlusion | normdelta")
        ->default_val("rise");
    baseline->add_option("--action", b_action, "target action (-1 = expert action)")
        ->default_val(-1);
    baseline->add_option("--rise-masks", b_rise_masks)->default_val(2000);
    baseline->add_option("--rise-cell", b_rise_cell)->default_val(7);
    baseline->add_option("--rise-p-keep", b_rise_p)->default_val(0.5);
    baseline->add_option("--rise-seed", b_rise_seed)->default_val(0);
    baseline->add_option("--blur-stride", b_blur_stride)->default_val(4);
    baseline->add_option("--blur-sigma", b_blur_sigma)->default_val(3.0);
    baseline->add_option("--patch", b_patch)->default_val(4);
    baseline->add_option("--out", b_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    ml_set_threads(threads);

    if (collect->parsed()) {
        if (c_out.empty()) c_out = default_out("dataset");
        if (c_env != "beacon") {
            std::fprintf(stderr, "masklab: unknown environment '%s'\n", c_env.c_str());
            return kExitConfig;
        }
        if (c_policy != "analytic" && c_policy != "tiny-cnn") {
            std::fprintf(stderr, "masklab: unknown policy kind '%s'\n", c_policy.c_str());
            return kExitConfig;
        }
        ml_env_config env_cfg;
        ml_env_config_init(&env_cfg);
        env_cfg.width = c_grid;
        env_cfg.height = c_grid;
        env_cfg.num_actions = c_k;
        env_cfg.num_beacons = c_beacons;
        env_cfg.beacon_size = c_beacon_size;
        EnvHandle env;
        check(ml_env_create_beacon(&env_cfg, &env.env), "creating environment");

        PolicyHandle scripted;
        check(ml_policy_create_analytic(env.env, &scripted.p), "creating analytic expert");

        PolicyHandle expert;
        if (c_policy == "analytic") {
            check(ml_policy_create_analytic(env.env, &expert.p), "creating analytic expert");
        } else {
            DatasetHandle bootstrap;
            check(ml_dataset_collect(env.env, scripted.p, c_n, c_seed, &bootstrap.ds),
                  "collecting bootstrap demonstrations");
            ml_tiny_train_config tiny_cfg;
            ml_tiny_train_config_init(&tiny_cfg);
            tiny_cfg.max_epochs = c_tiny_epochs;
            tiny_cfg.seed = c_seed;
            check(ml_policy_train_tiny(bootstrap.ds, &tiny_cfg, &expert.p),
                  "training tiny-cnn expert");
        }

        DatasetHandle ds;
        check(ml_dataset_collect(env.env, expert.p, c_n, c_seed, &ds.ds),
              "collecting demonstrations");
        check(ml_dataset_save(ds.ds, c_out.c_str(), c_force ? 1 : 0), "saving dataset");
        if (c_policy == "tiny-cnn")
            check(ml_policy_save(expert.p, (fs::path(c_out) / "policy.vmp").string().c_str()),
                  "saving expert policy");

        write_echo(c_out, {{"env", c_env},
                           {"n", std::to_string(c_n)},
                           {"seed", std::to_string(c_seed)},
                           {"grid", std::to_string(c_grid)},
                           {"k", std::to_string(c_k)},
                           {"beacons", std::to_string(c_beacons)},
                           {"beacon_size", std::to_string(c_beacon_size)},
                           {"policy", c_policy},
                           {"out", c_out},
                           {"force", c_force ? "true" : "false"}});

        ml_dataset_info info;
        check(ml_dataset_stats(ds.ds, &info), "reading dataset stats");
        std::printf("collected %d demonstrations (K=%d, %dx%d) -> %s\n", info.count,
                    info.num_actions, info.width, info.height, c_out.c_str());
        std::printf("split: %d train / %d valid / %d test\n", info.n_train, info.n_valid,
                    info.n_test);
        return 0;
    }

    if (train->parsed()) {
        if (t_out.empty()) t_out = default_out("run");
        if (t_seeds.empty()) t_seeds.push_back(t_seed);
        DatasetHandle ds;
        check(ml_dataset_load(t_dataset.c_str(), &ds.ds), "loading dataset");
        PolicyHandle policy;
        check(ml_dataset_expert_policy(ds.ds, &policy.p), "restoring expert policy");
        ml_dataset_info info;
        check(ml_dataset_stats(ds.ds, &info), "reading dataset stats");

        std::map<std::string, std::string> echo = {
            {"dataset", t_dataset},         {"epochs", std::to_string(t_epochs)},
            {"batch", std::to_string(t_batch)}, {"lr", fmt(t_lr)},
            {"lambda_e", fmt(t_le)},        {"lambda_avg", fmt(t_lavg)},
            {"lambda_smooth", fmt(t_lsmooth)}, {"lambda_l2", fmt(t_l2)},
            {"channels", std::to_string(t_channels)}, {"out", t_out}};
        std::string seed_list;
        for (auto s : t_seeds) seed_list += (seed_list.empty() ? "" : ",") + std::to_string(s);
        echo["seeds"] = seed_list;
        write_echo(t_out, echo);

        for (std::uint64_t seed : t_seeds) {
            ExplainerHandle model;
            check(ml_explainer_create(info.num_actions, info.height, info.width, t_channels, seed,
                                      &model.e),
                  "creating explainer");
            ml_train_config cfg;
            ml_train_config_init(&cfg);
            cfg.learning_rate = static_cast<float>(t_lr);
            cfg.batch_size = t_batch;
            cfg.epochs = t_epochs;
            cfg.seed = seed;
            cfg.lambda_e = static_cast<float>(t_le);
            cfg.lambda_avg = static_cast<float>(t_lavg);
            cfg.lambda_smooth = static_cast<float>(t_lsmooth);
            cfg.lambda_l2 = static_cast<float>(t_l2);
            const std::string log_path =
                (fs::path(t_out) / ("train_log_seed" + std::to_string(seed) + ".csv")).string();
            const std::string ckpt_path =
                (fs::path(t_out) / ("checkpoint_seed" + std::to_string(seed) + ".vmc")).string();
            float best_valid = 0.0f;
            std::printf("training seed %llu (%d epochs, lr %g)...\n",
                        static_cast<unsigned long long>(seed), t_epochs, t_lr);
            check(ml_train(model.e, policy.p, ds.ds, &cfg, log_path.c_str(), ckpt_path.c_str(),
                           &best_valid),
                  "training");
            std::printf("seed %llu: best validation loss %.6f -> %s\n",
                        static_cast<unsigned long long>(seed), best_valid, ckpt_path.c_str());
        }
        return 0;
    }

    if (evaluate->parsed()) {
        if (e_out.empty()) e_out = default_out("eval");
        DatasetHandle ds;
        check(ml_dataset_load(e_dataset.c_str(), &ds.ds), "loading dataset");
        PolicyHandle policy;
        check(ml_dataset_expert_policy(ds.ds, &policy.p), "restoring expert policy");

        // a checkpoint argument naming a directory expands to every .vmc inside
        std::vector<std::string> checkpoint_files;
        for (const auto& entry : e_checkpoints) {
            if (fs::is_directory(entry)) {
                std::vector<std::string> found;
                for (const auto& file : fs::directory_iterator(entry))
                    if (file.path().extension() == ".vmc") found.push_back(file.path().string());
                std::sort(found.begin(), found.end());
                if (found.empty()) {
                    std::fprintf(stderr, "masklab: no .vmc checkpoints in '%s'\n", entry.c_str());
                    return kExitNotFound;
                }
                checkpoint_files.insert(checkpoint_files.end(), found.begin(), found.end());
            } else {
                checkpoint_files.push_back(entry);
            }
        }

        std::vector<ExplainerHandle> models(checkpoint_files.size());
        std::vector<const ml_explainer*> model_ptrs;
        std::vector<const char*> name_ptrs;
        for (std::size_t i = 0; i < checkpoint_files.size(); ++i) {
            check(ml_explainer_load(checkpoint_files[i].c_str(), &models[i].e),
                  "loading checkpoint '" + checkpoint_files[i] + "'");
            model_ptrs.push_back(models[i].e);
            name_ptrs.push_back(checkpoint_files[i].c_str());
        }

        std::map<std::string, std::string> echo = {
            {"dataset", e_dataset},
            {"per_pixel_steps", e_per_pixel ? "true" : "false"},
            {"baselines", e_baselines ? "true" : "false"},
            {"overlays", std::to_string(e_overlays)},
            {"scale", std::to_string(e_scale)},
            {"out", e_out}};
        std::string fraction_list;
        for (double f : e_fractions)
            fraction_list += (fraction_list.empty() ? "" : ",") + fmt(f);
        echo["fractions"] = fraction_list;
        std::string ckpt_list;
        for (const auto& c : checkpoint_files) ckpt_list += (ckpt_list.empty() ? "" : ",") + c;
        echo["checkpoints"] = ckpt_list;
        write_echo(e_out, echo);

        std::vector<const char*> echo_keys, echo_values;
        for (const auto& [k, v] : echo) {
            echo_keys.push_back(k.c_str());
            echo_values.push_back(v.c_str());
        }

        ml_eval_config cfg;
        ml_eval_config_init(&cfg);
        cfg.fractions = e_fractions.data();
        cfg.n_fractions = static_cast<int>(e_fractions.size());
        cfg.per_pixel_steps = e_per_pixel ? 1 : 0;
        cfg.with_baselines = e_baselines ? 1 : 0;
        cfg.n_overlays = e_overlays;
        cfg.overlay_scale = e_scale;
        cfg.cf_regions = e_cf_regions;
        cfg.cf_threshold = static_cast<float>(e_cf_threshold);
        cfg.rise_masks = e_rise_masks;
        cfg.rise_cell = e_rise_cell;
        cfg.rise_p_keep = static_cast<float>(e_rise_p);
        cfg.rise_seed = e_rise_seed;
        cfg.blur_stride = e_blur_stride;
        cfg.blur_sigma = static_cast<float>(e_blur_sigma);
        cfg.occlusion_patch = e_patch;
        cfg.echo_keys = echo_keys.data();
        cfg.echo_values = echo_values.data();
        cfg.n_echo = static_cast<int>(echo_keys.size());

        check(ml_evaluate(model_ptrs.data(), name_ptrs.data(),
                          static_cast<int>(model_ptrs.size()), policy.p, ds.ds, &cfg,
                          e_out.c_str()),
              "evaluating");
        std::printf("report written to %s\n", (fs::path(e_out) / "report.json").string().c_str());
        return 0;
    }

    if (explain->parsed()) {
        if (x_out.empty()) x_out = default_out("explain");
        DatasetHandle ds;
        check(ml_dataset_load(x_dataset.c_str(), &ds.ds), "loading dataset");
        ExplainerHandle model;
        check(ml_explainer_load(x_checkpoint.c_str(), &model.e), "loading checkpoint");
        write_echo(x_out, {{"dataset", x_dataset},
                           {"checkpoint", x_checkpoint},
                           {"index", std::to_string(x_index)},
                           {"scale", std::to_string(x_scale)},
                           {"out", x_out}});
        check(ml_emit_explanation(model.e, ds.ds, x_index, x_scale, x_out.c_str()),
              "emitting explanation");
        std::printf("overlays written to %s\n", x_out.c_str());
        return 0;
    }

    if (counterfactual->parsed()) {
        if (f_out.empty()) f_out = default_out("counterfactual");
        DatasetHandle ds;
        check(ml_dataset_load(f_dataset.c_str(), &ds.ds), "loading dataset");
        PolicyHandle policy;
        check(ml_dataset_expert_policy(ds.ds, &policy.p), "restoring expert policy");
        ExplainerHandle model;
        check(ml_explainer_load(f_checkpoint.c_str(), &model.e), "loading checkpoint");
        write_echo(f_out, {{"dataset", f_dataset},
                           {"checkpoint", f_checkpoint},
                           {"index", std::to_string(f_index)},
                           {"regions", std::to_string(f_regions)},
                           {"threshold", fmt(f_threshold)},
                           {"out", f_out}});
        const std::string json_path =
            (fs::path(f_out) / ("counterfactual_" + std::to_string(f_index) + ".json")).string();
        check(ml_counterfactual(model.e, policy.p, ds.ds, f_index,
                                static_cast<float>(f_threshold), f_regions, json_path.c_str()),
              "computing counterfactuals");
        std::printf("counterfactuals written to %s\n", json_path.c_str());
        return 0;
    }

    if (baseline->parsed()) {
        if (b_out.empty()) b_out = default_out("baseline");
        DatasetHandle ds;
        check(ml_dataset_load(b_dataset.c_str(), &ds.ds), "loading dataset");
        PolicyHandle policy;
        check(ml_dataset_expert_policy(ds.ds, &policy.p), "restoring expert policy");

        ml_baseline_config cfg;
        ml_baseline_config_init(&cfg);
        if (b_method == "rise") cfg.method = ML_BASELINE_RISE;
        else if (b_method == "blur") cfg.method = ML_BASELINE_BLUR;
        else if (b_method == "occlusion") cfg.method = ML_BASELINE_OCCLUSION;
        else if (b_method == "normdelta") cfg.method = ML_BASELINE_NORMALIZED_DELTA;
        else {
            std::fprintf(stderr, "masklab: unknown baseline method '%s'\n", b_method.c_str());
            return kExitConfig;
        }
        cfg.rise_masks = b_rise_masks;
        cfg.rise_cell = b_rise_cell;
        cfg.rise_p_keep = static_cast<float>(b_rise_p);
        cfg.rise_seed = b_rise_seed;
        cfg.blur_stride = b_blur_stride;
        cfg.blur_sigma = static_cast<float>(b_blur_sigma);
        cfg.occlusion_patch = b_patch;

        write_echo(b_out, {{"dataset", b_dataset},
                           {"index", std::to_string(b_index)},
                           {"method", b_method},
                           {"action", std::to_string(b_action)},
                           {"out", b_out}});
        const std::string prefix =
            (fs::path(b_out) / (b_method + "_" + std::to_string(b_index))).string();
        check(ml_baseline_saliency(policy.p, ds.ds, b_index, b_action, &cfg, prefix.c_str()),
              "computing baseline saliency");
        std::printf("saliency written to %s.vmt / %s.json\n", prefix.c_str(), prefix.c_str());
        return 0;
    }

    return kExitConfig;
}
