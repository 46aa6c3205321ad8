#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "masklab/masklab.h"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("masklab_capi_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("error reporting and invalid configs") {
    ml_env_config cfg;
    ml_env_config_init(&cfg);
    CHECK(cfg.width == 28);
    CHECK(cfg.num_actions == 4);

    cfg.beacon_size = 100;  // cannot fit a cell
    ml_env* env = nullptr;
    CHECK(ml_env_create_beacon(&cfg, &env) == ML_ERR_INVALID);
    CHECK(std::strlen(ml_last_error()) > 0);
    CHECK(env == nullptr);

    CHECK(ml_env_create_beacon(nullptr, &env) == ML_ERR_INVALID);

    ml_explainer* missing = nullptr;
    CHECK(ml_explainer_load("/no/such/checkpoint.vmc", &missing) == ML_ERR_NOT_FOUND);

    ml_dataset* ds = nullptr;
    CHECK(ml_dataset_load("/no/such/dataset", &ds) == ML_ERR_NOT_FOUND);
}

TEST_CASE("full pipeline through the C API") {
    ml_env_config env_cfg;
    ml_env_config_init(&env_cfg);
    ml_env* env = nullptr;
    REQUIRE(ml_env_create_beacon(&env_cfg, &env) == ML_OK);

    ml_policy* policy = nullptr;
    REQUIRE(ml_policy_create_analytic(env, &policy) == ML_OK);
    CHECK(ml_policy_num_actions(policy) == 4);

    ml_dataset* ds = nullptr;
    REQUIRE(ml_dataset_collect(env, policy, 40, 42, &ds) == ML_OK);

    ml_dataset_info info;
    REQUIRE(ml_dataset_stats(ds, &info) == ML_OK);
    CHECK(info.count == 40);
    CHECK(info.n_train == 32);
    CHECK(info.n_valid == 4);
    CHECK(info.n_test == 4);
    CHECK(info.width == 28);

    // dataset save/load round trip; overwrite requires force
    auto dir = temp_dir("ds");
    REQUIRE(ml_dataset_save(ds, dir.string().c_str(), 0) == ML_OK);
    CHECK(ml_dataset_save(ds, dir.string().c_str(), 0) == ML_ERR_IO);
    CHECK(ml_dataset_save(ds, dir.string().c_str(), 1) == ML_OK);
    ml_dataset* loaded = nullptr;
    REQUIRE(ml_dataset_load(dir.string().c_str(), &loaded) == ML_OK);
    ml_dataset_info info2;
    REQUIRE(ml_dataset_stats(loaded, &info2) == ML_OK);
    CHECK(info2.count == info.count);
    CHECK(info2.seed == 42);

    // expert policy reconstructed from the manifest
    ml_policy* expert = nullptr;
    REQUIRE(ml_dataset_expert_policy(loaded, &expert) == ML_OK);
    CHECK(ml_policy_num_actions(expert) == 4);

    // explainer create + mask buffer
    ml_explainer* model = nullptr;
    REQUIRE(ml_explainer_create(4, 28, 28, 4, 7, &model) == ML_OK);
    std::vector<float> state(28 * 28, 0.1f);
    std::vector<float> masks(4 * 28 * 28, -1.0f);
    REQUIRE(ml_explainer_masks(model, state.data(), state.size(), masks.data(), masks.size()) ==
            ML_OK);
    for (float v : masks) CHECK(v == 0.5f);  // fresh model
    CHECK(ml_explainer_masks(model, state.data(), 10, masks.data(), masks.size()) ==
          ML_ERR_INVALID);

    // short training run writes a loadable checkpoint
    ml_train_config tc;
    ml_train_config_init(&tc);
    CHECK(tc.batch_size == 16);
    CHECK(tc.lambda_avg == 0.3f);
    tc.epochs = 1;
    tc.learning_rate = 1e-3f;
    auto ckpt = temp_dir("ckpt").string() + ".vmc";
    float best = -1.0f;
    REQUIRE(ml_train(model, expert, loaded, &tc, nullptr, ckpt.c_str(), &best) == ML_OK);
    CHECK(best > 0.0f);
    ml_explainer* reloaded = nullptr;
    REQUIRE(ml_explainer_load(ckpt.c_str(), &reloaded) == ML_OK);

    // evaluation emits the report files
    auto eval_dir = temp_dir("eval");
    ml_eval_config ec;
    ml_eval_config_init(&ec);
    const double fractions[] = {1.0};
    ec.fractions = fractions;
    ec.n_fractions = 1;
    ec.n_overlays = 1;
    ec.cf_examples = 1;
    const ml_explainer* models[] = {reloaded};
    const char* names[] = {"ck"};
    REQUIRE(ml_evaluate(models, names, 1, expert, loaded, &ec, eval_dir.string().c_str()) ==
            ML_OK);
    CHECK(fs::exists(eval_dir / "report.json"));
    CHECK(fs::exists(eval_dir / "tables.csv"));

    // explanation + counterfactual artifacts
    auto xdir = temp_dir("explain");
    REQUIRE(ml_emit_explanation(reloaded, loaded, 7, 2, xdir.string().c_str()) == ML_OK);
    CHECK(fs::exists(xdir / "7_action0.ppm"));
    CHECK(fs::exists(xdir / "7_action3.ppm"));
    CHECK(ml_emit_explanation(reloaded, loaded, 9999, 2, xdir.string().c_str()) ==
          ML_ERR_INVALID);

    auto cf_json = (temp_dir("cf").string() + ".json");
    REQUIRE(ml_counterfactual(reloaded, expert, loaded, 3, 0.5f, 2, cf_json.c_str()) == ML_OK);
    {
        std::ifstream is(cf_json);
        std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        CHECK(text.find("\"original_action\"") != std::string::npos);
    }

    // baseline saliency artifacts
    ml_baseline_config bc;
    ml_baseline_config_init(&bc);
    bc.method = ML_BASELINE_OCCLUSION;
    auto prefix = temp_dir("bl").string();
    REQUIRE(ml_baseline_saliency(expert, loaded, 2, -1, &bc, prefix.c_str()) == ML_OK);
    CHECK(fs::exists(prefix + ".vmt"));
    CHECK(fs::exists(prefix + ".json"));

    fs::remove_all(dir);
    fs::remove_all(eval_dir);
    fs::remove_all(xdir);
    fs::remove(cf_json);
    fs::remove(prefix + ".vmt");
    fs::remove(prefix + ".json");
    fs::remove(ckpt);
    ml_explainer_destroy(model);
    ml_explainer_destroy(reloaded);
    ml_policy_destroy(policy);
    ml_policy_destroy(expert);
    ml_dataset_destroy(ds);
    ml_dataset_destroy(loaded);
    ml_env_destroy(env);
}

TEST_CASE("tiny-cnn expert through the C API") {
    ml_env_config env_cfg;
    ml_env_config_init(&env_cfg);
    env_cfg.num_beacons = 1;  // positional task the small net learns quickly
    ml_env* env = nullptr;
    REQUIRE(ml_env_create_beacon(&env_cfg, &env) == ML_OK);
    ml_policy* scripted = nullptr;
    REQUIRE(ml_policy_create_analytic(env, &scripted) == ML_OK);
    ml_dataset* ds = nullptr;
    REQUIRE(ml_dataset_collect(env, scripted, 200, 11, &ds) == ML_OK);

    ml_tiny_train_config tc;
    ml_tiny_train_config_init(&tc);
    tc.seed = 5;
    ml_policy* tiny = nullptr;
    REQUIRE(ml_policy_train_tiny(ds, &tc, &tiny) == ML_OK);
    CHECK(ml_policy_num_actions(tiny) == 4);

    // save/load round trip
    auto path = (fs::temp_directory_path() / "masklab_capi_policy.vmp").string();
    REQUIRE(ml_policy_save(tiny, path.c_str()) == ML_OK);
    ml_policy* back = nullptr;
    REQUIRE(ml_policy_load(path.c_str(), &back) == ML_OK);
    CHECK(ml_policy_num_actions(back) == 4);

    fs::remove(path);
    ml_policy_destroy(scripted);
    ml_policy_destroy(tiny);
    ml_policy_destroy(back);
    ml_dataset_destroy(ds);
    ml_env_destroy(env);
}
