#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "common/rng.hpp"
#include "evalkit/evaluate.hpp"
#include "evalkit/report.hpp"
#include "numeric/ops.hpp"
#include "oracles.hpp"
#include "worlds/beacon.hpp"
#include "worlds/dataset.hpp"

using namespace masklab;
using namespace masklab::evalkit;
using namespace masklab::worlds;
using numeric::Tensor;

namespace {

struct ConstantPolicy : Policy {
    std::vector<float> probs;
    explicit ConstantPolicy(std::vector<float> p) : probs(std::move(p)) {}
    int num_actions() const override { return static_cast<int>(probs.size()); }
    Tensor forward(const Tensor&) const override {
        return Tensor({static_cast<int>(probs.size())}, probs);
    }
    std::string kind() const override { return "constant"; }
};

struct Rig {
    BeaconConfig cfg;
    BeaconWorld world;
    BeaconPolicy policy;
    ReferenceValue ref;

    Rig() : cfg(make_cfg()), world(cfg), policy(cfg), ref(reference_value_for(cfg)) {}

    static BeaconConfig make_cfg() {
        BeaconConfig cfg;
        cfg.num_beacons = 2;
        return cfg;
    }

    // [H,W] indicator of the beacon driving `action` (zeros if none)
    Tensor gt_mask(const BeaconState& bs, int action) const {
        std::vector<float> data(static_cast<std::size_t>(cfg.height) * cfg.width, 0.0f);
        for (const auto& region : bs.beacons)
            if (region.action == action)
                for (int p : region.pixels) data[static_cast<std::size_t>(p)] = 1.0f;
        return Tensor({cfg.height, cfg.width}, std::move(data));
    }
};

// masks quantized to k/1024 so that f32 squaring is exact and order-preserving
Tensor quantized_random_mask(int h, int w, Rng& rng) {
    std::vector<float> data(static_cast<std::size_t>(h) * w);
    for (auto& v : data) v = static_cast<float>(rng.uniform_int(0, 1023)) / 1024.0f;
    return Tensor({h, w}, std::move(data));
}

}  // namespace

TEST_CASE("fidelity metrics: hand-computed K=2 example") {
    // (label -> pred): (0->0),(0->1),(1->1),(1->1)
    std::vector<std::pair<int, int>> pairs = {{0, 0}, {0, 1}, {1, 1}, {1, 1}};
    FidelityReport report = metrics_from_pairs(pairs, 2);
    CHECK(report.accuracy == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(report.macro_precision == doctest::Approx(0.833333333).epsilon(1e-6));
    CHECK(report.macro_recall == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(report.macro_f1 == doctest::Approx(0.789473684).epsilon(1e-6));
}

TEST_CASE("fidelity metrics: empty class contributes zero") {
    // K=3 but class 2 never appears as label or prediction
    std::vector<std::pair<int, int>> pairs = {{0, 0}, {1, 1}, {0, 0}};
    FidelityReport report = metrics_from_pairs(pairs, 3);
    CHECK(report.accuracy == doctest::Approx(1.0));
    CHECK(report.macro_precision == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(report.macro_recall == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("fidelity metrics match brute-force recomputation on random tables") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const int k = rng.uniform_int(2, 6);
        const int n = rng.uniform_int(1, 60);
        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            pairs.emplace_back(rng.uniform_int(0, k - 1), rng.uniform_int(0, k - 1));
        FidelityReport fast = metrics_from_pairs(pairs, k);
        oracles::MacroMetrics slow = oracles::brute_force_metrics(pairs, k);
        CHECK(fast.accuracy == slow.accuracy);
        CHECK(fast.macro_precision == slow.precision);
        CHECK(fast.macro_recall == slow.recall);
        CHECK(fast.macro_f1 == slow.f1);
    }
}

TEST_CASE("fidelity with the identity provider is perfect") {
    Rig rig;
    Dataset ds = collect_demonstrations(rig.policy, rig.world, 40, 42);
    MaskProvider all_ones = [&](const Tensor& state, int) {
        return Tensor::full({state.dim(1), state.dim(2)}, 1.0f);
    };
    FidelityResult result = fidelity(rig.policy, all_ones, ds, rig.ref);
    CHECK(result.report.accuracy == doctest::Approx(1.0));
    CHECK(result.pairs.size() == ds.test_idx.size());
    // confusion counts sum to |test| per action
    for (int a = 0; a < 4; ++a) {
        const std::size_t ia = static_cast<std::size_t>(a);
        CHECK(result.counts.tp[ia] + result.counts.tn[ia] + result.counts.fp[ia] +
                  result.counts.fn[ia] ==
              static_cast<std::int64_t>(ds.test_idx.size()));
    }
}

TEST_CASE("insertion/deletion curves") {
    Rig rig;

    SUBCASE("constant policy gives AUC equal to the constant") {
        ConstantPolicy constant({0.6f, 0.3f, 0.1f});
        Tensor state = Tensor::full({1, 8, 8}, 0.5f);
        Rng rng(5);
        Tensor mask = quantized_random_mask(8, 8, rng);
        InsDelConfig cfg;
        ReferenceValue ref = ReferenceValue::constant(0.0f);
        CHECK(insertion_curve(constant, state, mask, 0, ref, cfg).auc ==
              doctest::Approx(0.6).epsilon(1e-6));
        CHECK(deletion_curve(constant, state, mask, 1, ref, cfg).auc ==
              doctest::Approx(0.3).epsilon(1e-6));
    }

    SUBCASE("ground-truth mask: insertion high, deletion low, random mask worse") {
        BeaconState bs = rig.world.generate(7, 3);
        auto probs = action_probs(rig.policy, bs.state.pixels);
        const int action = argmax_action(probs);
        const float pa = probs[static_cast<std::size_t>(action)];
        Tensor gt = rig.gt_mask(bs, action);
        InsDelConfig cfg;
        cfg.step = 1;  // exact per-pixel stepping

        Curve ins = insertion_curve(rig.policy, bs.state.pixels, gt, action, rig.ref, cfg);
        Curve del = deletion_curve(rig.policy, bs.state.pixels, gt, action, rig.ref, cfg);
        CHECK(ins.auc >= 0.9 * pa);
        CHECK(del.auc <= 0.25 + 0.05);

        // endpoints: insertion ends at p_a(s), deletion starts at p_a(s)
        CHECK(ins.probs.back() == pa);
        CHECK(del.probs.front() == pa);
        CHECK(ins.probs.front() == del.probs.back());  // both are the reference-image extreme

        Rng rng(11);
        Tensor random_mask = quantized_random_mask(28, 28, rng);
        Curve rins = insertion_curve(rig.policy, bs.state.pixels, random_mask, action, rig.ref, cfg);
        Curve rdel = deletion_curve(rig.policy, bs.state.pixels, random_mask, action, rig.ref, cfg);
        CHECK(rins.auc < ins.auc);
        CHECK(rdel.auc > del.auc);
    }

    SUBCASE("ascending insertion of the ground-truth mask scores strictly lower") {
        BeaconState bs = rig.world.generate(9, 6);
        const int action = argmax_action(action_probs(rig.policy, bs.state.pixels));
        Tensor gt = rig.gt_mask(bs, action);
        // flipping the mask reverses the order: background first
        Tensor flipped = numeric::sub(1.0f, gt);
        InsDelConfig cfg;
        cfg.step = 1;
        Curve descending = insertion_curve(rig.policy, bs.state.pixels, gt, action, rig.ref, cfg);
        Curve ascending =
            insertion_curve(rig.policy, bs.state.pixels, flipped, action, rig.ref, cfg);
        CHECK(ascending.auc < descending.auc);
        Curve ddesc = deletion_curve(rig.policy, bs.state.pixels, gt, action, rig.ref, cfg);
        Curve dasc = deletion_curve(rig.policy, bs.state.pixels, flipped, action, rig.ref, cfg);
        CHECK(dasc.auc > ddesc.auc);
    }

    SUBCASE("AUC invariant under squaring the mask (ordering metric)") {
        BeaconState bs = rig.world.generate(21, 2);
        const int action = argmax_action(action_probs(rig.policy, bs.state.pixels));
        Rng rng(31);
        for (int trial = 0; trial < 5; ++trial) {
            Tensor mask = quantized_random_mask(28, 28, rng);
            Tensor squared = numeric::mul(mask, mask);
            InsDelConfig cfg;
            Curve a = insertion_curve(rig.policy, bs.state.pixels, mask, action, rig.ref, cfg);
            Curve b = insertion_curve(rig.policy, bs.state.pixels, squared, action, rig.ref, cfg);
            CHECK(a.auc == b.auc);
            Curve da = deletion_curve(rig.policy, bs.state.pixels, mask, action, rig.ref, cfg);
            Curve db = deletion_curve(rig.policy, bs.state.pixels, squared, action, rig.ref, cfg);
            CHECK(da.auc == db.auc);
        }
    }

    SUBCASE("fractions limit the number of steps; AUC stays in [0,1]") {
        BeaconState bs = rig.world.generate(3, 8);
        const int action = 0;
        Rng rng(41);
        Tensor mask = quantized_random_mask(28, 28, rng);
        for (double fraction : {0.25, 0.5, 1.0}) {
            InsDelConfig cfg;
            cfg.fraction = fraction;
            cfg.step = 1;
            Curve c = insertion_curve(rig.policy, bs.state.pixels, mask, action, rig.ref, cfg);
            CHECK(static_cast<int>(c.probs.size()) ==
                  static_cast<int>(std::floor(fraction * 28 * 28)) + 1);
            CHECK(c.auc >= 0.0);
            CHECK(c.auc <= 1.0);
        }
        InsDelConfig bad;
        bad.fraction = 0.0;
        CHECK_THROWS_AS(insertion_curve(rig.policy, bs.state.pixels, mask, action, rig.ref, bad),
                        Error);
    }

    SUBCASE("tie-break is row-major") {
        Tensor mask({2, 2}, {0.5f, 0.9f, 0.5f, 0.1f});
        auto order = saliency_order(mask);
        CHECK(order == std::vector<int>{1, 0, 2, 3});
    }
}

TEST_CASE("counterfactual") {
    Rig rig;

    SUBCASE("removing the driving beacon flips the action; background does not") {
        int flips = 0, background_flips = 0, total = 0;
        for (int i = 0; i < 20; ++i) {
            BeaconState bs = rig.world.generate(55, i);
            const int action = argmax_action(action_probs(rig.policy, bs.state.pixels));
            Tensor gt = rig.gt_mask(bs, action);
            CfConfig cfg;
            auto records =
                counterfactual_from_mask(rig.policy, bs.state.pixels, gt, action, rig.ref, cfg);
            REQUIRE(!records.empty());
            ++total;
            if (records.front().changed) ++flips;

            // a pure background region leaves the action unchanged
            std::vector<float> bg(28 * 28, 0.0f);
            std::set<int> beacon_px;
            for (const auto& region : bs.beacons)
                beacon_px.insert(region.pixels.begin(), region.pixels.end());
            int placed = 0;
            for (int p = 0; p < 28 * 28 && placed < 16; ++p) {
                if (beacon_px.count(p)) continue;
                bg[static_cast<std::size_t>(p)] = 1.0f;
                ++placed;
            }
            auto bg_records = counterfactual_from_mask(rig.policy, bs.state.pixels,
                                                       Tensor({28, 28}, bg), action, rig.ref, cfg);
            REQUIRE(!bg_records.empty());
            if (bg_records.front().changed) ++background_flips;
        }
        CHECK(flips == total);
        CHECK(background_flips == 0);
    }

    SUBCASE("threshold 1.0 keeps at most the argmax pixel's component") {
        Tensor mask({3, 3}, {0.1f, 0.9f, 0.1f, 0.1f, 0.1f, 0.1f, 0.1f, 0.1f, 0.9f});
        ConstantPolicy constant({0.5f, 0.5f});
        CfConfig cfg;
        cfg.threshold = 1.0f;
        Tensor state = Tensor::full({1, 3, 3}, 0.2f);
        auto records = counterfactual_from_mask(constant, state, mask, 0,
                                                ReferenceValue::constant(0.0f), cfg);
        REQUIRE(records.size() == 2);  // two isolated max pixels, both rank
        CHECK(records[0].pixels.size() == 1);
        CHECK(records[1].pixels.size() == 1);
    }

    SUBCASE("all-zero mask yields no regions") {
        ConstantPolicy constant({0.5f, 0.5f});
        Tensor state = Tensor::full({1, 3, 3}, 0.2f);
        CfConfig cfg;
        CHECK(counterfactual_from_mask(constant, state, Tensor::zeros({3, 3}), 0,
                                       ReferenceValue::constant(0.0f), cfg)
                  .empty());
    }

    SUBCASE("modified state differs exactly on the region pixels") {
        BeaconState bs = rig.world.generate(8, 0);
        const int action = argmax_action(action_probs(rig.policy, bs.state.pixels));
        Tensor masks3d = Tensor::zeros({4, 28, 28});
        for (const auto& region : bs.beacons)
            if (region.action == action)
                for (int p : region.pixels)
                    masks3d.raw_data()[static_cast<std::size_t>(action * 28 * 28 + p)] = 1.0f;
        CfConfig cfg;
        auto records = counterfactual(rig.policy, bs.state.pixels, masks3d, action, rig.ref, cfg);
        REQUIRE(!records.empty());
        std::set<int> expected;
        for (const auto& region : bs.beacons)
            if (region.action == action) expected.insert(region.pixels.begin(), region.pixels.end());
        std::set<int> got(records[0].pixels.begin(), records[0].pixels.end());
        CHECK(got == expected);

        // modified state differs from the original exactly on the region pixels
        const auto& original = bs.state.pixels.data();
        const auto& modified = records[0].modified_state.data();
        for (int p = 0; p < 28 * 28; ++p) {
            const std::size_t sp = static_cast<std::size_t>(p);
            if (got.count(p)) {
                CHECK(modified[sp] == 0.1f);
            } else {
                CHECK(modified[sp] == original[sp]);
            }
        }
    }
}

TEST_CASE("region importance") {
    SUBCASE("single region covering all nonzero mass gets 100%") {
        std::vector<float> data(100, 0.0f);
        std::vector<int> region;
        for (int p = 10; p < 20; ++p) {
            data[static_cast<std::size_t>(p)] = 0.8f;
            region.push_back(p);
        }
        auto shares = region_importance(Tensor({10, 10}, data), {region});
        REQUIRE(shares.size() == 1);
        CHECK(shares[0].second == doctest::Approx(1.0));
    }

    SUBCASE("two equal regions split 50/50") {
        std::vector<float> data(100, 0.0f);
        std::vector<int> a{3, 4}, b{60, 61};
        for (int p : a) data[static_cast<std::size_t>(p)] = 0.7f;
        for (int p : b) data[static_cast<std::size_t>(p)] = 0.7f;
        auto shares = region_importance(Tensor({10, 10}, data), {a, b});
        REQUIRE(shares.size() == 2);
        CHECK(shares[0].second == doctest::Approx(0.5));
        CHECK(shares[1].second == doctest::Approx(0.5));
    }

    SUBCASE("region below the 0.05 share threshold is excluded") {
        std::vector<float> data(100, 0.0f);
        data[0] = 0.04f * 10.0f;  // 4% of the post-threshold mass
        data[50] = 0.96f * 10.0f;
        auto shares = region_importance(Tensor({10, 10}, data), {{0}, {50}});
        REQUIRE(shares.size() == 1);
        CHECK(shares[0].first == 1);
        CHECK(shares[0].second == doctest::Approx(0.96).epsilon(1e-6));
    }

    SUBCASE("all-zero mask gives an empty result") {
        CHECK(region_importance(Tensor::zeros({4, 4}), {{0, 1}}).empty());
    }
}

TEST_CASE("ppm rendering") {
    Tensor state({1, 1, 2}, {0.0f, 1.0f});
    Tensor mask({1, 2}, {0.0f, 0.5f});
    auto rgb = render_overlay(state, mask, 1);
    REQUIRE(rgb.size() == 6);
    CHECK(rgb[0] == 0);  // black pixel, no heat
    CHECK(rgb[1] == 0);
    // white pixel with alpha 0.3 of red heat: r = 255, g = b = 255*0.7
    CHECK(rgb[3] == 255);
    CHECK(rgb[4] == 179);

    auto path = std::filesystem::temp_directory_path() / "masklab_ppm_test.ppm";
    write_ppm(path.string(), rgb, 2, 1);
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(bytes.substr(0, 9) == "P6\n2 1\n25");
    CHECK(bytes.size() == 11 + 6);
    std::filesystem::remove(path);
}

TEST_CASE("evaluate writes deterministic reports") {
    Rig rig;
    Dataset ds = collect_demonstrations(rig.policy, rig.world, 30, 13);
    explainer::ExplainerConfig mc;
    mc.height = 28;
    mc.width = 28;
    mc.num_actions = 4;
    mc.channels = 4;
    explainer::ExplainerModel model(mc);

    EvalConfig config;
    config.fractions = {0.5, 1.0};
    config.n_overlays = 1;
    config.cf_examples = 2;
    config.config_echo = {{"dataset", "unit-test"}};

    auto run = [&](const std::string& tag) {
        auto dir = std::filesystem::temp_directory_path() / ("masklab_eval_" + tag);
        std::filesystem::remove_all(dir);
        evaluate({&model}, {"ck0"}, rig.policy, ds, config, dir.string());
        std::ifstream is(dir / "report.json", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        return std::make_pair(dir, bytes);
    };
    auto [dir_a, report_a] = run("a");
    auto [dir_b, report_b] = run("b");
    CHECK(report_a == report_b);
    CHECK(report_a.find("\"schema_version\": 1") != std::string::npos);
    CHECK(report_a.find("\"explainer\"") != std::string::npos);
    CHECK(std::filesystem::exists(dir_a / "tables.csv"));

    // overlays exist for every action of the first test sample
    const int idx = ds.test_idx[0];
    char name[64];
    std::snprintf(name, sizeof(name), "%04d_action0.ppm", idx);
    CHECK(std::filesystem::exists(dir_a / "overlays" / name));

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}
