#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "common/rng.hpp"
#include "explainer/mask_ops.hpp"
#include "explainer/model.hpp"
#include "numeric/ops.hpp"
#include "oracles.hpp"
#include "worlds/beacon.hpp"

using namespace masklab;
using namespace masklab::explainer;
using namespace masklab::worlds;
using numeric::Tensor;

namespace {

BeaconConfig beacon_cfg() {
    BeaconConfig cfg;
    cfg.num_beacons = 2;
    return cfg;
}

ExplainerConfig model_cfg(int h = 28, int w = 28, int k = 4) {
    ExplainerConfig cfg;
    cfg.height = h;
    cfg.width = w;
    cfg.num_actions = k;
    return cfg;
}

}  // namespace

TEST_CASE("explain: shapes, range, determinism, 0.5 initialization") {
    ExplainerModel model(model_cfg());
    BeaconWorld world(beacon_cfg());
    BeaconState bs = world.generate(42, 0);

    Tensor masks = explain(model, bs.state);
    CHECK(masks.shape() == numeric::Shape{4, 28, 28});
    // zero final layer -> sigmoid(0) = 0.5 everywhere
    for (float v : masks.data()) CHECK(v == 0.5f);

    Tensor again = explain(model, bs.state);
    CHECK(again.data() == masks.data());

    // perturbed weights: outputs stay strictly inside (0,1)
    Rng rng(4);
    for (auto& [name, t] : model.params())
        for (auto& v : t.raw_data()) v += rng.uniform(-0.5f, 0.5f);
    Tensor out = explain(model, bs.state);
    for (float v : out.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }

    Tensor wrong = Tensor::zeros({1, 16, 16});
    CHECK_THROWS_AS(model.forward(wrong), Error);
    ExplainerConfig bad = model_cfg();
    bad.num_actions = 1;
    CHECK_THROWS_AS(ExplainerModel{bad}, Error);
}

TEST_CASE("split_masks") {
    SUBCASE("complement of all-ones is all zeros") {
        Tensor masks = Tensor::full({2, 2, 2}, 1.0f);
        SplitMasks sm = split_masks(masks, 0);
        for (float v : sm.complement.data()) CHECK(v == 0.0f);
    }

    SUBCASE("K=2: non-target equals the single inactive mask") {
        Tensor masks({2, 1, 2}, {0.3f, 0.6f, 0.8f, 0.1f});
        SplitMasks sm = split_masks(masks, 0);
        CHECK(sm.active.data() == std::vector<float>{0.3f, 0.6f});
        CHECK(sm.non_target.data() == std::vector<float>{0.8f, 0.1f});
    }

    SUBCASE("K=3: pixel-wise maximum of the inactive set") {
        Tensor masks({3, 1, 1}, {0.5f, 0.2f, 0.7f});
        SplitMasks sm = split_masks(masks, 0);
        CHECK(sm.non_target.item() == 0.7f);
    }

    SUBCASE("K<2 and bad action are rejected") {
        Tensor single({1, 2, 2}, {0.1f, 0.2f, 0.3f, 0.4f});
        CHECK_THROWS_AS(split_masks(single, 0), Error);
        Tensor pair = Tensor::full({2, 2, 2}, 0.5f);
        CHECK_THROWS_AS(split_masks(pair, 2), Error);
    }

    SUBCASE("property: non-target dominates every inactive mask and equals one of them") {
        Rng rng(77);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<float> data(4 * 3 * 3);
            for (auto& v : data) v = rng.uniform();
            Tensor masks({4, 3, 3}, data);
            const int action = trial % 4;
            SplitMasks sm = split_masks(masks, action);
            for (int px = 0; px < 9; ++px) {
                const float n = sm.non_target.data()[static_cast<std::size_t>(px)];
                bool equals_one = false;
                for (int k = 0; k < 4; ++k) {
                    if (k == action) continue;
                    const float mk = masks.data()[static_cast<std::size_t>(k * 9 + px)];
                    CHECK(n >= mk);
                    if (n == mk) equals_one = true;
                }
                CHECK(equals_one);
            }
        }
    }
}

TEST_CASE("overlay") {
    ReferenceValue ref = ReferenceValue::constant(0.1f);
    Tensor state({1, 2, 2}, {0.8f, 0.4f, 0.2f, 0.6f});

    SUBCASE("all-ones mask returns the state, all-zeros returns the reference") {
        Tensor keep = overlay(state, Tensor::full({2, 2}, 1.0f), ref);
        CHECK(keep.data() == state.data());
        Tensor drop = overlay(state, Tensor::zeros({2, 2}), ref);
        for (float v : drop.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-6));
    }

    SUBCASE("half mask blends: 0.8*0.5 + 0.1*0.5 = 0.45") {
        Tensor half({2, 2}, {0.5f, 1.0f, 1.0f, 1.0f});
        Tensor out = overlay(state, half, ref);
        CHECK(out.data()[0] == doctest::Approx(0.45).epsilon(1e-6));
        CHECK(out.data()[1] == 0.4f);
    }

    SUBCASE("mask outside [0,1] violates the contract") {
        Tensor bad({2, 2}, {1.2f, 0.0f, 0.0f, 0.0f});
        CHECK_THROWS_AS(overlay(state, bad, ref), Error);
    }

    SUBCASE("property: overlay(s,m,r) + overlay(s,1-m,r) == s + r elementwise") {
        Rng rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<float> sdata(9), mdata(9);
            for (auto& v : sdata) v = rng.uniform();
            for (auto& v : mdata) v = rng.uniform();
            Tensor s({1, 3, 3}, sdata);
            Tensor m({3, 3}, mdata);
            Tensor a = overlay(s, m, ref);
            Tensor b = overlay(s, numeric::sub(1.0f, m), ref);
            for (int i = 0; i < 9; ++i) {
                const float left = a.data()[static_cast<std::size_t>(i)] +
                                   b.data()[static_cast<std::size_t>(i)];
                const float right = sdata[static_cast<std::size_t>(i)] + 0.1f;
                CHECK(left == doctest::Approx(right).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("masked_forward against the analytic policy") {
    BeaconConfig cfg = beacon_cfg();
    BeaconWorld world(cfg);
    BeaconPolicy policy(cfg);
    ReferenceValue ref = reference_value_for(cfg);
    BeaconState bs = world.generate(13, 2);
    const int k = cfg.num_actions;
    const int hw = cfg.height * cfg.width;

    auto probs_of = [&](const Tensor& state) { return action_probs(policy, state); };
    auto original = probs_of(bs.state.pixels);
    const int action = argmax_action(original);

    SUBCASE("all-ones target mask reproduces the unmasked distribution") {
        std::vector<float> mdata(static_cast<std::size_t>(k) * hw, 0.0f);
        for (int i = 0; i < hw; ++i) mdata[static_cast<std::size_t>(action * hw + i)] = 1.0f;
        Tensor masks({k, cfg.height, cfg.width}, mdata);
        MaskedForward mf = masked_forward(policy, bs.state.pixels, masks, action, ref);
        for (int i = 0; i < k; ++i)
            CHECK(mf.p.data()[static_cast<std::size_t>(i)] ==
                  doctest::Approx(original[static_cast<std::size_t>(i)]).epsilon(1e-6));
    }

    SUBCASE("ground-truth beacon indicator keeps the action; complement is uniform") {
        std::vector<float> mdata(static_cast<std::size_t>(k) * hw, 0.0f);
        for (const auto& region : bs.beacons)
            for (int p : region.pixels) mdata[static_cast<std::size_t>(action * hw + p)] = 1.0f;
        Tensor masks({k, cfg.height, cfg.width}, mdata);
        MaskedForward mf = masked_forward(policy, bs.state.pixels, masks, action, ref);
        CHECK(argmax_action(mf.p.data()) == action);
        // complement hides every beacon; background equals the reference
        for (float v : mf.p_tilde.data())
            CHECK(v == doctest::Approx(1.0 / k).epsilon(1e-3));
    }
}

TEST_CASE("gradient flows from the policy output back into the masks") {
    // 8x8, K=3 beacon world instance
    BeaconConfig cfg;
    cfg.width = 8;
    cfg.height = 8;
    cfg.num_actions = 3;
    cfg.num_beacons = 1;
    cfg.beacon_size = 2;
    BeaconWorld world(cfg);
    BeaconPolicy policy(cfg);
    ReferenceValue ref = reference_value_for(cfg);
    BeaconState bs = world.generate(7, 0);
    const int action = bs.beacons[0].action;

    std::vector<float> mdata(3 * 64, 0.5f);
    Tensor masks({3, 8, 8}, mdata, true);
    {
        numeric::GradTape tape;
        MaskedForward mf = masked_forward(policy, bs.state.pixels, masks, action, ref);
        Tensor loss = numeric::mul(numeric::log_clamped(numeric::index_row(mf.p, action)), -1.0f);
        tape.backward(loss);
    }
    REQUIRE(masks.has_grad());
    int nonzero = 0;
    for (float g : masks.grad())
        if (g != 0.0f) ++nonzero;
    CHECK(nonzero > 0);

    // finite-difference cross-check on the active mask's beacon pixels
    auto loss_for = [&](const std::vector<float>& mvec) {
        Tensor m({3, 8, 8}, mvec);
        MaskedForward mf = masked_forward(policy, bs.state.pixels, m, action, ref);
        return -std::log(mf.p.data()[static_cast<std::size_t>(action)]);
    };
    auto fd = oracles::central_diff_grad(loss_for, mdata);
    for (int p : bs.beacons[0].pixels) {
        const std::size_t idx = static_cast<std::size_t>(action * 64 + p);
        CHECK(oracles::grad_close(masks.grad()[idx], fd[idx], 1e-2f, 1e-3f));
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ExplainerConfig cfg = model_cfg(12, 12, 3);
    ExplainerModel model(cfg);
    Rng rng(19);
    for (auto& [name, t] : model.params())
        for (auto& v : t.raw_data()) v = rng.uniform(-0.3f, 0.3f);

    auto path = std::filesystem::temp_directory_path() / "masklab_ckpt_test.vmc";
    model.save(path.string(), 17);

    ExplainerModel back = ExplainerModel::load(path.string());
    CHECK(back.config().num_actions == 3);
    CHECK(back.config().height == 12);
    CHECK(back.config().channels == cfg.channels);
    CHECK(back.loaded_epoch() == 17);
    for (const auto& [name, t] : model.params())
        CHECK(back.params().get(name).data() == t.data());

    // identical bytes when saved twice
    auto path2 = std::filesystem::temp_directory_path() / "masklab_ckpt_test2.vmc";
    back.save(path2.string(), 17);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);

    CHECK_THROWS_AS(ExplainerModel::load("/nonexistent/checkpoint.vmc"), Error);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}
