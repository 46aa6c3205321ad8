#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::worlds {

// Synthetic environment: dark background with bright square beacons, each
// placed inside the grid cell assigned to one action. Ground-truth saliency
// is the beacon pixel set, which makes explainer quality directly checkable.
struct BeaconConfig {
    int width = 28;
    int height = 28;
    int num_actions = 4;
    int num_beacons = 2;
    int beacon_size = 6;
    float background = 0.1f;
    float intensity_min = 0.8f;
    float intensity_max = 0.95f;
    // Soft brightness gate of the analytic policy: sigmoid(sharpness*(v-0.5)).
    // Sharp enough that a resting background pixel contributes < 1e-6 to any
    // logit, yet smooth enough to carry gradient through overlays.
    float gate_sharpness = 25.0f;
    float gain = 10.0f;
    float discount = 0.99f;  // MDP metadata; nothing downstream consumes it
};

struct BeaconRegion {
    int action = 0;
    float intensity = 0.0f;
    std::vector<int> pixels;  // row-major indices into the H*W plane
};

struct BeaconState {
    VisualState state;                  // [1,H,W]
    std::vector<BeaconRegion> beacons;  // ground-truth salient regions
};

class BeaconWorld {
public:
    explicit BeaconWorld(BeaconConfig config);

    const BeaconConfig& config() const { return config_; }
    float reference_intensity() const { return config_.background; }

    // Deterministic per (seed, index); states for different indices are
    // independent streams, so generation parallelizes without order effects.
    BeaconState generate(std::uint64_t seed, std::int64_t index) const;

    struct Cell {
        int r0, r1, c0, c1;
    };
    Cell action_cell(int action) const;
    int cell_grid() const { return cell_grid_; }

private:
    BeaconConfig config_;
    int cell_grid_;
};

// Analytic expert: logit_k = gain * mean over cell k of v*gate(v), softmax'd.
// Differentiable through the numeric ops, with no trainable parameters.
class BeaconPolicy : public Policy {
public:
    explicit BeaconPolicy(BeaconConfig config);

    int num_actions() const override { return config_.num_actions; }
    numeric::Tensor forward(const numeric::Tensor& state) const override;
    std::string kind() const override { return "analytic-beacon"; }
    const BeaconConfig& config() const { return config_; }

private:
    BeaconConfig config_;
    BeaconWorld world_;
};

ReferenceValue reference_value_for(const BeaconConfig& config);

}  // namespace masklab::worlds
