#pragma once

#include <cstdint>
#include <string>

#include "numeric/tensor.hpp"
#include "worlds/state.hpp"

namespace masklab::explainer {

// Per-pixel, K-channel mask head: two 3x3 convs at full resolution feeding a
// 1x1 conv with a sigmoid. Hidden layers are Kaiming-uniform from the seed;
// the final layer starts at zero so every mask begins at 0.5.
struct ExplainerConfig {
    int num_actions = 4;
    int height = 28;
    int width = 28;
    int channels = 8;
    std::uint64_t seed = 42;
};

class ExplainerModel {
public:
    explicit ExplainerModel(ExplainerConfig config);

    const ExplainerConfig& config() const { return config_; }
    numeric::ParamStore& params() { return params_; }
    const numeric::ParamStore& params() const { return params_; }
    std::int64_t param_count() const { return params_.total_elements(); }

    // [1,H,W] -> [K,H,W], all values in (0,1). Tape-aware.
    numeric::Tensor forward(const numeric::Tensor& state) const;

    // "VMC1" checkpoint: magic, metadata line, named VMT1 tensor table.
    void save(const std::string& path, int epoch) const;
    static ExplainerModel load(const std::string& path);
    int loaded_epoch() const { return loaded_epoch_; }

private:
    ExplainerConfig config_;
    numeric::ParamStore params_;
    int loaded_epoch_ = -1;
};

// Tape-free single forward pass producing the action-wise mask set.
numeric::Tensor explain(const ExplainerModel& model, const worlds::VisualState& state);

}  // namespace masklab::explainer
