#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "numeric/tensor.hpp"

namespace masklab::numeric {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;
};

// Adam with bias correction. Moment state is kept per parameter name and
// updates iterate the store in name order, so trajectories are reproducible.
class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    std::int64_t steps() const { return t_; }

    // Requires every parameter to carry a gradient.
    void step(ParamStore& params);

private:
    struct Moments {
        std::vector<float> m;
        std::vector<float> v;
    };
    AdamConfig config_;
    std::map<std::string, Moments> state_;
    std::int64_t t_ = 0;
};

}  // namespace masklab::numeric
