#pragma once

#include <cstdint>
#include <string>

#include "numeric/tensor.hpp"
#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::baselines {

// Forward-only perturbation saliency. All methods assert that no gradient
// tape is active; they are pure policy-evaluation loops.
struct SaliencyMap {
    numeric::Tensor values;  // [H,W], nonnegative, max-normalized to [0,1]
    std::string method;
    int action = 0;
};

struct RiseConfig {
    int n_masks = 2000;
    int cell_grid = 7;
    float p_keep = 0.5f;
    std::uint64_t seed = 0;
};

// Random coarse binary grids, bilinearly upsampled with a random shift,
// blended with the reference; score = sum p_a(masked)*mask / (n*p_keep).
SaliencyMap rise_saliency(const worlds::Policy& policy, const numeric::Tensor& state, int action,
                          const RiseConfig& config, const worlds::ReferenceValue& reference);

struct BlurConfig {
    int stride = 4;
    float sigma = 3.0f;  // kernel truncated at 3 sigma
};

// Localized Gaussian-blur perturbation on a grid; |delta p_a| scores are
// spread bilinearly between grid points.
SaliencyMap blur_saliency(const worlds::Policy& policy, const numeric::Tensor& state, int action,
                          const BlurConfig& config);

// Sliding patch replaced by the reference value; score at the patch center
// is p_a(original) - p_a(occluded), floored at 0.
SaliencyMap occlusion_saliency(const worlds::Policy& policy, const numeric::Tensor& state,
                               int action, int patch, const worlds::ReferenceValue& reference);

// Occlusion delta divided by (1 + TV distance of the renormalized non-target
// probabilities before/after), clamped at 0.
SaliencyMap normalized_delta_saliency(const worlds::Policy& policy, const numeric::Tensor& state,
                                      int action, int patch,
                                      const worlds::ReferenceValue& reference);

// VMT1 tensor at <prefix>.vmt plus a JSON sidecar at <prefix>.json.
void save_saliency(const SaliencyMap& map, const std::string& prefix,
                   const std::vector<std::pair<std::string, std::string>>& params);

}  // namespace masklab::baselines
