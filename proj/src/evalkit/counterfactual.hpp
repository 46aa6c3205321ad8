#pragma once

#include <vector>

#include "numeric/tensor.hpp"
#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::evalkit {

struct CfConfig {
    float threshold = 0.5f;  // binarize at threshold * max(mask)
    int top_regions = 3;
};

struct CounterfactualRecord {
    int rank = 0;             // 1 = highest mask mass
    double mass = 0.0;        // summed mask values over the region
    std::vector<int> pixels;  // row-major indices
    numeric::Tensor modified_state;  // original with the region set to the reference
    int original_action = 0;
    int new_action = 0;
    bool changed = false;
};

// Threshold the active mask, extract 4-connected components, rank them by
// mask mass, and for each top region independently replace its pixels with
// the reference value and re-run the policy. Empty thresholded mask -> {}.
std::vector<CounterfactualRecord> counterfactual(const worlds::Policy& policy,
                                                 const numeric::Tensor& state,
                                                 const numeric::Tensor& masks, int action,
                                                 const worlds::ReferenceValue& reference,
                                                 const CfConfig& config);

// Same procedure for a single [H,W] mask (no mask-set split).
std::vector<CounterfactualRecord> counterfactual_from_mask(const worlds::Policy& policy,
                                                           const numeric::Tensor& state,
                                                           const numeric::Tensor& mask, int action,
                                                           const worlds::ReferenceValue& reference,
                                                           const CfConfig& config);

// Share of (mean-thresholded) mask mass falling on each annotated region;
// entries below min_share are dropped. Returns (region index, share) pairs.
std::vector<std::pair<std::size_t, double>> region_importance(
    const numeric::Tensor& mask, const std::vector<std::vector<int>>& regions,
    double min_share = 0.05);

}  // namespace masklab::evalkit
