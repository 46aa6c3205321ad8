#pragma once

#include <vector>

#include "numeric/tensor.hpp"
#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::evalkit {

struct InsDelConfig {
    double fraction = 1.0;  // alpha: share of pixels inserted/deleted
    int step = 0;           // pixels per policy call; 0 -> ceil(total/100)
};

struct Curve {
    std::vector<float> probs;  // starts at the untouched extreme, one point per step
    double auc = 0.0;          // trapezoid over the normalized step axis
};

// Insertion: start from the reference image and reveal pixels in descending
// mask order (ties broken row-major); record p_a after every `step` pixels.
Curve insertion_curve(const worlds::Policy& policy, const numeric::Tensor& state,
                      const numeric::Tensor& mask, int action,
                      const worlds::ReferenceValue& reference, const InsDelConfig& config);

// Deletion: start from the full state and blank pixels to the reference in
// descending mask order.
Curve deletion_curve(const worlds::Policy& policy, const numeric::Tensor& state,
                     const numeric::Tensor& mask, int action,
                     const worlds::ReferenceValue& reference, const InsDelConfig& config);

// Descending-value pixel order with row-major tie-break (stable).
std::vector<int> saliency_order(const numeric::Tensor& mask);

}  // namespace masklab::evalkit
