#pragma once

#include "numeric/tensor.hpp"
#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::explainer {

// Active mask m_a, its complement 1-m_a, and the non-target mask n
// (pixel-wise maximum over the inactive masks).
struct SplitMasks {
    numeric::Tensor active;      // [H,W]
    numeric::Tensor complement;  // [H,W]
    numeric::Tensor non_target;  // [H,W]
};

SplitMasks split_masks(const numeric::Tensor& masks, int action);

// Per-pixel convex blend s*m + r*(1-m). state [C,H,W], mask [H,W] in [0,1].
// Differentiable with respect to the mask.
numeric::Tensor overlay(const numeric::Tensor& state, const numeric::Tensor& mask,
                        const worlds::ReferenceValue& reference);

// p = policy(s masked by m_a), p_tilde = policy(s masked by the complement).
struct MaskedForward {
    numeric::Tensor p;
    numeric::Tensor p_tilde;
    SplitMasks masks;
};

MaskedForward masked_forward(const worlds::Policy& policy, const numeric::Tensor& state,
                             const numeric::Tensor& masks, int action,
                             const worlds::ReferenceValue& reference);

}  // namespace masklab::explainer
