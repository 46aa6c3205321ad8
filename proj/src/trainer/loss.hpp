#pragma once

#include "explainer/mask_ops.hpp"
#include "explainer/model.hpp"
#include "numeric/tensor.hpp"
#include "worlds/policy.hpp"

namespace masklab::trainer {

// Regularization weights; defaults follow the reference hyperparameters.
struct LossWeights {
    float entropy = 1.0f;   // lambda_e
    float mask_avg = 0.3f;  // lambda_avg
    float smooth = 1.0f;    // lambda_smooth
    float l2 = 0.01f;       // lambda_L2
};

// Behavioral-cloning term: -(1/K) log p[a]. The 1/K factor is kept verbatim
// so numbers are comparable across implementations.
numeric::Tensor loss_bc(const numeric::Tensor& p, int action);

// Negative entropy of the complement-state distribution, scaled by 1/K;
// minimized when p_tilde is uniform.
numeric::Tensor loss_entropy(const numeric::Tensor& p_tilde);

// mean(m_a) + mean(n): pressure towards sparse masks.
numeric::Tensor loss_avg(const numeric::Tensor& active, const numeric::Tensor& non_target);

// Total variation of a [H,W] mask: sum of |adjacent differences| / (W*H).
numeric::Tensor total_variation(const numeric::Tensor& mask);

// TV(m_a) + TV(n).
numeric::Tensor loss_smooth(const numeric::Tensor& active, const numeric::Tensor& non_target);

// Sum of squared explainer parameters (policy parameters never enter).
numeric::Tensor l2_penalty(const numeric::ParamStore& params);

struct LossBreakdown {
    float total = 0, bc = 0, entropy = 0, avg = 0, smooth = 0, l2 = 0;
};

struct SampleLoss {
    numeric::Tensor total;  // scalar, on the tape
    LossBreakdown values;
};

// Full per-sample objective:
//   L_bc + le*L_e + lavg*L_avg + lsmooth*L_smooth + l2*sum(theta^2)
SampleLoss total_loss(const numeric::Tensor& state, int action, const explainer::ExplainerModel& model,
                      const worlds::Policy& policy, const worlds::ReferenceValue& reference,
                      const LossWeights& weights);

}  // namespace masklab::trainer
