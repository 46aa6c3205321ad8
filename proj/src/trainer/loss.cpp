#include "trainer/loss.hpp"

#include "numeric/ops.hpp"

namespace masklab::trainer {

using numeric::Tensor;

Tensor loss_bc(const Tensor& p, int action) {
    using namespace numeric;
    require(p.rank() == 1 && p.numel() >= 2, ErrorCode::InvalidArgument,
            "loss_bc expects a K-way distribution");
    require(action >= 0 && action < p.dim(0), ErrorCode::InvalidArgument,
            "loss_bc: action out of range");
    const float scale = -1.0f / static_cast<float>(p.dim(0));
    return mul(log_clamped(index_row(p, action)), scale);
}

Tensor loss_entropy(const Tensor& p_tilde) {
    using namespace numeric;
    require(p_tilde.rank() == 1 && p_tilde.numel() >= 2, ErrorCode::InvalidArgument,
            "loss_entropy expects a K-way distribution");
    const float scale = 1.0f / static_cast<float>(p_tilde.dim(0));
    return mul(sum(mul(p_tilde, log_clamped(p_tilde))), scale);
}

Tensor loss_avg(const Tensor& active, const Tensor& non_target) {
    using namespace numeric;
    require(active.shape() == non_target.shape(), ErrorCode::InvalidArgument,
            "loss_avg: mask shape mismatch");
    return add(mean(active), mean(non_target));
}

Tensor total_variation(const Tensor& mask) {
    using namespace numeric;
    require(mask.rank() == 2 && mask.dim(0) >= 2 && mask.dim(1) >= 2, ErrorCode::InvalidArgument,
            "total_variation expects a mask of at least 2x2");
    const int h = mask.dim(0), w = mask.dim(1);
    Tensor dv = abs(sub(narrow(mask, 0, 1, h - 1), narrow(mask, 0, 0, h - 1)));
    Tensor dh = abs(sub(narrow(mask, 1, 1, w - 1), narrow(mask, 1, 0, w - 1)));
    return mul(add(sum(dv), sum(dh)), 1.0f / static_cast<float>(w * h));
}

Tensor loss_smooth(const Tensor& active, const Tensor& non_target) {
    return numeric::add(total_variation(active), total_variation(non_target));
}

Tensor l2_penalty(const numeric::ParamStore& params) {
    using namespace numeric;
    Tensor acc = Tensor::scalar(0.0f);
    for (const auto& [name, t] : params) acc = add(acc, sum(mul(t, t)));
    return acc;
}

SampleLoss total_loss(const Tensor& state, int action, const explainer::ExplainerModel& model,
                      const worlds::Policy& policy, const worlds::ReferenceValue& reference,
                      const LossWeights& weights) {
    using namespace numeric;
    require(weights.entropy >= 0 && weights.mask_avg >= 0 && weights.smooth >= 0 && weights.l2 >= 0,
            ErrorCode::InvalidArgument, "loss weights must be nonnegative");

    Tensor masks = model.forward(state);
    explainer::MaskedForward mf =
        explainer::masked_forward(policy, state, masks, action, reference);

    Tensor bc = loss_bc(mf.p, action);
    Tensor entropy = loss_entropy(mf.p_tilde);
    Tensor avg = loss_avg(mf.masks.active, mf.masks.non_target);
    Tensor smooth = loss_smooth(mf.masks.active, mf.masks.non_target);
    Tensor l2 = l2_penalty(model.params());

    SampleLoss out;
    out.values.bc = bc.item();
    out.values.entropy = entropy.item();
    out.values.avg = avg.item();
    out.values.smooth = smooth.item();
    out.values.l2 = l2.item();
    out.total = add(add(add(bc, mul(entropy, weights.entropy)),
                        add(mul(avg, weights.mask_avg), mul(smooth, weights.smooth))),
                    mul(l2, weights.l2));
    out.values.total = out.total.item();
    return out;
}

}  // namespace masklab::trainer
