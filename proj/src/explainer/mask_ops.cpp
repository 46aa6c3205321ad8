#include "explainer/mask_ops.hpp"

#include <vector>

#include "numeric/ops.hpp"

namespace masklab::explainer {

using numeric::Tensor;

SplitMasks split_masks(const Tensor& masks, int action) {
    using namespace numeric;
    require(masks.rank() == 3, ErrorCode::InvalidArgument, "split_masks expects [K,H,W]");
    const int k = masks.dim(0);
    require(k >= 2, ErrorCode::InvalidArgument,
            "split_masks: K < 2 is unsupported (non-target set would be empty)");
    require(action >= 0 && action < k, ErrorCode::InvalidArgument, "split_masks: action out of range");

    SplitMasks out;
    out.active = index_row(masks, action);
    out.complement = sub(1.0f, out.active);
    std::vector<Tensor> inactive;
    inactive.reserve(static_cast<std::size_t>(k - 1));
    for (int i = 0; i < k; ++i)
        if (i != action) inactive.push_back(index_row(masks, i));
    out.non_target = reduce_axis(stack0(inactive), Reduce::Max, 0);
    return out;
}

Tensor overlay(const Tensor& state, const Tensor& mask, const worlds::ReferenceValue& reference) {
    using namespace numeric;
    require(state.rank() == 3, ErrorCode::InvalidArgument, "overlay expects state [C,H,W]");
    require(mask.rank() == 2 && mask.dim(0) == state.dim(1) && mask.dim(1) == state.dim(2),
            ErrorCode::InvalidArgument, "overlay: mask/state spatial shape mismatch");
    const int c = state.dim(0);
    require(static_cast<int>(reference.per_channel.size()) == c, ErrorCode::InvalidArgument,
            "overlay: reference channel count mismatch");
    for (float v : mask.data())
        require(v >= 0.0f && v <= 1.0f, ErrorCode::InvalidArgument,
                "overlay: mask values must lie in [0,1]");

    std::vector<Tensor> blended;
    blended.reserve(static_cast<std::size_t>(c));
    Tensor inverse = sub(1.0f, mask);
    for (int ch = 0; ch < c; ++ch) {
        Tensor plane = reshape(narrow(state, 0, ch, 1), {state.dim(1), state.dim(2)});
        Tensor kept = mul(plane, mask);
        Tensor filled = mul(inverse, reference.channel(ch));
        blended.push_back(add(kept, filled));
    }
    return stack0(blended);
}

MaskedForward masked_forward(const worlds::Policy& policy, const Tensor& state,
                             const Tensor& masks, int action,
                             const worlds::ReferenceValue& reference) {
    MaskedForward out;
    out.masks = split_masks(masks, action);
    Tensor s_m = overlay(state, out.masks.active, reference);
    Tensor s_comp = overlay(state, out.masks.complement, reference);
    out.p = policy.forward(s_m);
    out.p_tilde = policy.forward(s_comp);
    return out;
}

}  // namespace masklab::explainer
