#include "evalkit/insdel.hpp"

#include <algorithm>
#include <cmath>

namespace masklab::evalkit {

using numeric::Tensor;

std::vector<int> saliency_order(const Tensor& mask) {
    std::vector<int> order(static_cast<std::size_t>(mask.numel()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const auto& values = mask.data();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
    });
    return order;
}

namespace {

Curve run_curve(bool insertion, const worlds::Policy& policy, const Tensor& state,
                const Tensor& mask, int action, const worlds::ReferenceValue& reference,
                const InsDelConfig& config) {
    require(state.rank() == 3 && state.dim(0) == 1, ErrorCode::InvalidArgument,
            "insertion/deletion expects a [1,H,W] state");
    require(mask.rank() == 2 && mask.dim(0) == state.dim(1) && mask.dim(1) == state.dim(2),
            ErrorCode::InvalidArgument, "mask/state spatial shape mismatch");
    require(config.fraction > 0.0 && config.fraction <= 1.0, ErrorCode::InvalidArgument,
            "fraction must lie in (0,1]");
    require(action >= 0 && action < policy.num_actions(), ErrorCode::InvalidArgument,
            "action out of range");

    const int n = static_cast<int>(mask.numel());
    const int total = static_cast<int>(std::floor(config.fraction * n));
    int step = config.step;
    require(config.step >= 0, ErrorCode::InvalidArgument, "step must be positive (or 0 for auto)");
    if (step == 0) step = (total + 99) / 100;
    if (step == 0) step = 1;

    const float ref = reference.channel(0);
    const std::vector<int> order = saliency_order(mask);

    std::vector<float> work(state.data().size());
    if (insertion) {
        std::fill(work.begin(), work.end(), ref);
    } else {
        work = state.data();
    }
    auto prob = [&](const std::vector<float>& pixels) {
        Tensor s(state.shape(), pixels);
        return policy.forward(s).data()[static_cast<std::size_t>(action)];
    };

    Curve curve;
    curve.probs.push_back(prob(work));
    int done = 0;
    while (done < total) {
        const int chunk = std::min(step, total - done);
        for (int i = 0; i < chunk; ++i) {
            const std::size_t px = static_cast<std::size_t>(order[static_cast<std::size_t>(done + i)]);
            work[px] = insertion ? state.data()[px] : ref;
        }
        done += chunk;
        curve.probs.push_back(prob(work));
    }

    const std::size_t points = curve.probs.size();
    if (points == 1) {
        curve.auc = curve.probs[0];
    } else {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < points; ++i)
            acc += 0.5 * (static_cast<double>(curve.probs[i]) + curve.probs[i + 1]);
        curve.auc = acc / static_cast<double>(points - 1);
    }
    return curve;
}

}  // namespace

Curve insertion_curve(const worlds::Policy& policy, const Tensor& state, const Tensor& mask,
                      int action, const worlds::ReferenceValue& reference,
                      const InsDelConfig& config) {
    return run_curve(true, policy, state, mask, action, reference, config);
}

Curve deletion_curve(const worlds::Policy& policy, const Tensor& state, const Tensor& mask,
                     int action, const worlds::ReferenceValue& reference,
                     const InsDelConfig& config) {
    return run_curve(false, policy, state, mask, action, reference, config);
}

}  // namespace masklab::evalkit
