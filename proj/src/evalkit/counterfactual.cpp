#include "evalkit/counterfactual.hpp"

#include <algorithm>

#include "numeric/ops.hpp"

namespace masklab::evalkit {

using numeric::Tensor;

namespace {

// 4-connected components of the thresholded mask, flood-filled with an
// explicit stack.
std::vector<std::vector<int>> connected_components(const std::vector<bool>& binary, int h, int w) {
    std::vector<std::vector<int>> components;
    std::vector<bool> visited(binary.size(), false);
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
        const std::size_t s = static_cast<std::size_t>(start);
        if (!binary[s] || visited[s]) continue;
        std::vector<int> comp;
        stack.push_back(start);
        visited[s] = true;
        while (!stack.empty()) {
            const int px = stack.back();
            stack.pop_back();
            comp.push_back(px);
            const int r = px / w, c = px % w;
            const int neighbors[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& nb : neighbors) {
                if (nb[0] < 0 || nb[0] >= h || nb[1] < 0 || nb[1] >= w) continue;
                const int np = nb[0] * w + nb[1];
                const std::size_t ns = static_cast<std::size_t>(np);
                if (binary[ns] && !visited[ns]) {
                    visited[ns] = true;
                    stack.push_back(np);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
    }
    return components;
}

}  // namespace

std::vector<CounterfactualRecord> counterfactual_from_mask(const worlds::Policy& policy,
                                                           const Tensor& state, const Tensor& mask,
                                                           int action,
                                                           const worlds::ReferenceValue& reference,
                                                           const CfConfig& config) {
    require(mask.rank() == 2 && mask.dim(0) == state.dim(1) && mask.dim(1) == state.dim(2),
            ErrorCode::InvalidArgument, "counterfactual: mask/state shape mismatch");
    require(config.threshold > 0.0f && config.threshold <= 1.0f, ErrorCode::InvalidArgument,
            "counterfactual: threshold must lie in (0,1]");
    require(config.top_regions >= 1, ErrorCode::InvalidArgument,
            "counterfactual: top_regions must be >= 1");
    const int h = mask.dim(0), w = mask.dim(1);

    float mx = 0.0f;
    for (float v : mask.data()) mx = std::max(mx, v);
    if (mx <= 0.0f) return {};  // no confident region

    const float cut = config.threshold * mx;
    std::vector<bool> binary(mask.data().size());
    for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = mask.data()[i] >= cut;

    auto components = connected_components(binary, h, w);
    if (components.empty()) return {};

    std::vector<std::pair<double, std::size_t>> ranked;  // (mass, component index)
    for (std::size_t i = 0; i < components.size(); ++i) {
        double mass = 0.0;
        for (int px : components[i]) mass += mask.data()[static_cast<std::size_t>(px)];
        ranked.emplace_back(mass, i);
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return components[a.second][0] < components[b.second][0];
    });

    const float ref = reference.channel(0);
    std::vector<CounterfactualRecord> out;
    const std::size_t take = std::min<std::size_t>(ranked.size(),
                                                   static_cast<std::size_t>(config.top_regions));
    for (std::size_t r = 0; r < take; ++r) {
        CounterfactualRecord rec;
        rec.rank = static_cast<int>(r) + 1;
        rec.mass = ranked[r].first;
        rec.pixels = components[ranked[r].second];
        rec.original_action = action;
        std::vector<float> modified = state.data();
        for (int px : rec.pixels) modified[static_cast<std::size_t>(px)] = ref;
        rec.modified_state = Tensor(state.shape(), std::move(modified));
        rec.new_action =
            worlds::argmax_action(worlds::action_probs(policy, rec.modified_state));
        rec.changed = rec.new_action != action;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CounterfactualRecord> counterfactual(const worlds::Policy& policy, const Tensor& state,
                                                 const Tensor& masks, int action,
                                                 const worlds::ReferenceValue& reference,
                                                 const CfConfig& config) {
    require(masks.rank() == 3, ErrorCode::InvalidArgument, "counterfactual expects [K,H,W] masks");
    require(action >= 0 && action < masks.dim(0), ErrorCode::InvalidArgument,
            "counterfactual: action out of range");
    Tensor active = numeric::index_row(masks, action);
    return counterfactual_from_mask(policy, state, active, action, reference, config);
}

std::vector<std::pair<std::size_t, double>> region_importance(
    const Tensor& mask, const std::vector<std::vector<int>>& regions, double min_share) {
    require(mask.rank() == 2, ErrorCode::InvalidArgument, "region_importance expects [H,W]");
    const std::int64_t n = mask.numel();
    double mean = 0.0;
    for (float v : mask.data()) mean += v;
    mean /= static_cast<double>(n);

    // values below the average are zeroed before computing shares
    std::vector<double> zeroed(mask.data().size());
    double total = 0.0;
    for (std::size_t i = 0; i < zeroed.size(); ++i) {
        const double v = mask.data()[i];
        zeroed[i] = v >= mean ? v : 0.0;
        total += zeroed[i];
    }
    if (total <= 0.0) return {};

    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        double acc = 0.0;
        for (int px : regions[r]) {
            require(px >= 0 && px < n, ErrorCode::InvalidArgument,
                    "region_importance: pixel out of bounds");
            acc += zeroed[static_cast<std::size_t>(px)];
        }
        const double share = acc / total;
        if (share >= min_share) out.emplace_back(r, share);
    }
    return out;
}

}  // namespace masklab::evalkit
