#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "numeric/tensor.hpp"
#include "worlds/dataset.hpp"
#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::evalkit {

// Produces the [H,W] mask explaining `action` for `state`. Adapters exist
// for the explainer (one forward pass, slice the channel) and for every
// baseline saliency method.
using MaskProvider =
    std::function<numeric::Tensor(const numeric::Tensor& state, int action)>;

struct ConfusionCounts {
    int num_actions = 0;
    std::vector<std::int64_t> tp, tn, fp, fn;
};

struct FidelityReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

struct FidelityResult {
    FidelityReport report;
    ConfusionCounts counts;
    std::vector<std::pair<int, int>> pairs;  // (label, prediction) per test record
};

// Single-pass incremental counting over (label, prediction) pairs.
ConfusionCounts counts_from_pairs(const std::vector<std::pair<int, int>>& pairs, int num_actions);

// Macro precision/recall from the counts; empty classes contribute 0;
// F1 = 2PR/(P+R) from the macro averages (0 when P+R == 0).
FidelityReport metrics_from_counts(const ConfusionCounts& counts);

FidelityReport metrics_from_pairs(const std::vector<std::pair<int, int>>& pairs, int num_actions);

// For each test record (s, a): overlay s with the provider's mask for a,
// re-run the policy, and score agreement between the two argmax actions.
FidelityResult fidelity(const worlds::Policy& policy, const MaskProvider& provider,
                        const worlds::Dataset& dataset,
                        const worlds::ReferenceValue& reference);

}  // namespace masklab::evalkit
