#include "evalkit/fidelity.hpp"

#include "common/parallel.hpp"
#include "explainer/mask_ops.hpp"

namespace masklab::evalkit {

ConfusionCounts counts_from_pairs(const std::vector<std::pair<int, int>>& pairs, int num_actions) {
    require(num_actions >= 2, ErrorCode::InvalidArgument, "confusion counts need K >= 2");
    ConfusionCounts counts;
    counts.num_actions = num_actions;
    counts.tp.assign(static_cast<std::size_t>(num_actions), 0);
    counts.tn.assign(static_cast<std::size_t>(num_actions), 0);
    counts.fp.assign(static_cast<std::size_t>(num_actions), 0);
    counts.fn.assign(static_cast<std::size_t>(num_actions), 0);
    for (const auto& [label, pred] : pairs) {
        require(label >= 0 && label < num_actions && pred >= 0 && pred < num_actions,
                ErrorCode::InvalidArgument, "label/prediction out of range");
        for (int a = 0; a < num_actions; ++a) {
            const std::size_t ia = static_cast<std::size_t>(a);
            if (pred == a && label == a) ++counts.tp[ia];
            else if (pred == a && label != a) ++counts.fp[ia];
            else if (pred != a && label == a) ++counts.fn[ia];
            else ++counts.tn[ia];
        }
    }
    return counts;
}

FidelityReport metrics_from_counts(const ConfusionCounts& counts) {
    FidelityReport report;
    const int k = counts.num_actions;
    if (k == 0) return report;
    const std::int64_t total = counts.tp[0] + counts.tn[0] + counts.fp[0] + counts.fn[0];
    std::int64_t correct = 0;
    double psum = 0.0, rsum = 0.0;
    for (int a = 0; a < k; ++a) {
        const std::size_t ia = static_cast<std::size_t>(a);
        correct += counts.tp[ia];
        const std::int64_t pred_a = counts.tp[ia] + counts.fp[ia];
        const std::int64_t label_a = counts.tp[ia] + counts.fn[ia];
        psum += pred_a > 0 ? static_cast<double>(counts.tp[ia]) / static_cast<double>(pred_a) : 0.0;
        rsum += label_a > 0 ? static_cast<double>(counts.tp[ia]) / static_cast<double>(label_a) : 0.0;
    }
    report.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    report.macro_precision = psum / k;
    report.macro_recall = rsum / k;
    report.macro_f1 = (report.macro_precision + report.macro_recall) > 0.0
                          ? 2.0 * report.macro_precision * report.macro_recall /
                                (report.macro_precision + report.macro_recall)
                          : 0.0;
    return report;
}

FidelityReport metrics_from_pairs(const std::vector<std::pair<int, int>>& pairs, int num_actions) {
    return metrics_from_counts(counts_from_pairs(pairs, num_actions));
}

FidelityResult fidelity(const worlds::Policy& policy, const MaskProvider& provider,
                        const worlds::Dataset& dataset,
                        const worlds::ReferenceValue& reference) {
    require(!dataset.test_idx.empty(), ErrorCode::InvalidArgument, "test split is empty");
    require(dataset.num_actions >= 2, ErrorCode::InvalidArgument, "fidelity needs K >= 2");

    FidelityResult result;
    result.pairs.resize(dataset.test_idx.size());
    parallel_for(dataset.test_idx.size(), [&](std::size_t i) {
        const auto& rec =
            dataset.records[static_cast<std::size_t>(dataset.test_idx[i])];
        numeric::Tensor mask = provider(rec.state, rec.action);
        numeric::Tensor overlaid = explainer::overlay(rec.state, mask, reference);
        const int pred = worlds::argmax_action(worlds::action_probs(policy, overlaid));
        result.pairs[i] = {rec.action, pred};
    });
    result.counts = counts_from_pairs(result.pairs, dataset.num_actions);
    result.report = metrics_from_counts(result.counts);
    return result;
}

}  // namespace masklab::evalkit
