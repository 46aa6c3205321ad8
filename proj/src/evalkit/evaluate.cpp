#include "evalkit/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common/json.hpp"
#include "common/parallel.hpp"
#include "evalkit/report.hpp"
#include "explainer/mask_ops.hpp"
#include "numeric/ops.hpp"

namespace masklab::evalkit {

namespace fs = std::filesystem;
using numeric::Tensor;

Stats stats_of(const std::vector<double>& values) {
    Stats s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

namespace {

struct SampleOutcome {
    std::pair<int, int> pair;                 // (label, prediction)
    std::map<double, double> insertion_auc;   // by fraction
    std::map<double, double> deletion_auc;
};

MethodEval run_method(const std::string& method, const std::string& checkpoint,
                      const MaskProvider& provider, const worlds::Policy& policy,
                      const worlds::Dataset& dataset, const worlds::ReferenceValue& reference,
                      const EvalConfig& config) {
    std::vector<SampleOutcome> outcomes(dataset.test_idx.size());
    parallel_for(dataset.test_idx.size(), [&](std::size_t i) {
        const auto& rec = dataset.records[static_cast<std::size_t>(dataset.test_idx[i])];
        Tensor mask = provider(rec.state, rec.action);

        Tensor overlaid = explainer::overlay(rec.state, mask, reference);
        outcomes[i].pair = {rec.action,
                            worlds::argmax_action(worlds::action_probs(policy, overlaid))};

        for (double fraction : config.fractions) {
            InsDelConfig idc;
            idc.fraction = fraction;
            idc.step = config.per_pixel ? 1 : 0;
            outcomes[i].insertion_auc[fraction] =
                insertion_curve(policy, rec.state, mask, rec.action, reference, idc).auc;
            outcomes[i].deletion_auc[fraction] =
                deletion_curve(policy, rec.state, mask, rec.action, reference, idc).auc;
        }
    });

    MethodEval entry;
    entry.method = method;
    entry.checkpoint = checkpoint;
    std::vector<std::pair<int, int>> pairs(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) pairs[i] = outcomes[i].pair;
    entry.counts = counts_from_pairs(pairs, dataset.num_actions);
    entry.fidelity = metrics_from_counts(entry.counts);
    for (double fraction : config.fractions) {
        std::vector<double> ins, del;
        ins.reserve(outcomes.size());
        del.reserve(outcomes.size());
        for (const auto& o : outcomes) {
            ins.push_back(o.insertion_auc.at(fraction));
            del.push_back(o.deletion_auc.at(fraction));
        }
        entry.insertion[fraction] = stats_of(ins);
        entry.deletion[fraction] = stats_of(del);
    }
    return entry;
}

void write_method_json(JsonWriter& json, const MethodEval& entry) {
    json.begin_object();
    json.kv("method", entry.method);
    if (!entry.checkpoint.empty()) json.kv("checkpoint", entry.checkpoint);
    json.key("fidelity").begin_object();
    json.kv("accuracy", entry.fidelity.accuracy);
    json.kv("macro_precision", entry.fidelity.macro_precision);
    json.kv("macro_recall", entry.fidelity.macro_recall);
    json.kv("macro_f1", entry.fidelity.macro_f1);
    // classes absent from the test labels contribute P=R=0 to the macros
    json.kv("empty_class_policy", "absent classes contribute zero to macro averages");
    json.end_object();
    json.key("confusion").begin_array();
    for (int a = 0; a < entry.counts.num_actions; ++a) {
        const std::size_t ia = static_cast<std::size_t>(a);
        json.begin_object();
        json.kv("action", a);
        json.kv("tp", entry.counts.tp[ia]);
        json.kv("tn", entry.counts.tn[ia]);
        json.kv("fp", entry.counts.fp[ia]);
        json.kv("fn", entry.counts.fn[ia]);
        json.end_object();
    }
    json.end_array();
    auto write_curve_stats = [&](const char* name, const std::map<double, Stats>& stats) {
        json.key(name).begin_array();
        for (const auto& [fraction, s] : stats) {
            json.begin_object();
            json.kv("fraction", fraction);
            json.kv("mean", s.mean);
            json.kv("std", s.stddev);
            json.kv("n", s.n);
            json.end_object();
        }
        json.end_array();
    };
    write_curve_stats("insertion_auc", entry.insertion);
    write_curve_stats("deletion_auc", entry.deletion);
    if (entry.cf_flip_rate >= 0.0) json.kv("counterfactual_top_region_flip_rate", entry.cf_flip_rate);
    json.end_object();
}

void write_stats_kv(JsonWriter& json, const char* name, const Stats& s) {
    json.key(name).begin_object();
    json.kv("mean", s.mean);
    json.kv("std", s.stddev);
    json.kv("n", s.n);
    json.end_object();
}

std::string fraction_str(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", fraction);
    return buf;
}

}  // namespace

EvalOutcome evaluate(const std::vector<const explainer::ExplainerModel*>& checkpoints,
                     const std::vector<std::string>& checkpoint_names,
                     const worlds::Policy& policy, const worlds::Dataset& dataset,
                     const EvalConfig& config, const std::string& out_dir) {
    require(!checkpoints.empty(), ErrorCode::InvalidArgument, "evaluate: no checkpoints given");
    require(checkpoints.size() == checkpoint_names.size(), ErrorCode::InvalidArgument,
            "evaluate: checkpoint/name count mismatch");
    require(!dataset.test_idx.empty(), ErrorCode::InvalidArgument, "evaluate: empty test split");
    for (double f : config.fractions)
        require(f > 0.0 && f <= 1.0, ErrorCode::InvalidArgument,
                "evaluate: fractions must lie in (0,1]");

    const worlds::ReferenceValue reference = worlds::reference_value_for(dataset.env);
    EvalOutcome outcome;

    std::vector<double> accs, precs, recalls, f1s;
    std::map<double, std::vector<double>> ins_means, del_means;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const explainer::ExplainerModel& model = *checkpoints[c];
        MaskProvider provider = [&model](const Tensor& state, int action) {
            return numeric::index_row(model.forward(state), action);
        };
        MethodEval entry = run_method("explainer", checkpoint_names[c], provider, policy, dataset,
                                      reference, config);

        // top-region counterfactual flip rate over the test split
        std::vector<int> flips(dataset.test_idx.size(), 0);
        std::vector<int> usable(dataset.test_idx.size(), 0);
        parallel_for(dataset.test_idx.size(), [&](std::size_t i) {
            const auto& rec = dataset.records[static_cast<std::size_t>(dataset.test_idx[i])];
            auto records = counterfactual(policy, rec.state, model.forward(rec.state), rec.action,
                                          reference, config.cf);
            if (records.empty()) return;
            usable[i] = 1;
            flips[i] = records.front().changed ? 1 : 0;
        });
        int n_usable = 0, n_flips = 0;
        for (std::size_t i = 0; i < flips.size(); ++i) {
            n_usable += usable[i];
            n_flips += flips[i];
        }
        entry.cf_flip_rate = n_usable > 0 ? static_cast<double>(n_flips) / n_usable : 0.0;

        accs.push_back(entry.fidelity.accuracy);
        precs.push_back(entry.fidelity.macro_precision);
        recalls.push_back(entry.fidelity.macro_recall);
        f1s.push_back(entry.fidelity.macro_f1);
        for (const auto& [fraction, s] : entry.insertion) ins_means[fraction].push_back(s.mean);
        for (const auto& [fraction, s] : entry.deletion) del_means[fraction].push_back(s.mean);
        outcome.entries.push_back(std::move(entry));

        if (c == 0) {
            const int n_examples =
                std::min<int>(config.cf_examples, static_cast<int>(dataset.test_idx.size()));
            for (int i = 0; i < n_examples; ++i) {
                const int idx = dataset.test_idx[static_cast<std::size_t>(i)];
                const auto& rec = dataset.records[static_cast<std::size_t>(idx)];
                CfExample example;
                example.dataset_index = idx;
                example.records = counterfactual(policy, rec.state, model.forward(rec.state),
                                                 rec.action, reference, config.cf);
                outcome.cf_examples.push_back(std::move(example));
            }
        }
    }
    outcome.accuracy = stats_of(accs);
    outcome.precision = stats_of(precs);
    outcome.recall = stats_of(recalls);
    outcome.f1 = stats_of(f1s);
    for (const auto& [fraction, means] : ins_means) outcome.insertion[fraction] = stats_of(means);
    for (const auto& [fraction, means] : del_means) outcome.deletion[fraction] = stats_of(means);

    if (config.with_baselines) {
        const float ref0 = reference.channel(0);
        (void)ref0;
        MaskProvider rise = [&](const Tensor& state, int action) {
            return baselines::rise_saliency(policy, state, action, config.rise, reference).values;
        };
        MaskProvider blur = [&](const Tensor& state, int action) {
            return baselines::blur_saliency(policy, state, action, config.blur).values;
        };
        MaskProvider occl = [&](const Tensor& state, int action) {
            return baselines::occlusion_saliency(policy, state, action, config.occlusion_patch,
                                                 reference)
                .values;
        };
        MaskProvider norm = [&](const Tensor& state, int action) {
            return baselines::normalized_delta_saliency(policy, state, action,
                                                        config.occlusion_patch, reference)
                .values;
        };
        outcome.entries.push_back(
            run_method("rise", "", rise, policy, dataset, reference, config));
        outcome.entries.push_back(
            run_method("blur", "", blur, policy, dataset, reference, config));
        outcome.entries.push_back(
            run_method("occlusion", "", occl, policy, dataset, reference, config));
        outcome.entries.push_back(
            run_method("normalized-delta", "", norm, policy, dataset, reference, config));
    }

    if (out_dir.empty()) return outcome;

    const fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "overlays", ec);
    require(!ec, ErrorCode::Io, "cannot create output directory '" + out_dir + "'");

    {
        std::ofstream os(root / "report.json");
        require(bool(os), ErrorCode::Io, "cannot write report.json");
        JsonWriter json(os);
        json.begin_object();
        json.kv("schema_version", 1);
        json.key("config").begin_object();
        for (const auto& [key, value] : config.config_echo) json.kv(key, value);
        json.kv("per_pixel_steps", config.per_pixel);
        json.kv("with_baselines", config.with_baselines);
        json.kv("test_samples", static_cast<std::int64_t>(dataset.test_idx.size()));
        json.end_object();
        json.key("methods").begin_array();
        for (const auto& entry : outcome.entries) write_method_json(json, entry);
        json.end_array();
        json.key("aggregate_over_checkpoints").begin_object();
        write_stats_kv(json, "accuracy", outcome.accuracy);
        write_stats_kv(json, "macro_precision", outcome.precision);
        write_stats_kv(json, "macro_recall", outcome.recall);
        write_stats_kv(json, "macro_f1", outcome.f1);
        json.key("insertion_auc").begin_array();
        for (const auto& [fraction, s] : outcome.insertion) {
            json.begin_object();
            json.kv("fraction", fraction);
            json.kv("mean", s.mean);
            json.kv("std", s.stddev);
            json.end_object();
        }
        json.end_array();
        json.key("deletion_auc").begin_array();
        for (const auto& [fraction, s] : outcome.deletion) {
            json.begin_object();
            json.kv("fraction", fraction);
            json.kv("mean", s.mean);
            json.kv("std", s.stddev);
            json.end_object();
        }
        json.end_array();
        json.end_object();
        json.key("counterfactual_examples").begin_array();
        for (const auto& example : outcome.cf_examples) {
            json.begin_object();
            json.kv("index", example.dataset_index);
            json.key("regions").begin_array();
            for (const auto& rec : example.records) {
                json.begin_object();
                json.kv("rank", rec.rank);
                json.kv("mass", rec.mass);
                json.kv("pixel_count", static_cast<std::int64_t>(rec.pixels.size()));
                json.kv("original_action", rec.original_action);
                json.kv("new_action", rec.new_action);
                json.kv("changed", rec.changed);
                json.end_object();
            }
            json.end_array();
            json.end_object();
        }
        json.end_array();
        json.end_object();
        os << "\n";
    }

    {
        std::ofstream os(root / "tables.csv");
        require(bool(os), ErrorCode::Io, "cannot write tables.csv");
        os << "method,checkpoint,metric,fraction,mean,std\n";
        char buf[256];
        for (const auto& entry : outcome.entries) {
            auto row = [&](const std::string& metric, const std::string& fraction, double mean,
                           double stddev) {
                std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.9g,%.9g\n", entry.method.c_str(),
                              entry.checkpoint.c_str(), metric.c_str(), fraction.c_str(), mean,
                              stddev);
                os << buf;
            };
            row("accuracy", "", entry.fidelity.accuracy, 0.0);
            row("macro_precision", "", entry.fidelity.macro_precision, 0.0);
            row("macro_recall", "", entry.fidelity.macro_recall, 0.0);
            row("macro_f1", "", entry.fidelity.macro_f1, 0.0);
            for (const auto& [fraction, s] : entry.insertion)
                row("insertion_auc", fraction_str(fraction), s.mean, s.stddev);
            for (const auto& [fraction, s] : entry.deletion)
                row("deletion_auc", fraction_str(fraction), s.mean, s.stddev);
            if (entry.cf_flip_rate >= 0.0) row("cf_top_region_flip_rate", "", entry.cf_flip_rate, 0.0);
        }
    }

    const int n_overlays =
        std::min<int>(config.n_overlays, static_cast<int>(dataset.test_idx.size()));
    for (int i = 0; i < n_overlays; ++i) {
        const int idx = dataset.test_idx[static_cast<std::size_t>(i)];
        const auto& rec = dataset.records[static_cast<std::size_t>(idx)];
        Tensor masks = checkpoints[0]->forward(rec.state);
        for (int a = 0; a < dataset.num_actions; ++a) {
            char name[64];
            std::snprintf(name, sizeof(name), "%04d_action%d.ppm", idx, a);
            Tensor mask = numeric::index_row(masks, a);
            auto rgb = render_overlay(rec.state, mask, config.overlay_scale);
            write_ppm((root / "overlays" / name).string(), rgb,
                      rec.state.dim(2) * config.overlay_scale,
                      rec.state.dim(1) * config.overlay_scale);
        }
    }
    return outcome;
}

}  // namespace masklab::evalkit
