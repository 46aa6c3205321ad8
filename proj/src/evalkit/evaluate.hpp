#pragma once

#include <map>
#include <string>
#include <vector>

#include "baselines/saliency.hpp"
#include "evalkit/counterfactual.hpp"
#include "evalkit/fidelity.hpp"
#include "evalkit/insdel.hpp"
#include "explainer/model.hpp"
#include "worlds/dataset.hpp"

namespace masklab::evalkit {

struct EvalConfig {
    std::vector<double> fractions{0.25, 0.5, 1.0};
    bool per_pixel = false;       // exact per-pixel stepping instead of ceil(N/100) chunks
    bool with_baselines = false;  // run rise/blur/occlusion/normalized-delta too
    int n_overlays = 2;           // test samples rendered to overlays/
    int overlay_scale = 8;
    int cf_examples = 5;          // counterfactual rows detailed in the report
    CfConfig cf;
    baselines::RiseConfig rise;
    baselines::BlurConfig blur;
    int occlusion_patch = 4;
    // fully resolved caller configuration, echoed verbatim into the report
    std::vector<std::pair<std::string, std::string>> config_echo;
};

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    int n = 0;
};

Stats stats_of(const std::vector<double>& values);

struct MethodEval {
    std::string method;
    std::string checkpoint;  // empty for baselines
    FidelityReport fidelity;
    ConfusionCounts counts;
    std::map<double, Stats> insertion;  // per fraction, over test samples
    std::map<double, Stats> deletion;
    double cf_flip_rate = -1.0;  // top-region flip share; -1 when not computed
};

struct CfExample {
    int dataset_index = 0;
    std::vector<CounterfactualRecord> records;
};

struct EvalOutcome {
    std::vector<MethodEval> entries;
    // aggregates across explainer checkpoints
    Stats accuracy, precision, recall, f1;
    std::map<double, Stats> insertion, deletion;  // across per-checkpoint means
    std::vector<CfExample> cf_examples;
};

// Full evaluation protocol over the dataset's test split. Writes
// report.json, tables.csv, and overlays/NNNN_actionK.ppm under out_dir
// (pass an empty out_dir to skip file emission).
EvalOutcome evaluate(const std::vector<const explainer::ExplainerModel*>& checkpoints,
                     const std::vector<std::string>& checkpoint_names,
                     const worlds::Policy& policy, const worlds::Dataset& dataset,
                     const EvalConfig& config, const std::string& out_dir);

}  // namespace masklab::evalkit
