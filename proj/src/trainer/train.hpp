#pragma once

#include <functional>
#include <string>
#include <vector>

#include "trainer/loss.hpp"
#include "worlds/dataset.hpp"

namespace masklab::trainer {

struct TrainConfig {
    float learning_rate = 1e-5f;
    int batch_size = 16;
    int epochs = 50;
    std::uint64_t seed = 42;
    LossWeights weights;
    std::string log_csv;          // per-epoch CSV when non-empty
    std::string checkpoint_path;  // best-validation checkpoint when non-empty
    // Optional early-stop predicate, called after each epoch's validation
    // pass. Returning false ends training.
    std::function<bool(int epoch, const LossBreakdown& train, const LossBreakdown& valid,
                       explainer::ExplainerModel& model)>
        epoch_hook;
};

struct EpochLog {
    int epoch = 0;
    LossBreakdown train;
    LossBreakdown valid;
};

struct TrainResult {
    int epochs_run = 0;
    int best_epoch = -1;
    float best_valid_total = 0.0f;
    std::vector<EpochLog> log;
};

// Adam over the train split with the frozen policy in the backward path.
// Tracks validation loss per epoch, restores the best-validation weights
// into the model on return, and aborts with a numeric error naming the
// diverging term if any loss component goes non-finite.
TrainResult train(explainer::ExplainerModel& model, const worlds::Policy& policy,
                  const worlds::Dataset& dataset, const TrainConfig& config);

}  // namespace masklab::trainer
