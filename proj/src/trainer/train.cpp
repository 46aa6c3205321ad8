#include "trainer/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "common/rng.hpp"
#include "numeric/adam.hpp"
#include "numeric/ops.hpp"

namespace masklab::trainer {

using numeric::Tensor;

namespace {

void check_finite(const LossBreakdown& values, int epoch, int batch) {
    const std::pair<const char*, float> terms[] = {
        {"loss_bc", values.bc},         {"loss_e", values.entropy}, {"loss_avg", values.avg},
        {"loss_smooth", values.smooth}, {"loss_l2", values.l2},     {"loss_total", values.total},
    };
    for (const auto& [name, v] : terms)
        require(std::isfinite(v), ErrorCode::Numeric,
                std::string(name) + " diverged (non-finite) at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(batch));
}

void accumulate(LossBreakdown& into, const LossBreakdown& values) {
    into.total += values.total;
    into.bc += values.bc;
    into.entropy += values.entropy;
    into.avg += values.avg;
    into.smooth += values.smooth;
    into.l2 += values.l2;
}

void scale(LossBreakdown& values, float s) {
    values.total *= s;
    values.bc *= s;
    values.entropy *= s;
    values.avg *= s;
    values.smooth *= s;
    values.l2 *= s;
}

void write_log_row(std::ostream& os, int epoch, const char* split, const LossBreakdown& v) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", epoch, split,
                  static_cast<double>(v.total), static_cast<double>(v.bc),
                  static_cast<double>(v.entropy), static_cast<double>(v.avg),
                  static_cast<double>(v.smooth), static_cast<double>(v.l2));
    os << buf;
}

std::map<std::string, std::vector<float>> snapshot(const numeric::ParamStore& params) {
    std::map<std::string, std::vector<float>> out;
    for (const auto& [name, t] : params) out[name] = t.data();
    return out;
}

void restore(numeric::ParamStore& params, const std::map<std::string, std::vector<float>>& snap) {
    for (auto& [name, t] : params) t.raw_data() = snap.at(name);
}

}  // namespace

TrainResult train(explainer::ExplainerModel& model, const worlds::Policy& policy,
                  const worlds::Dataset& dataset, const TrainConfig& config) {
    require(config.learning_rate > 0.0f, ErrorCode::InvalidArgument, "learning rate must be positive");
    require(config.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
    require(config.epochs >= 0, ErrorCode::InvalidArgument, "epochs must be nonnegative");
    require(!dataset.train_idx.empty() && !dataset.valid_idx.empty(), ErrorCode::InvalidArgument,
            "dataset has no train/valid split");

    const worlds::ReferenceValue reference = worlds::reference_value_for(dataset.env);
    numeric::AdamConfig adam_cfg;
    adam_cfg.lr = config.learning_rate;
    numeric::Adam opt(adam_cfg);

    std::ofstream log;
    if (!config.log_csv.empty()) {
        log.open(config.log_csv);
        require(bool(log), ErrorCode::Io, "cannot open training log '" + config.log_csv + "'");
        log << "epoch,split,loss_total,loss_bc,loss_e,loss_avg,loss_smooth,loss_l2\n";
    }

    auto eval_split = [&](const std::vector<int>& indices) {
        LossBreakdown mean;
        for (int idx : indices) {
            const auto& rec = dataset.records[static_cast<std::size_t>(idx)];
            SampleLoss sample =
                total_loss(rec.state, rec.action, model, policy, reference, config.weights);
            accumulate(mean, sample.values);
        }
        scale(mean, 1.0f / static_cast<float>(indices.size()));
        return mean;
    };

    TrainResult result;
    auto best = snapshot(model.params());
    result.best_valid_total = std::numeric_limits<float>::infinity();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<int> order = dataset.train_idx;
        Rng shuffle_rng(config.seed, 0xba7c + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        LossBreakdown train_mean;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            model.params().zero_grads();
            numeric::GradTape tape;
            Tensor batch_total = Tensor::scalar(0.0f);
            LossBreakdown batch_mean;
            for (std::size_t b = start; b < stop; ++b) {
                const auto& rec = dataset.records[static_cast<std::size_t>(order[b])];
                SampleLoss sample =
                    total_loss(rec.state, rec.action, model, policy, reference, config.weights);
                batch_total = numeric::add(batch_total, sample.total);
                accumulate(batch_mean, sample.values);
            }
            const float inv = 1.0f / static_cast<float>(stop - start);
            batch_total = numeric::mul(batch_total, inv);
            scale(batch_mean, inv);
            check_finite(batch_mean, epoch, batches);
            tape.backward(batch_total);
            opt.step(model.params());
            accumulate(train_mean, batch_mean);
            ++batches;
        }
        scale(train_mean, 1.0f / static_cast<float>(batches));

        LossBreakdown valid_mean = eval_split(dataset.valid_idx);
        check_finite(valid_mean, epoch, -1);

        result.log.push_back(EpochLog{epoch, train_mean, valid_mean});
        if (log.is_open()) {
            write_log_row(log, epoch, "train", train_mean);
            write_log_row(log, epoch, "valid", valid_mean);
        }
        if (valid_mean.total < result.best_valid_total) {
            result.best_valid_total = valid_mean.total;
            result.best_epoch = epoch;
            best = snapshot(model.params());
        }
        result.epochs_run = epoch + 1;
        if (config.epoch_hook && !config.epoch_hook(epoch, train_mean, valid_mean, model)) break;
    }

    restore(model.params(), best);
    if (!config.checkpoint_path.empty())
        model.save(config.checkpoint_path, result.best_epoch);
    return result;
}

}  // namespace masklab::trainer
