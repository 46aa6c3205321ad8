#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "numeric/tensor.hpp"

namespace masklab::worlds {

struct Dataset;

// Frozen map from a visual state [1,H,W] to a K-way action distribution.
// forward() composes numeric ops, so calling it under an active GradTape
// passes gradient through to the state; the policy's own parameters (if any)
// never require grad.
class Policy {
public:
    virtual ~Policy() = default;

    virtual int num_actions() const = 0;
    virtual numeric::Tensor forward(const numeric::Tensor& state) const = 0;
    virtual std::string kind() const = 0;
    virtual std::vector<std::pair<std::string, numeric::Tensor>> parameters() const { return {}; }
};

// Tape-free forward pass returning plain probabilities.
std::vector<float> action_probs(const Policy& policy, const numeric::Tensor& state);

// Lowest index wins ties.
int argmax_action(const std::vector<float>& probs);

struct TinyCnnConfig {
    int conv1_channels = 8;
    int conv2_channels = 16;
    float learning_rate = 1e-3f;
    int batch_size = 32;
    int max_epochs = 40;
    float target_agreement = 0.95f;  // stop once reached on the valid split
    float min_agreement = 0.80f;     // below this after max_epochs -> error
    std::uint64_t seed = 7;
};

// Small trained stand-in for an expert policy: 2 conv layers + 1 dense,
// fit by cross-entropy against a scripted expert's actions, then frozen.
class TinyCnnPolicy : public Policy {
public:
    TinyCnnPolicy(int num_actions, int height, int width, const TinyCnnConfig& config);

    int num_actions() const override { return num_actions_; }
    numeric::Tensor forward(const numeric::Tensor& state) const override;
    std::string kind() const override { return "tiny-cnn"; }
    std::vector<std::pair<std::string, numeric::Tensor>> parameters() const override;

    bool frozen() const { return frozen_; }
    void freeze();
    numeric::ParamStore& trainable_params();  // usage error once frozen

    void save(std::ostream& os) const;
    static std::unique_ptr<TinyCnnPolicy> load(std::istream& is);

    int height() const { return height_; }
    int width() const { return width_; }

private:
    int num_actions_, height_, width_;
    TinyCnnConfig config_;
    bool frozen_ = false;
    numeric::ParamStore params_;
};

// Behavioral-cloning fit of the tiny CNN to the dataset's expert actions.
// Agreement is measured on the validation split; returns the frozen policy
// and the final agreement rate.
std::pair<std::unique_ptr<TinyCnnPolicy>, float> train_tiny_cnn_policy(
    const Dataset& dataset, const TinyCnnConfig& config);

// "VMP1" policy container with a kind tag; analytic policies persist their
// environment parameters, tiny CNNs their weights.
void save_policy(const Policy& policy, const std::string& path);
std::unique_ptr<Policy> load_policy(const std::string& path);

}  // namespace masklab::worlds
