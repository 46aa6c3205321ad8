#include "worlds/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "common/rng.hpp"
#include "numeric/adam.hpp"
#include "numeric/ops.hpp"
#include "numeric/serialize.hpp"
#include "worlds/dataset.hpp"

namespace masklab::worlds {

using numeric::Tensor;

std::vector<float> action_probs(const Policy& policy, const Tensor& state) {
    return policy.forward(state).data();
}

int argmax_action(const std::vector<float>& probs) {
    require(!probs.empty(), ErrorCode::InvalidArgument, "empty probability vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i)
        if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
    return best;
}

namespace {

Tensor kaiming_uniform(numeric::Shape shape, int fan_in, Rng& rng) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::vector<float> data(static_cast<std::size_t>(numeric::shape_numel(shape)));
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(data), true);
}

int conv_out(int dim) { return (dim + 2 - 3) / 2 + 1; }  // 3x3, stride 2, pad 1

}  // namespace

TinyCnnPolicy::TinyCnnPolicy(int num_actions, int height, int width, const TinyCnnConfig& config)
    : num_actions_(num_actions), height_(height), width_(width), config_(config) {
    require(num_actions >= 2, ErrorCode::InvalidArgument, "tiny cnn needs >= 2 actions");
    Rng rng(config.seed, 0x7c11);
    const int c1 = config.conv1_channels, c2 = config.conv2_channels;
    const int flat = c2 * conv_out(conv_out(height)) * conv_out(conv_out(width));
    params_.add("conv1.weight", kaiming_uniform({c1, 1, 3, 3}, 9, rng));
    params_.add("conv1.bias", Tensor::zeros({c1}, true));
    params_.add("conv2.weight", kaiming_uniform({c2, c1, 3, 3}, c1 * 9, rng));
    params_.add("conv2.bias", Tensor::zeros({c2}, true));
    params_.add("dense.weight", kaiming_uniform({flat, num_actions}, flat, rng));
    params_.add("dense.bias", Tensor::zeros({1, num_actions}, true));
}

Tensor TinyCnnPolicy::forward(const Tensor& state) const {
    using namespace numeric;
    require(state.rank() == 3 && state.dim(0) == 1 && state.dim(1) == height_ &&
                state.dim(2) == width_,
            ErrorCode::InvalidArgument, "tiny cnn: state shape mismatch");
    Tensor x = reshape(state, {1, 1, height_, width_});
    Tensor h1 = relu(conv2d(x, params_.get("conv1.weight"), params_.get("conv1.bias"), 2, 1));
    Tensor h2 = relu(conv2d(h1, params_.get("conv2.weight"), params_.get("conv2.bias"), 2, 1));
    Tensor flat = reshape(h2, {1, static_cast<int>(h2.numel())});
    Tensor logits = add(matmul(flat, params_.get("dense.weight")), params_.get("dense.bias"));
    return reshape(softmax(logits), {num_actions_});
}

std::vector<std::pair<std::string, Tensor>> TinyCnnPolicy::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, t] : params_) out.emplace_back(name, t);
    return out;
}

void TinyCnnPolicy::freeze() {
    for (auto& [name, t] : params_) {
        t.zero_grad();
        t.set_requires_grad(false);
    }
    frozen_ = true;
}

numeric::ParamStore& TinyCnnPolicy::trainable_params() {
    require(!frozen_, ErrorCode::InvalidArgument, "policy is frozen; parameters are fixed");
    return params_;
}

void TinyCnnPolicy::save(std::ostream& os) const {
    numeric::write_u32(os, static_cast<std::uint32_t>(num_actions_));
    numeric::write_u32(os, static_cast<std::uint32_t>(height_));
    numeric::write_u32(os, static_cast<std::uint32_t>(width_));
    numeric::write_u32(os, static_cast<std::uint32_t>(config_.conv1_channels));
    numeric::write_u32(os, static_cast<std::uint32_t>(config_.conv2_channels));
    numeric::write_u32(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, t] : params_) {
        numeric::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        numeric::write_tensor(os, t);
    }
}

std::unique_ptr<TinyCnnPolicy> TinyCnnPolicy::load(std::istream& is) {
    const int k = static_cast<int>(numeric::read_u32(is));
    const int h = static_cast<int>(numeric::read_u32(is));
    const int w = static_cast<int>(numeric::read_u32(is));
    TinyCnnConfig config;
    config.conv1_channels = static_cast<int>(numeric::read_u32(is));
    config.conv2_channels = static_cast<int>(numeric::read_u32(is));
    auto policy = std::make_unique<TinyCnnPolicy>(k, h, w, config);
    const std::uint32_t n = numeric::read_u32(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t len = numeric::read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        require(bool(is), ErrorCode::Io, "truncated policy file");
        Tensor t = numeric::read_tensor(is);
        Tensor& dst = policy->params_.get(name);
        require(dst.shape() == t.shape(), ErrorCode::Io, "policy tensor shape mismatch");
        dst.raw_data() = t.data();
    }
    policy->freeze();
    return policy;
}

namespace {

void write_f32(std::ostream& os, float v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

float read_f32(std::istream& is) {
    float v = 0.0f;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    require(bool(is), ErrorCode::Io, "truncated policy file");
    return v;
}

constexpr char kPolicyMagic[4] = {'V', 'M', 'P', '1'};

}  // namespace

void save_policy(const Policy& policy, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorCode::Io, "cannot open policy file '" + path + "' for writing");
    os.write(kPolicyMagic, 4);
    if (const auto* beacon = dynamic_cast<const BeaconPolicy*>(&policy)) {
        numeric::write_u32(os, 0);
        const BeaconConfig& cfg = beacon->config();
        numeric::write_u32(os, static_cast<std::uint32_t>(cfg.width));
        numeric::write_u32(os, static_cast<std::uint32_t>(cfg.height));
        numeric::write_u32(os, static_cast<std::uint32_t>(cfg.num_actions));
        numeric::write_u32(os, static_cast<std::uint32_t>(cfg.num_beacons));
        numeric::write_u32(os, static_cast<std::uint32_t>(cfg.beacon_size));
        write_f32(os, cfg.background);
        write_f32(os, cfg.intensity_min);
        write_f32(os, cfg.intensity_max);
        write_f32(os, cfg.gate_sharpness);
        write_f32(os, cfg.gain);
        write_f32(os, cfg.discount);
    } else if (const auto* tiny = dynamic_cast<const TinyCnnPolicy*>(&policy)) {
        numeric::write_u32(os, 1);
        tiny->save(os);
    } else {
        fail(ErrorCode::InvalidArgument, "unsupported policy kind '" + policy.kind() + "'");
    }
    require(bool(os), ErrorCode::Io, "policy write failed");
}

std::unique_ptr<Policy> load_policy(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::NotFound, "cannot open policy file '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    require(bool(is) && std::memcmp(magic, kPolicyMagic, 4) == 0, ErrorCode::Io,
            "'" + path + "' is not a VMP1 policy file");
    const std::uint32_t kind = numeric::read_u32(is);
    if (kind == 0) {
        BeaconConfig cfg;
        cfg.width = static_cast<int>(numeric::read_u32(is));
        cfg.height = static_cast<int>(numeric::read_u32(is));
        cfg.num_actions = static_cast<int>(numeric::read_u32(is));
        cfg.num_beacons = static_cast<int>(numeric::read_u32(is));
        cfg.beacon_size = static_cast<int>(numeric::read_u32(is));
        cfg.background = read_f32(is);
        cfg.intensity_min = read_f32(is);
        cfg.intensity_max = read_f32(is);
        cfg.gate_sharpness = read_f32(is);
        cfg.gain = read_f32(is);
        cfg.discount = read_f32(is);
        return std::make_unique<BeaconPolicy>(cfg);
    }
    require(kind == 1, ErrorCode::Io, "unknown policy kind tag");
    return TinyCnnPolicy::load(is);
}

std::pair<std::unique_ptr<TinyCnnPolicy>, float> train_tiny_cnn_policy(
    const Dataset& dataset, const TinyCnnConfig& config) {
    require(dataset.count() > 0, ErrorCode::InvalidArgument, "empty dataset");
    require(!dataset.train_idx.empty() && !dataset.valid_idx.empty(), ErrorCode::InvalidArgument,
            "dataset has no train/valid split");
    auto policy = std::make_unique<TinyCnnPolicy>(dataset.num_actions, dataset.height(),
                                                  dataset.width(), config);
    numeric::AdamConfig adam_cfg;
    adam_cfg.lr = config.learning_rate;
    numeric::Adam opt(adam_cfg);

    auto agreement_on = [&](const std::vector<int>& indices) {
        int agree = 0;
        for (int idx : indices) {
            const auto& rec = dataset.records[static_cast<std::size_t>(idx)];
            if (argmax_action(action_probs(*policy, rec.state)) == rec.action) ++agree;
        }
        return static_cast<float>(agree) / static_cast<float>(indices.size());
    };

    float agreement = 0.0f;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::vector<int> order = dataset.train_idx;
        Rng shuffle_rng(config.seed, 0xe90c + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            policy->trainable_params().zero_grads();
            numeric::GradTape tape;
            Tensor batch_loss = Tensor::scalar(0.0f);
            for (std::size_t b = start; b < stop; ++b) {
                const auto& rec = dataset.records[static_cast<std::size_t>(order[b])];
                // cross-entropy against the expert's full action distribution
                Tensor logp = log_clamped(policy->forward(rec.state));
                Tensor target({policy->num_actions()}, rec.action_dist);
                batch_loss = add(batch_loss, mul(sum(mul(target, logp)), -1.0f));
            }
            batch_loss = mul(batch_loss, 1.0f / static_cast<float>(stop - start));
            tape.backward(batch_loss);
            opt.step(policy->trainable_params());
        }
        agreement = agreement_on(dataset.valid_idx);
        if (agreement >= config.target_agreement) break;
    }
    require(agreement >= config.min_agreement, ErrorCode::TrainingFailure,
            "tiny cnn reached only " + std::to_string(agreement) +
                " agreement with the scripted expert; environment looks misconfigured");
    policy->freeze();
    return {std::move(policy), agreement};
}

}  // namespace masklab::worlds
