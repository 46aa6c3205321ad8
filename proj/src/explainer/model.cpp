#include "explainer/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common/rng.hpp"
#include "numeric/ops.hpp"
#include "numeric/serialize.hpp"

namespace masklab::explainer {

using numeric::Tensor;

namespace {

Tensor kaiming_uniform(numeric::Shape shape, int fan_in, Rng& rng) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::vector<float> data(static_cast<std::size_t>(numeric::shape_numel(shape)));
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(data), true);
}

constexpr char kMagic[4] = {'V', 'M', 'C', '1'};

}  // namespace

ExplainerModel::ExplainerModel(ExplainerConfig config) : config_(config) {
    require(config_.num_actions >= 2, ErrorCode::InvalidArgument,
            "explainer needs K >= 2 (the non-target set would be empty)");
    require(config_.height >= 2 && config_.width >= 2, ErrorCode::InvalidArgument,
            "explainer input must be at least 2x2");
    require(config_.channels >= 1, ErrorCode::InvalidArgument, "channels must be positive");
    Rng rng(config_.seed, 0xf0);
    const int c = config_.channels;
    const int k = config_.num_actions;
    params_.add("conv1.weight", kaiming_uniform({c, 1, 3, 3}, 9, rng));
    params_.add("conv1.bias", Tensor::zeros({c}, true));
    params_.add("conv2.weight", kaiming_uniform({c, c, 3, 3}, c * 9, rng));
    params_.add("conv2.bias", Tensor::zeros({c}, true));
    params_.add("head.weight", Tensor::zeros({k, c, 1, 1}, true));
    params_.add("head.bias", Tensor::zeros({k}, true));
}

Tensor ExplainerModel::forward(const Tensor& state) const {
    using namespace numeric;
    require(state.rank() == 3 && state.dim(0) == 1 && state.dim(1) == config_.height &&
                state.dim(2) == config_.width,
            ErrorCode::InvalidArgument,
            "explainer: state shape mismatch, expected [1," + std::to_string(config_.height) +
                "," + std::to_string(config_.width) + "] got " + shape_str(state.shape()));
    Tensor x = reshape(state, {1, 1, config_.height, config_.width});
    Tensor h1 = relu(conv2d(x, params_.get("conv1.weight"), params_.get("conv1.bias"), 1, 1));
    Tensor h2 = relu(conv2d(h1, params_.get("conv2.weight"), params_.get("conv2.bias"), 1, 1));
    Tensor logits = conv2d(h2, params_.get("head.weight"), params_.get("head.bias"), 1, 0);
    return reshape(sigmoid(logits), {config_.num_actions, config_.height, config_.width});
}

void ExplainerModel::save(const std::string& path, int epoch) const {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorCode::Io, "cannot open checkpoint '" + path + "' for writing");
    os.write(kMagic, 4);
    std::ostringstream meta;
    meta << "{\"schema_version\":1,\"K\":" << config_.num_actions << ",\"H\":" << config_.height
         << ",\"W\":" << config_.width << ",\"channels\":" << config_.channels
         << ",\"seed\":" << config_.seed << ",\"epoch\":" << epoch << "}";
    const std::string meta_str = meta.str();
    numeric::write_u32(os, static_cast<std::uint32_t>(meta_str.size()));
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    numeric::write_u32(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, t] : params_) {
        numeric::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        numeric::write_tensor(os, t);
    }
    require(bool(os), ErrorCode::Io, "checkpoint write failed");
}

namespace {

// Minimal field scan for the flat integer metadata object written above.
std::int64_t meta_int(const std::string& meta, const std::string& key) {
    const std::string needle = "\"" + key + "\":";
    auto pos = meta.find(needle);
    require(pos != std::string::npos, ErrorCode::Io, "checkpoint metadata missing '" + key + "'");
    return std::stoll(meta.substr(pos + needle.size()));
}

}  // namespace

ExplainerModel ExplainerModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::NotFound, "cannot open checkpoint '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    require(bool(is) && std::memcmp(magic, kMagic, 4) == 0, ErrorCode::Io,
            "'" + path + "' is not a VMC1 checkpoint");
    const std::uint32_t meta_len = numeric::read_u32(is);
    require(meta_len < 4096, ErrorCode::Io, "checkpoint metadata too large");
    std::string meta(meta_len, '\0');
    is.read(meta.data(), meta_len);
    require(bool(is), ErrorCode::Io, "checkpoint metadata truncated");

    ExplainerConfig config;
    config.num_actions = static_cast<int>(meta_int(meta, "K"));
    config.height = static_cast<int>(meta_int(meta, "H"));
    config.width = static_cast<int>(meta_int(meta, "W"));
    config.channels = static_cast<int>(meta_int(meta, "channels"));
    config.seed = static_cast<std::uint64_t>(meta_int(meta, "seed"));
    ExplainerModel model(config);
    model.loaded_epoch_ = static_cast<int>(meta_int(meta, "epoch"));

    const std::uint32_t n = numeric::read_u32(is);
    require(n == model.params_.size(), ErrorCode::Io, "checkpoint tensor count mismatch");
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t len = numeric::read_u32(is);
        require(len < 256, ErrorCode::Io, "checkpoint tensor name too long");
        std::string name(len, '\0');
        is.read(name.data(), len);
        require(bool(is), ErrorCode::Io, "checkpoint truncated");
        Tensor t = numeric::read_tensor(is);
        Tensor& dst = model.params_.get(name);
        require(dst.shape() == t.shape(), ErrorCode::Io,
                "checkpoint tensor '" + name + "' has unexpected shape");
        dst.raw_data() = t.data();
    }
    return model;
}

Tensor explain(const ExplainerModel& model, const worlds::VisualState& state) {
    return model.forward(state.pixels);
}

}  // namespace masklab::explainer
