#include "worlds/beacon.hpp"

#include <algorithm>
#include <cmath>

#include "common/rng.hpp"
#include "numeric/ops.hpp"

namespace masklab::worlds {

using numeric::Tensor;

VisualState make_state(Tensor chw) {
    require(chw.rank() == 3, ErrorCode::InvalidArgument, "state must be [C,H,W]");
    require(chw.dim(0) == 1 || chw.dim(0) == 3, ErrorCode::InvalidArgument,
            "state must have 1 or 3 channels");
    for (float v : chw.data())
        require(v >= 0.0f && v <= 1.0f, ErrorCode::InvalidArgument,
                "state pixels must lie in [0,1]");
    return VisualState{std::move(chw)};
}

ReferenceValue ReferenceValue::constant(float v, int channels) {
    require(v >= 0.0f && v <= 1.0f, ErrorCode::InvalidArgument,
            "reference value must lie in [0,1]");
    require(channels >= 1, ErrorCode::InvalidArgument, "reference needs >= 1 channel");
    return ReferenceValue{std::vector<float>(static_cast<std::size_t>(channels), v)};
}

ReferenceValue reference_value_for(const BeaconConfig& config) {
    return ReferenceValue::constant(config.background, 1);
}

BeaconWorld::BeaconWorld(BeaconConfig config) : config_(config) {
    require(config_.width >= 4 && config_.height >= 4, ErrorCode::InvalidArgument,
            "beacon world grid too small");
    require(config_.num_actions >= 2, ErrorCode::InvalidArgument,
            "beacon world needs at least 2 actions");
    require(config_.num_beacons >= 0 && config_.num_beacons <= config_.num_actions,
            ErrorCode::InvalidArgument, "num_beacons must be in [0, num_actions]");
    require(config_.beacon_size >= 1, ErrorCode::InvalidArgument, "beacon size must be positive");
    const std::int64_t beacon_area =
        static_cast<std::int64_t>(config_.beacon_size) * config_.beacon_size;
    require(config_.num_beacons * beacon_area <
                static_cast<std::int64_t>(config_.width) * config_.height / 4,
            ErrorCode::InvalidArgument, "beacons would cover too much of the grid");
    require(config_.background >= 0.0f && config_.background <= 0.5f, ErrorCode::InvalidArgument,
            "background intensity must sit below the brightness gate");
    require(config_.intensity_min >= 0.8f && config_.intensity_max <= 1.0f &&
                config_.intensity_min <= config_.intensity_max,
            ErrorCode::InvalidArgument, "beacon intensity range must sit in [0.8, 1.0]");

    cell_grid_ = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config_.num_actions))));
    for (int k = 0; k < config_.num_actions; ++k) {
        Cell cell = action_cell(k);
        require(cell.r1 - cell.r0 >= config_.beacon_size && cell.c1 - cell.c0 >= config_.beacon_size,
                ErrorCode::InvalidArgument,
                "action cell smaller than a beacon; enlarge the grid or shrink beacons");
    }
}

BeaconWorld::Cell BeaconWorld::action_cell(int action) const {
    require(action >= 0 && action < config_.num_actions, ErrorCode::InvalidArgument,
            "action out of range");
    const int row = action / cell_grid_;
    const int col = action % cell_grid_;
    Cell cell;
    cell.r0 = config_.height * row / cell_grid_;
    cell.r1 = config_.height * (row + 1) / cell_grid_;
    cell.c0 = config_.width * col / cell_grid_;
    cell.c1 = config_.width * (col + 1) / cell_grid_;
    return cell;
}

BeaconState BeaconWorld::generate(std::uint64_t seed, std::int64_t index) const {
    Rng rng = Rng::for_index(seed, static_cast<std::uint64_t>(index));
    const int h = config_.height, w = config_.width;
    std::vector<float> pixels(static_cast<std::size_t>(h) * w, config_.background);

    // choose distinct driven actions via partial shuffle
    std::vector<int> actions(static_cast<std::size_t>(config_.num_actions));
    for (int k = 0; k < config_.num_actions; ++k) actions[static_cast<std::size_t>(k)] = k;
    rng.shuffle(actions);
    actions.resize(static_cast<std::size_t>(config_.num_beacons));
    std::sort(actions.begin(), actions.end());

    BeaconState out;
    for (int action : actions) {
        Cell cell = action_cell(action);
        const int r = rng.uniform_int(cell.r0, cell.r1 - config_.beacon_size);
        const int c = rng.uniform_int(cell.c0, cell.c1 - config_.beacon_size);
        BeaconRegion region;
        region.action = action;
        region.intensity = rng.uniform(config_.intensity_min, config_.intensity_max);
        for (int i = 0; i < config_.beacon_size; ++i) {
            for (int j = 0; j < config_.beacon_size; ++j) {
                const int idx = (r + i) * w + (c + j);
                pixels[static_cast<std::size_t>(idx)] = region.intensity;
                region.pixels.push_back(idx);
            }
        }
        out.beacons.push_back(std::move(region));
    }
    out.state = VisualState{Tensor({1, h, w}, std::move(pixels))};
    return out;
}

BeaconPolicy::BeaconPolicy(BeaconConfig config) : config_(config), world_(config) {}

Tensor BeaconPolicy::forward(const Tensor& state) const {
    using namespace numeric;
    require(state.rank() == 3 && state.dim(0) == 1 && state.dim(1) == config_.height &&
                state.dim(2) == config_.width,
            ErrorCode::InvalidArgument, "beacon policy: state shape mismatch");
    Tensor x = reshape(state, {config_.height, config_.width});
    Tensor gate = sigmoid(mul(sub(x, 0.5f), config_.gate_sharpness));
    Tensor lit = mul(x, gate);
    std::vector<Tensor> logits;
    logits.reserve(static_cast<std::size_t>(config_.num_actions));
    for (int k = 0; k < config_.num_actions; ++k) {
        BeaconWorld::Cell cell = world_.action_cell(k);
        Tensor crop = narrow(narrow(lit, 0, cell.r0, cell.r1 - cell.r0), 1, cell.c0, cell.c1 - cell.c0);
        logits.push_back(mul(mean(crop), config_.gain));
    }
    return softmax(concat0(logits));
}

}  // namespace masklab::worlds
