#include "worlds/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "common/parallel.hpp"
#include "common/rng.hpp"
#include "numeric/serialize.hpp"

namespace masklab::worlds {

namespace fs = std::filesystem;
using numeric::Tensor;

Dataset collect_demonstrations(const Policy& policy, const BeaconWorld& world, int n,
                               std::uint64_t seed) {
    require(n >= 10, ErrorCode::InvalidArgument, "collect requires n >= 10");
    Dataset ds;
    ds.records.resize(static_cast<std::size_t>(n));
    ds.seed = seed;
    ds.num_actions = policy.num_actions();
    ds.env = world.config();
    ds.policy_kind = policy.kind();
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        BeaconState bs = world.generate(seed, static_cast<std::int64_t>(i));
        Demonstration rec;
        rec.state = bs.state.pixels;
        rec.action_dist = action_probs(policy, rec.state);
        rec.action = argmax_action(rec.action_dist);
        ds.records[i] = std::move(rec);
    });
    assign_split(ds, seed);
    return ds;
}

void assign_split(Dataset& dataset, std::uint64_t seed) {
    const int n = dataset.count();
    require(n >= 10, ErrorCode::InvalidArgument, "split requires >= 10 records");
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed, 0x5917);
    rng.shuffle(order);
    const int n_train = n * 8 / 10;
    const int n_valid = n / 10;
    dataset.train_idx.assign(order.begin(), order.begin() + n_train);
    dataset.valid_idx.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
    dataset.test_idx.assign(order.begin() + n_train + n_valid, order.end());
    std::sort(dataset.train_idx.begin(), dataset.train_idx.end());
    std::sort(dataset.valid_idx.begin(), dataset.valid_idx.end());
    std::sort(dataset.test_idx.begin(), dataset.test_idx.end());
    dataset.seed = seed;
}

namespace {

std::string record_name(int index, const char* suffix) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d_%s.vmt", index, suffix);
    return buf;
}

void write_indices(std::ostream& os, const char* key, const std::vector<int>& idx) {
    os << key << ":";
    for (int i : idx) os << " " << i;
    os << "\n";
}

std::vector<int> parse_indices(const std::string& value) {
    std::vector<int> out;
    std::istringstream ss(value);
    int v;
    while (ss >> v) out.push_back(v);
    return out;
}

std::string fmt_float(float v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir, bool force) {
    require(dataset.count() > 0, ErrorCode::InvalidArgument, "refusing to save an empty dataset");
    const fs::path root(dir);
    const fs::path manifest = root / "manifest.txt";
    if (fs::exists(manifest) && !force)
        fail(ErrorCode::Io, "dataset already exists at '" + dir + "' (use force to overwrite)");
    std::error_code ec;
    fs::create_directories(root, ec);
    require(!ec, ErrorCode::Io, "cannot create dataset directory '" + dir + "'");

    for (int i = 0; i < dataset.count(); ++i) {
        const auto& rec = dataset.records[static_cast<std::size_t>(i)];
        numeric::save_tensor((root / record_name(i, "state")).string(), rec.state);
        numeric::save_tensor((root / record_name(i, "dist")).string(),
                             Tensor({dataset.num_actions}, rec.action_dist));
    }
    {
        std::ofstream os(root / "actions.bin", std::ios::binary);
        require(bool(os), ErrorCode::Io, "cannot write actions.bin");
        for (const auto& rec : dataset.records)
            numeric::write_u32(os, static_cast<std::uint32_t>(rec.action));
    }
    std::ofstream os(manifest);
    require(bool(os), ErrorCode::Io, "cannot write manifest");
    os << "schema_version: 1\n";
    os << "count: " << dataset.count() << "\n";
    os << "K: " << dataset.num_actions << "\n";
    os << "W: " << dataset.width() << "\n";
    os << "H: " << dataset.height() << "\n";
    os << "C: 1\n";
    os << "seed: " << dataset.seed << "\n";
    os << "policy_kind: " << dataset.policy_kind << "\n";
    os << "env_kind: beacon\n";
    os << "env_num_beacons: " << dataset.env.num_beacons << "\n";
    os << "env_beacon_size: " << dataset.env.beacon_size << "\n";
    os << "env_background: " << fmt_float(dataset.env.background) << "\n";
    os << "env_intensity_min: " << fmt_float(dataset.env.intensity_min) << "\n";
    os << "env_intensity_max: " << fmt_float(dataset.env.intensity_max) << "\n";
    os << "env_gate_sharpness: " << fmt_float(dataset.env.gate_sharpness) << "\n";
    os << "env_gain: " << fmt_float(dataset.env.gain) << "\n";
    os << "env_discount: " << fmt_float(dataset.env.discount) << "\n";
    write_indices(os, "train_indices", dataset.train_idx);
    write_indices(os, "valid_indices", dataset.valid_idx);
    write_indices(os, "test_indices", dataset.test_idx);
    require(bool(os), ErrorCode::Io, "manifest write failed");
}

Dataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream is(root / "manifest.txt");
    require(bool(is), ErrorCode::NotFound, "no dataset manifest in '" + dir + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        std::string value = line.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        kv[key] = value;
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        require(it != kv.end(), ErrorCode::Io, "manifest missing key '" + key + "'");
        return it->second;
    };

    Dataset ds;
    const int count = std::stoi(get("count"));
    require(count > 0, ErrorCode::Io, "manifest count must be positive");
    ds.num_actions = std::stoi(get("K"));
    ds.seed = std::stoull(get("seed"));
    ds.policy_kind = get("policy_kind");
    ds.env.width = std::stoi(get("W"));
    ds.env.height = std::stoi(get("H"));
    ds.env.num_actions = ds.num_actions;
    ds.env.num_beacons = std::stoi(get("env_num_beacons"));
    ds.env.beacon_size = std::stoi(get("env_beacon_size"));
    ds.env.background = std::stof(get("env_background"));
    ds.env.intensity_min = std::stof(get("env_intensity_min"));
    ds.env.intensity_max = std::stof(get("env_intensity_max"));
    ds.env.gate_sharpness = std::stof(get("env_gate_sharpness"));
    ds.env.gain = std::stof(get("env_gain"));
    ds.env.discount = std::stof(get("env_discount"));
    ds.train_idx = parse_indices(get("train_indices"));
    ds.valid_idx = parse_indices(get("valid_indices"));
    ds.test_idx = parse_indices(get("test_indices"));

    std::vector<std::uint32_t> actions(static_cast<std::size_t>(count));
    {
        std::ifstream as(root / "actions.bin", std::ios::binary);
        require(bool(as), ErrorCode::Io, "missing actions.bin");
        as.read(reinterpret_cast<char*>(actions.data()),
                static_cast<std::streamsize>(actions.size() * sizeof(std::uint32_t)));
        require(bool(as), ErrorCode::Io, "actions.bin truncated");
    }
    ds.records.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Demonstration rec;
        rec.state = numeric::load_tensor((root / record_name(i, "state")).string());
        Tensor dist = numeric::load_tensor((root / record_name(i, "dist")).string());
        require(dist.numel() == ds.num_actions, ErrorCode::Io, "record distribution size mismatch");
        rec.action_dist = dist.data();
        rec.action = static_cast<int>(actions[static_cast<std::size_t>(i)]);
        require(rec.action == argmax_action(rec.action_dist), ErrorCode::Io,
                "record action disagrees with its distribution (corrupt dataset)");
        ds.records[static_cast<std::size_t>(i)] = std::move(rec);
    }
    const std::size_t total =
        ds.train_idx.size() + ds.valid_idx.size() + ds.test_idx.size();
    require(total == static_cast<std::size_t>(count), ErrorCode::Io,
            "split indices do not cover the dataset");
    return ds;
}

BeaconState regenerate_record(const BeaconWorld& world, const Dataset& dataset, int index) {
    require(index >= 0 && index < dataset.count(), ErrorCode::InvalidArgument,
            "record index out of range");
    return world.generate(dataset.seed, index);
}

}  // namespace masklab::worlds
