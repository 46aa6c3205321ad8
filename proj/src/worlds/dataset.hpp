#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "worlds/beacon.hpp"
#include "worlds/policy.hpp"
#include "worlds/state.hpp"

namespace masklab::worlds {

// One expert demonstration: the state, the expert's action distribution,
// and the greedy action (always argmax of the distribution).
struct Demonstration {
    numeric::Tensor state;  // [1,H,W]
    int action = 0;
    std::vector<float> action_dist;
};

struct Dataset {
    std::vector<Demonstration> records;
    std::vector<int> train_idx, valid_idx, test_idx;
    std::uint64_t seed = 0;
    int num_actions = 0;
    BeaconConfig env;         // provenance; lets callers rebuild the expert
    std::string policy_kind;  // "analytic-beacon" or "tiny-cnn"

    int count() const { return static_cast<int>(records.size()); }
    int height() const { return records.at(0).state.dim(1); }
    int width() const { return records.at(0).state.dim(2); }
};

// Samples n states from the world, labels them with the policy, and computes
// a seeded 80/10/10 split. Requires n >= 10.
Dataset collect_demonstrations(const Policy& policy, const BeaconWorld& world, int n,
                               std::uint64_t seed);

// Seeded shuffle split: 80% train, 10% valid, remainder test.
void assign_split(Dataset& dataset, std::uint64_t seed);

// Directory layout: manifest.txt (key: value lines incl. split indices),
// NNNNNN_state.vmt / NNNNNN_dist.vmt tensor pairs, actions.bin (u32 LE).
void save_dataset(const Dataset& dataset, const std::string& dir, bool force);
Dataset load_dataset(const std::string& dir);

// Reconstructs the ground-truth annotations of record `index` (states are
// generated deterministically from (seed, index), so this is exact).
BeaconState regenerate_record(const BeaconWorld& world, const Dataset& dataset, int index);

}  // namespace masklab::worlds
