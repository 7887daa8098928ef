// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "seqdx/model.hpp"

namespace seqdx {

/// Optimizer-side training progress stored alongside the model (plain SGD
/// carries no moments; the epoch counter is what resuming needs to replay
/// the per-epoch random substreams from the right index).
struct TrainProgress {
    std::uint32_t epochs_completed = 0;

    bool operator==(const TrainProgress&) const = default;
};

struct Checkpoint {
    Model model;
    TrainProgress progress;
};

/// Portable little-endian binary format:
///   magic "SQDX" | u16 version | config | u32 param count |
///   per parameter: u32 name length, name bytes, u32 rank, u32 dims[rank],
///   f32 data (row-major) | u32 epochs_completed
/// Round-trips are bit-exact.
void save_checkpoint(const Model& model, const TrainProgress& progress, const std::string& path);

/// Validates magic, version, config consistency and the full parameter
/// chain; corrupt or truncated files raise CheckpointError with the offset.
Checkpoint load_checkpoint(const std::string& path);

inline constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace seqdx
