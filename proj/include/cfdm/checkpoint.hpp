#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cfdm/net.hpp"
#include "cfdm/tensor.hpp"

namespace cfdm {

// Parameter checkpoint format "CFW1": magic, u32 parameter count, then per
// parameter: u32 name length, UTF-8 name, u32 rank, extents as u32, raw
// little-endian f32 data. Round-trips are bit-exact.

void save_checkpoint(const std::string& path, const ModelParamsF& params);

std::vector<std::pair<std::string, TensorF>> load_checkpoint_entries(const std::string& path);

// Loads a checkpoint and validates it against the structure build_unet
// produces for the given config.
ModelParamsF load_checkpoint(const std::string& path, const NetConfig& cfg);

}  // namespace cfdm
