#pragma once

#include <string>

#include "viref/tensor.hpp"

namespace viref {

// Checkpoint file, byte-exact round trip:
//   magic "VRFC", version u32, parameter count u32, then per parameter
//   (sorted by name): name length u32, UTF-8 name, rank u32, dims u32 each,
//   raw little-endian 32-bit floats.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterStore<float>& params,
                     const std::string& path);
ParameterStore<float> load_checkpoint(const std::string& path);

}  // namespace viref
