#pragma once

#include <string>

#include "midt/graph.hpp"

namespace midt {

// Checkpoint = JSON manifest at `path` (names, shapes, per-parameter blob
// offsets, format version, config hash) + `path`.bin with the values as
// little-endian 32-bit floats in manifest order. Values are quantized to
// 32-bit floats at save; optimizer state is not persisted.
void save_checkpoint(const ParameterStore& store, const std::string& path,
                     const std::string& config_hash);

ParameterStore load_checkpoint(const std::string& path, std::string* config_hash = nullptr);

// Applies the same 32-bit quantization a save/load roundtrip applies.
void quantize_to_f32(ParameterStore& store);

}  // namespace midt
