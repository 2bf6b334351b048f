#pragma once

#include <string>

#include "fgfm/model.hpp"

namespace fgfm {

// Versioned binary checkpoint, little-endian throughout:
//   "FGFM" | u32 format version | serialized ModelConfig |
//   one record per parameter tensor in ModelParameters::all() order,
//   each record = u32 rank, u32 per-axis extents, float32 payload.
// Parameters are stored at float32; loading widens back to float64.

struct Checkpoint {
  ModelConfig config;
  ModelParameters params;
};

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParameters& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fgfm
