#pragma once

#include "flowseg/flow.hpp"
#include "flowseg/net.hpp"

#include <cstdint>
#include <filesystem>

namespace flowseg {

struct Checkpoint {
  VelocityNetParams params;
  TrainingConfig training;
  std::int64_t iteration = 0;
};

// Layout: magic "FMCKPT1\0" | u64 little-endian header length | JSON header
// (configs, iteration, parameter manifest, blob byte count) | parameter blob
// of 64-bit little-endian doubles in manifest order. save -> load -> save is
// byte-identical.
void save_checkpoint(const std::filesystem::path& path, const VelocityNetParams& params,
                     const TrainingConfig& training, std::int64_t iteration);

// Validates magic, format version, manifest-vs-blob byte count, and the
// parameter layout before constructing anything.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowseg
