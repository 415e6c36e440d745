#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "boot/model.hpp"
#include "boot/optimizer.hpp"

namespace boot {

struct Checkpoint {
  ModelParams params;
  TrainState state;
  std::uint64_t manifest_hash = 0;
};

// Layout: "BOOTCKPT1\n", one JSON header line (config, optimizer scalars,
// manifest hash, value counts), then raw little-endian doubles for the
// parameters and both Adam moments.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws std::runtime_error when expected_manifest_hash is given and differs.
Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_manifest_hash = std::nullopt);

}  // namespace boot
