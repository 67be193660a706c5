#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hfe/network.hpp"
#include "hfe/optim.hpp"

namespace hfe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian binary container shared by model ("HFAE") and high-pass
// network ("HFPH") checkpoints:
//
//   magic[4] | u32 version | u64 len | header text (INI)
//   u32 count | count x { u64 n, c, h, w | f32[n*c*h*w] }
//   u8 has_adam | [f32 lr, beta1, beta2, eps | u64 t | u32 count |
//                  count x { u64 len | f32 m[len] | f32 v[len] }]
//   u64 global_step
struct CheckpointContainer {
  std::string magic;
  std::uint32_t version = kCheckpointVersion;
  std::string header;
  std::vector<Tensor> tensors;
  std::optional<AdamState> adam;
  std::uint64_t step = 0;
};

void write_container(const std::filesystem::path& path,
                     const CheckpointContainer& container);
// Validates magic and version; every failure names the offending field.
CheckpointContainer read_container(const std::filesystem::path& path,
                                   const std::string& expected_magic);

struct LoadedModel {
  ModelParams params;
  std::optional<AdamState> adam;
  std::uint64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params, const AdamState* adam,
                     std::uint64_t step);
LoadedModel load_checkpoint(const std::filesystem::path& path);
// Loads into an existing topology; a different config is a "config" error.
LoadedModel load_checkpoint_for(const std::filesystem::path& path,
                                const NetworkConfig& expected);

}  // namespace hfe
