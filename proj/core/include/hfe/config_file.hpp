#pragma once

#include <filesystem>
#include <string>

#include "hfe/network.hpp"
#include "hfe/trainer.hpp"

// INI-style `key = value` files with [network], [train] and [finetune]
// sections. Missing keys keep their defaults; unknown keys are rejected.
namespace hfe {

struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

std::string network_config_to_ini(const NetworkConfig& config);
NetworkConfig network_config_from_ini(const std::string& text);
std::string run_config_to_ini(const RunConfig& config);

}  // namespace hfe
