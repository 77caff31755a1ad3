#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "srlp/dataset.hpp"
#include "srlp/model.hpp"

namespace srlp {

inline constexpr std::string_view kCheckpointMagic = "SRLPCKPT";

/// Layout (all little-endian):
///   "SRLPCKPT"
///   u32 entry count, then per entry: u32 len + key, u32 len + value
///   u32 tensor count, then per tensor: u32 len + name, u32 rank,
///       rank x u32 dims, f64 data in row-major order
/// Model hyperparameters live under "model.*"; anything else in the config
/// block is carried through untouched.
struct Checkpoint {
  ModelParams params;
  std::optional<FactorScaler> scaler;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Validates every tensor's name and shape against the stored model config.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::map<std::string, std::string> model_config_entries(const ModelConfig& config);
ModelConfig model_config_from_entries(const std::map<std::string, std::string>& entries);

}  // namespace srlp
