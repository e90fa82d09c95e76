#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "mdsm/energy_net.hpp"

namespace mdsm {

// Binary layout, all integers little-endian:
//   "MDSM1"                       5 bytes
//   header length                 u32
//   header                        UTF-8 JSON {config, step, manifest:[{name, shape}], net}
//   payload                       f64 values in manifest order
//   checksum                      u64 FNV-1a over the payload bytes
struct Checkpoint {
    EnergyNet net;
    std::uint64_t step = 0;
    nlohmann::json config;  // echo of the run configuration
};

[[nodiscard]] std::vector<std::uint8_t> encode_checkpoint(const EnergyNet& net, std::uint64_t step,
                                                          const nlohmann::json& config);
// Throws FormatError for a malformed file, CorruptionError when the checksum
// does not match and CompatibilityError when the manifest disagrees with the
// network configuration in the header.
[[nodiscard]] Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const EnergyNet& net, std::uint64_t step,
                     const nlohmann::json& config);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

[[nodiscard]] std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

[[nodiscard]] nlohmann::json net_config_to_json(const NetConfig& config);
[[nodiscard]] NetConfig net_config_from_json(const nlohmann::json& j);

}  // namespace mdsm
