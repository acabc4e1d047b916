#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "neurotube/adam.hpp"
#include "neurotube/unet.hpp"

namespace neurotube {

using Fingerprint = std::array<std::uint8_t, 32>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialized model state.
///
/// Wire layout (little-endian): magic "CKPT", u32 version, 32-byte
/// fingerprint (SHA-256 of canonical_config_text), u32 tensor count, then per
/// tensor: u32 name length, name bytes, u32 rank, rank x u32 dims, f32
/// payload. Configs and optimizer scalars travel as reserved "meta.*"
/// tensors; ADAM moments as "adam.m.<param>" / "adam.v.<param>".
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  UNetConfig unet;
  std::optional<AuxHeadConfig> aux;
  ParamStore params;
  std::optional<AdamState> adam;  // moments follow params' name order

  Fingerprint fingerprint() const;
};

std::string canonical_config_text(const UNetConfig& unet, const std::optional<AuxHeadConfig>& aux);
Fingerprint config_fingerprint(const std::string& canonical_text);
std::string fingerprint_hex(const Fingerprint& fp);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds a fresh U-Net for `target` from `seed` and overwrites its encoder
/// and bottleneck with the pretrained tensors. Decoder and head keep their
/// fresh init; any aux head is dropped. Throws TransferError naming every
/// differing encoder field.
ParamStore transfer_encoder(const Checkpoint& pretrained, const UNetConfig& target,
                            std::uint64_t seed);
ParamStore transfer_encoder(const Checkpoint& pretrained, const UNetConfig& target,
                            ParamStore fresh);

/// Deep copy of every tensor.
ParamStore clone_params(const ParamStore& params);

}  // namespace neurotube
