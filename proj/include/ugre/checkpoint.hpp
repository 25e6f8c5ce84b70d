#pragma once
// Named-tensor checkpoint container.
//
// Layout (all integers little-endian):
//   magic "UGRECKPT" | u32 version | u64 config_hash | str stage
//   u32 n_meta  { str key | str value }*
//   u32 n_slots { str name | u8 group | u32 rank | u64 dim* | f64 value* }*
// where str = u32 byte length followed by the bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ugre/numerics.hpp"

namespace ugre {

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::string stage;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<ParamSlot> slots;

  const std::string* meta(const std::string& key) const;
  const ParamSlot* slot(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a 64-bit over arbitrary bytes.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& text);

// Hash of every slot's name and raw values, in order.
std::uint64_t params_hash(std::span<const ParamSlot* const> slots);

}  // namespace ugre
