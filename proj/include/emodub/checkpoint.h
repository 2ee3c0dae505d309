#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emodub/tensor.h"

namespace emodub {

// "ADPK" checkpoint: magic, u32 version, u64 count, then per parameter a
// u32-length-prefixed UTF-8 name, u32 rows, u32 cols and rows*cols f64
// values, all little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Matrix value;
  bool operator==(const NamedMatrix&) const = default;
};

std::vector<char> encode_checkpoint(const ParameterList& params);
std::vector<NamedMatrix> decode_checkpoint(std::span<const char> bytes);

void save_checkpoint(const ParameterList& params, const std::filesystem::path& path);
std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path);

// Copies values into params by name; every param must be present with the
// same shape (FormatError DimMismatch / BadValue otherwise).
void restore_parameters(const ParameterList& params, const std::vector<NamedMatrix>& entries);

}  // namespace emodub
