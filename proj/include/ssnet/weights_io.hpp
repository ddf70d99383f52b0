#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssnet/image_io.hpp"
#include "ssnet/network.hpp"

// Weights file layout (little-endian, no padding):
//   "SSNW"  u32 version=1  u32 count
//   count x { u32 name_len, name bytes (UTF-8), u8 rank, rank x u32 dims, f32 payload }

namespace ssnet {

inline constexpr std::uint32_t kWeightsVersion = 1;

class WeightsFormatError : public FormatError {
 public:
  enum class Kind { BadMagic, UnsupportedVersion, Truncated, Malformed };

  WeightsFormatError(Kind kind, const std::string& what, std::size_t offset)
      : FormatError(what, offset), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::uint8_t> encode_weights(const SSNetWeights& w);
SSNetWeights decode_weights(const std::vector<std::uint8_t>& bytes);

void save_weights(const SSNetWeights& w, const std::filesystem::path& path);
SSNetWeights load_weights(const std::filesystem::path& path);

}  // namespace ssnet
