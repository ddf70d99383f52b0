#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssnet/tensor.hpp"

namespace ssnet {

/// Malformed image or weights file. `offset` is the byte position where
/// parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }
  /// The message without the offset suffix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit image, interleaved channels (1 = PGM, 3 = PPM).
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Binary PGM (P5) / PPM (P6) with maxval 255. Header comments are allowed.
Image8 decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const Image8& img);

Image8 read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image8& img);

/// Values v / 255 as a planar [channels,H,W] tensor.
TensorF image_to_tensor(const Image8& img);

/// round(255 * clamp(v, 0, 1)); tensor must be [1,H,W] or [3,H,W].
Image8 tensor_to_image(const TensorF& t);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace ssnet
