#include "ssnet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <system_error>

namespace ssnet {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const std::uint8_t c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space_and_comments();
    const std::size_t start = token_start_ = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1u << 24) throw FormatError(std::string("PNM ") + field + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PNM header: expected ") + field, start);
    return v;
  }

  std::size_t pos() const { return pos_; }
  /// Where the most recent number began.
  std::size_t token_start() const { return token_start_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  std::size_t token_start_ = 0;
};

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

}  // namespace

Image8 decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file (expected magic P5 or P6)", 0);
  }
  Image8 img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader r(bytes);
  r.advance(2);
  if (r.pos() >= bytes.size() || !is_space(bytes[r.pos()])) {
    throw FormatError("PNM header: expected whitespace after magic", r.pos());
  }
  img.width = r.number("width");
  const std::size_t width_at = r.token_start();
  img.height = r.number("height");
  const std::size_t height_at = r.token_start();
  const std::size_t maxval = r.number("maxval");
  const std::size_t maxval_at = r.token_start();
  if (img.width == 0) throw FormatError("PNM width must be >= 1", width_at);
  if (img.height == 0) throw FormatError("PNM height must be >= 1", height_at);
  if (maxval != 255) throw FormatError("PNM maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (r.pos() >= bytes.size() || !is_space(bytes[r.pos()])) {
    throw FormatError("PNM header: expected a single whitespace byte before the payload", r.pos());
  }
  r.advance(1);
  const std::size_t payload = img.width * img.height * img.channels;
  if (bytes.size() - r.pos() != payload) {
    throw FormatError("PNM payload has " + std::to_string(bytes.size() - r.pos()) + " bytes, expected " +
                          std::to_string(payload),
                      r.pos());
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("PNM images have 1 or 3 channels");
  if (img.width == 0 || img.height == 0) throw std::invalid_argument("PNM dimensions must be >= 1");
  if (img.pixels.size() != img.width * img.height * img.channels) {
    throw std::invalid_argument("PNM pixel buffer does not match its dimensions");
  }
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

Image8 read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_pnm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

void write_pnm(const std::filesystem::path& path, const Image8& img) { write_file_atomic(path, encode_pnm(img)); }

TensorF image_to_tensor(const Image8& img) {
  TensorF t({img.channels, img.height, img.width});
  const std::size_t plane = img.width * img.height;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < img.channels; ++c)
      t[c * plane + i] = static_cast<float>(img.pixels[i * img.channels + c]) / 255.0f;
  return t;
}

Image8 tensor_to_image(const TensorF& t) {
  if (t.rank() != 3 || (t.dim(0) != 1 && t.dim(0) != 3)) {
    throw ShapeError("tensor_to_image: expected [1,H,W] or [3,H,W], got " + shape_str(t.shape()));
  }
  Image8 img{t.dim(2), t.dim(1), t.dim(0), {}};
  const std::size_t plane = img.width * img.height;
  img.pixels.resize(plane * img.channels);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < img.channels; ++c) {
      const float v = std::clamp(t[c * plane + i], 0.0f, 1.0f);
      img.pixels[i * img.channels + c] = static_cast<std::uint8_t>(std::lround(255.0f * v));
    }
  return img;
}

}  // namespace ssnet
