#include "ssnet/weights_io.hpp"

#include <bit>
#include <cstring>
#include <limits>

namespace ssnet {

namespace {

using Kind = WeightsFormatError::Kind;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument(std::string("weights: ") + what + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const std::string& what) const {
    if (bytes_.size() - pos_ < n) {
      throw WeightsFormatError(Kind::Truncated, "weights file truncated while reading " + what, pos_);
    }
  }

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return bytes_[pos_++];
  }

  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  float f32() {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(bits);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const SSNetWeights& w) {
  std::vector<std::uint8_t> out{'S', 'S', 'N', 'W'};
  put_u32(out, kWeightsVersion);
  put_u32(out, narrow_u32(w.size(), "tensor count"));
  for (const auto& [name, t] : w.tensors()) {
    if (t.empty()) throw std::invalid_argument("weights: tensor '" + name + "' is empty");
    if (t.rank() > 255) throw std::invalid_argument("weights: tensor '" + name + "' has rank above 255");
    put_u32(out, narrow_u32(name.size(), "name length"));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, narrow_u32(d, "dimension"));
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

SSNetWeights decode_weights(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SSNW", 4) != 0) {
    throw WeightsFormatError(Kind::BadMagic, "not a weights file (bad magic)", 0);
  }
  r.str(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kWeightsVersion) {
    throw WeightsFormatError(Kind::UnsupportedVersion, "unsupported weights version " + std::to_string(version), 4);
  }
  const std::uint32_t count = r.u32("tensor count");
  SSNetWeights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string idx = "tensor #" + std::to_string(i);
    const std::uint32_t name_len = r.u32(idx + " name length");
    const std::string name = r.str(name_len, idx + " name");
    const std::size_t rank_at = r.pos();
    const std::uint8_t rank = r.u8("rank of tensor '" + name + "'");
    if (rank == 0) throw WeightsFormatError(Kind::Malformed, "tensor '" + name + "' has rank 0", rank_at);
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      const std::size_t dim_at = r.pos();
      d = r.u32("dimensions of tensor '" + name + "'");
      if (d == 0) throw WeightsFormatError(Kind::Malformed, "tensor '" + name + "' has a zero dimension", dim_at);
      if (numel > r.remaining() / d) {
        throw WeightsFormatError(Kind::Truncated, "weights file truncated in payload of tensor '" + name + "'",
                                 r.pos());
      }
      numel *= d;
    }
    if (numel > r.remaining() / 4) {
      throw WeightsFormatError(Kind::Truncated, "weights file truncated in payload of tensor '" + name + "'",
                               r.pos());
    }
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32();
    if (w.contains(name)) {
      throw WeightsFormatError(Kind::Malformed, "duplicate tensor name '" + name + "'", rank_at);
    }
    w.set(name, TensorF(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) {
    throw WeightsFormatError(Kind::Malformed, "trailing bytes after the last tensor", r.pos());
  }
  return w;
}

void save_weights(const SSNetWeights& w, const std::filesystem::path& path) {
  write_file_atomic(path, encode_weights(w));
}

SSNetWeights load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

}  // namespace ssnet
