#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "ssnet/blocks.hpp"
#include "ssnet/priors.hpp"

namespace ssnet {

struct SSNetConfig {
  std::size_t height = 256;
  std::size_t width = 256;
  std::size_t base_channels = 8;   // backbone C
  std::size_t decoder_width = 16;  // D
  std::size_t state_dim = 64;      // N
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when H or W is not a multiple of 32, a
  /// dimension is zero, or D is not divisible by the CBAM reduction ratio.
  void validate() const;
};

/// Parses `key = value` lines (keys H, W, C, D, N, seed). Blank lines and
/// lines starting with '#' are ignored; unknown keys are rejected.
SSNetConfig parse_config(const std::string& text);
SSNetConfig load_config(const std::filesystem::path& path);
std::string format_config(const SSNetConfig& cfg);

/// Named parameter tensors, ordered by name.
class SSNetWeights {
 public:
  using Map = std::map<std::string, TensorF>;

  void set(const std::string& name, TensorF t) { tensors_[name] = std::move(t); }
  const TensorF& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  const Map& tensors() const { return tensors_; }
  Map& tensors() { return tensors_; }

  friend bool operator==(const SSNetWeights& a, const SSNetWeights& b) { return a.tensors_ == b.tensors_; }

 private:
  Map tensors_;
};

/// Structured parameters of the whole network.
struct SSNetModel {
  BackboneParams rgb_backbone;
  BackboneParams depth_backbone;
  SEMParams rgb_sem;
  SEMParams depth_sem;
  M2DMParams decoder;
  RMParams reconstruction;
};

template <typename V>
void visit(SSNetModel& m, V& v) {
  visit(m.rgb_backbone, "backbone_rgb", v);
  visit(m.depth_backbone, "backbone_depth", v);
  visit(m.rgb_sem, "sem_rgb", v);
  visit(m.depth_sem, "sem_depth", v);
  visit(m.decoder, "m2dm", v);
  visit(m.reconstruction, "rm", v);
}

/// Zero-initialized model with the architecture implied by `cfg`.
SSNetModel build_model(const SSNetConfig& cfg);

SSNetWeights model_to_weights(const SSNetModel& model);

/// Throws ShapeError naming the tensor when one is missing or misshapen, and
/// when the weights contain names the architecture does not use.
SSNetModel model_from_weights(const SSNetConfig& cfg, const SSNetWeights& weights);

/// Glorot-uniform convolutions, identity BN, S6 state matrix A[d,n] = -(n+1)
/// and softplus(b_delta) in [1e-3, 1e-1]. Deterministic in `seed`.
SSNetWeights init_weights(const SSNetConfig& cfg, std::uint64_t seed);

/// Every intermediate of one forward pass.
struct ForwardTrace {
  PriorSet priors;
  FeaturePyramid rgb_features;
  FeaturePyramid depth_features;
  FeaturePyramid rgb_enhanced;
  FeaturePyramid depth_enhanced;
  FeaturePyramid decoded;  // f_m, index 0 finest
  TensorF head_input;      // RM features before the final 1x1 conv
  TensorF saliency;        // P, [1,H,W]
};

class SSNet {
 public:
  SSNet(SSNetConfig cfg, const SSNetWeights& weights);
  SSNet(SSNetConfig cfg, SSNetModel model);

  /// rgb [3,H,W] and enhanced depth [1,H,W], both in [0,1].
  TensorF forward(const TensorF& rgb, const TensorF& depth) const;
  ForwardTrace trace(const TensorF& rgb, const TensorF& depth) const;

  const SSNetConfig& config() const { return cfg_; }
  const SSNetModel& model() const { return model_; }

 private:
  SSNetConfig cfg_;
  SSNetModel model_;
};

TensorF ssnet_forward(const TensorF& rgb, const TensorF& depth, const SSNetWeights& weights,
                      const SSNetConfig& cfg);

}  // namespace ssnet
