#include "ssnet/network.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace ssnet {

void SSNetConfig::validate() const {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw std::invalid_argument("config: H and W must be positive multiples of 32, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  if (base_channels == 0 || decoder_width == 0 || state_dim == 0) {
    throw std::invalid_argument("config: C, D and N must be >= 1");
  }
  if (decoder_width % kCbamReduction != 0) {
    throw std::invalid_argument("config: D must be divisible by the CBAM reduction ratio " +
                                std::to_string(kCbamReduction));
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  if (value.empty() || !std::all_of(value.begin(), value.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw std::invalid_argument("config: value of '" + key + "' is not a non-negative integer: '" + value + "'");
  }
  try {
    return std::stoull(value);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("config: value of '" + key + "' is out of range");
  }
}

}  // namespace

SSNetConfig parse_config(const std::string& text) {
  SSNetConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    const std::uint64_t v = parse_uint(key, value);
    if (key == "H") {
      cfg.height = v;
    } else if (key == "W") {
      cfg.width = v;
    } else if (key == "C") {
      cfg.base_channels = v;
    } else if (key == "D") {
      cfg.decoder_width = v;
    } else if (key == "N") {
      cfg.state_dim = v;
    } else if (key == "seed") {
      cfg.seed = v;
    } else {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

SSNetConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const SSNetConfig& cfg) {
  std::ostringstream os;
  os << "H = " << cfg.height << "\nW = " << cfg.width << "\nC = " << cfg.base_channels
     << "\nD = " << cfg.decoder_width << "\nN = " << cfg.state_dim << "\nseed = " << cfg.seed << "\n";
  return os.str();
}

const TensorF& SSNetWeights::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("weights: no tensor named '" + name + "'");
  return it->second;
}

SSNetModel build_model(const SSNetConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.decoder_width, n = cfg.state_dim;
  return SSNetModel{make_backbone(cfg.base_channels, d),
                    make_backbone(cfg.base_channels, d),
                    make_sem(d),
                    make_sem(d),
                    make_m2dm(d, n),
                    make_rm(d)};
}

SSNetWeights model_to_weights(const SSNetModel& model) {
  SSNetModel copy = model;
  SSNetWeights w;
  auto collect = [&w](const std::string& name, TensorF& t, ParamKind) { w.set(name, t); };
  visit(copy, collect);
  return w;
}

SSNetModel model_from_weights(const SSNetConfig& cfg, const SSNetWeights& weights) {
  SSNetModel model = build_model(cfg);
  std::size_t used = 0;
  auto assign = [&](const std::string& name, TensorF& t, ParamKind) {
    if (!weights.contains(name)) throw ShapeError("weights: missing tensor '" + name + "'");
    const TensorF& src = weights.get(name);
    if (src.shape() != t.shape()) {
      throw ShapeError("weights: tensor '" + name + "' has shape " + shape_str(src.shape()) + ", architecture expects " +
                       shape_str(t.shape()));
    }
    t = src;
    ++used;
  };
  visit(model, assign);
  if (used != weights.size()) {
    throw ShapeError("weights: " + std::to_string(weights.size() - used) +
                     " tensors do not belong to the configured architecture");
  }
  return model;
}

SSNetWeights init_weights(const SSNetConfig& cfg, std::uint64_t seed) {
  SSNetModel model = build_model(cfg);
  Rng rng(seed);
  auto fill = [&rng](const std::string&, TensorF& t, ParamKind kind) { init_tensor(t, kind, rng); };
  visit(model, fill);
  return model_to_weights(model);
}

SSNet::SSNet(SSNetConfig cfg, const SSNetWeights& weights)
    : cfg_(cfg), model_(model_from_weights(cfg, weights)) {}

SSNet::SSNet(SSNetConfig cfg, SSNetModel model) : cfg_(cfg), model_(std::move(model)) { cfg_.validate(); }

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string("ssnet_forward [") + name + "]: " + e.what());
  }
}

}  // namespace

ForwardTrace SSNet::trace(const TensorF& rgb, const TensorF& depth) const {
  const Shape rgb_shape{3, cfg_.height, cfg_.width}, depth_shape{1, cfg_.height, cfg_.width};
  if (rgb.shape() != rgb_shape) {
    throw ShapeError("ssnet_forward [input]: RGB image has shape " + shape_str(rgb.shape()) + ", config expects " +
                     shape_str(rgb_shape));
  }
  if (depth.shape() != depth_shape) {
    throw ShapeError("ssnet_forward [input]: depth map has shape " + shape_str(depth.shape()) +
                     ", config expects " + shape_str(depth_shape));
  }
  ForwardTrace t;
  t.priors = stage("priors", [&] { return compute_priors(rgb, depth); });
  t.rgb_features = stage("rgb backbone", [&] { return backbone_forward(rgb, model_.rgb_backbone); });
  t.depth_features = stage("depth backbone", [&] {
    return backbone_forward(repeat_channels(depth, 3), model_.depth_backbone);
  });
  t.rgb_enhanced = stage("rgb SEM", [&] { return sem_forward(t.rgb_features, t.priors, model_.rgb_sem); });
  t.depth_enhanced = stage("depth SEM", [&] { return sem_forward(t.depth_features, t.priors, model_.depth_sem); });
  t.decoded = stage("M2DM", [&] { return m2dm_forward(t.rgb_enhanced, t.depth_enhanced, model_.decoder); });
  t.head_input = stage("RM", [&] { return rm_features(t.decoded[0], model_.reconstruction); });
  t.saliency = stage("RM head", [&] { return sigmoid(conv2d(t.head_input, model_.reconstruction.head)); });
  return t;
}

TensorF SSNet::forward(const TensorF& rgb, const TensorF& depth) const { return trace(rgb, depth).saliency; }

TensorF ssnet_forward(const TensorF& rgb, const TensorF& depth, const SSNetWeights& weights,
                      const SSNetConfig& cfg) {
  return SSNet(cfg, weights).forward(rgb, depth);
}

}  // namespace ssnet
