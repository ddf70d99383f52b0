#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>

#include "ssnet/init.hpp"
#include "ssnet/ops.hpp"
#include "ssnet/priors.hpp"
#include "ssnet/ssm.hpp"

// Network building blocks. Every feature map is [C,H,W] in float.

namespace ssnet {

using ConvParams = Conv2DParams<float>;
using BnParams = BatchNormParams<float>;
using S6ParamsF = S6Params<float>;

inline constexpr int kCbamReduction = 4;
inline constexpr std::size_t kCbamSpatialKernel = 7;

/// conv -> BN -> ReLU
struct ConvBnRelu {
  ConvParams conv;
  BnParams bn;
};

/// CB: two conv3x3 -> BN -> ReLU stages.
struct ConvBlockParams {
  ConvBnRelu first;
  ConvBnRelu second;
};

struct CBAMParams {
  int reduction = kCbamReduction;
  TensorF fc1_weight;  // [C/r, C]
  TensorF fc1_bias;    // [C/r]
  TensorF fc2_weight;  // [C, C/r]
  TensorF fc2_bias;    // [C]
  ConvParams spatial;  // [1, 2, 7, 7], padding 3
};

struct SGFBParams {
  ConvParams in_proj;   // 1x1, C -> C
  S6ParamsF forward;    // raster order
  S6ParamsF reverse;    // flipped order
  ConvParams out_proj;  // 1x1, 2C -> C
};

struct CGFBParams {
  ConvParams proj_x;  // 1x1 on the modality that drives the dynamics
  ConvParams proj_y;  // 1x1 on the scanned modality
  S6ParamsF forward;
  S6ParamsF reverse;
  ConvParams out_proj;
};

struct SMDBParams {
  BnParams bn_in;
  SGFBParams sgfb;
  CBAMParams cbam;
  BnParams bn_mid;
  ConvBlockParams cb;
};

struct CMDBParams {
  BnParams bn_x;
  BnParams bn_y;
  CGFBParams cgfb_x;  // dynamics from x, scans y
  CGFBParams cgfb_y;  // dynamics from y, scans x
  CBAMParams cbam_x;
  CBAMParams cbam_y;
  ConvParams fuse;  // 1x1, 2C -> C
  BnParams bn_mid;
  ConvBlockParams cb;
};

struct SEBParams {
  std::array<CBAMParams, 3> cbam;
};

struct SEMParams {
  std::array<SEBParams, 4> seb;
};

struct M2DBParams {
  ConvBlockParams cb_x;
  ConvBlockParams cb_y;
  SMDBParams smdb_x;
  SMDBParams smdb_y;
  CMDBParams cmdb;
  SMDBParams smdb_out;
};

struct M2DMParams {
  std::array<M2DBParams, 4> blocks;  // index 0 is the finest scale
};

struct RMParams {
  ConvBlockParams cb1;
  ConvBlockParams cb2;
  ConvParams head;  // 1x1, D -> 1
};

/// Desk-scale feature extractor: a stride-4 stem followed by four stages at
/// strides 4, 8, 16, 32 with C, 2C, 4C, 8C channels, each projected to width D.
struct BackboneParams {
  ConvBnRelu stem1;  // 3 -> C, stride 2
  ConvBnRelu stem2;  // C -> C, stride 2
  std::array<ConvBnRelu, 4> stages;
  std::array<ConvParams, 4> proj;
};

using FeaturePyramid = std::array<TensorF, 4>;

// Shape-only constructors; tensors are zero-filled (BN statistics are identity).
ConvParams make_conv(std::size_t in_c, std::size_t out_c, std::size_t kernel, int stride = 1);
BnParams make_bn(std::size_t channels);
ConvBnRelu make_conv_bn_relu(std::size_t in_c, std::size_t out_c, std::size_t kernel, int stride = 1);
ConvBlockParams make_conv_block(std::size_t in_c, std::size_t out_c);
CBAMParams make_cbam(std::size_t channels, int reduction = kCbamReduction);
S6ParamsF make_s6(std::size_t channels, std::size_t state_dim);
SGFBParams make_sgfb(std::size_t channels, std::size_t state_dim);
CGFBParams make_cgfb(std::size_t channels, std::size_t state_dim);
SMDBParams make_smdb(std::size_t channels, std::size_t state_dim);
CMDBParams make_cmdb(std::size_t channels, std::size_t state_dim);
SEBParams make_seb(std::size_t channels);
SEMParams make_sem(std::size_t channels);
M2DBParams make_m2db(std::size_t channels, std::size_t state_dim);
M2DMParams make_m2dm(std::size_t channels, std::size_t state_dim);
RMParams make_rm(std::size_t channels);
BackboneParams make_backbone(std::size_t base_channels, std::size_t width);

// Parameter traversal. `v(name, tensor, kind)` is called for every learnable
// tensor in a fixed order; names are dot-joined paths under `prefix`.
template <typename V>
void visit(ConvParams& p, const std::string& prefix, V& v) {
  v(prefix + ".weight", p.weight, ParamKind::ConvWeight);
  v(prefix + ".bias", p.bias, ParamKind::Bias);
}

template <typename V>
void visit(BnParams& p, const std::string& prefix, V& v) {
  v(prefix + ".gamma", p.gamma, ParamKind::BnGamma);
  v(prefix + ".beta", p.beta, ParamKind::BnBeta);
  v(prefix + ".running_mean", p.running_mean, ParamKind::BnMean);
  v(prefix + ".running_var", p.running_var, ParamKind::BnVar);
}

template <typename V>
void visit(ConvBnRelu& p, const std::string& prefix, V& v) {
  visit(p.conv, prefix + ".conv", v);
  visit(p.bn, prefix + ".bn", v);
}

template <typename V>
void visit(ConvBlockParams& p, const std::string& prefix, V& v) {
  visit(p.first, prefix + ".0", v);
  visit(p.second, prefix + ".1", v);
}

template <typename V>
void visit(CBAMParams& p, const std::string& prefix, V& v) {
  v(prefix + ".fc1.weight", p.fc1_weight, ParamKind::LinearWeight);
  v(prefix + ".fc1.bias", p.fc1_bias, ParamKind::Bias);
  v(prefix + ".fc2.weight", p.fc2_weight, ParamKind::LinearWeight);
  v(prefix + ".fc2.bias", p.fc2_bias, ParamKind::Bias);
  visit(p.spatial, prefix + ".spatial", v);
}

template <typename V>
void visit(S6ParamsF& p, const std::string& prefix, V& v) {
  v(prefix + ".A_log", p.A_log, ParamKind::StateLog);
  v(prefix + ".D_feed", p.D_feed, ParamKind::Feedthrough);
  v(prefix + ".W_B", p.W_B, ParamKind::Projection);
  v(prefix + ".W_C", p.W_C, ParamKind::Projection);
  v(prefix + ".W_delta", p.W_delta, ParamKind::Projection);
  v(prefix + ".b_delta", p.b_delta, ParamKind::DeltaBias);
}

template <typename V>
void visit(SGFBParams& p, const std::string& prefix, V& v) {
  visit(p.in_proj, prefix + ".in_proj", v);
  visit(p.forward, prefix + ".s6_fwd", v);
  visit(p.reverse, prefix + ".s6_rev", v);
  visit(p.out_proj, prefix + ".out_proj", v);
}

template <typename V>
void visit(CGFBParams& p, const std::string& prefix, V& v) {
  visit(p.proj_x, prefix + ".proj_x", v);
  visit(p.proj_y, prefix + ".proj_y", v);
  visit(p.forward, prefix + ".cms6_fwd", v);
  visit(p.reverse, prefix + ".cms6_rev", v);
  visit(p.out_proj, prefix + ".out_proj", v);
}

template <typename V>
void visit(SMDBParams& p, const std::string& prefix, V& v) {
  visit(p.bn_in, prefix + ".bn_in", v);
  visit(p.sgfb, prefix + ".sgfb", v);
  visit(p.cbam, prefix + ".cbam", v);
  visit(p.bn_mid, prefix + ".bn_mid", v);
  visit(p.cb, prefix + ".cb", v);
}

template <typename V>
void visit(CMDBParams& p, const std::string& prefix, V& v) {
  visit(p.bn_x, prefix + ".bn_x", v);
  visit(p.bn_y, prefix + ".bn_y", v);
  visit(p.cgfb_x, prefix + ".cgfb_x", v);
  visit(p.cgfb_y, prefix + ".cgfb_y", v);
  visit(p.cbam_x, prefix + ".cbam_x", v);
  visit(p.cbam_y, prefix + ".cbam_y", v);
  visit(p.fuse, prefix + ".fuse", v);
  visit(p.bn_mid, prefix + ".bn_mid", v);
  visit(p.cb, prefix + ".cb", v);
}

template <typename V>
void visit(SEBParams& p, const std::string& prefix, V& v) {
  for (std::size_t i = 0; i < p.cbam.size(); ++i) visit(p.cbam[i], prefix + ".cbam" + std::to_string(i + 1), v);
}

template <typename V>
void visit(SEMParams& p, const std::string& prefix, V& v) {
  for (std::size_t i = 0; i < p.seb.size(); ++i) visit(p.seb[i], prefix + ".seb" + std::to_string(i + 1), v);
}

template <typename V>
void visit(M2DBParams& p, const std::string& prefix, V& v) {
  visit(p.cb_x, prefix + ".cb_x", v);
  visit(p.cb_y, prefix + ".cb_y", v);
  visit(p.smdb_x, prefix + ".smdb_x", v);
  visit(p.smdb_y, prefix + ".smdb_y", v);
  visit(p.cmdb, prefix + ".cmdb", v);
  visit(p.smdb_out, prefix + ".smdb_out", v);
}

template <typename V>
void visit(M2DMParams& p, const std::string& prefix, V& v) {
  for (std::size_t i = 0; i < p.blocks.size(); ++i) visit(p.blocks[i], prefix + ".m2db" + std::to_string(i + 1), v);
}

template <typename V>
void visit(RMParams& p, const std::string& prefix, V& v) {
  visit(p.cb1, prefix + ".cb1", v);
  visit(p.cb2, prefix + ".cb2", v);
  visit(p.head, prefix + ".head", v);
}

template <typename V>
void visit(BackboneParams& p, const std::string& prefix, V& v) {
  visit(p.stem1, prefix + ".stem1", v);
  visit(p.stem2, prefix + ".stem2", v);
  for (std::size_t i = 0; i < 4; ++i) visit(p.stages[i], prefix + ".stage" + std::to_string(i + 1), v);
  for (std::size_t i = 0; i < 4; ++i) visit(p.proj[i], prefix + ".proj" + std::to_string(i + 1), v);
}

/// Randomizes every tensor of a parameter tree according to its kind.
template <typename P>
void init_params(P& params, Rng& rng) {
  auto fill = [&rng](const std::string&, TensorF& t, ParamKind kind) { init_tensor(t, kind, rng); };
  visit(params, "", fill);
}

// Forward passes.
TensorF conv_bn_relu_forward(const TensorF& x, const ConvBnRelu& p);
TensorF conv_block_forward(const TensorF& x, const ConvBlockParams& p);

/// Channel gate sigmoid(MLP(avg) + MLP(max)), then spatial gate
/// sigmoid(conv7x7([mean_c; max_c])).
TensorF cbam_forward(const TensorF& x, const CBAMParams& p);

TensorF sgfb_forward(const TensorF& x, const SGFBParams& p, ScanBackend backend = ScanBackend::Parallel);

/// Dynamics from x, scanned input y.
TensorF cgfb_forward(const TensorF& x, const TensorF& y, const CGFBParams& p,
                     ScanBackend backend = ScanBackend::Parallel);

/// u = x + CBAM(SGFB(BN(x))); out = u + CB(BN(u))
TensorF smdb_forward(const TensorF& x, const SMDBParams& p);

/// The two residual arms of CMDB before fusion:
///   x' = x + CBAM_x(CGFB_x(BN_x(x), BN_y(y)))
///   y' = y + CBAM_y(CGFB_y(BN_y(y), BN_x(x)))
std::pair<TensorF, TensorF> cmdb_branches(const TensorF& x, const TensorF& y, const CMDBParams& p);

/// z = conv1x1([x'; y']); out = z + CB(BN(z))
TensorF cmdb_forward(const TensorF& x, const TensorF& y, const CMDBParams& p);

/// out = f + sum_i CBAM_i(f * resize(S_i))
TensorF seb_forward(const TensorF& f, const PriorSet& priors, const SEBParams& p);

FeaturePyramid sem_forward(const FeaturePyramid& features, const PriorSet& priors, const SEMParams& p);

/// a = SMDB(CB(fx)), b = SMDB(CB(fy)), c = CMDB(a, b) [+ resize(higher)], out = SMDB(c)
TensorF m2db_forward(const TensorF& fx, const TensorF& fy, const std::optional<TensorF>& higher,
                     const M2DBParams& p);

/// Runs the decoder from the coarsest scale down; returns f_m for every scale
/// (index 0 finest).
FeaturePyramid m2dm_forward(const FeaturePyramid& fx, const FeaturePyramid& fy, const M2DMParams& p);

/// Features entering the RM head: CB -> x2 -> CB -> x2.
TensorF rm_features(const TensorF& fm1, const RMParams& p);

/// Full-resolution saliency map: sigmoid(conv1x1(rm_features(fm1))).
TensorF rm_forward(const TensorF& fm1, const RMParams& p);

/// Projected features at strides 4, 8, 16, 32 (index 0 finest).
FeaturePyramid backbone_forward(const TensorF& img, const BackboneParams& p);

}  // namespace ssnet
