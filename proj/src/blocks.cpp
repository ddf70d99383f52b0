#include "ssnet/blocks.hpp"

#include <stdexcept>

namespace ssnet {

ConvParams make_conv(std::size_t in_c, std::size_t out_c, std::size_t kernel, int stride) {
  if (kernel % 2 == 0) throw ShapeError("make_conv: kernel extent must be odd");
  return ConvParams{TensorF({out_c, in_c, kernel, kernel}), TensorF({out_c}), stride,
                    static_cast<int>(kernel / 2)};
}

BnParams make_bn(std::size_t channels) {
  return BnParams{TensorF({channels}, 1.0f), TensorF({channels}), TensorF({channels}), TensorF({channels}, 1.0f)};
}

ConvBnRelu make_conv_bn_relu(std::size_t in_c, std::size_t out_c, std::size_t kernel, int stride) {
  return ConvBnRelu{make_conv(in_c, out_c, kernel, stride), make_bn(out_c)};
}

ConvBlockParams make_conv_block(std::size_t in_c, std::size_t out_c) {
  return ConvBlockParams{make_conv_bn_relu(in_c, out_c, 3), make_conv_bn_relu(out_c, out_c, 3)};
}

CBAMParams make_cbam(std::size_t channels, int reduction) {
  if (reduction < 1 || channels % static_cast<std::size_t>(reduction) != 0) {
    throw ShapeError("CBAM reduction ratio " + std::to_string(reduction) + " does not divide " +
                     std::to_string(channels) + " channels");
  }
  const std::size_t hidden = channels / static_cast<std::size_t>(reduction);
  return CBAMParams{reduction,
                    TensorF({hidden, channels}),
                    TensorF({hidden}),
                    TensorF({channels, hidden}),
                    TensorF({channels}),
                    make_conv(2, 1, kCbamSpatialKernel)};
}

S6ParamsF make_s6(std::size_t channels, std::size_t state_dim) {
  const std::size_t D = channels, N = state_dim;
  return S6ParamsF{TensorF({D, N}), TensorF({D}, 1.0f), TensorF({D, N}), TensorF({D, N}), TensorF({D, D}),
                   TensorF({D})};
}

SGFBParams make_sgfb(std::size_t channels, std::size_t state_dim) {
  return SGFBParams{make_conv(channels, channels, 1), make_s6(channels, state_dim), make_s6(channels, state_dim),
                    make_conv(2 * channels, channels, 1)};
}

CGFBParams make_cgfb(std::size_t channels, std::size_t state_dim) {
  return CGFBParams{make_conv(channels, channels, 1), make_conv(channels, channels, 1),
                    make_s6(channels, state_dim), make_s6(channels, state_dim),
                    make_conv(2 * channels, channels, 1)};
}

SMDBParams make_smdb(std::size_t channels, std::size_t state_dim) {
  return SMDBParams{make_bn(channels), make_sgfb(channels, state_dim), make_cbam(channels), make_bn(channels),
                    make_conv_block(channels, channels)};
}

CMDBParams make_cmdb(std::size_t channels, std::size_t state_dim) {
  return CMDBParams{make_bn(channels),
                    make_bn(channels),
                    make_cgfb(channels, state_dim),
                    make_cgfb(channels, state_dim),
                    make_cbam(channels),
                    make_cbam(channels),
                    make_conv(2 * channels, channels, 1),
                    make_bn(channels),
                    make_conv_block(channels, channels)};
}

SEBParams make_seb(std::size_t channels) {
  return SEBParams{{make_cbam(channels), make_cbam(channels), make_cbam(channels)}};
}

SEMParams make_sem(std::size_t channels) {
  return SEMParams{{make_seb(channels), make_seb(channels), make_seb(channels), make_seb(channels)}};
}

M2DBParams make_m2db(std::size_t channels, std::size_t state_dim) {
  return M2DBParams{make_conv_block(channels, channels), make_conv_block(channels, channels),
                    make_smdb(channels, state_dim),       make_smdb(channels, state_dim),
                    make_cmdb(channels, state_dim),       make_smdb(channels, state_dim)};
}

M2DMParams make_m2dm(std::size_t channels, std::size_t state_dim) {
  return M2DMParams{{make_m2db(channels, state_dim), make_m2db(channels, state_dim),
                     make_m2db(channels, state_dim), make_m2db(channels, state_dim)}};
}

RMParams make_rm(std::size_t channels) {
  return RMParams{make_conv_block(channels, channels), make_conv_block(channels, channels),
                  make_conv(channels, 1, 1)};
}

BackboneParams make_backbone(std::size_t base_channels, std::size_t width) {
  const std::size_t c = base_channels;
  BackboneParams p;
  p.stem1 = make_conv_bn_relu(3, c, 3, 2);
  p.stem2 = make_conv_bn_relu(c, c, 3, 2);
  p.stages = {make_conv_bn_relu(c, c, 3, 1), make_conv_bn_relu(c, 2 * c, 3, 2),
              make_conv_bn_relu(2 * c, 4 * c, 3, 2), make_conv_bn_relu(4 * c, 8 * c, 3, 2)};
  p.proj = {make_conv(c, width, 1), make_conv(2 * c, width, 1), make_conv(4 * c, width, 1),
            make_conv(8 * c, width, 1)};
  return p;
}

TensorF conv_bn_relu_forward(const TensorF& x, const ConvBnRelu& p) {
  return relu(batch_norm(conv2d(x, p.conv), p.bn));
}

TensorF conv_block_forward(const TensorF& x, const ConvBlockParams& p) {
  return conv_bn_relu_forward(conv_bn_relu_forward(x, p.first), p.second);
}

namespace {

// W [out,in] * v [in] + b [out]
TensorF dense(const TensorF& v, const TensorF& w, const TensorF& b) {
  if (w.rank() != 2 || w.dim(1) != v.size() || b.size() != w.dim(0)) {
    throw ShapeError("dense layer weight " + shape_str(w.shape()) + " does not match input of " +
                     std::to_string(v.size()) + " features");
  }
  TensorF out = b;
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) out[i] += w.at(i, j) * v[j];
  return out;
}

}  // namespace

TensorF cbam_forward(const TensorF& x, const CBAMParams& p) {
  if (x.rank() != 3) throw ShapeError("cbam: input must be [C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.dim(0);
  if (p.reduction < 1 || c % static_cast<std::size_t>(p.reduction) != 0) {
    throw ShapeError("cbam: reduction ratio " + std::to_string(p.reduction) + " does not divide " +
                     std::to_string(c) + " channels");
  }
  auto mlp = [&](const TensorF& v) { return dense(relu(dense(v, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias); };
  const TensorF channel_gate = sigmoid(add(mlp(global_avg_pool(x)), mlp(global_max_pool(x))));
  const TensorF refined = scale_channels(x, channel_gate);
  const TensorF pooled = concat_channels(channel_mean(refined), channel_max(refined));
  const TensorF spatial_gate = sigmoid(conv2d(pooled, p.spatial));
  return scale_positions(refined, spatial_gate);
}

TensorF sgfb_forward(const TensorF& x, const SGFBParams& p, ScanBackend backend) {
  const TensorF seq = im2seq(conv2d(x, p.in_proj));
  const TensorF scanned = bidirectional_s6(seq, p.forward, p.reverse, backend);
  return conv2d(seq2im(scanned, x.dim(1), x.dim(2)), p.out_proj);
}

TensorF cgfb_forward(const TensorF& x, const TensorF& y, const CGFBParams& p, ScanBackend backend) {
  if (x.shape() != y.shape()) {
    throw ShapeError("cgfb: modality shapes differ " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  const TensorF sx = im2seq(conv2d(x, p.proj_x));
  const TensorF sy = im2seq(conv2d(y, p.proj_y));
  const TensorF scanned = bidirectional_cm_s6(sx, sy, p.forward, p.reverse, backend);
  return conv2d(seq2im(scanned, x.dim(1), x.dim(2)), p.out_proj);
}

TensorF smdb_forward(const TensorF& x, const SMDBParams& p) {
  const TensorF u = add(x, cbam_forward(sgfb_forward(batch_norm(x, p.bn_in), p.sgfb), p.cbam));
  return add(u, conv_block_forward(batch_norm(u, p.bn_mid), p.cb));
}

std::pair<TensorF, TensorF> cmdb_branches(const TensorF& x, const TensorF& y, const CMDBParams& p) {
  if (x.shape() != y.shape()) {
    throw ShapeError("cmdb: modality shapes differ " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  const TensorF nx = batch_norm(x, p.bn_x);
  const TensorF ny = batch_norm(y, p.bn_y);
  TensorF xr = add(x, cbam_forward(cgfb_forward(nx, ny, p.cgfb_x), p.cbam_x));
  TensorF yr = add(y, cbam_forward(cgfb_forward(ny, nx, p.cgfb_y), p.cbam_y));
  return {std::move(xr), std::move(yr)};
}

TensorF cmdb_forward(const TensorF& x, const TensorF& y, const CMDBParams& p) {
  const auto [xr, yr] = cmdb_branches(x, y, p);
  const TensorF z = conv2d(concat_channels(xr, yr), p.fuse);
  return add(z, conv_block_forward(batch_norm(z, p.bn_mid), p.cb));
}

TensorF seb_forward(const TensorF& f, const PriorSet& priors, const SEBParams& p) {
  if (f.rank() != 3) throw ShapeError("seb: feature must be [C,H,W], got " + shape_str(f.shape()));
  const std::array<const TensorF*, 3> maps{&priors.S1, &priors.S2, &priors.S3};
  TensorF out = f;
  for (std::size_t i = 0; i < 3; ++i) {
    const TensorF prior = bilinear_resize(*maps[i], f.dim(1), f.dim(2));
    out = add(out, cbam_forward(scale_positions(f, prior), p.cbam[i]));
  }
  return out;
}

FeaturePyramid sem_forward(const FeaturePyramid& features, const PriorSet& priors, const SEMParams& p) {
  FeaturePyramid out;
  for (std::size_t s = 0; s < 4; ++s) out[s] = seb_forward(features[s], priors, p.seb[s]);
  return out;
}

TensorF m2db_forward(const TensorF& fx, const TensorF& fy, const std::optional<TensorF>& higher,
                     const M2DBParams& p) {
  const TensorF a = smdb_forward(conv_block_forward(fx, p.cb_x), p.smdb_x);
  const TensorF b = smdb_forward(conv_block_forward(fy, p.cb_y), p.smdb_y);
  TensorF c = cmdb_forward(a, b, p.cmdb);
  if (higher) {
    if (higher->rank() != 3 || higher->dim(0) != c.dim(0)) {
      throw ShapeError("m2db: higher-scale feature " + shape_str(higher->shape()) + " does not match width " +
                       std::to_string(c.dim(0)));
    }
    c = add(c, bilinear_resize(*higher, c.dim(1), c.dim(2)));
  }
  return smdb_forward(c, p.smdb_out);
}

FeaturePyramid m2dm_forward(const FeaturePyramid& fx, const FeaturePyramid& fy, const M2DMParams& p) {
  FeaturePyramid fm;
  fm[3] = m2db_forward(fx[3], fy[3], std::nullopt, p.blocks[3]);
  for (std::size_t s = 3; s-- > 0;) fm[s] = m2db_forward(fx[s], fy[s], fm[s + 1], p.blocks[s]);
  return fm;
}

TensorF rm_features(const TensorF& fm1, const RMParams& p) {
  TensorF t = conv_block_forward(fm1, p.cb1);
  t = bilinear_resize(t, 2 * t.dim(1), 2 * t.dim(2));
  t = conv_block_forward(t, p.cb2);
  return bilinear_resize(t, 2 * t.dim(1), 2 * t.dim(2));
}

TensorF rm_forward(const TensorF& fm1, const RMParams& p) {
  return sigmoid(conv2d(rm_features(fm1, p), p.head));
}

FeaturePyramid backbone_forward(const TensorF& img, const BackboneParams& p) {
  if (img.rank() != 3 || img.dim(0) != 3) {
    throw ShapeError("backbone: image must be [3,H,W], got " + shape_str(img.shape()));
  }
  TensorF t = conv_bn_relu_forward(conv_bn_relu_forward(img, p.stem1), p.stem2);
  FeaturePyramid out;
  for (std::size_t s = 0; s < 4; ++s) {
    t = conv_bn_relu_forward(t, p.stages[s]);
    out[s] = conv2d(t, p.proj[s]);
  }
  return out;
}

}  // namespace ssnet
