#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "ssnet/blocks.hpp"
#include "ssnet/priors.hpp"

using namespace ssnet;

namespace {

PriorSet flat_priors(std::size_t h, std::size_t w, float v) {
  PriorSet p;
  p.S1 = TensorF({1, h, w}, v);
  p.S2 = TensorF({1, h, w}, v);
  p.S3 = TensorF({1, h, w}, v);
  return p;
}

template <typename P>
P randomized(P params, std::uint64_t seed) {
  Rng rng(seed);
  init_params(params, rng);
  return params;
}

double sig(double v) { return 1 / (1 + std::exp(-v)); }

}  // namespace

TEST_CASE("CBAM with zero weights halves twice") {
  Rng rng(61);
  const TensorF x = rng.normal_tensor<float>({8, 5, 6});
  const TensorF y = cbam_forward(x, make_cbam(8));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i] / 4));
}

TEST_CASE("CBAM matches a direct evaluation") {
  Rng rng(62);
  const TensorF x = rng.normal_tensor<float>({4, 6, 5});
  const CBAMParams p = randomized(make_cbam(4), 63);
  const TensorF y = cbam_forward(x, p);
  const std::size_t C = 4, H = 6, W = 5, R = 1;
  auto mlp = [&](const std::vector<double>& v) {
    std::vector<double> hidden(R), out(C);
    for (std::size_t r = 0; r < R; ++r) {
      double s = p.fc1_bias[r];
      for (std::size_t c = 0; c < C; ++c) s += p.fc1_weight.at(r, c) * v[c];
      hidden[r] = std::max(0.0, s);
    }
    for (std::size_t c = 0; c < C; ++c) {
      double s = p.fc2_bias[c];
      for (std::size_t r = 0; r < R; ++r) s += p.fc2_weight.at(c, r) * hidden[r];
      out[c] = s;
    }
    return out;
  };
  std::vector<double> avg(C, 0), mx(C, -1e30);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H * W; ++i) {
      avg[c] += x[c * H * W + i] / double(H * W);
      mx[c] = std::max(mx[c], double(x[c * H * W + i]));
    }
  const auto ma = mlp(avg), mm = mlp(mx);
  TensorF refined(x.shape());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H * W; ++i) refined[c * H * W + i] = float(x[c * H * W + i] * sig(ma[c] + mm[c]));
  TensorF pooled({2, H, W});
  for (std::size_t i = 0; i < H * W; ++i) {
    double s = 0, m = -1e30;
    for (std::size_t c = 0; c < C; ++c) {
      s += refined[c * H * W + i];
      m = std::max(m, double(refined[c * H * W + i]));
    }
    pooled[i] = float(s / C);
    pooled[H * W + i] = float(m);
  }
  const TensorF gate = oracle::conv2d(pooled, p.spatial.weight, p.spatial.bias, 1, 3);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H * W; ++i)
      CHECK(y[c * H * W + i] == doctest::Approx(refined[c * H * W + i] * sig(gate[i])).epsilon(1e-4));
}

TEST_CASE("CBAM rejects a reduction that does not divide the channels") {
  CHECK_THROWS_AS(make_cbam(6, 4), ShapeError);
  Rng rng(64);
  CHECK_THROWS_AS(cbam_forward(rng.normal_tensor<float>({6, 3, 3}), make_cbam(8)), ShapeError);
}

TEST_CASE("SEB adds one attention term per prior") {
  Rng rng(65);
  const TensorF f = rng.normal_tensor<float>({8, 4, 4});
  const SEBParams p = make_seb(8);
  // Zero weights: every CBAM quarters its input, priors all one.
  const TensorF ones = seb_forward(f, flat_priors(16, 16, 1.0f), p);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(ones[i] == doctest::Approx(f[i] * 1.75f));
  const TensorF zeros = seb_forward(f, flat_priors(16, 16, 0.0f), p);
  CHECK(max_abs_diff(zeros, f) == 0.0f);
}

TEST_CASE("zero-weight SMDB is the identity") {
  Rng rng(66);
  const TensorF x = rng.normal_tensor<float>({4, 4, 4});
  CHECK(max_abs_diff(smdb_forward(x, make_smdb(4, 3)), x) < 1e-6f);
}

TEST_CASE("SGFB is projection, bidirectional scan over raster order, projection") {
  Rng rng(67);
  const TensorF x = rng.normal_tensor<float>({4, 3, 5});
  const SGFBParams p = randomized(make_sgfb(4, 3), 68);
  const TensorF seq = im2seq(conv2d(x, p.in_proj));
  const TensorF fwd = s6_forward(seq, p.forward, ScanBackend::Sequential);
  const TensorF rev = flip_seq(s6_forward(flip_seq(seq), p.reverse, ScanBackend::Sequential));
  const TensorF want = conv2d(seq2im(concat_features(fwd, rev), 3, 5), p.out_proj);
  CHECK(max_abs_diff(sgfb_forward(x, p), want) < 1e-5f);
}

TEST_CASE("CMDB treats the two modalities symmetrically") {
  Rng rng(69);
  const TensorF x = rng.normal_tensor<float>({4, 4, 4}), y = rng.normal_tensor<float>({4, 4, 4});
  const CMDBParams p = randomized(make_cmdb(4, 3), 70);
  CMDBParams swapped = p;
  std::swap(swapped.bn_x, swapped.bn_y);
  std::swap(swapped.cgfb_x, swapped.cgfb_y);
  std::swap(swapped.cbam_x, swapped.cbam_y);
  const auto [xa, ya] = cmdb_branches(x, y, p);
  const auto [yb, xb] = cmdb_branches(y, x, swapped);
  CHECK(xa == xb);
  CHECK(ya == yb);
  CHECK_THROWS_AS(cmdb_branches(x, TensorF({4, 4, 5}), p), ShapeError);
}

TEST_CASE("CGFB depends on both modalities") {
  Rng rng(71);
  const TensorF x = rng.normal_tensor<float>({4, 4, 4}), y = rng.normal_tensor<float>({4, 4, 4});
  const CGFBParams p = randomized(make_cgfb(4, 3), 72);
  const TensorF base = cgfb_forward(x, y, p);
  TensorF x2 = x, y2 = y;
  x2[5] += 1.0f;
  y2[5] += 1.0f;
  CHECK(max_abs_diff(cgfb_forward(x2, y, p), base) > 0.0f);
  CHECK(max_abs_diff(cgfb_forward(x, y2, p), base) > 0.0f);
}

TEST_CASE("RM with zero weights outputs one half at four times the resolution") {
  Rng rng(73);
  const TensorF fm = rng.normal_tensor<float>({8, 5, 6});
  const TensorF p = rm_forward(fm, make_rm(8));
  REQUIRE(p.shape() == Shape{1, 20, 24});
  for (float v : p.data()) CHECK(v == 0.5f);
}

TEST_CASE("backbone and decoder shape contracts") {
  Rng rng(74);
  const BackboneParams bb = randomized(make_backbone(4, 8), 75);
  const TensorF img = rng.uniform_tensor<float>({3, 64, 96}, 0, 1);
  const FeaturePyramid f = backbone_forward(img, bb);
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t stride = std::size_t{4} << s;
    CHECK(f[s].shape() == Shape{8, 64 / stride, 96 / stride});
  }
  const M2DMParams dec = randomized(make_m2dm(8, 4), 76);
  const FeaturePyramid fm = m2dm_forward(f, f, dec);
  for (std::size_t s = 0; s < 4; ++s) CHECK(fm[s].shape() == f[s].shape());
  CHECK(rm_forward(fm[0], make_rm(8)).shape() == Shape{1, 64, 96});
}

TEST_CASE("M2DB adds the resized higher-scale feature") {
  Rng rng(77);
  const M2DBParams p = make_m2db(4, 3);
  const TensorF fx = rng.normal_tensor<float>({4, 4, 4}), fy = rng.normal_tensor<float>({4, 4, 4});
  const TensorF higher = rng.normal_tensor<float>({4, 2, 2});
  // All-zero weights: CB and CMDB give zero, so only the resized higher-scale term survives.
  const TensorF out = m2db_forward(fx, fy, higher, p);
  CHECK(max_abs_diff(out, bilinear_resize(higher, 4, 4)) < 1e-6f);
  CHECK_THROWS_AS(m2db_forward(fx, fy, TensorF({3, 2, 2}), p), ShapeError);
}

TEST_CASE("visitor names are unique and initialization is deterministic") {
  M2DMParams a = make_m2dm(8, 4), b = make_m2dm(8, 4);
  std::set<std::string> names;
  std::size_t count = 0;
  auto collect = [&](const std::string& name, TensorF&, ParamKind) {
    names.insert(name);
    ++count;
  };
  visit(a, "m2dm", collect);
  CHECK(names.size() == count);
  CHECK(names.count("m2dm.m2db1.cmdb.cgfb_x.cms6_fwd.A_log") == 1);
  CHECK(names.count("m2dm.m2db4.smdb_out.sgfb.s6_rev.W_delta") == 1);
  Rng r1(5), r2(5);
  init_params(a, r1);
  init_params(b, r2);
  bool same = true;
  std::vector<TensorF> ta, tb;
  auto grab_a = [&](const std::string&, TensorF& t, ParamKind) { ta.push_back(t); };
  auto grab_b = [&](const std::string&, TensorF& t, ParamKind) { tb.push_back(t); };
  visit(a, "", grab_a);
  visit(b, "", grab_b);
  for (std::size_t i = 0; i < ta.size(); ++i) same = same && ta[i] == tb[i];
  CHECK(same);
}
