#include "ssnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ssnet/loss.hpp"
#include "ssnet/random.hpp"
#include "ssnet/ssm.hpp"

namespace ssnet {

namespace {

constexpr std::size_t kL = 10, kD = 3, kN = 4;

double weighted_sum(const TensorD& y, const TensorD& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

// Perturbs each entry of `x` in place and compares the central difference of
// `objective` against `analytic`.
GradcheckEntry check_tensor(const std::string& name, TensorD& x, const TensorD& analytic,
                            const std::function<double()>& objective) {
  GradcheckEntry e{name, x.size(), 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + kGradcheckStep;
    const double up = objective();
    x[i] = orig - kGradcheckStep;
    const double down = objective();
    x[i] = orig;
    const double numeric = (up - down) / (2.0 * kGradcheckStep);
    e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic[i], numeric));
  }
  return e;
}

S6Params<double> random_params(Rng& rng) {
  S6Params<double> p = init_s6_params<double>(kD, kN, rng);
  for (auto& v : p.A_log.vec()) v += 0.3 * rng.normal();
  for (auto& v : p.D_feed.vec()) v = rng.normal();
  for (auto& v : p.b_delta.vec()) v = rng.uniform(-1.0, 0.5);
  return p;
}

void check_params(GradcheckResult& r, S6Params<double>& p, const S6Params<double>& g,
                  const std::function<double()>& obj) {
  r.entries.push_back(check_tensor("A_log", p.A_log, g.A_log, obj));
  r.entries.push_back(check_tensor("D_feed", p.D_feed, g.D_feed, obj));
  r.entries.push_back(check_tensor("W_B", p.W_B, g.W_B, obj));
  r.entries.push_back(check_tensor("W_C", p.W_C, g.W_C, obj));
  r.entries.push_back(check_tensor("W_delta", p.W_delta, g.W_delta, obj));
  r.entries.push_back(check_tensor("b_delta", p.b_delta, g.b_delta, obj));
}

}  // namespace

double GradcheckResult::max_rel_error() const {
  double m = 0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / denom;
}

GradcheckResult gradcheck_s6(std::uint64_t seed) {
  Rng rng(seed);
  GradcheckResult r;

  ScanInputs<double> inp{rng.normal_tensor<double>({kL, kD}), rng.uniform_tensor<double>({kL, kD, kN}, 0.5, 0.99),
                         rng.normal_tensor<double>({kL, kD, kN}), rng.normal_tensor<double>({kL, kN}),
                         rng.normal_tensor<double>({kD})};
  const TensorD w = rng.normal_tensor<double>({kL, kD});
  const ScanGrads<double> g = s6_backward(inp, w);
  auto scan_obj = [&] { return weighted_sum(s6_scan_seq(inp), w); };
  r.entries.push_back(check_tensor("u", inp.u, g.u, scan_obj));
  r.entries.push_back(check_tensor("A_bar", inp.A_bar, g.A_bar, scan_obj));
  r.entries.push_back(check_tensor("B_bar", inp.B_bar, g.B_bar, scan_obj));
  r.entries.push_back(check_tensor("C", inp.C, g.C, scan_obj));
  r.entries.push_back(check_tensor("D_feed", inp.D_feed, g.D_feed, scan_obj));

  TensorD f = rng.normal_tensor<double>({kL, kD}, 0.5);
  S6Params<double> p = random_params(rng);
  const S6Grads<double> pg = s6_param_backward(f, p, w);
  auto obj = [&] { return weighted_sum(s6_forward(f, p, ScanBackend::Sequential), w); };
  r.entries.push_back(check_tensor("f", f, pg.f, obj));
  check_params(r, p, pg.params, obj);
  return r;
}

GradcheckResult gradcheck_cm_s6(std::uint64_t seed) {
  Rng rng(seed);
  GradcheckResult r;
  TensorD fx = rng.normal_tensor<double>({kL, kD}, 0.5);
  TensorD fy = rng.normal_tensor<double>({kL, kD}, 0.5);
  S6Params<double> p = random_params(rng);
  const TensorD w = rng.normal_tensor<double>({kL, kD});
  const CmS6Grads<double> g = cm_s6_backward(fx, fy, p, w);
  auto obj = [&] { return weighted_sum(cm_s6_forward(fx, fy, p, ScanBackend::Sequential), w); };
  r.entries.push_back(check_tensor("f_x", fx, g.f_x, obj));
  r.entries.push_back(check_tensor("f_y", fy, g.f_y, obj));
  check_params(r, p, g.params, obj);
  return r;
}

GradcheckResult gradcheck_loss(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t h = 9, w = 11;
  TensorD P = rng.uniform_tensor<double>({1, h, w}, 0.05, 0.95);
  TensorD G({1, h, w});
  for (auto& v : G.vec()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  const LossResult<double> res = hybrid_loss(P, G);
  GradcheckResult r;
  r.entries.push_back(check_tensor("P", P, res.grad, [&] { return hybrid_loss(P, G).loss; }));
  return r;
}

}  // namespace ssnet
