// Command-line front end: depth enhancement, priors, inference, weight
// initialization, evaluation, scan benchmarking and gradient checks.
//
// Exit codes: 0 success, 2 usage error, 3 I/O or format error, 4 check failure.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ssnet/depth_ace.hpp"
#include "ssnet/gradcheck.hpp"
#include "ssnet/image_io.hpp"
#include "ssnet/metrics.hpp"
#include "ssnet/network.hpp"
#include "ssnet/priors.hpp"
#include "ssnet/random.hpp"
#include "ssnet/ssm.hpp"
#include "ssnet/weights_io.hpp"

namespace fs = std::filesystem;
using namespace ssnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitCheck = 4;

constexpr double kBenchTolerance = 1e-5;

class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TensorF read_gray(const fs::path& path) {
  const Image8 img = read_pnm(path);
  if (img.channels != 1) throw FormatError(path.string() + ": expected a single-channel PGM", 0);
  return image_to_tensor(img);
}

TensorF read_rgb(const fs::path& path) {
  const Image8 img = read_pnm(path);
  if (img.channels != 3) throw FormatError(path.string() + ": expected a 3-channel PPM", 0);
  return image_to_tensor(img);
}

void write_gray(const fs::path& path, const TensorF& t) { write_pnm(path, tensor_to_image(t)); }

// Raw depth -> optional inversion -> contrast stretch.
TensorF prepare_depth(TensorF depth, bool invert, double low_pct = kDefaultAcePercent,
                      double high_pct = kDefaultAcePercent) {
  if (invert) {
    for (auto& v : depth.vec()) v = 1.0f - v;
  }
  return enhance_depth(depth, low_pct, high_pct);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

struct EnhanceArgs {
  std::string in, out;
  double low_pct = kDefaultAcePercent, high_pct = kDefaultAcePercent;
  bool invert = false;
};

void cmd_enhance_depth(const EnhanceArgs& a) {
  write_gray(a.out, prepare_depth(read_gray(a.in), a.invert, a.low_pct, a.high_pct));
}

struct PriorsArgs {
  std::string rgb, depth, out_dir;
  bool invert = false;
};

void cmd_priors(const PriorsArgs& a) {
  const TensorF rgb = read_rgb(a.rgb);
  const TensorF depth = prepare_depth(read_gray(a.depth), a.invert);
  const PriorSet p = compute_priors(rgb, depth);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_gray(dir / "S1.pgm", p.S1);
  write_gray(dir / "S2.pgm", p.S2);
  write_gray(dir / "S3.pgm", p.S3);
  write_gray(dir / "O_front.pgm", p.O_front);
  write_gray(dir / "C_x.pgm", p.C_x);
  write_gray(dir / "C_y.pgm", p.C_y);
  write_gray(dir / "M.pgm", p.M);
}

struct InferArgs {
  std::string rgb, depth, weights, config, out;
  bool invert = false;
};

TensorF fit(const TensorF& t, const SSNetConfig& cfg) {
  if (t.dim(1) == cfg.height && t.dim(2) == cfg.width) return t;
  return bilinear_resize(t, cfg.height, cfg.width);
}

void cmd_infer(const InferArgs& a) {
  const SSNetConfig cfg = load_config(a.config);
  const SSNet net(cfg, load_weights(a.weights));
  const TensorF rgb = fit(read_rgb(a.rgb), cfg);
  const TensorF depth = prepare_depth(fit(read_gray(a.depth), cfg), a.invert);
  write_gray(a.out, net.forward(rgb, depth));
}

struct InitArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

void cmd_init_weights(const InitArgs& a) {
  const SSNetConfig cfg = load_config(a.config);
  save_weights(init_weights(cfg, a.seed.value_or(cfg.seed)), a.out);
}

struct EvalArgs {
  std::string pred_dir, gt_dir, report;
};

void cmd_eval(const EvalArgs& a) {
  const MetricReport r = evaluate_dataset(a.pred_dir, a.gt_dir);
  write_text_atomic(a.report, report_to_json(r));
  std::printf("mae %.6f  f_beta_max %.6f  s_measure %.6f  e_max %.6f  e_mean %.6f\n", r.mae, r.f_beta_max,
              r.s_measure, r.e_measure_max, r.e_measure_mean);
}

struct BenchArgs {
  std::size_t L = 16384, D = 16, N = 16;
  std::string mode = "par";
  int repeats = 3;
  std::uint64_t seed = 0;
};

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void cmd_bench_scan(const BenchArgs& a) {
  Rng rng(a.seed);
  const TensorF f = rng.normal_tensor<float>({a.L, a.D});
  const S6Params<float> p = init_s6_params<float>(a.D, a.N, rng);
  const ScanInputs<float> inp = make_scan_inputs(f, f, p);

  TensorF oracle;
  const double seq_ms = best_ms(a.repeats, [&] { oracle = s6_scan_seq(inp); });
  std::printf("L=%zu D=%zu N=%zu threads=%d repeats=%d\n", a.L, a.D, a.N, omp_get_max_threads(), a.repeats);
  std::printf("seq: %.3f ms\n", seq_ms);
  if (a.mode == "seq") return;

  TensorF par;
  const double par_ms = best_ms(a.repeats, [&] { par = s6_scan_parallel(inp); });
  const double dev = max_abs_diff(par, oracle);
  const double speedup = seq_ms / par_ms;
  std::printf("par: %.3f ms\nmax |par - seq| = %.3e\nspeedup = %.2fx\n", par_ms, dev, speedup);
  const unsigned cores = std::thread::hardware_concurrency();
  if (cores < 4 || omp_get_max_threads() < 4) {
    std::fprintf(stderr, "warning: fewer than 4 cores available (%u); speedup target not applicable\n", cores);
  } else if (speedup < 2.0) {
    std::fprintf(stderr, "warning: speedup %.2fx below 2x on %u cores\n", speedup, cores);
  }
  if (!(dev <= kBenchTolerance)) {
    throw CheckFailure("parallel scan deviates from the sequential oracle by " + std::to_string(dev));
  }
}

struct GradArgs {
  std::string op = "s6";
  std::uint64_t seed = 0;
};

void cmd_gradcheck(const GradArgs& a) {
  GradcheckResult r;
  if (a.op == "s6") r = gradcheck_s6(a.seed);
  else if (a.op == "cms6") r = gradcheck_cm_s6(a.seed);
  else r = gradcheck_loss(a.seed);
  for (const auto& e : r.entries) {
    std::printf("%-8s %4zu entries  max rel error %.3e\n", e.name.c_str(), e.checked, e.max_rel_error);
  }
  std::printf("%s: max rel error %.3e (tolerance %.0e)\n", r.passed() ? "PASS" : "FAIL", r.max_rel_error(),
              kGradcheckTolerance);
  if (!r.passed()) throw CheckFailure("gradient check failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D salient object detection with selective state space decoding"};
  app.require_subcommand(1);

  EnhanceArgs enh;
  auto* c_enh = app.add_subcommand("enhance-depth", "Percentile contrast stretch of a depth PGM");
  c_enh->add_option("--in", enh.in, "Input depth PGM")->required();
  c_enh->add_option("--out", enh.out, "Output PGM")->required();
  c_enh->add_option("--low-pct", enh.low_pct, "Percent of pixels saturated to 0")->check(CLI::Range(0.0, 49.999));
  c_enh->add_option("--high-pct", enh.high_pct, "Percent of pixels saturated to 1")->check(CLI::Range(0.0, 49.999));
  c_enh->add_flag("--invert-depth", enh.invert, "Treat dark depth values as near");

  PriorsArgs pri;
  auto* c_pri = app.add_subcommand("priors", "Write the saliency priors and their component maps");
  c_pri->add_option("--rgb", pri.rgb, "RGB PPM")->required();
  c_pri->add_option("--depth", pri.depth, "Depth PGM")->required();
  c_pri->add_option("--out-dir", pri.out_dir, "Output directory")->required();
  c_pri->add_flag("--invert-depth", pri.invert, "Treat dark depth values as near");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Predict a saliency map");
  c_inf->add_option("--rgb", inf.rgb, "RGB PPM")->required();
  c_inf->add_option("--depth", inf.depth, "Depth PGM")->required();
  c_inf->add_option("--weights", inf.weights, "Weights file")->required();
  c_inf->add_option("--config", inf.config, "Config file")->required();
  c_inf->add_option("--out", inf.out, "Output PGM")->required();
  c_inf->add_flag("--invert-depth", inf.invert, "Treat dark depth values as near");

  InitArgs ini;
  auto* c_ini = app.add_subcommand("init-weights", "Write randomly initialized weights");
  c_ini->add_option("--config", ini.config, "Config file")->required();
  c_ini->add_option("--seed", ini.seed, "Seed (defaults to the config seed)");
  c_ini->add_option("--out", ini.out, "Output weights file")->required();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Score predicted maps against ground truth");
  c_ev->add_option("--pred-dir", ev.pred_dir, "Directory of predicted PGMs")->required();
  c_ev->add_option("--gt-dir", ev.gt_dir, "Directory of ground-truth PGMs")->required();
  c_ev->add_option("--report", ev.report, "Output JSON report")->required();

  BenchArgs bn;
  auto* c_bn = app.add_subcommand("bench-scan", "Time the sequential and chunked parallel scans");
  c_bn->add_option("--L", bn.L, "Sequence length")->check(CLI::PositiveNumber);
  c_bn->add_option("--D", bn.D, "Channels")->check(CLI::PositiveNumber);
  c_bn->add_option("--N", bn.N, "State size")->check(CLI::PositiveNumber);
  c_bn->add_option("--mode", bn.mode, "seq or par")->check(CLI::IsMember({"seq", "par"}));
  c_bn->add_option("--repeats", bn.repeats, "Timed repetitions (best is reported)")->check(CLI::PositiveNumber);
  c_bn->add_option("--seed", bn.seed, "Seed for the random instance");

  GradArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of a backward pass");
  c_gc->add_option("--op", gc.op, "s6, cms6 or loss")->check(CLI::IsMember({"s6", "cms6", "loss"}));
  c_gc->add_option("--seed", gc.seed, "Seed for the random instance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_enh) cmd_enhance_depth(enh);
    else if (*c_pri) cmd_priors(pri);
    else if (*c_inf) cmd_infer(inf);
    else if (*c_ini) cmd_init_weights(ini);
    else if (*c_ev) cmd_eval(ev);
    else if (*c_bn) cmd_bench_scan(bn);
    else if (*c_gc) cmd_gradcheck(gc);
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheck;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
