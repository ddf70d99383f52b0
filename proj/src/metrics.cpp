#include "ssnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ssnet/image_io.hpp"

namespace ssnet {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_pair(const TensorF& P, const TensorF& G, const char* op) {
  if (P.rank() != 3 || P.dim(0) != 1) {
    throw ShapeError(std::string(op) + ": prediction must be [1,H,W], got " + shape_str(P.shape()));
  }
  if (P.shape() != G.shape()) {
    throw ShapeError(std::string(op) + ": prediction " + shape_str(P.shape()) + " and ground truth " +
                     shape_str(G.shape()) + " differ");
  }
}

double threshold(std::size_t k) { return static_cast<double>(k) / 255.0; }

bool gt_on(float g) { return g > 0.5f; }

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

std::vector<Counts> confusion_curve(const TensorF& P, const TensorF& G) {
  std::vector<Counts> c(kThresholds);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const bool g = gt_on(G[i]);
    const double p = P[i];
    // P > k/255 holds for every k below the first threshold >= p.
    std::size_t first_off = 0;
    while (first_off < kThresholds && p > threshold(first_off)) ++first_off;
    for (std::size_t k = 0; k < kThresholds; ++k) {
      const bool on = k < first_off;
      if (on && g) ++c[k].tp;
      else if (on) ++c[k].fp;
      else if (g) ++c[k].fn;
      else ++c[k].tn;
    }
  }
  return c;
}

struct Block {
  std::size_t y0, y1, x0, x1;  // half-open
  std::size_t area() const { return (y1 - y0) * (x1 - x0); }
};

double block_ssim(const TensorF& P, const std::vector<double>& g, std::size_t w, const Block& b) {
  const std::size_t n = b.area();
  if (n == 0) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t y = b.y0; y < b.y1; ++y)
    for (std::size_t x = b.x0; x < b.x1; ++x) {
      mx += P[y * w + x];
      my += g[y * w + x];
    }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  if (n > 1) {
    for (std::size_t y = b.y0; y < b.y1; ++y)
      for (std::size_t x = b.x0; x < b.x1; ++x) {
        const double dx = P[y * w + x] - mx, dy = g[y * w + x] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
      }
    const double dof = static_cast<double>(n - 1);
    sxx /= dof;
    syy /= dof;
    sxy /= dof;
  }
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double object_similarity(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double sd = 0;
  if (values.size() > 1) {
    for (double v : values) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / static_cast<double>(values.size() - 1));
  }
  return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

// Candidate split positions along one axis: the pixel boundary nearest the
// centroid. A centroid exactly on a pixel center is equidistant from two
// boundaries; both are returned and their scores averaged, which keeps the
// measure mirror-symmetric.
std::vector<std::size_t> split_candidates(std::size_t index_sum, std::size_t count) {
  const std::size_t c = index_sum / count;
  if (index_sum % count == 0) return {c, c + 1};
  return {c + 1};
}

}  // namespace

double mae(const TensorF& P, const TensorF& G) {
  check_pair(P, G, "mae");
  double s = 0;
  for (std::size_t i = 0; i < P.size(); ++i) s += std::abs(static_cast<double>(P[i]) - G[i]);
  return s / static_cast<double>(P.size());
}

FBetaResult f_beta(const TensorF& P, const TensorF& G) {
  check_pair(P, G, "f_beta");
  FBetaResult r;
  r.pr.resize(kThresholds);
  const auto curve = confusion_curve(P, G);
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const Counts& c = curve[k];
    const std::size_t gt_pos = c.tp + c.fn, pred_pos = c.tp + c.fp;
    const double precision = pred_pos == 0 ? (gt_pos == 0 ? 1.0 : 0.0)
                                           : static_cast<double>(c.tp) / static_cast<double>(pred_pos);
    const double recall = gt_pos == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(gt_pos);
    r.pr[k] = {precision, recall};
    const double denom = kBetaSquared * precision + recall;
    const double f = denom > 0 ? (1.0 + kBetaSquared) * precision * recall / denom : 0.0;
    r.f_max = std::max(r.f_max, f);
  }
  return r;
}

double s_measure(const TensorF& P, const TensorF& G) {
  check_pair(P, G, "s_measure");
  const std::size_t h = P.dim(1), w = P.dim(2), n = h * w;
  std::vector<double> g(n);
  std::size_t fg = 0, sum_x = 0, sum_y = 0;
  double mean_p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = gt_on(G[i]) ? 1.0 : 0.0;
    mean_p += P[i];
    if (g[i] > 0) {
      ++fg;
      sum_y += i / w;
      sum_x += i % w;
    }
  }
  mean_p /= static_cast<double>(n);
  if (fg == 0) return 1.0 - mean_p;
  if (fg == n) return mean_p;

  // Object-aware part.
  std::vector<double> fg_vals, bg_vals;
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i] > 0) fg_vals.push_back(P[i]);
    else bg_vals.push_back(1.0 - P[i]);
  }
  const double u = static_cast<double>(fg) / static_cast<double>(n);
  const double object = u * object_similarity(fg_vals) + (1.0 - u) * object_similarity(bg_vals);

  // Region-aware part: four blocks around the GT centroid.
  const auto xs = split_candidates(sum_x, fg), ys = split_candidates(sum_y, fg);
  double region = 0;
  for (std::size_t sy : ys) {
    for (std::size_t sx : xs) {
      const Block blocks[4] = {{0, sy, 0, sx}, {0, sy, sx, w}, {sy, h, 0, sx}, {sy, h, sx, w}};
      double r = 0;
      for (const Block& b : blocks) {
        r += static_cast<double>(b.area()) / static_cast<double>(n) * block_ssim(P, g, w, b);
      }
      region += r;
    }
  }
  region /= static_cast<double>(xs.size() * ys.size());

  return std::max(0.0, kStructureAlpha * object + (1.0 - kStructureAlpha) * region);
}

EMeasureResult e_measure(const TensorF& P, const TensorF& G) {
  check_pair(P, G, "e_measure");
  const double n = static_cast<double>(P.size());
  const auto curve = confusion_curve(P, G);
  EMeasureResult r;
  r.curve.resize(kThresholds);
  double sum = 0;
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const Counts& c = curve[k];
    const double gt_fg = static_cast<double>(c.tp + c.fn);
    const double pred_fg = static_cast<double>(c.tp + c.fp);
    double enhanced = 0;
    if (gt_fg == 0) {
      enhanced = n - pred_fg;
    } else if (gt_fg == n) {
      enhanced = pred_fg;
    } else {
      // Bias-removed binary maps take two values each; the alignment matrix
      // is constant over each of the four (pred, gt) combinations.
      const double mp = pred_fg / n, mg = gt_fg / n;
      const double pv[2] = {-mp, 1.0 - mp}, gv[2] = {-mg, 1.0 - mg};
      const double counts[2][2] = {{static_cast<double>(c.tn), static_cast<double>(c.fn)},
                                   {static_cast<double>(c.fp), static_cast<double>(c.tp)}};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double align = 2.0 * pv[a] * gv[b] / (pv[a] * pv[a] + gv[b] * gv[b] + kEps);
          enhanced += counts[a][b] * (align + 1.0) * (align + 1.0) / 4.0;
        }
    }
    r.curve[k] = enhanced / n;
    sum += r.curve[k];
    r.e_max = std::max(r.e_max, r.curve[k]);
  }
  r.e_mean = sum / static_cast<double>(kThresholds);
  return r;
}

MetricReport evaluate(const TensorF& P, const TensorF& G) {
  MetricReport r;
  r.mae = mae(P, G);
  auto fb = f_beta(P, G);
  r.f_beta_max = fb.f_max;
  r.pr = std::move(fb.pr);
  r.s_measure = s_measure(P, G);
  const auto em = e_measure(P, G);
  r.e_measure_max = em.e_max;
  r.e_measure_mean = em.e_mean;
  return r;
}

MetricReport average_reports(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("average_reports: no reports to average");
  MetricReport avg;
  avg.pr.assign(kThresholds, {});
  for (const auto& r : reports) {
    avg.mae += r.mae;
    avg.f_beta_max += r.f_beta_max;
    avg.s_measure += r.s_measure;
    avg.e_measure_max += r.e_measure_max;
    avg.e_measure_mean += r.e_measure_mean;
    for (std::size_t k = 0; k < kThresholds; ++k) {
      avg.pr[k].precision += r.pr[k].precision;
      avg.pr[k].recall += r.pr[k].recall;
    }
  }
  const double n = static_cast<double>(reports.size());
  avg.mae /= n;
  avg.f_beta_max /= n;
  avg.s_measure /= n;
  avg.e_measure_max /= n;
  avg.e_measure_mean /= n;
  for (auto& p : avg.pr) {
    p.precision /= n;
    p.recall /= n;
  }
  return avg;
}

MetricReport evaluate_dataset(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(gt_dir)) throw IoError("ground-truth directory not found: " + gt_dir.string());
  if (!fs::is_directory(pred_dir)) throw IoError("prediction directory not found: " + pred_dir.string());
  std::vector<fs::path> names;
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") names.push_back(e.path().filename());
  }
  if (names.empty()) throw IoError("no .pgm ground-truth maps in " + gt_dir.string());
  std::sort(names.begin(), names.end());
  std::vector<MetricReport> reports;
  reports.reserve(names.size());
  for (const auto& name : names) {
    const fs::path pred_path = pred_dir / name;
    if (!fs::exists(pred_path)) throw IoError("missing prediction " + pred_path.string());
    const Image8 pred = read_pnm(pred_path), gt = read_pnm(gt_dir / name);
    if (pred.channels != 1 || gt.channels != 1) {
      throw FormatError(name.string() + ": saliency maps must be single-channel PGM", 0);
    }
    reports.push_back(evaluate(image_to_tensor(pred), image_to_tensor(gt)));
  }
  return average_reports(reports);
}

std::string report_to_json(const MetricReport& r) {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::string s = "{\"mae\": " + fmt(r.mae) + ", \"f_beta_max\": " + fmt(r.f_beta_max) +
                  ", \"s_measure\": " + fmt(r.s_measure) + ", \"e_measure_max\": " + fmt(r.e_measure_max) +
                  ", \"e_measure_mean\": " + fmt(r.e_measure_mean) + ", \"pr\": [";
  for (std::size_t k = 0; k < r.pr.size(); ++k) {
    if (k) s += ", ";
    s += "[" + fmt(r.pr[k].precision) + ", " + fmt(r.pr[k].recall) + "]";
  }
  s += "]}\n";
  return s;
}

}  // namespace ssnet
