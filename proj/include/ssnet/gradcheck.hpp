#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Central finite-difference checks of the analytic backward passes, in double
// precision. Each check compares every gradient entry of a small seeded
// instance.

namespace ssnet {

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckEntry {
  std::string name;  // which tensor, e.g. "A_bar"
  std::size_t checked = 0;
  double max_rel_error = 0;
};

struct GradcheckResult {
  std::vector<GradcheckEntry> entries;
  double max_rel_error() const;
  bool passed() const { return max_rel_error() < kGradcheckTolerance; }
};

/// |a - n| / max(|a|, |n|, 1e-4); the floor keeps near-zero entries from
/// dominating through rounding noise alone.
double relative_error(double analytic, double numeric);

/// Scan-level gradients (u, A_bar, B_bar, C, D_feed) and the full parameter
/// chain of the self-modality scan.
GradcheckResult gradcheck_s6(std::uint64_t seed);

/// Gradients of the cross-modal scan with respect to both inputs and all parameters.
GradcheckResult gradcheck_cm_s6(std::uint64_t seed);

/// d loss / d P of the hybrid BCE + SSIM + IoU loss.
GradcheckResult gradcheck_loss(std::uint64_t seed);

}  // namespace ssnet
