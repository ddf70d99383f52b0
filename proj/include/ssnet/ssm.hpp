#pragma once

#include <cstddef>
#include <type_traits>
#include <utility>

#include "ssnet/ops.hpp"
#include "ssnet/random.hpp"
#include "ssnet/tensor.hpp"

// Selective-scan state space kernels.
//
// Shapes: L sequence length, D channels, N state size.
//
//   B = f W_B              [L,N]
//   C = f W_C              [L,N]
//   delta = softplus(f W_delta + b_delta)     [L,D]
//   A = -exp(A_log)        [D,N]
//   A_bar[k,d,n] = exp(delta[k,d] A[d,n])
//   B_bar[k,d,n] = delta[k,d] B[k,n]
//   h[k,d,n] = A_bar[k,d,n] h[k-1,d,n] + B_bar[k,d,n] u[k,d],  h[-1] = 0
//   y[k,d]   = sum_n C[k,n] h[k,d,n] + D_feed[d] u[k,d]
//
// The self-modality variant scans u = f. The cross-modal variant derives B,
// C and delta from one modality and scans the other.

namespace ssnet {

template <typename T>
struct S6Params {
  Tensor<T> A_log;    // [D,N]
  Tensor<T> D_feed;   // [D]
  Tensor<T> W_B;      // [D,N]
  Tensor<T> W_C;      // [D,N]
  Tensor<T> W_delta;  // [D,D]
  Tensor<T> b_delta;  // [D]

  std::size_t channels() const { return A_log.dim(0); }
  std::size_t state_dim() const { return A_log.dim(1); }

  template <typename U>
  S6Params<U> cast() const {
    return {A_log.template cast<U>(), D_feed.template cast<U>(), W_B.template cast<U>(),
            W_C.template cast<U>(), W_delta.template cast<U>(), b_delta.template cast<U>()};
  }
};

/// Checks the shapes of a parameter set and that A = -exp(A_log) is finite.
template <typename T>
void validate(const S6Params<T>& p);

/// Standard initialization: A[d,n] = -(n+1), D_feed = 1, projections uniform in
/// +-sqrt(6/(fan_in+fan_out)), softplus(b_delta) uniform in [1e-3, 1e-1].
template <typename T>
S6Params<T> init_s6_params(std::size_t channels, std::size_t state_dim, Rng& rng);

template <typename T>
struct DerivedParams {
  Tensor<T> B;          // [L,N]
  Tensor<T> C;          // [L,N]
  Tensor<T> delta;      // [L,D], > 0
  Tensor<T> delta_pre;  // [L,D], argument of softplus
};

template <typename T>
struct ScanInputs {
  Tensor<T> u;       // [L,D]
  Tensor<T> A_bar;   // [L,D,N]
  Tensor<T> B_bar;   // [L,D,N]
  Tensor<T> C;       // [L,N]
  Tensor<T> D_feed;  // [D]

  std::size_t length() const { return u.dim(0); }
  std::size_t channels() const { return u.dim(1); }
  std::size_t state_dim() const { return C.dim(1); }
};

template <typename T>
void validate(const ScanInputs<T>& inp);

enum class ScanBackend { Sequential, Parallel };

inline constexpr std::size_t kScanChunk = 64;

template <typename T>
DerivedParams<T> derive_params(const Tensor<T>& f, const S6Params<T>& p);

/// A = -exp(A_log)
template <typename T>
Tensor<T> state_matrix(const S6Params<T>& p);

/// Zero-order hold for A, Euler step for B. Returns {A_bar, B_bar}, both [L,D,N].
template <typename T>
std::pair<Tensor<T>, Tensor<T>> discretize(const Tensor<T>& delta, const Tensor<T>& A, const Tensor<T>& B);

/// Builds the scan inputs: dynamics from `dynamics_src`, scanned sequence `u`.
template <typename T>
ScanInputs<T> make_scan_inputs(const Tensor<T>& dynamics_src, const Tensor<T>& u, const S6Params<T>& p);

/// State type used while scanning: float tensors carry the recurrence in
/// double and round once per output, so both scan backends agree to an ulp.
template <typename T>
using ScanAcc = std::conditional_t<std::is_same_v<T, float>, double, T>;

/// Reference recurrence, one step at a time.
template <typename T>
Tensor<T> s6_scan_seq(const ScanInputs<T>& inp);

/// Chunked scan: per-chunk local solutions run independently, the chunk
/// carries are chained with (a2,b2)o(a1,b1) = (a1 a2, a2 b1 + b2), then each
/// chunk is replayed from its carry.
template <typename T>
Tensor<T> s6_scan_parallel(const ScanInputs<T>& inp, std::size_t chunk = kScanChunk);

template <typename T>
Tensor<T> s6_scan(const ScanInputs<T>& inp, ScanBackend backend);

template <typename T>
Tensor<T> s6_forward(const Tensor<T>& f, const S6Params<T>& p, ScanBackend backend = ScanBackend::Parallel);

/// Cross-modal scan: B, C, delta come from f_x; f_y is the scanned input and
/// the feedthrough operand.
template <typename T>
Tensor<T> cm_s6_forward(const Tensor<T>& f_x, const Tensor<T>& f_y, const S6Params<T>& p,
                        ScanBackend backend = ScanBackend::Parallel);

/// Runs `forward_dir` on the sequences and `reverse_dir` on their flips, flips
/// the second result back and concatenates along the feature axis.
template <typename T, typename ForwardFn, typename ReverseFn, typename... Seqs>
Tensor<T> bidirectional(ForwardFn&& forward_dir, ReverseFn&& reverse_dir, const Tensor<T>& first,
                        const Seqs&... rest) {
  Tensor<T> fwd = forward_dir(first, rest...);
  Tensor<T> rev = flip_seq(reverse_dir(flip_seq(first), flip_seq(rest)...));
  return concat_features(fwd, rev);
}

template <typename T>
Tensor<T> bidirectional_s6(const Tensor<T>& f, const S6Params<T>& fwd, const S6Params<T>& rev,
                           ScanBackend backend = ScanBackend::Parallel);

template <typename T>
Tensor<T> bidirectional_cm_s6(const Tensor<T>& f_x, const Tensor<T>& f_y, const S6Params<T>& fwd,
                              const S6Params<T>& rev, ScanBackend backend = ScanBackend::Parallel);

template <typename T>
struct ScanGrads {
  Tensor<T> u;       // [L,D]
  Tensor<T> A_bar;   // [L,D,N]
  Tensor<T> B_bar;   // [L,D,N]
  Tensor<T> C;       // [L,N]
  Tensor<T> D_feed;  // [D]
};

/// Reverse-mode derivative of s6_scan_seq. The adjoint state runs backwards:
///   g[k] = A_bar[k+1] * g[k+1] + C[k] grad_out[k]
template <typename T>
ScanGrads<T> s6_backward(const ScanInputs<T>& inp, const Tensor<T>& grad_out);

template <typename T>
struct CmS6Grads {
  Tensor<T> f_x;
  Tensor<T> f_y;
  S6Params<T> params;
};

/// Gradients of cm_s6_forward with respect to both inputs and every parameter.
template <typename T>
CmS6Grads<T> cm_s6_backward(const Tensor<T>& f_x, const Tensor<T>& f_y, const S6Params<T>& p,
                            const Tensor<T>& grad_out);

template <typename T>
struct S6Grads {
  Tensor<T> f;
  S6Params<T> params;
};

/// Gradients of s6_forward; the input receives both the dynamics and scan paths.
template <typename T>
S6Grads<T> s6_param_backward(const Tensor<T>& f, const S6Params<T>& p, const Tensor<T>& grad_out);

}  // namespace ssnet
