#include "ssnet/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssnet/init.hpp"

namespace ssnet {

namespace {

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + " has shape " + shape_str(t.shape()) + ", expected " +
                     shape_str(expected));
  }
}

template <typename T>
T sigmoid_scalar(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
void require_sequence(const Tensor<T>& f, std::size_t channels, const char* what) {
  if (f.rank() != 2) throw ShapeError(std::string(what) + " must be [L,D], got " + shape_str(f.shape()));
  if (f.dim(1) != channels) {
    throw ShapeError(std::string(what) + " has " + std::to_string(f.dim(1)) +
                     " channels but parameters expect " + std::to_string(channels));
  }
}

// Hidden states of the recurrence, [L,D,N].
template <typename T>
Tensor<T> scan_states(const ScanInputs<T>& inp) {
  const std::size_t L = inp.length(), D = inp.channels(), N = inp.state_dim();
  Tensor<T> states({L, D, N});
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t d = 0; d < D; ++d) {
      const T u = inp.u.at(k, d);
      for (std::size_t n = 0; n < N; ++n) {
        const T prev = k == 0 ? T(0) : states.at(k - 1, d, n);
        states.at(k, d, n) = inp.A_bar.at(k, d, n) * prev + inp.B_bar.at(k, d, n) * u;
      }
    }
  }
  return states;
}

}  // namespace

template <typename T>
void validate(const S6Params<T>& p) {
  if (p.A_log.rank() != 2) throw ShapeError("S6 A_log must be [D,N], got " + shape_str(p.A_log.shape()));
  const std::size_t D = p.A_log.dim(0), N = p.A_log.dim(1);
  require_shape(p.D_feed, {D}, "S6 D_feed");
  require_shape(p.W_B, {D, N}, "S6 W_B");
  require_shape(p.W_C, {D, N}, "S6 W_C");
  require_shape(p.W_delta, {D, D}, "S6 W_delta");
  require_shape(p.b_delta, {D}, "S6 b_delta");
  for (T v : p.A_log.data()) {
    if (!std::isfinite(std::exp(v))) throw std::invalid_argument("S6 A_log produces a non-finite state matrix");
  }
}

template <typename T>
S6Params<T> init_s6_params(std::size_t channels, std::size_t state_dim, Rng& rng) {
  const std::size_t D = channels, N = state_dim;
  S6Params<T> p{Tensor<T>({D, N}), Tensor<T>({D}), Tensor<T>({D, N}),
                Tensor<T>({D, N}), Tensor<T>({D, D}), Tensor<T>({D})};
  init_tensor(p.A_log, ParamKind::StateLog, rng);
  init_tensor(p.D_feed, ParamKind::Feedthrough, rng);
  init_tensor(p.W_B, ParamKind::Projection, rng);
  init_tensor(p.W_C, ParamKind::Projection, rng);
  init_tensor(p.W_delta, ParamKind::Projection, rng);
  init_tensor(p.b_delta, ParamKind::DeltaBias, rng);
  return p;
}

template <typename T>
void validate(const ScanInputs<T>& inp) {
  if (inp.u.rank() != 2) throw ShapeError("scan input u must be [L,D], got " + shape_str(inp.u.shape()));
  if (inp.C.rank() != 2) throw ShapeError("scan input C must be [L,N], got " + shape_str(inp.C.shape()));
  const std::size_t L = inp.u.dim(0), D = inp.u.dim(1), N = inp.C.dim(1);
  require_shape(inp.C, {L, N}, "scan input C");
  require_shape(inp.A_bar, {L, D, N}, "scan input A_bar");
  require_shape(inp.B_bar, {L, D, N}, "scan input B_bar");
  require_shape(inp.D_feed, {D}, "scan input D_feed");
}

template <typename T>
DerivedParams<T> derive_params(const Tensor<T>& f, const S6Params<T>& p) {
  validate(p);
  require_sequence(f, p.channels(), "S6 dynamics input");
  DerivedParams<T> out;
  out.B = matmul(f, p.W_B);
  out.C = matmul(f, p.W_C);
  out.delta_pre = add_row_bias(matmul(f, p.W_delta), p.b_delta);
  out.delta = softplus(out.delta_pre);
  return out;
}

template <typename T>
Tensor<T> state_matrix(const S6Params<T>& p) {
  Tensor<T> a = exp(p.A_log);
  for (auto& v : a.vec()) v = -v;
  return a;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> discretize(const Tensor<T>& delta, const Tensor<T>& A, const Tensor<T>& B) {
  if (delta.rank() != 2 || A.rank() != 2 || B.rank() != 2) {
    throw ShapeError("discretize: delta [L,D], A [D,N] and B [L,N] must all be rank 2");
  }
  const std::size_t L = delta.dim(0), D = delta.dim(1), N = A.dim(1);
  require_shape(A, {D, N}, "discretize A");
  require_shape(B, {L, N}, "discretize B");
  Tensor<T> a_bar({L, D, N}), b_bar({L, D, N});
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t d = 0; d < D; ++d) {
      const T dt = delta.at(k, d);
      for (std::size_t n = 0; n < N; ++n) {
        a_bar.at(k, d, n) = std::exp(dt * A.at(d, n));
        b_bar.at(k, d, n) = dt * B.at(k, n);
      }
    }
  }
  return {std::move(a_bar), std::move(b_bar)};
}

template <typename T>
ScanInputs<T> make_scan_inputs(const Tensor<T>& dynamics_src, const Tensor<T>& u, const S6Params<T>& p) {
  require_sequence(u, p.channels(), "S6 scanned input");
  if (dynamics_src.rank() == 2 && dynamics_src.dim(0) != u.dim(0)) {
    throw ShapeError("cross-modal inputs differ in length: " + shape_str(dynamics_src.shape()) + " vs " +
                     shape_str(u.shape()));
  }
  DerivedParams<T> dp = derive_params(dynamics_src, p);
  auto [a_bar, b_bar] = discretize(dp.delta, state_matrix(p), dp.B);
  return ScanInputs<T>{u, std::move(a_bar), std::move(b_bar), std::move(dp.C), p.D_feed};
}

template <typename T>
Tensor<T> s6_scan_seq(const ScanInputs<T>& inp) {
  validate(inp);
  const std::size_t L = inp.length(), D = inp.channels(), N = inp.state_dim();
  std::vector<ScanAcc<T>> h(D * N, 0);
  Tensor<T> out({L, D});
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t d = 0; d < D; ++d) {
      const ScanAcc<T> u = inp.u.at(k, d);
      ScanAcc<T> y = 0;
      for (std::size_t n = 0; n < N; ++n) {
        ScanAcc<T>& hn = h[d * N + n];
        hn = ScanAcc<T>(inp.A_bar.at(k, d, n)) * hn + ScanAcc<T>(inp.B_bar.at(k, d, n)) * u;
        y += ScanAcc<T>(inp.C.at(k, n)) * hn;
      }
      out.at(k, d) = static_cast<T>(y + ScanAcc<T>(inp.D_feed[d]) * u);
    }
  }
  return out;
}

template <typename T>
Tensor<T> s6_scan_parallel(const ScanInputs<T>& inp, std::size_t chunk) {
  validate(inp);
  if (chunk < 1) chunk = 1;
  const std::size_t L = inp.length(), D = inp.channels(), N = inp.state_dim();
  const std::size_t chunks = (L + chunk - 1) / chunk;
  const std::size_t step = D * N;

  const T* a = inp.A_bar.data().data();
  const T* b = inp.B_bar.data().data();
  const T* u = inp.u.data().data();
  const T* c = inp.C.data().data();

  // Per chunk: product of decays and the state reached from zero, both [D,N].
  // Each chunk walks its timesteps over whole contiguous [D,N] rows.
  using A = ScanAcc<T>;
  std::vector<A> chunk_decay(chunks * step), chunk_state(chunks * step);

#pragma omp parallel for schedule(static)
  for (long ci = 0; ci < static_cast<long>(chunks); ++ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * chunk, end = std::min(L, begin + chunk);
    A* __restrict decay = chunk_decay.data() + ci * step;
    A* __restrict state = chunk_state.data() + ci * step;
    std::fill_n(decay, step, A(1));
    std::fill_n(state, step, A(0));
    for (std::size_t k = begin; k < end; ++k) {
      const T* __restrict ak = a + k * step;
      const T* __restrict bk = b + k * step;
      const T* __restrict uk = u + k * D;
      for (std::size_t d = 0; d < D; ++d) {
        const A ud = uk[d];
        const std::size_t lane = d * N;
#pragma omp simd
        for (std::size_t n = 0; n < N; ++n) {
          state[lane + n] = A(ak[lane + n]) * state[lane + n] + A(bk[lane + n]) * ud;
          decay[lane + n] *= A(ak[lane + n]);
        }
      }
    }
  }

  // Carry into each chunk: carry[c+1] = decay[c] * carry[c] + state[c].
  std::vector<A> carry(chunks * step, A(0));
  for (std::size_t ci = 1; ci < chunks; ++ci) {
    const A* prev = carry.data() + (ci - 1) * step;
    const A* decay = chunk_decay.data() + (ci - 1) * step;
    const A* state = chunk_state.data() + (ci - 1) * step;
    A* cur = carry.data() + ci * step;
    for (std::size_t i = 0; i < step; ++i) cur[i] = decay[i] * prev[i] + state[i];
  }

  Tensor<T> out({L, D});
  T* o = out.data().data();
#pragma omp parallel for schedule(static)
  for (long ci = 0; ci < static_cast<long>(chunks); ++ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * chunk, end = std::min(L, begin + chunk);
    // Each chunk owns its carry slot, which doubles as the running state.
    A* __restrict h = carry.data() + ci * step;
    for (std::size_t k = begin; k < end; ++k) {
      const T* __restrict ak = a + k * step;
      const T* __restrict bk = b + k * step;
      const T* __restrict ck = c + k * N;
      const T* __restrict uk = u + k * D;
      for (std::size_t d = 0; d < D; ++d) {
        const A ud = uk[d];
        const std::size_t lane = d * N;
        A y = 0;
#pragma omp simd reduction(+ : y)
        for (std::size_t n = 0; n < N; ++n) {
          h[lane + n] = A(ak[lane + n]) * h[lane + n] + A(bk[lane + n]) * ud;
          y += A(ck[n]) * h[lane + n];
        }
        o[k * D + d] = static_cast<T>(y + A(inp.D_feed[d]) * ud);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> s6_scan(const ScanInputs<T>& inp, ScanBackend backend) {
  return backend == ScanBackend::Sequential ? s6_scan_seq(inp) : s6_scan_parallel(inp);
}

template <typename T>
Tensor<T> cm_s6_forward(const Tensor<T>& f_x, const Tensor<T>& f_y, const S6Params<T>& p, ScanBackend backend) {
  if (f_x.shape() != f_y.shape()) {
    throw ShapeError("cm_s6_forward: modality shapes differ " + shape_str(f_x.shape()) + " vs " +
                     shape_str(f_y.shape()));
  }
  return s6_scan(make_scan_inputs(f_x, f_y, p), backend);
}

template <typename T>
Tensor<T> s6_forward(const Tensor<T>& f, const S6Params<T>& p, ScanBackend backend) {
  return cm_s6_forward(f, f, p, backend);
}

template <typename T>
Tensor<T> bidirectional_s6(const Tensor<T>& f, const S6Params<T>& fwd, const S6Params<T>& rev,
                           ScanBackend backend) {
  return bidirectional<T>([&](const Tensor<T>& s) { return s6_forward(s, fwd, backend); },
                          [&](const Tensor<T>& s) { return s6_forward(s, rev, backend); }, f);
}

template <typename T>
Tensor<T> bidirectional_cm_s6(const Tensor<T>& f_x, const Tensor<T>& f_y, const S6Params<T>& fwd,
                              const S6Params<T>& rev, ScanBackend backend) {
  return bidirectional<T>(
      [&](const Tensor<T>& x, const Tensor<T>& y) { return cm_s6_forward(x, y, fwd, backend); },
      [&](const Tensor<T>& x, const Tensor<T>& y) { return cm_s6_forward(x, y, rev, backend); }, f_x, f_y);
}

template <typename T>
ScanGrads<T> s6_backward(const ScanInputs<T>& inp, const Tensor<T>& grad_out) {
  validate(inp);
  require_shape(grad_out, inp.u.shape(), "s6_backward grad_out");
  const std::size_t L = inp.length(), D = inp.channels(), N = inp.state_dim();
  const Tensor<T> states = scan_states(inp);

  ScanGrads<T> g{Tensor<T>({L, D}), Tensor<T>({L, D, N}), Tensor<T>({L, D, N}), Tensor<T>({L, N}),
                 Tensor<T>({D})};
  Tensor<T> adj({D, N});
  for (std::size_t kk = L; kk-- > 0;) {
    for (std::size_t d = 0; d < D; ++d) {
      const T go = grad_out.at(kk, d);
      const T u = inp.u.at(kk, d);
      T du = inp.D_feed[d] * go;
      for (std::size_t n = 0; n < N; ++n) {
        const T carried = kk + 1 < L ? inp.A_bar.at(kk + 1, d, n) * adj.at(d, n) : T(0);
        const T gk = carried + inp.C.at(kk, n) * go;
        adj.at(d, n) = gk;
        const T prev = kk == 0 ? T(0) : states.at(kk - 1, d, n);
        g.A_bar.at(kk, d, n) = gk * prev;
        g.B_bar.at(kk, d, n) = gk * u;
        du += gk * inp.B_bar.at(kk, d, n);
        g.C.at(kk, n) += go * states.at(kk, d, n);
      }
      g.u.at(kk, d) = du;
      g.D_feed[d] += go * u;
    }
  }
  return g;
}

template <typename T>
CmS6Grads<T> cm_s6_backward(const Tensor<T>& f_x, const Tensor<T>& f_y, const S6Params<T>& p,
                            const Tensor<T>& grad_out) {
  if (f_x.shape() != f_y.shape()) {
    throw ShapeError("cm_s6_backward: modality shapes differ " + shape_str(f_x.shape()) + " vs " +
                     shape_str(f_y.shape()));
  }
  const DerivedParams<T> dp = derive_params(f_x, p);
  const Tensor<T> A = state_matrix(p);
  auto [a_bar, b_bar] = discretize(dp.delta, A, dp.B);
  const ScanInputs<T> inp{f_y, std::move(a_bar), std::move(b_bar), dp.C, p.D_feed};
  const ScanGrads<T> sg = s6_backward(inp, grad_out);

  const std::size_t L = f_x.dim(0), D = f_x.dim(1), N = p.state_dim();
  Tensor<T> d_delta({L, D}), d_B({L, N}), d_A({D, N});
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t d = 0; d < D; ++d) {
      const T dt = dp.delta.at(k, d);
      T acc = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T da = sg.A_bar.at(k, d, n) * inp.A_bar.at(k, d, n);  // d/d(dt*A) of exp(dt*A)
        acc += da * A.at(d, n) + sg.B_bar.at(k, d, n) * dp.B.at(k, n);
        d_A.at(d, n) += da * dt;
        d_B.at(k, n) += sg.B_bar.at(k, d, n) * dt;
      }
      d_delta.at(k, d) = acc;
    }
  }
  Tensor<T> d_pre = d_delta;
  for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre[i] *= sigmoid_scalar(dp.delta_pre[i]);

  // f_x^T is needed for the weight gradients; transpose once.
  Tensor<T> fx_t({D, L});
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t d = 0; d < D; ++d) fx_t.at(d, k) = f_x.at(k, d);
  auto transpose = [](const Tensor<T>& m) {
    Tensor<T> t({m.dim(1), m.dim(0)});
    for (std::size_t i = 0; i < m.dim(0); ++i)
      for (std::size_t j = 0; j < m.dim(1); ++j) t.at(j, i) = m.at(i, j);
    return t;
  };

  CmS6Grads<T> out;
  out.params.A_log = mul(d_A, A);  // dA/dA_log = A
  out.params.D_feed = sg.D_feed;
  out.params.W_B = matmul(fx_t, d_B);
  out.params.W_C = matmul(fx_t, sg.C);
  out.params.W_delta = matmul(fx_t, d_pre);
  out.params.b_delta = Tensor<T>({D});
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t d = 0; d < D; ++d) out.params.b_delta[d] += d_pre.at(k, d);
  out.f_x = add(add(matmul(d_pre, transpose(p.W_delta)), matmul(d_B, transpose(p.W_B))),
                matmul(sg.C, transpose(p.W_C)));
  out.f_y = sg.u;
  return out;
}

template <typename T>
S6Grads<T> s6_param_backward(const Tensor<T>& f, const S6Params<T>& p, const Tensor<T>& grad_out) {
  CmS6Grads<T> g = cm_s6_backward(f, f, p, grad_out);
  return S6Grads<T>{add(g.f_x, g.f_y), std::move(g.params)};
}

#define SSNET_INSTANTIATE_SSM(T)                                                                           \
  template void validate(const S6Params<T>&);                                                              \
  template void validate(const ScanInputs<T>&);                                                            \
  template S6Params<T> init_s6_params<T>(std::size_t, std::size_t, Rng&);                                  \
  template DerivedParams<T> derive_params(const Tensor<T>&, const S6Params<T>&);                           \
  template Tensor<T> state_matrix(const S6Params<T>&);                                                     \
  template std::pair<Tensor<T>, Tensor<T>> discretize(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template ScanInputs<T> make_scan_inputs(const Tensor<T>&, const Tensor<T>&, const S6Params<T>&);         \
  template Tensor<T> s6_scan_seq(const ScanInputs<T>&);                                                    \
  template Tensor<T> s6_scan_parallel(const ScanInputs<T>&, std::size_t);                                  \
  template Tensor<T> s6_scan(const ScanInputs<T>&, ScanBackend);                                           \
  template Tensor<T> s6_forward(const Tensor<T>&, const S6Params<T>&, ScanBackend);                        \
  template Tensor<T> cm_s6_forward(const Tensor<T>&, const Tensor<T>&, const S6Params<T>&, ScanBackend);   \
  template Tensor<T> bidirectional_s6(const Tensor<T>&, const S6Params<T>&, const S6Params<T>&, ScanBackend); \
  template Tensor<T> bidirectional_cm_s6(const Tensor<T>&, const Tensor<T>&, const S6Params<T>&,           \
                                         const S6Params<T>&, ScanBackend);                                 \
  template ScanGrads<T> s6_backward(const ScanInputs<T>&, const Tensor<T>&);                               \
  template CmS6Grads<T> cm_s6_backward(const Tensor<T>&, const Tensor<T>&, const S6Params<T>&,             \
                                       const Tensor<T>&);                                                  \
  template S6Grads<T> s6_param_backward(const Tensor<T>&, const S6Params<T>&, const Tensor<T>&);

SSNET_INSTANTIATE_SSM(float)
SSNET_INSTANTIATE_SSM(double)

}  // namespace ssnet
