#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "units/imaging.hpp"
#include "units/rng.hpp"

namespace units {

// Unrolled physics-based reconstruction: each unroll applies a learned
// convolutional regularizer and a gradient-descent data-consistency step.
// All parameters are complex scalars stored as real pairs; gradients are
// derivatives of the real loss with respect to each real component, packed
// back into complex as (dL/dRe) + i*(dL/dIm). For a complex-linear op
// z = w*a this gives the conjugate rules g_a = conj(w)*g_z and
// g_w = g_z*conj(a); equivalent to conjugate-Wirtinger gradients up to a
// constant factor, applied consistently everywhere (including the
// finite-difference checks).

/// One unroll: two conv stages (spatial k=5 then temporal k=3, each
/// followed by modReLU), a 1x1 projection back to one channel, and the
/// data-consistency step size.
struct UnrollParams {
  ComplexGrid conv_s1;        // (ks, ks, 1, ch)
  ComplexGrid conv_t1;        // (kt, 1, ch, ch)
  std::vector<double> bias1;  // modReLU bias, per channel
  ComplexGrid conv_s2;        // (ks, ks, ch, ch)
  ComplexGrid conv_t2;        // (kt, 1, ch, ch)
  std::vector<double> bias2;
  ComplexGrid proj;           // (1, 1, ch, 1)
  double dc_step = 1.0;       // eta
};

struct ModelParams {
  int unrolls = 6;
  int channels = 4;
  int spatial_k = 5;
  int temporal_k = 3;
  std::vector<UnrollParams> stages;

  /// Zero-valued parameter set with the requested architecture (also the
  /// gradient container).
  static ModelParams zeros(int unrolls, int channels, int spatial_k = 5,
                           int temporal_k = 3) {
    ModelParams p;
    p.unrolls = unrolls;
    p.channels = channels;
    p.spatial_k = spatial_k;
    p.temporal_k = temporal_k;
    p.stages.resize(unrolls);
    for (auto& s : p.stages) {
      s.conv_s1 = ComplexGrid(spatial_k, spatial_k, 1, channels);
      s.conv_t1 = ComplexGrid(temporal_k, 1, channels, channels);
      s.bias1.assign(channels, 0.0);
      s.conv_s2 = ComplexGrid(spatial_k, spatial_k, channels, channels);
      s.conv_t2 = ComplexGrid(temporal_k, 1, channels, channels);
      s.bias2.assign(channels, 0.0);
      s.proj = ComplexGrid(1, 1, channels, 1);
      s.dc_step = 0.0;
    }
    return p;
  }

  /// Complex Glorot-style init: real and imaginary parts drawn
  /// independently with variance 1/(2*fan_in). modReLU biases start at 0
  /// (identity activation), eta at 1 (convergent since |A^H A| <= 1).
  static ModelParams init(int unrolls, int channels, std::uint64_t seed,
                          int spatial_k = 5, int temporal_k = 3) {
    ModelParams p = zeros(unrolls, channels, spatial_k, temporal_k);
    Rng rng(derive_seed(seed, "model-init"));
    auto fill = [&](ComplexGrid& w, int fan_in) {
      const double s = std::sqrt(1.0 / (2.0 * fan_in));
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = {rng.gaussian(0.0, s), rng.gaussian(0.0, s)};
    };
    for (auto& st : p.stages) {
      fill(st.conv_s1, spatial_k * spatial_k);
      fill(st.conv_t1, temporal_k * channels);
      fill(st.conv_s2, spatial_k * spatial_k * channels);
      fill(st.conv_t2, temporal_k * channels);
      fill(st.proj, channels);
      st.dc_step = 1.0;
    }
    return p;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& s : stages)
      n += 2 * (s.conv_s1.size() + s.conv_t1.size() + s.conv_s2.size() +
                s.conv_t2.size() + s.proj.size()) +
           s.bias1.size() + s.bias2.size() + 1;
    return n;
  }
};

/// Pointers to every real degree of freedom, in a fixed traversal order.
/// Used by the optimizer, the checkpoint writer and the gradient checker.
inline std::vector<double*> collect_dof(ModelParams& p) {
  std::vector<double*> out;
  out.reserve(p.param_count());
  auto add_grid = [&](ComplexGrid& g) {
    // complex<double> is layout-compatible with double[2]
    double* raw = reinterpret_cast<double*>(g.data());
    for (std::size_t i = 0; i < 2 * g.size(); ++i) out.push_back(raw + i);
  };
  for (auto& s : p.stages) {
    add_grid(s.conv_s1);
    add_grid(s.conv_t1);
    for (auto& b : s.bias1) out.push_back(&b);
    add_grid(s.conv_s2);
    add_grid(s.conv_t2);
    for (auto& b : s.bias2) out.push_back(&b);
    add_grid(s.proj);
    out.push_back(&s.dc_step);
  }
  return out;
}

namespace model_detail {

// Hot loops accumulate real/imag separately; std::complex multiplication
// would route through __muldc3.

/// Spatial conv, zero-padded "same", kernel (k, k, ic, oc) indexed over
/// the grid's (x, y, nt=ic, nc=oc) axes.
inline void conv_spatial(const ComplexGrid& in, const ComplexGrid& w,
                         ComplexGrid& out, bool accumulate = false) {
  const GridShape s = in.shape();
  const int k = w.shape().nx, ic_n = w.shape().nt, oc_n = w.shape().nc;
  const int off = k / 2;
  if (!accumulate) out = ComplexGrid(s.nx, s.ny, s.nt, oc_n);
  std::vector<double> acc_re(oc_n), acc_im(oc_n);
  for (int t = 0; t < s.nt; ++t)
    for (int x = 0; x < s.nx; ++x)
      for (int y = 0; y < s.ny; ++y) {
        std::fill(acc_re.begin(), acc_re.end(), 0.0);
        std::fill(acc_im.begin(), acc_im.end(), 0.0);
        for (int dx = 0; dx < k; ++dx) {
          const int xx = x + dx - off;
          if (xx < 0 || xx >= s.nx) continue;
          for (int dy = 0; dy < k; ++dy) {
            const int yy = y + dy - off;
            if (yy < 0 || yy >= s.ny) continue;
            for (int ic = 0; ic < ic_n; ++ic) {
              const cdouble a = in.at(xx, yy, t, ic);
              const double ar = a.real(), ai = a.imag();
              const cdouble* wp = &w.at(dx, dy, ic, 0);
              for (int oc = 0; oc < oc_n; ++oc) {
                const double wr = wp[oc].real(), wi = wp[oc].imag();
                acc_re[oc] += wr * ar - wi * ai;
                acc_im[oc] += wr * ai + wi * ar;
              }
            }
          }
        }
        cdouble* op = &out.at(x, y, t, 0);
        for (int oc = 0; oc < oc_n; ++oc)
          op[oc] += cdouble{acc_re[oc], acc_im[oc]};
      }
}

/// Backward of conv_spatial: input cotangent uses conj(w), weight
/// gradient uses conj(in), both accumulated in one sweep.
inline void conv_spatial_backward(const ComplexGrid& in, const ComplexGrid& w,
                                  const ComplexGrid& g_out, ComplexGrid& g_in,
                                  ComplexGrid& g_w) {
  const GridShape s = in.shape();
  const int k = w.shape().nx, ic_n = w.shape().nt, oc_n = w.shape().nc;
  const int off = k / 2;
  for (int t = 0; t < s.nt; ++t)
    for (int x = 0; x < s.nx; ++x)
      for (int y = 0; y < s.ny; ++y) {
        const cdouble* gp = &g_out.at(x, y, t, 0);
        for (int dx = 0; dx < k; ++dx) {
          const int xx = x + dx - off;
          if (xx < 0 || xx >= s.nx) continue;
          for (int dy = 0; dy < k; ++dy) {
            const int yy = y + dy - off;
            if (yy < 0 || yy >= s.ny) continue;
            for (int ic = 0; ic < ic_n; ++ic) {
              const cdouble a = in.at(xx, yy, t, ic);
              const double ar = a.real(), ai = a.imag();
              const cdouble* wp = &w.at(dx, dy, ic, 0);
              cdouble* gwp = &g_w.at(dx, dy, ic, 0);
              double gi_re = 0.0, gi_im = 0.0;
              for (int oc = 0; oc < oc_n; ++oc) {
                const double gr = gp[oc].real(), gi = gp[oc].imag();
                const double wr = wp[oc].real(), wi = wp[oc].imag();
                // g_in += conj(w) * g_out
                gi_re += wr * gr + wi * gi;
                gi_im += wr * gi - wi * gr;
                // g_w += g_out * conj(in)
                gwp[oc] += cdouble{gr * ar + gi * ai, gi * ar - gr * ai};
              }
              g_in.at(xx, yy, t, ic) += cdouble{gi_re, gi_im};
            }
          }
        }
      }
}

/// Temporal conv along t, zero-padded, kernel (kt, 1, ic, oc).
inline void conv_temporal(const ComplexGrid& in, const ComplexGrid& w,
                          ComplexGrid& out) {
  const GridShape s = in.shape();
  const int k = w.shape().nx, ic_n = w.shape().nt, oc_n = w.shape().nc;
  const int off = k / 2;
  out = ComplexGrid(s.nx, s.ny, s.nt, oc_n);
  std::vector<double> acc_re(oc_n), acc_im(oc_n);
  for (int x = 0; x < s.nx; ++x)
    for (int y = 0; y < s.ny; ++y)
      for (int t = 0; t < s.nt; ++t) {
        std::fill(acc_re.begin(), acc_re.end(), 0.0);
        std::fill(acc_im.begin(), acc_im.end(), 0.0);
        for (int dt = 0; dt < k; ++dt) {
          const int tt = t + dt - off;
          if (tt < 0 || tt >= s.nt) continue;
          for (int ic = 0; ic < ic_n; ++ic) {
            const cdouble a = in.at(x, y, tt, ic);
            const double ar = a.real(), ai = a.imag();
            const cdouble* wp = &w.at(dt, 0, ic, 0);
            for (int oc = 0; oc < oc_n; ++oc) {
              const double wr = wp[oc].real(), wi = wp[oc].imag();
              acc_re[oc] += wr * ar - wi * ai;
              acc_im[oc] += wr * ai + wi * ar;
            }
          }
        }
        cdouble* op = &out.at(x, y, t, 0);
        for (int oc = 0; oc < oc_n; ++oc)
          op[oc] = cdouble{acc_re[oc], acc_im[oc]};
      }
}

inline void conv_temporal_backward(const ComplexGrid& in, const ComplexGrid& w,
                                   const ComplexGrid& g_out,
                                   ComplexGrid& g_in, ComplexGrid& g_w) {
  const GridShape s = in.shape();
  const int k = w.shape().nx, ic_n = w.shape().nt, oc_n = w.shape().nc;
  const int off = k / 2;
  for (int x = 0; x < s.nx; ++x)
    for (int y = 0; y < s.ny; ++y)
      for (int t = 0; t < s.nt; ++t) {
        const cdouble* gp = &g_out.at(x, y, t, 0);
        for (int dt = 0; dt < k; ++dt) {
          const int tt = t + dt - off;
          if (tt < 0 || tt >= s.nt) continue;
          for (int ic = 0; ic < ic_n; ++ic) {
            const cdouble a = in.at(x, y, tt, ic);
            const double ar = a.real(), ai = a.imag();
            const cdouble* wp = &w.at(dt, 0, ic, 0);
            cdouble* gwp = &g_w.at(dt, 0, ic, 0);
            double gi_re = 0.0, gi_im = 0.0;
            for (int oc = 0; oc < oc_n; ++oc) {
              const double gr = gp[oc].real(), gi = gp[oc].imag();
              const double wr = wp[oc].real(), wi = wp[oc].imag();
              gi_re += wr * gr + wi * gi;
              gi_im += wr * gi - wi * gr;
              gwp[oc] += cdouble{gr * ar + gi * ai, gi * ar - gr * ai};
            }
            g_in.at(x, y, tt, ic) += cdouble{gi_re, gi_im};
          }
        }
      }
}

/// modReLU: z -> relu(|z| + b) * z/|z|, phase preserving; output is 0 at
/// z = 0 or when the biased magnitude is non-positive.
inline ComplexGrid modrelu(const ComplexGrid& in,
                           const std::vector<double>& bias) {
  const GridShape s = in.shape();
  ComplexGrid out(s.nx, s.ny, s.nt, s.nc);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const int c = static_cast<int>(i % s.nc);
    const double rho = std::abs(in[i]);
    const double m = rho + bias[c];
    out[i] = (rho > 0.0 && m > 0.0) ? in[i] * (m / rho) : cdouble{0.0, 0.0};
  }
  return out;
}

inline void modrelu_backward(const ComplexGrid& in,
                             const std::vector<double>& bias,
                             const ComplexGrid& g_out, ComplexGrid& g_in,
                             std::vector<double>& g_bias) {
  const GridShape s = in.shape();
  g_in = ComplexGrid(s.nx, s.ny, s.nt, s.nc);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const int c = static_cast<int>(i % s.nc);
    const double rho = std::abs(in[i]);
    const double b = bias[c];
    if (rho <= 0.0 || rho + b <= 0.0) continue;
    const cdouble z = in[i], g = g_out[i];
    const double zg = z.real() * g.real() + z.imag() * g.imag();
    g_in[i] = g * (1.0 + b / rho) - z * (b / (rho * rho * rho) * zg);
    g_bias[c] += zg / rho;
  }
}

}  // namespace model_detail

/// Forward tape: everything the backward pass needs, recorded per unroll.
struct ReconTape {
  ComplexGrid x0;
  struct Unroll {
    ComplexGrid x_in;  // image entering the unroll
    ComplexGrid a1, a2, a3, a4, a5, a6;
    ComplexGrid dc;    // A^H(A x_in - y)
  };
  std::vector<Unroll> unrolls;
  ComplexGrid x_final;
};

namespace model_detail {

inline ComplexGrid regularizer_forward(const UnrollParams& u,
                                       const ComplexGrid& x,
                                       ReconTape::Unroll* tape) {
  ComplexGrid a1, a2, a4, a5;
  conv_spatial(x, u.conv_s1, a1);
  conv_temporal(a1, u.conv_t1, a2);
  ComplexGrid a3 = modrelu(a2, u.bias1);
  conv_spatial(a3, u.conv_s2, a4);
  conv_temporal(a4, u.conv_t2, a5);
  ComplexGrid a6 = modrelu(a5, u.bias2);
  ComplexGrid r;
  conv_spatial(a6, u.proj, r);  // 1x1 projection back to one channel
  if (tape) {
    tape->a1 = std::move(a1);
    tape->a2 = std::move(a2);
    tape->a3 = std::move(a3);
    tape->a4 = std::move(a4);
    tape->a5 = std::move(a5);
    tape->a6 = std::move(a6);
  }
  return r;
}

/// Backward through the regularizer; returns the input cotangent and
/// accumulates parameter gradients.
inline ComplexGrid regularizer_backward(const UnrollParams& u,
                                        const ReconTape::Unroll& tape,
                                        const ComplexGrid& g_r,
                                        UnrollParams& grad) {
  const GridShape s = tape.x_in.shape();
  ComplexGrid g_a6(s.nx, s.ny, s.nt, u.proj.shape().nt);
  conv_spatial_backward(tape.a6, u.proj, g_r, g_a6, grad.proj);
  ComplexGrid g_a5;
  modrelu_backward(tape.a5, u.bias2, g_a6, g_a5, grad.bias2);
  ComplexGrid g_a4(s.nx, s.ny, s.nt, u.conv_t2.shape().nt);
  conv_temporal_backward(tape.a4, u.conv_t2, g_a5, g_a4, grad.conv_t2);
  ComplexGrid g_a3(s.nx, s.ny, s.nt, u.conv_s2.shape().nt);
  conv_spatial_backward(tape.a3, u.conv_s2, g_a4, g_a3, grad.conv_s2);
  ComplexGrid g_a2;
  modrelu_backward(tape.a2, u.bias1, g_a3, g_a2, grad.bias1);
  ComplexGrid g_a1(s.nx, s.ny, s.nt, u.conv_t1.shape().nt);
  conv_temporal_backward(tape.a1, u.conv_t1, g_a2, g_a1, grad.conv_t1);
  ComplexGrid g_x(s.nx, s.ny, s.nt, 1);
  conv_spatial_backward(tape.x_in, u.conv_s1, g_a1, g_x, grad.conv_s1);
  return g_x;
}

}  // namespace model_detail

/// Run the unrolled network. Returns the final image estimate; fills the
/// tape when recording for a backward pass.
inline ComplexGrid reconstruct_image(const ModelParams& params,
                                     const ComplexGrid& y_in,
                                     const SamplingMask& m_in,
                                     const CoilMaps& coils,
                                     ReconTape* tape = nullptr) {
  // contract: the input is already masked
  const GridShape s = y_in.shape();
  {
    std::size_t gi = 0;
    for (std::size_t mi = 0; mi < m_in.size(); ++mi) {
      if (!m_in[mi])
        for (int c = 0; c < s.nc; ++c)
          if (y_in[gi + c] != cdouble{0.0, 0.0})
            throw std::invalid_argument(
                "reconstruct: input has data outside its mask");
      gi += s.nc;
    }
  }

  ComplexGrid x = adjoint_op(y_in, coils, m_in);
  const double cap = 1e3 * (norm2(x) + 1e-30);
  if (tape) {
    tape->x0 = x;
    tape->unrolls.clear();
    tape->unrolls.resize(params.stages.size());
  }
  for (std::size_t u = 0; u < params.stages.size(); ++u) {
    const UnrollParams& st = params.stages[u];
    ReconTape::Unroll* ut = tape ? &tape->unrolls[u] : nullptr;
    if (ut) ut->x_in = x;
    ComplexGrid r = model_detail::regularizer_forward(st, x, ut);
    ComplexGrid ax = forward_op(x, coils, m_in);
    ax -= y_in;
    ComplexGrid dc = adjoint_op(ax, coils, m_in);
    if (ut) ut->dc = dc;
    dc *= st.dc_step;
    x -= dc;
    x -= r;
    if (!x.all_finite() || norm2(x) > cap)
      throw std::runtime_error("divergence at unroll " + std::to_string(u));
  }
  if (tape) tape->x_final = x;
  return x;
}

/// Full predicted k-space F_coils(x), so losses can index it by masks.
inline ComplexGrid reconstruct(const ModelParams& params,
                               const ComplexGrid& y_in,
                               const SamplingMask& m_in, const CoilMaps& coils,
                               ReconTape* tape = nullptr) {
  ComplexGrid x = reconstruct_image(params, y_in, m_in, coils, tape);
  return forward_op(x, coils,
                    SamplingMask::ones(m_in.nx(), m_in.ny(), m_in.nt()));
}

/// Reverse-mode gradient of a real loss through reconstruct().
/// `loss_cotangent` is dL/d(pred k-space) in the real-pair packing; the
/// result reuses ModelParams as the gradient container. Coil maps are
/// treated as constants.
inline ModelParams backward(const ModelParams& params, const ComplexGrid& y_in,
                            const SamplingMask& m_in, const CoilMaps& coils,
                            const ComplexGrid& loss_cotangent,
                            const ReconTape& tape) {
  ModelParams grad = ModelParams::zeros(params.unrolls, params.channels,
                                        params.spatial_k, params.temporal_k);
  const SamplingMask full =
      SamplingMask::ones(m_in.nx(), m_in.ny(), m_in.nt());
  // through the output operator F_coils
  ComplexGrid g_x = adjoint_op(loss_cotangent, coils, full);
  for (int u = static_cast<int>(params.stages.size()) - 1; u >= 0; --u) {
    const UnrollParams& st = params.stages[u];
    const ReconTape::Unroll& ut = tape.unrolls[u];
    // x_next = x - eta * dc(x) - r(x)
    grad.stages[u].dc_step -= inner(g_x, ut.dc).real();
    ComplexGrid g_r = g_x;
    g_r *= -1.0;
    ComplexGrid g_from_r =
        model_detail::regularizer_backward(st, ut, g_r, grad.stages[u]);
    // dc branch: A^H A is self-adjoint
    ComplexGrid g_dc = adjoint_op(forward_op(g_x, coils, m_in), coils, m_in);
    g_dc *= st.dc_step;
    g_x -= g_dc;
    g_x += g_from_r;
  }
  return grad;
}

inline double grad_norm(ModelParams& grad) {
  double s = 0.0;
  for (double* p : collect_dof(grad)) s += (*p) * (*p);
  return std::sqrt(s);
}

}  // namespace units
