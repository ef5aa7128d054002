#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "units/grid.hpp"

namespace units {

enum class FftAxes { X, Y, XY };

namespace fft_detail {

constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Roots-of-unity table for order n (power of two): w[k] = exp(-2*pi*i*k/n)
/// for k in [0, n/2). Shared across stages; stage `len` uses stride n/len.
inline const std::vector<cdouble>& root_table(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<std::vector<cdouble>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<std::vector<cdouble>>(n / 2);
    for (int k = 0; k < n / 2; ++k) {
      const double a = -2.0 * kPi * k / n;
      (*slot)[k] = {std::cos(a), std::sin(a)};
    }
  }
  return *slot;
}

/// In-place iterative radix-2 transform, n a power of two. Forward kernel
/// exp(-2*pi*i*jk/n); inverse uses the conjugate kernel. No normalization.
inline void transform_pow2(cdouble* a, int n, bool inverse) {
  if (n <= 1) return;
  const auto& roots = root_table(n);
  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int stride = n / len;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < len / 2; ++k) {
        cdouble w = roots[k * stride];
        if (inverse) w = std::conj(w);
        const cdouble u = a[i + k];
        const cdouble t = w * a[i + k + len / 2];
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
      }
    }
  }
}

/// Bluestein chirp plan for arbitrary-length transforms.
struct ChirpPlan {
  int n = 0;
  int m = 0;                     // padded power-of-two length >= 2n-1
  std::vector<cdouble> chirp;    // exp(-i*pi*k^2/n), k in [0, n)
  std::vector<cdouble> kernel_f; // forward FFT of the chirp-conjugate kernel
};

inline const ChirpPlan& chirp_plan(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<ChirpPlan>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    auto plan = std::make_unique<ChirpPlan>();
    plan->n = n;
    plan->m = next_pow2(2 * n - 1);
    plan->chirp.resize(n);
    for (int k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle small for large n
      const std::int64_t k2 = (static_cast<std::int64_t>(k) * k) % (2 * n);
      const double a = -kPi * static_cast<double>(k2) / n;
      plan->chirp[k] = {std::cos(a), std::sin(a)};
    }
    std::vector<cdouble> b(plan->m, cdouble{0.0, 0.0});
    b[0] = std::conj(plan->chirp[0]);
    for (int k = 1; k < n; ++k) {
      b[k] = std::conj(plan->chirp[k]);
      b[plan->m - k] = std::conj(plan->chirp[k]);
    }
    transform_pow2(b.data(), plan->m, false);
    plan->kernel_f = std::move(b);
    slot = std::move(plan);
  }
  return *slot;
}

/// Unnormalized DFT of arbitrary length (Bluestein when not a power of two).
inline void transform_any(cdouble* a, int n, bool inverse) {
  if (n <= 1) return;
  if (is_pow2(n)) {
    transform_pow2(a, n, inverse);
    return;
  }
  const ChirpPlan& plan = chirp_plan(n);
  std::vector<cdouble> buf(plan.m, cdouble{0.0, 0.0});
  for (int k = 0; k < n; ++k) {
    const cdouble c = inverse ? std::conj(plan.chirp[k]) : plan.chirp[k];
    buf[k] = a[k] * c;
  }
  transform_pow2(buf.data(), plan.m, false);
  if (inverse) {
    for (int k = 0; k < plan.m; ++k) buf[k] *= std::conj(plan.kernel_f[k]);
  } else {
    for (int k = 0; k < plan.m; ++k) buf[k] *= plan.kernel_f[k];
  }
  transform_pow2(buf.data(), plan.m, true);
  const double inv_m = 1.0 / plan.m;
  for (int k = 0; k < n; ++k) {
    const cdouble c = inverse ? std::conj(plan.chirp[k]) : plan.chirp[k];
    a[k] = buf[k] * inv_m * c;
  }
}

}  // namespace fft_detail

/// Centered unitary Fourier transform over the requested spatial axes.
///
/// The DC component sits at index floor(n/2) on every transformed axis and
/// the kernel is exp(-2*pi*i*(j-c)(k-c)/n) scaled by 1/sqrt(n), so the
/// transform is unitary (Parseval holds exactly) and self-consistent with
/// masks indexed on the centered grid. Any axis length >= 1 is supported.
inline ComplexGrid fft_centered(const ComplexGrid& g, FftAxes axes,
                                bool inverse = false) {
  const GridShape s = g.shape();
  const bool do_x = (axes == FftAxes::X || axes == FftAxes::XY);
  const bool do_y = (axes == FftAxes::Y || axes == FftAxes::XY);
  if ((do_x && s.nx == 0) || (do_y && s.ny == 0))
    throw std::invalid_argument("fft_centered: empty axis");

  ComplexGrid out = g;
  std::vector<cdouble> line;

  auto transform_axis = [&](int n, auto get, auto set) {
    const int c0 = n / 2;
    line.resize(n);
    for (int j = 0; j < n; ++j) line[j] = get((j + c0) % n);
    fft_detail::transform_any(line.data(), n, inverse);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) set((k + c0) % n, line[k] * scale);
  };

  if (do_x) {
    for (int y = 0; y < s.ny; ++y)
      for (int t = 0; t < s.nt; ++t)
        for (int c = 0; c < s.nc; ++c)
          transform_axis(
              s.nx, [&](int x) { return out.at(x, y, t, c); },
              [&](int x, cdouble v) { out.at(x, y, t, c) = v; });
  }
  if (do_y) {
    for (int x = 0; x < s.nx; ++x)
      for (int t = 0; t < s.nt; ++t)
        for (int c = 0; c < s.nc; ++c)
          transform_axis(
              s.ny, [&](int y) { return out.at(x, y, t, c); },
              [&](int y, cdouble v) { out.at(x, y, t, c) = v; });
  }
  ensure_finite(out, "fft_centered");
  return out;
}

inline ComplexGrid ifft_centered(const ComplexGrid& g,
                                 FftAxes axes = FftAxes::XY) {
  return fft_centered(g, axes, /*inverse=*/true);
}

inline ComplexGrid fft_centered(const ComplexGrid& g) {
  return fft_centered(g, FftAxes::XY);
}

}  // namespace units
