#pragma once

#include <cmath>
#include <stdexcept>

#include "units/fft.hpp"
#include "units/grid.hpp"
#include "units/mask.hpp"
#include "units/rng.hpp"

namespace units {

/// Per-coil sensitivity maps, (nx, ny, 1, nc), normalized so that
/// sum_c |c_i|^2 = 1 at every pixel.
struct CoilMaps {
  ComplexGrid maps;

  int nx() const { return maps.shape().nx; }
  int ny() const { return maps.shape().ny; }
  int nc() const { return maps.shape().nc; }

  cdouble at(int x, int y, int c) const { return maps.at(x, y, 0, c); }

  double max_sum_squares_error() const {
    double worst = 0.0;
    for (int x = 0; x < nx(); ++x)
      for (int y = 0; y < ny(); ++y) {
        double s = 0.0;
        for (int c = 0; c < nc(); ++c) s += std::norm(at(x, y, c));
        worst = std::max(worst, std::abs(s - 1.0));
      }
    return worst;
  }
};

namespace imaging_detail {

inline void require_forward_shapes(const GridShape& img, const CoilMaps& coils,
                                   const SamplingMask& mask) {
  if (img.nc != 1)
    throw std::invalid_argument("forward_op: image must have a single coil");
  if (coils.nx() != img.nx || coils.ny() != img.ny ||
      coils.maps.shape().nt != 1)
    throw std::invalid_argument("forward_op: coil map shape mismatch");
  if (mask.nx() != img.nx || mask.ny() != img.ny || mask.nt() != img.nt)
    throw std::invalid_argument("forward_op: mask shape mismatch");
}

}  // namespace imaging_detail

/// Multi-coil Cartesian MRI forward operator: mask ⊙ F(coils ⊙ image),
/// per coil. Linear in the image.
inline ComplexGrid forward_op(const ComplexGrid& image, const CoilMaps& coils,
                              const SamplingMask& mask) {
  const GridShape s = image.shape();
  imaging_detail::require_forward_shapes(s, coils, mask);
  ComplexGrid weighted(s.nx, s.ny, s.nt, coils.nc());
  for (int x = 0; x < s.nx; ++x)
    for (int y = 0; y < s.ny; ++y)
      for (int t = 0; t < s.nt; ++t) {
        const cdouble v = image.at(x, y, t, 0);
        for (int c = 0; c < coils.nc(); ++c)
          weighted.at(x, y, t, c) = coils.at(x, y, c) * v;
      }
  ComplexGrid k = fft_centered(weighted, FftAxes::XY);
  return apply_mask(mask, k);
}

/// Adjoint of forward_op: sum_c conj(coils) ⊙ F^{-1}(mask ⊙ k).
inline ComplexGrid adjoint_op(const ComplexGrid& kspace, const CoilMaps& coils,
                              const SamplingMask& mask) {
  const GridShape s = kspace.shape();
  if (s.nc != coils.nc())
    throw std::invalid_argument("adjoint_op: coil count mismatch");
  if (coils.nx() != s.nx || coils.ny() != s.ny)
    throw std::invalid_argument("adjoint_op: coil map shape mismatch");
  if (mask.nx() != s.nx || mask.ny() != s.ny || mask.nt() != s.nt)
    throw std::invalid_argument("adjoint_op: mask shape mismatch");
  ComplexGrid img_mc = ifft_centered(apply_mask(mask, kspace), FftAxes::XY);
  ComplexGrid out(s.nx, s.ny, s.nt, 1);
  for (int x = 0; x < s.nx; ++x)
    for (int y = 0; y < s.ny; ++y)
      for (int t = 0; t < s.nt; ++t) {
        cdouble acc = 0.0;
        for (int c = 0; c < s.nc; ++c)
          acc += std::conj(coils.at(x, y, c)) * img_mc.at(x, y, t, c);
        out.at(x, y, t, 0) = acc;
      }
  ensure_finite(out, "adjoint_op");
  return out;
}

/// Dynamic phantom: 3-6 soft-edged ellipses with sinusoidal per-frame
/// center/axis motion and a smooth random phase, peak magnitude 1.
/// Pure function of the seed.
inline ComplexGrid make_phantom(int nx, int ny, int nt, std::uint64_t seed) {
  if (nx < 8 || ny < 8)
    throw std::invalid_argument("make_phantom: nx, ny must be >= 8");
  if (nt < 1) throw std::invalid_argument("make_phantom: nt must be >= 1");

  Rng rng(derive_seed(seed, "phantom"));
  const double pi = 3.14159265358979323846;
  const double scale = std::min(nx, ny);

  struct Ellipse {
    double cx, cy, ax, ay, rot, amp;
    double mx, my, ma;          // motion amplitudes
    double ph_c, ph_a;          // motion phases
  };
  const int n_ell = static_cast<int>(3 + rng.uniform_int(0, 3));
  std::vector<Ellipse> ellipses(n_ell);
  for (int e = 0; e < n_ell; ++e) {
    Ellipse& el = ellipses[e];
    el.cx = rng.uniform(0.32, 0.68) * nx;
    el.cy = rng.uniform(0.32, 0.68) * ny;
    // first ellipse large enough to dominate the support on any seed
    const double lo = (e == 0) ? 0.22 : 0.14;
    const double hi = (e == 0) ? 0.32 : 0.28;
    el.ax = rng.uniform(lo, hi) * scale;
    el.ay = rng.uniform(lo, hi) * scale;
    el.rot = rng.uniform(0.0, pi);
    el.amp = rng.uniform(0.4, 1.0);
    el.mx = rng.uniform(0.0, 0.04) * nx;
    el.my = rng.uniform(0.0, 0.04) * ny;
    el.ma = rng.uniform(0.03, 0.12);
    el.ph_c = rng.uniform(0.0, 2.0 * pi);
    el.ph_a = rng.uniform(0.0, 2.0 * pi);
  }

  // smooth spatial phase from a handful of low-frequency waves
  struct Wave {
    double fx, fy, amp, ph;
  };
  std::vector<Wave> waves(3);
  for (auto& w : waves) {
    w.fx = static_cast<double>(rng.uniform_int(-2, 2));
    w.fy = static_cast<double>(rng.uniform_int(-2, 2));
    w.amp = rng.uniform(0.1, 0.8);
    w.ph = rng.uniform(0.0, 2.0 * pi);
  }

  ComplexGrid img(nx, ny, nt, 1);
  for (int t = 0; t < nt; ++t) {
    const double tau = 2.0 * pi * t / nt;
    for (const Ellipse& el : ellipses) {
      const double cx = el.cx + el.mx * std::sin(tau + el.ph_c);
      const double cy = el.cy + el.my * std::cos(tau + el.ph_c);
      const double ax = el.ax * (1.0 + el.ma * std::sin(tau + el.ph_a));
      const double ay = el.ay * (1.0 + el.ma * std::cos(tau + el.ph_a));
      const double cr = std::cos(el.rot), sr = std::sin(el.rot);
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
          const double dx = x - cx, dy = y - cy;
          const double u = (cr * dx + sr * dy) / ax;
          const double v = (-sr * dx + cr * dy) / ay;
          const double q = u * u + v * v;
          const double w = 0.5 * (1.0 + std::tanh((1.0 - q) / 0.15));
          img.at(x, y, t, 0) += el.amp * w;
        }
    }
  }
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      double phase = 0.0;
      for (const Wave& w : waves)
        phase += w.amp * std::sin(2.0 * pi * (w.fx * x / nx + w.fy * y / ny) +
                                  w.ph);
      const cdouble rot{std::cos(phase), std::sin(phase)};
      for (int t = 0; t < nt; ++t) img.at(x, y, t, 0) *= rot;
    }

  const double peak = max_abs(img);
  img *= 1.0 / peak;
  ensure_finite(img, "make_phantom");
  return img;
}

/// Synthetic coil sensitivities: Gaussian lobes placed on a ring with a
/// low-order smooth phase, sum-of-squares normalized per pixel. nc = 1
/// degenerates to the uniform unit coil.
inline CoilMaps make_coils(int nx, int ny, int nc, std::uint64_t seed) {
  if (nx < 1 || ny < 1 || nc < 1)
    throw std::invalid_argument("make_coils: sizes must be positive");
  ComplexGrid maps(nx, ny, 1, nc);
  if (nc == 1) {
    for (std::size_t i = 0; i < maps.size(); ++i) maps[i] = 1.0;
    return CoilMaps{std::move(maps)};
  }

  Rng rng(derive_seed(seed, "coils"));
  const double pi = 3.14159265358979323846;
  const double r0x = 0.55 * nx / 2.0, r0y = 0.55 * ny / 2.0;
  const double sigma = 0.55 * std::min(nx, ny);

  for (int c = 0; c < nc; ++c) {
    const double ang = 2.0 * pi * c / nc + rng.uniform(-0.2, 0.2);
    const double cx = nx / 2.0 + r0x * std::cos(ang);
    const double cy = ny / 2.0 + r0y * std::sin(ang);
    const double px = rng.uniform(-1.0, 1.0) / nx;
    const double py = rng.uniform(-1.0, 1.0) / ny;
    const double p0 = rng.uniform(0.0, 2.0 * pi);
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double mag = std::exp(-d2 / (2.0 * sigma * sigma)) + 0.05;
        const double ph = p0 + 2.0 * pi * (px * x + py * y);
        maps.at(x, y, 0, c) = mag * cdouble{std::cos(ph), std::sin(ph)};
      }
  }
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      double s = 0.0;
      for (int c = 0; c < nc; ++c) s += std::norm(maps.at(x, y, 0, c));
      const double inv = 1.0 / std::sqrt(s);
      for (int c = 0; c < nc; ++c) maps.at(x, y, 0, c) *= inv;
    }
  ensure_finite(maps, "make_coils");
  return CoilMaps{std::move(maps)};
}

}  // namespace units
