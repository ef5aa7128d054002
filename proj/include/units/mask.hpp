#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "units/grid.hpp"

namespace units {

/// Binary k-space sampling mask over (x, y, t); broadcast over the coil
/// axis when applied to a grid. Entries are 0/1 and composition is the
/// Hadamard product, so masks form an idempotent algebra.
class SamplingMask {
 public:
  SamplingMask() = default;

  SamplingMask(int nx, int ny, int nt)
      : nx_(nx), ny_(ny), nt_(nt),
        bits_(static_cast<std::size_t>(nx) * ny * nt, 0) {
    if (nx < 0 || ny < 0 || nt < 0)
      throw std::invalid_argument("SamplingMask: negative axis size");
  }

  static SamplingMask ones(int nx, int ny, int nt) {
    SamplingMask m(nx, ny, nt);
    m.bits_.assign(m.bits_.size(), 1);
    return m;
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nt() const { return nt_; }
  std::size_t size() const { return bits_.size(); }

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(x) * ny_ + y) * nt_ + t;
  }

  std::uint8_t& at(int x, int y, int t) { return bits_[index(x, y, t)]; }
  std::uint8_t at(int x, int y, int t) const { return bits_[index(x, y, t)]; }

  std::uint8_t& operator[](std::size_t i) { return bits_[i]; }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count_ones() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  double density() const {
    return bits_.empty() ? 0.0
                         : static_cast<double>(count_ones()) / bits_.size();
  }

  bool same_shape(const SamplingMask& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nt_ == o.nt_;
  }

  bool operator==(const SamplingMask& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nt_ == o.nt_ && bits_ == o.bits_;
  }

 private:
  int nx_ = 0, ny_ = 0, nt_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline SamplingMask mask_and(const SamplingMask& a, const SamplingMask& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("mask_and: shape mismatch");
  SamplingMask out(a.nx(), a.ny(), a.nt());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & b[i];
  return out;
}

inline SamplingMask mask_or(const SamplingMask& a, const SamplingMask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mask_or: shape mismatch");
  SamplingMask out(a.nx(), a.ny(), a.nt());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] | b[i];
  return out;
}

/// a \ b — locations of a not in b.
inline SamplingMask mask_minus(const SamplingMask& a, const SamplingMask& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("mask_minus: shape mismatch");
  SamplingMask out(a.nx(), a.ny(), a.nt());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & !b[i];
  return out;
}

/// Hadamard application to a grid, broadcasting over the coil axis.
inline ComplexGrid apply_mask(const SamplingMask& m, const ComplexGrid& g) {
  const GridShape s = g.shape();
  if (m.nx() != s.nx || m.ny() != s.ny || m.nt() != s.nt)
    throw std::invalid_argument("apply_mask: shape mismatch");
  ComplexGrid out = g;
  std::size_t gi = 0;
  for (std::size_t mi = 0; mi < m.size(); ++mi) {
    if (!m[mi]) {
      for (int c = 0; c < s.nc; ++c) out[gi + c] = 0.0;
    }
    gi += s.nc;
  }
  return out;
}

}  // namespace units
