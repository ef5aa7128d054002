#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace units {

using cdouble = std::complex<double>;

/// Dense complex grid over (x, y, t, coil) axes, row-major with the coil
/// axis innermost. One type carries images, k-space, coil maps, gradients
/// and (reusing the four axes) convolution kernels.
struct GridShape {
  int nx = 0;
  int ny = 0;
  int nt = 0;
  int nc = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(nx) * ny * nt * nc;
  }
  bool operator==(const GridShape&) const = default;
};

class ComplexGrid {
 public:
  ComplexGrid() = default;

  ComplexGrid(int nx, int ny, int nt, int nc)
      : shape_{nx, ny, nt, nc}, data_(shape_.size()) {
    if (nx < 0 || ny < 0 || nt < 0 || nc < 0)
      throw std::invalid_argument("ComplexGrid: negative axis size");
  }

  explicit ComplexGrid(GridShape s) : ComplexGrid(s.nx, s.ny, s.nt, s.nc) {}

  const GridShape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int x, int y, int t, int c) const {
    return ((static_cast<std::size_t>(x) * shape_.ny + y) * shape_.nt + t) *
               shape_.nc +
           c;
  }

  cdouble& at(int x, int y, int t, int c) { return data_[index(x, y, t, c)]; }
  const cdouble& at(int x, int y, int t, int c) const {
    return data_[index(x, y, t, c)];
  }

  cdouble& operator[](std::size_t i) { return data_[i]; }
  const cdouble& operator[](std::size_t i) const { return data_[i]; }

  cdouble* data() { return data_.data(); }
  const cdouble* data() const { return data_.data(); }

  void fill(cdouble v) { data_.assign(data_.size(), v); }

  ComplexGrid& operator+=(const ComplexGrid& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  ComplexGrid& operator-=(const ComplexGrid& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  ComplexGrid& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  ComplexGrid& operator*=(cdouble s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend ComplexGrid operator+(ComplexGrid a, const ComplexGrid& b) {
    a += b;
    return a;
  }
  friend ComplexGrid operator-(ComplexGrid a, const ComplexGrid& b) {
    a -= b;
    return a;
  }

  bool all_finite() const {
    for (const auto& v : data_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

 private:
  void require_same_shape(const ComplexGrid& o) const {
    if (!(shape_ == o.shape_))
      throw std::invalid_argument("ComplexGrid: shape mismatch");
  }

  GridShape shape_;
  std::vector<cdouble> data_;
};

inline double norm2(const ComplexGrid& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += std::norm(g[i]);
  return std::sqrt(s);
}

/// Complex inner product <a, b> = sum conj(a_i) * b_i.
inline cdouble inner(const ComplexGrid& a, const ComplexGrid& b) {
  if (!(a.shape() == b.shape()))
    throw std::invalid_argument("inner: shape mismatch");
  cdouble s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double max_abs(const ComplexGrid& g) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i]));
  return m;
}

inline void ensure_finite(const ComplexGrid& g, const std::string& context) {
  if (!g.all_finite())
    throw std::runtime_error("non-finite value in " + context);
}

}  // namespace units
