#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "units/grid.hpp"

namespace units {

/// Real-valued (magnitude) image stack over (x, y, t), row-major.
struct RealImage {
  int nx = 0, ny = 0, nt = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(int nx_, int ny_, int nt_)
      : nx(nx_), ny(ny_), nt(nt_),
        data(static_cast<std::size_t>(nx_) * ny_ * nt_, 0.0) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(x) * ny + y) * nt + t;
  }
  double& at(int x, int y, int t) { return data[index(x, y, t)]; }
  double at(int x, int y, int t) const { return data[index(x, y, t)]; }

  bool same_shape(const RealImage& o) const {
    return nx == o.nx && ny == o.ny && nt == o.nt;
  }
};

inline RealImage magnitude_image(const ComplexGrid& g) {
  const GridShape s = g.shape();
  if (s.nc != 1)
    throw std::invalid_argument("magnitude_image: expected a single coil");
  RealImage out(s.nx, s.ny, s.nt);
  for (int x = 0; x < s.nx; ++x)
    for (int y = 0; y < s.ny; ++y)
      for (int t = 0; t < s.nt; ++t)
        out.at(x, y, t) = std::abs(g.at(x, y, t, 0));
  return out;
}

inline double mse(const RealImage& a, const RealImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
  if (a.data.empty()) throw std::invalid_argument("mse: empty image");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / a.data.size();
}

inline double peak_value(const RealImage& ref) {
  double peak = 0.0;
  for (double v : ref.data) peak = std::max(peak, std::abs(v));
  return peak;
}

/// 10*log10(peak^2 / mse); identical images report the +infinity sentinel.
inline double psnr(const RealImage& a, const RealImage& b, double peak) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

inline double psnr(const RealImage& a, const RealImage& b) {
  return psnr(a, b, peak_value(b));
}

struct SsimOptions {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Windowed SSIM with a Gaussian window, evaluated per frame over windows
/// that fit entirely inside the image, then averaged over windows and
/// frames. The dynamic range is the joint max-min of both images so the
/// metric stays symmetric.
inline double ssim(const RealImage& a, const RealImage& b,
                   SsimOptions opt = {}) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  const int w = opt.window;
  if (a.nx < w || a.ny < w)
    throw std::invalid_argument("ssim: image smaller than window");

  std::vector<double> weights(static_cast<std::size_t>(w) * w);
  {
    double sum = 0.0;
    const double c = (w - 1) / 2.0;
    for (int i = 0; i < w; ++i)
      for (int j = 0; j < w; ++j) {
        const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
        weights[i * w + j] = std::exp(-d2 / (2.0 * opt.sigma * opt.sigma));
        sum += weights[i * w + j];
      }
    for (auto& v : weights) v /= sum;
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    lo = std::min({lo, a.data[i], b.data[i]});
    hi = std::max({hi, a.data[i], b.data[i]});
  }
  const double range = (hi > lo) ? (hi - lo) : 1.0;
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);

  double total = 0.0;
  std::size_t windows = 0;
  for (int t = 0; t < a.nt; ++t)
    for (int x0 = 0; x0 + w <= a.nx; ++x0)
      for (int y0 = 0; y0 + w <= a.ny; ++y0) {
        double ma = 0.0, mb = 0.0;
        for (int i = 0; i < w; ++i)
          for (int j = 0; j < w; ++j) {
            const double wt = weights[i * w + j];
            ma += wt * a.at(x0 + i, y0 + j, t);
            mb += wt * b.at(x0 + i, y0 + j, t);
          }
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (int i = 0; i < w; ++i)
          for (int j = 0; j < w; ++j) {
            const double wt = weights[i * w + j];
            const double da = a.at(x0 + i, y0 + j, t) - ma;
            const double db = b.at(x0 + i, y0 + j, t) - mb;
            va += wt * da * da;
            vb += wt * db * db;
            cov += wt * da * db;
          }
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
  return total / windows;
}

struct MetricRecord {
  std::string run_id;
  int frame = 0;
  double mse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Per-frame metrics between a reconstruction and its reference.
inline std::vector<MetricRecord> frame_metrics(const RealImage& recon,
                                               const RealImage& ref,
                                               const std::string& run_id) {
  std::vector<MetricRecord> out;
  const double peak = peak_value(ref);
  for (int t = 0; t < ref.nt; ++t) {
    RealImage a(ref.nx, ref.ny, 1), b(ref.nx, ref.ny, 1);
    for (int x = 0; x < ref.nx; ++x)
      for (int y = 0; y < ref.ny; ++y) {
        a.at(x, y, 0) = recon.at(x, y, t);
        b.at(x, y, 0) = ref.at(x, y, t);
      }
    MetricRecord rec;
    rec.run_id = run_id;
    rec.frame = t;
    rec.mse = mse(a, b);
    rec.psnr_db = psnr(a, b, peak);
    rec.ssim = ssim(a, b);
    out.push_back(rec);
  }
  return out;
}

struct Aggregate {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 when n < 2
};

/// Streaming (Welford) aggregation.
class StreamingAggregator {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / n_;
    m2_ += d * (v - mean_);
  }
  Aggregate result() const {
    Aggregate a;
    a.n = n_;
    a.mean = mean_;
    a.stddev = n_ > 1 ? std::sqrt(m2_ / (n_ - 1)) : 0.0;
    return a;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

inline Aggregate aggregate_two_pass(const std::vector<double>& v) {
  Aggregate a;
  a.n = v.size();
  if (v.empty()) return a;
  double s = 0.0;
  for (double x : v) s += x;
  a.mean = s / v.size();
  if (v.size() > 1) {
    double q = 0.0;
    for (double x : v) q += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(q / (v.size() - 1));
  }
  return a;
}

inline Aggregate aggregate(const std::vector<double>& v) {
  return aggregate_two_pass(v);
}

}  // namespace units
