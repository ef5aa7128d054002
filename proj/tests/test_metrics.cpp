#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "units/metrics.hpp"
#include "units/rng.hpp"

using namespace units;

namespace {

RealImage random_image(int nx, int ny, int nt, std::uint64_t seed,
                       bool smooth = false) {
  RealImage img(nx, ny, nt);
  Rng rng(seed);
  if (!smooth) {
    for (auto& v : img.data) v = rng.uniform();
    return img;
  }
  // smooth: sum of a few random low-frequency waves, clipped positive
  const double pi = 3.14159265358979323846;
  struct Wave {
    double fx, fy, amp, ph;
  };
  std::vector<Wave> waves(4);
  for (auto& w : waves)
    w = {double(rng.uniform_int(-3, 3)), double(rng.uniform_int(-3, 3)),
         rng.uniform(0.2, 1.0), rng.uniform(0.0, 2 * pi)};
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int t = 0; t < nt; ++t) {
        double v = 1.0;
        for (const auto& w : waves)
          v += w.amp * std::sin(2 * pi * (w.fx * x / nx + w.fy * y / ny) +
                                w.ph + 0.3 * t);
        img.at(x, y, t) = std::max(0.0, v);
      }
  return img;
}

// plain scalar-loop oracle
double mse_oracle(const RealImage& a, const RealImage& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return s / a.data.size();
}

}  // namespace

TEST_CASE("mse basics") {
  RealImage a = random_image(4, 4, 2, 1);
  REQUIRE(mse(a, a) == 0.0);

  RealImage b = a;
  for (auto& v : b.data) v += 0.5;
  REQUIRE(mse(a, b) == Catch::Approx(0.25).margin(1e-15));

  RealImage c = random_image(4, 4, 2, 2);
  REQUIRE(mse(a, c) == Catch::Approx(mse_oracle(a, c)).margin(1e-12));
  REQUIRE(mse(a, c) == mse(c, a));
}

TEST_CASE("psnr identities") {
  RealImage a = random_image(8, 8, 1, 3);
  RealImage b = a;
  REQUIRE(std::isinf(psnr(a, b, 1.0)));

  // mse == peak^2 gives 0 dB
  RealImage zero(8, 8, 1);
  RealImage ones(8, 8, 1);
  for (auto& v : ones.data) v = 1.0;
  REQUIRE(psnr(zero, ones, 1.0) == Catch::Approx(0.0).margin(1e-12));

  // mse = peak^2 / 1e4 gives 40 dB
  RealImage small(8, 8, 1);
  for (auto& v : small.data) v = 0.01;
  REQUIRE(psnr(small, zero, 1.0) == Catch::Approx(40.0).margin(1e-9));
}

TEST_CASE("ssim of identical images is exactly one") {
  RealImage a = random_image(12, 12, 2, 4, true);
  REQUIRE(ssim(a, a) == 1.0);
}

TEST_CASE("ssim of inverted binary structure is negative") {
  RealImage a(16, 16, 1);
  Rng rng(5);
  for (auto& v : a.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  RealImage b = a;
  for (auto& v : b.data) v = 1.0 - v;
  REQUIRE(ssim(a, b) < 0.0);
}

TEST_CASE("ssim matches the per-window scalar reference") {
  RealImage a = random_image(14, 14, 1, 6, true);
  RealImage b = random_image(14, 14, 1, 7, true);

  // independent per-window reference with explicit weighted moments
  const int w = 7;
  const double sigma = 1.5;
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    lo = std::min({lo, a.data[i], b.data[i]});
    hi = std::max({hi, a.data[i], b.data[i]});
  }
  const double L = hi - lo;
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  std::vector<double> wt(w * w);
  double wsum = 0.0;
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < w; ++j) {
      wt[i * w + j] = std::exp(-((i - 3.0) * (i - 3.0) + (j - 3.0) * (j - 3.0)) /
                               (2 * sigma * sigma));
      wsum += wt[i * w + j];
    }
  for (auto& v : wt) v /= wsum;
  double acc = 0.0;
  int count = 0;
  for (int x0 = 0; x0 + w <= 14; ++x0)
    for (int y0 = 0; y0 + w <= 14; ++y0) {
      double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          ma += wt[i * w + j] * a.at(x0 + i, y0 + j, 0);
          mb += wt[i * w + j] * b.at(x0 + i, y0 + j, 0);
        }
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double da = a.at(x0 + i, y0 + j, 0) - ma;
          const double db = b.at(x0 + i, y0 + j, 0) - mb;
          va += wt[i * w + j] * da * da;
          vb += wt[i * w + j] * db * db;
          cov += wt[i * w + j] * da * db;
        }
      acc += (2 * ma * mb + c1) * (2 * cov + c2) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  REQUIRE(ssim(a, b) == Catch::Approx(acc / count).margin(1e-9));
}

TEST_CASE("ssim is symmetric and scale-invariant with recomputed range") {
  RealImage a = random_image(12, 12, 1, 8, true);
  RealImage b = random_image(12, 12, 1, 9, true);
  REQUIRE(ssim(a, b) == Catch::Approx(ssim(b, a)).margin(1e-12));

  RealImage sa = a, sb = b;
  for (auto& v : sa.data) v *= 3.7;
  for (auto& v : sb.data) v *= 3.7;
  REQUIRE(ssim(sa, sb) == Catch::Approx(ssim(a, b)).margin(1e-9));
}

TEST_CASE("ssim rejects images smaller than the window") {
  RealImage a(5, 5, 1), b(5, 5, 1);
  REQUIRE_THROWS_AS(ssim(a, b), std::invalid_argument);
}

TEST_CASE("streaming and two-pass aggregation agree") {
  Rng rng(10);
  std::vector<double> v(257);
  for (auto& x : v) x = rng.gaussian(3.0, 2.0);
  StreamingAggregator s;
  for (double x : v) s.add(x);
  const Aggregate a = s.result(), b = aggregate_two_pass(v);
  REQUIRE(a.n == b.n);
  REQUIRE(a.mean == Catch::Approx(b.mean).margin(1e-10));
  REQUIRE(a.stddev == Catch::Approx(b.stddev).margin(1e-10));
}

TEST_CASE("frame metrics cover every frame") {
  RealImage ref = random_image(12, 12, 3, 11, true);
  RealImage rec = ref;
  rec.at(3, 3, 1) += 0.05;
  auto records = frame_metrics(rec, ref, "run0");
  REQUIRE(records.size() == 3);
  REQUIRE(records[0].frame == 0);
  REQUIRE(std::isinf(records[0].psnr_db));  // untouched frame
  REQUIRE(records[1].mse > 0.0);
  REQUIRE(records[1].ssim < 1.0);
  REQUIRE(records[2].ssim == 1.0);
}
