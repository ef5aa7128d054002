#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "units/fft.hpp"
#include "units/grid.hpp"
#include "units/rng.hpp"

using namespace units;

namespace {

ComplexGrid random_grid(int nx, int ny, int nt, int nc, std::uint64_t seed) {
  ComplexGrid g(nx, ny, nt, nc);
  Rng rng(seed);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.complex_gaussian();
  return g;
}

// Direct O(n^2) centered DFT over x and y, the independent oracle.
ComplexGrid naive_centered_dft(const ComplexGrid& g, bool inverse) {
  const GridShape s = g.shape();
  const double pi = 3.14159265358979323846;
  const double sign = inverse ? 1.0 : -1.0;
  const int cx = s.nx / 2, cy = s.ny / 2;
  ComplexGrid out(s.nx, s.ny, s.nt, s.nc);
  for (int t = 0; t < s.nt; ++t)
    for (int c = 0; c < s.nc; ++c)
      for (int kx = 0; kx < s.nx; ++kx)
        for (int ky = 0; ky < s.ny; ++ky) {
          cdouble acc = 0.0;
          for (int x = 0; x < s.nx; ++x)
            for (int y = 0; y < s.ny; ++y) {
              const double ang =
                  sign * 2.0 * pi *
                  (static_cast<double>(x - cx) * (kx - cx) / s.nx +
                   static_cast<double>(y - cy) * (ky - cy) / s.ny);
              acc += g.at(x, y, t, c) * cdouble{std::cos(ang), std::sin(ang)};
            }
          out.at(kx, ky, t, c) = acc / std::sqrt(double(s.nx) * s.ny);
        }
  return out;
}

double rel_err(const ComplexGrid& a, const ComplexGrid& b) {
  ComplexGrid d = a;
  d -= b;
  const double nb = norm2(b);
  return norm2(d) / (nb > 0 ? nb : 1.0);
}

}  // namespace

TEST_CASE("grid shape and indexing") {
  ComplexGrid g(3, 4, 2, 2);
  REQUIRE(g.size() == 48);
  g.at(2, 3, 1, 1) = {1.0, -2.0};
  REQUIRE(g[g.index(2, 3, 1, 1)] == cdouble{1.0, -2.0});
  REQUIRE(g.all_finite());
  g[0] = {std::nan(""), 0.0};
  REQUIRE_FALSE(g.all_finite());
}

TEST_CASE("unit impulse at center transforms to a flat spectrum") {
  const int nx = 8, ny = 8;
  ComplexGrid g(nx, ny, 1, 1);
  g.at(nx / 2, ny / 2, 0, 0) = 1.0;
  ComplexGrid k = fft_centered(g, FftAxes::XY);
  const double expect = 1.0 / std::sqrt(double(nx) * ny);
  for (std::size_t i = 0; i < k.size(); ++i)
    REQUIRE(std::abs(std::abs(k[i]) - expect) < 1e-12);
}

TEST_CASE("fft is unitary") {
  ComplexGrid g = random_grid(16, 12, 3, 2, 11);
  ComplexGrid k = fft_centered(g, FftAxes::XY);
  REQUIRE(std::abs(norm2(k) - norm2(g)) <= 1e-10 * norm2(g));
}

TEST_CASE("fft matches the naive centered DFT oracle") {
  for (auto [nx, ny] : {std::pair{4, 4}, {8, 6}, {7, 5}}) {
    ComplexGrid g = random_grid(nx, ny, 2, 1, 100 + nx);
    REQUIRE(rel_err(fft_centered(g, FftAxes::XY),
                    naive_centered_dft(g, false)) < 1e-10);
    REQUIRE(rel_err(ifft_centered(g, FftAxes::XY),
                    naive_centered_dft(g, true)) < 1e-10);
  }
}

TEST_CASE("fft round trip is exact to 1e-10 for the full desk scale") {
  for (auto [nx, ny, nt, nc] :
       {std::tuple{64, 64, 8, 4}, {32, 32, 8, 2}, {12, 20, 1, 1}, {9, 13, 2, 1}}) {
    ComplexGrid g = random_grid(nx, ny, nt, nc, 7 * nx + ny);
    ComplexGrid back = ifft_centered(fft_centered(g, FftAxes::XY), FftAxes::XY);
    REQUIRE(rel_err(back, g) <= 1e-10);
  }
}

TEST_CASE("single-axis transforms compose to the full transform") {
  ComplexGrid g = random_grid(8, 8, 2, 1, 5);
  ComplexGrid kx = fft_centered(g, FftAxes::X);
  ComplexGrid kxy = fft_centered(kx, FftAxes::Y);
  REQUIRE(rel_err(kxy, fft_centered(g, FftAxes::XY)) < 1e-12);
}

TEST_CASE("empty axis is rejected") {
  ComplexGrid g(0, 4, 1, 1);
  REQUIRE_THROWS_WITH(fft_centered(g, FftAxes::XY),
                      Catch::Matchers::ContainsSubstring("empty axis"));
}

TEST_CASE("inner product and norms") {
  ComplexGrid a = random_grid(4, 4, 1, 1, 1);
  ComplexGrid b = random_grid(4, 4, 1, 1, 2);
  // <a, b> = conj(<b, a>)
  REQUIRE(std::abs(inner(a, b) - std::conj(inner(b, a))) < 1e-14);
  REQUIRE(std::abs(inner(a, a).real() - norm2(a) * norm2(a)) < 1e-12);
}
