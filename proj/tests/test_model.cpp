#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "units/model.hpp"
#include "units/rng.hpp"

using namespace units;

namespace {

ComplexGrid random_grid(int nx, int ny, int nt, int nc, std::uint64_t seed) {
  ComplexGrid g(nx, ny, nt, nc);
  Rng rng(seed);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.complex_gaussian();
  return g;
}

CoilMaps uniform_single_coil(int nx, int ny) {
  ComplexGrid maps(nx, ny, 1, 1);
  for (std::size_t i = 0; i < maps.size(); ++i) maps[i] = 1.0;
  return CoilMaps{std::move(maps)};
}

SamplingMask random_mask(int nx, int ny, int nt, double p, std::uint64_t seed) {
  SamplingMask m(nx, ny, nt);
  Rng rng(seed);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(p);
  if (m.count_ones() == 0) m[0] = 1;
  return m;
}

// test loss: L = sum_i |pred_i - target_i|^2; cotangent = 2 (pred - target)
double quad_loss(const ComplexGrid& pred, const ComplexGrid& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    s += std::norm(pred[i] - target[i]);
  return s;
}

ComplexGrid quad_cotangent(const ComplexGrid& pred,
                           const ComplexGrid& target) {
  ComplexGrid g = pred;
  g -= target;
  g *= 2.0;
  return g;
}

struct Problem {
  ModelParams params;
  ComplexGrid y_in;
  SamplingMask mask;
  CoilMaps coils;
  ComplexGrid target;
};

Problem make_problem(int unrolls, int channels, std::uint64_t seed) {
  const int nx = 8, ny = 8, nt = 2, nc = 2;
  Problem p{ModelParams::init(unrolls, channels, seed),
            ComplexGrid(),
            random_mask(nx, ny, nt, 0.5, seed + 1),
            make_coils(nx, ny, nc, seed + 2),
            random_grid(nx, ny, nt, nc, seed + 3)};
  p.y_in = apply_mask(p.mask, random_grid(nx, ny, nt, nc, seed + 4));
  return p;
}

double problem_loss(Problem& p) {
  ComplexGrid pred = reconstruct(p.params, p.y_in, p.mask, p.coils);
  return quad_loss(pred, p.target);
}

ModelParams problem_grad(Problem& p) {
  ReconTape tape;
  ComplexGrid pred = reconstruct(p.params, p.y_in, p.mask, p.coils, &tape);
  return backward(p.params, p.y_in, p.mask, p.coils,
                  quad_cotangent(pred, p.target), tape);
}

// central finite difference on one real degree of freedom
double fd_grad(Problem& p, std::size_t dof_index, double h = 1e-4) {
  auto dof = collect_dof(p.params);
  double* target = dof[dof_index];
  const double saved = *target;
  *target = saved + h;
  const double lp = problem_loss(p);
  *target = saved - h;
  const double lm = problem_loss(p);
  *target = saved;
  return (lp - lm) / (2.0 * h);
}

}  // namespace

TEST_CASE("zero input and zero parameters give zero output") {
  const int nx = 8, ny = 8, nt = 2;
  ModelParams params = ModelParams::zeros(3, 2);
  CoilMaps coils = make_coils(nx, ny, 2, 1);
  SamplingMask mask = random_mask(nx, ny, nt, 0.5, 2);
  ComplexGrid y(nx, ny, nt, 2);
  ComplexGrid out = reconstruct(params, y, mask, coils);
  REQUIRE(norm2(out) == 0.0);
}

TEST_CASE("eta = 0 and zero regularizer is the zero-filled passthrough") {
  const int nx = 8, ny = 8, nt = 2;
  ModelParams params = ModelParams::zeros(4, 2);  // dc_step already 0
  CoilMaps coils = make_coils(nx, ny, 2, 3);
  SamplingMask mask = random_mask(nx, ny, nt, 0.4, 4);
  ComplexGrid y = apply_mask(mask, random_grid(nx, ny, nt, 2, 5));
  ComplexGrid out = reconstruct(params, y, mask, coils);
  ComplexGrid expect = forward_op(adjoint_op(y, coils, mask), coils,
                                  SamplingMask::ones(nx, ny, nt));
  ComplexGrid d = out;
  d -= expect;
  REQUIRE(norm2(d) < 1e-12);
}

TEST_CASE("a DC-only unroll is a fixed point on consistent data") {
  const int nx = 8, ny = 8, nt = 2;
  ModelParams params = ModelParams::zeros(1, 2);
  params.stages[0].dc_step = 1.0;
  CoilMaps coil = uniform_single_coil(nx, ny);
  SamplingMask full = SamplingMask::ones(nx, ny, nt);
  ComplexGrid y = random_grid(nx, ny, nt, 1, 6);
  ComplexGrid out = reconstruct(params, y, full, coil);
  ComplexGrid d = out;
  d -= y;
  REQUIRE(norm2(d) < 1e-8);
}

TEST_CASE("masked input contract is enforced") {
  const int nx = 8, ny = 8, nt = 1;
  ModelParams params = ModelParams::zeros(1, 2);
  CoilMaps coils = make_coils(nx, ny, 2, 7);
  SamplingMask mask(nx, ny, nt);
  mask.at(0, 0, 0) = 1;
  ComplexGrid y = random_grid(nx, ny, nt, 2, 8);  // unmasked everywhere
  REQUIRE_THROWS_AS(reconstruct(params, y, mask, coils),
                    std::invalid_argument);
}

TEST_CASE("modReLU preserves phase where it passes signal") {
  ComplexGrid z = random_grid(6, 6, 2, 3, 9);
  std::vector<double> bias = {-0.4, 0.0, 0.3};
  ComplexGrid out = model_detail::modrelu(z, bias);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (std::abs(out[i]) > 0.0) {
      const double phase_in = std::arg(z[i]);
      const double phase_out = std::arg(out[i]);
      REQUIRE(std::abs(phase_in - phase_out) < 1e-12);
    }
  }
  // negative bias produces a dead zone
  std::vector<double> heavy = {-100.0, -100.0, -100.0};
  REQUIRE(norm2(model_detail::modrelu(z, heavy)) == 0.0);
}

TEST_CASE("spatial conv gradient matches finite differences") {
  const int nx = 5, ny = 5, nt = 2, ic = 2, oc = 3, k = 3;
  ComplexGrid in = random_grid(nx, ny, nt, ic, 10);
  ComplexGrid w = random_grid(k, k, ic, oc, 11);
  ComplexGrid target = random_grid(nx, ny, nt, oc, 12);

  auto loss = [&](const ComplexGrid& in_, const ComplexGrid& w_) {
    ComplexGrid out;
    model_detail::conv_spatial(in_, w_, out);
    return quad_loss(out, target);
  };
  ComplexGrid out;
  model_detail::conv_spatial(in, w, out);
  ComplexGrid g_out = quad_cotangent(out, target);
  ComplexGrid g_in(nx, ny, nt, ic), g_w(k, k, ic, oc);
  model_detail::conv_spatial_backward(in, w, g_out, g_in, g_w);

  const double h = 1e-5;
  Rng pick(13);
  for (int trial = 0; trial < 20; ++trial) {
    // weight dof
    std::size_t wi = pick.u64() % w.size();
    const bool imag = pick.bernoulli(0.5);
    ComplexGrid wp = w, wm = w;
    wp[wi] += imag ? cdouble{0, h} : cdouble{h, 0};
    wm[wi] -= imag ? cdouble{0, h} : cdouble{h, 0};
    const double fd = (loss(in, wp) - loss(in, wm)) / (2 * h);
    const double an = imag ? g_w[wi].imag() : g_w[wi].real();
    REQUIRE(an == Catch::Approx(fd).margin(1e-6).epsilon(1e-6));
    // input dof
    std::size_t ii = pick.u64() % in.size();
    ComplexGrid ip = in, im = in;
    ip[ii] += imag ? cdouble{0, h} : cdouble{h, 0};
    im[ii] -= imag ? cdouble{0, h} : cdouble{h, 0};
    const double fdi = (loss(ip, w) - loss(im, w)) / (2 * h);
    const double ani = imag ? g_in[ii].imag() : g_in[ii].real();
    REQUIRE(ani == Catch::Approx(fdi).margin(1e-6).epsilon(1e-6));
  }
}

TEST_CASE("temporal conv gradient matches finite differences") {
  const int nx = 4, ny = 4, nt = 5, ic = 2, oc = 2, kt = 3;
  ComplexGrid in = random_grid(nx, ny, nt, ic, 14);
  ComplexGrid w = random_grid(kt, 1, ic, oc, 15);
  ComplexGrid target = random_grid(nx, ny, nt, oc, 16);
  auto loss = [&](const ComplexGrid& in_, const ComplexGrid& w_) {
    ComplexGrid out;
    model_detail::conv_temporal(in_, w_, out);
    return quad_loss(out, target);
  };
  ComplexGrid out;
  model_detail::conv_temporal(in, w, out);
  ComplexGrid g_out = quad_cotangent(out, target);
  ComplexGrid g_in(nx, ny, nt, ic), g_w(kt, 1, ic, oc);
  model_detail::conv_temporal_backward(in, w, g_out, g_in, g_w);
  const double h = 1e-5;
  Rng pick(17);
  for (int trial = 0; trial < 15; ++trial) {
    std::size_t wi = pick.u64() % w.size();
    const bool imag = pick.bernoulli(0.5);
    ComplexGrid wp = w, wm = w;
    wp[wi] += imag ? cdouble{0, h} : cdouble{h, 0};
    wm[wi] -= imag ? cdouble{0, h} : cdouble{h, 0};
    const double fd = (loss(in, wp) - loss(in, wm)) / (2 * h);
    const double an = imag ? g_w[wi].imag() : g_w[wi].real();
    REQUIRE(an == Catch::Approx(fd).margin(1e-6).epsilon(1e-6));
  }
}

TEST_CASE("modReLU gradient matches finite differences") {
  const int n = 4;
  ComplexGrid in = random_grid(n, n, 1, 2, 18);
  std::vector<double> bias = {0.2, -0.3};
  ComplexGrid target = random_grid(n, n, 1, 2, 19);
  auto loss = [&](const ComplexGrid& in_, const std::vector<double>& b_) {
    return quad_loss(model_detail::modrelu(in_, b_), target);
  };
  ComplexGrid out = model_detail::modrelu(in, bias);
  ComplexGrid g_out = quad_cotangent(out, target);
  ComplexGrid g_in;
  std::vector<double> g_bias(2, 0.0);
  model_detail::modrelu_backward(in, bias, g_out, g_in, g_bias);
  const double h = 1e-6;
  Rng pick(20);
  for (int trial = 0; trial < 15; ++trial) {
    std::size_t ii = pick.u64() % in.size();
    const bool imag = pick.bernoulli(0.5);
    ComplexGrid ip = in, im = in;
    ip[ii] += imag ? cdouble{0, h} : cdouble{h, 0};
    im[ii] -= imag ? cdouble{0, h} : cdouble{h, 0};
    const double fd = (loss(ip, bias) - loss(im, bias)) / (2 * h);
    const double an = imag ? g_in[ii].imag() : g_in[ii].real();
    REQUIRE(an == Catch::Approx(fd).margin(2e-5).epsilon(1e-5));
  }
  for (int c = 0; c < 2; ++c) {
    auto bp = bias, bm = bias;
    bp[c] += h;
    bm[c] -= h;
    const double fd = (loss(in, bp) - loss(in, bm)) / (2 * h);
    REQUIRE(g_bias[c] == Catch::Approx(fd).margin(2e-5).epsilon(1e-5));
  }
}

TEST_CASE("full composed model passes the gradient check") {
  Problem p = make_problem(2, 2, 42);
  ModelParams grad = problem_grad(p);
  auto analytic = collect_dof(grad);
  Rng pick(21);
  int checked = 0;
  while (checked < 60) {
    const std::size_t idx = pick.u64() % analytic.size();
    const double fd = fd_grad(p, idx);
    const double an = *analytic[idx];
    if (std::max(std::abs(fd), std::abs(an)) < 1e-6) {
      REQUIRE(std::abs(fd - an) < 1e-8);
    } else {
      const double rel =
          std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
      REQUIRE(rel < 1e-4);
    }
    ++checked;
  }
}

TEST_CASE("zero cotangent yields a zero gradient") {
  Problem p = make_problem(2, 2, 43);
  ReconTape tape;
  ComplexGrid pred = reconstruct(p.params, p.y_in, p.mask, p.coils, &tape);
  ComplexGrid zero_cot(pred.shape());
  ModelParams grad =
      backward(p.params, p.y_in, p.mask, p.coils, zero_cot, tape);
  REQUIRE(grad_norm(grad) == 0.0);
}

TEST_CASE("parameters behind a dead activation receive zero gradient") {
  Problem p = make_problem(2, 2, 44);
  // kill the second stage activation of unroll 0: its projection kernel
  // then never touches the output
  p.params.stages[0].bias2.assign(p.params.channels, -1e9);
  ModelParams grad = problem_grad(p);
  for (std::size_t i = 0; i < grad.stages[0].proj.size(); ++i)
    REQUIRE(grad.stages[0].proj[i] == cdouble{0.0, 0.0});
  for (double b : grad.stages[0].bias2) REQUIRE(b == 0.0);
  // the rest of the network still trains
  REQUIRE(grad_norm(grad) > 0.0);
}

TEST_CASE("DC-only unrolls reduce the data residual monotonically") {
  const int nx = 12, ny = 12, nt = 2, nc = 2;
  CoilMaps coils = make_coils(nx, ny, nc, 45);
  SamplingMask mask = random_mask(nx, ny, nt, 0.35, 46);
  ComplexGrid y = apply_mask(mask, random_grid(nx, ny, nt, nc, 47));

  // power-iteration estimate of ||A^H A||
  ComplexGrid v = random_grid(nx, ny, nt, 1, 48);
  double lambda = 0.0;
  for (int it = 0; it < 30; ++it) {
    ComplexGrid av = adjoint_op(forward_op(v, coils, mask), coils, mask);
    lambda = norm2(av) / norm2(v);
    av *= 1.0 / norm2(av);
    v = av;
  }
  const double eta = 1.5 / lambda;

  const int unrolls = 6;
  ModelParams params = ModelParams::zeros(unrolls, 2);
  for (auto& s : params.stages) s.dc_step = eta;

  // manual gradient-descent iteration as the reference
  ComplexGrid x = adjoint_op(y, coils, mask);
  double prev = norm2(forward_op(x, coils, mask) - y);
  std::vector<double> residuals;
  for (int u = 0; u < unrolls; ++u) {
    ComplexGrid r = forward_op(x, coils, mask);
    r -= y;
    ComplexGrid step = adjoint_op(r, coils, mask);
    step *= eta;
    x -= step;
    const double res = norm2(forward_op(x, coils, mask) - y);
    REQUIRE(res < prev);
    prev = res;
  }

  // reconstruct() follows the same trajectory
  ComplexGrid recon_x = reconstruct_image(params, y, mask, coils);
  ComplexGrid d = recon_x;
  d -= x;
  REQUIRE(norm2(d) < 1e-10);
}

TEST_CASE("initialization is bounded and deterministic") {
  ModelParams a = ModelParams::init(3, 4, 7);
  ModelParams b = ModelParams::init(3, 4, 7);
  auto da = collect_dof(a), db = collect_dof(b);
  REQUIRE(da.size() == a.param_count());
  for (std::size_t i = 0; i < da.size(); ++i) REQUIRE(*da[i] == *db[i]);

  // runs without tripping the divergence guard on bounded input
  const int nx = 12, ny = 12, nt = 3, nc = 2;
  CoilMaps coils = make_coils(nx, ny, nc, 50);
  SamplingMask mask = random_mask(nx, ny, nt, 0.4, 51);
  for (int trial = 0; trial < 5; ++trial) {
    ComplexGrid y = apply_mask(mask, random_grid(nx, ny, nt, nc, 60 + trial));
    REQUIRE_NOTHROW(reconstruct(a, y, mask, coils));
  }
}

TEST_CASE("the divergence guard reports the failing unroll") {
  Problem p = make_problem(3, 2, 52);
  for (std::size_t i = 0; i < p.params.stages[1].proj.size(); ++i)
    p.params.stages[1].proj[i] = 1e8;
  REQUIRE_THROWS_WITH(reconstruct(p.params, p.y_in, p.mask, p.coils),
                      Catch::Matchers::ContainsSubstring("divergence at unroll"));
}
