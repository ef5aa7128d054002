#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "units/mask.hpp"
#include "units/rng.hpp"

namespace units {

enum class SeedMode { kFixed, kPerStepRandom };
enum class MaskFamily { kBernoulli, kLines };
enum class ResplitMode { kDisjoint, kIndependent };

/// A ratio that is either pinned or redrawn uniformly per step. Random
/// draws are clipped to [kRatioClip, 1 - kRatioClip] so re-undersampling
/// probabilities stay strictly inside (0, 1).
struct RatioSpec {
  bool random = false;
  double value = 0.4;  // used when !random
  double lo = 0.0, hi = 1.0;

  static RatioSpec fixed(double v) { return {false, v, 0.0, 1.0}; }
  static RatioSpec uniform(double lo, double hi) { return {true, 0.4, lo, hi}; }
};

inline constexpr double kRatioClip = 0.02;

struct AccelerationSpec {
  bool random = false;
  double value = 8.0;       // used when !random
  int r_min = 2, r_max = 16;

  static AccelerationSpec fixed(double r) { return {false, r, 2, 16}; }
  static AccelerationSpec uniform_int(int lo, int hi) {
    return {true, 8.0, lo, hi};
  }
};

/// Declarative description of the initial- and re-undersampling randomness.
struct SamplingPlan {
  SeedMode initial_seed_mode = SeedMode::kPerStepRandom;
  AccelerationSpec acceleration = AccelerationSpec::fixed(8.0);
  MaskFamily mask_family = MaskFamily::kLines;
  int acs_lines = 4;
  ResplitMode resplit = ResplitMode::kDisjoint;
  RatioSpec input_ratio = RatioSpec::fixed(0.4);
  RatioSpec loss_ratio = RatioSpec::fixed(0.4);  // independent mode only
  double holdout_ratio = 0.2;                    // subsets == 3 only
  bool deterministic_resplit = false;            // split drawn once, reused
  int subsets = 2;
  bool holdout_validation = false;
  double line_density_gamma = 1.5;  // variable-density falloff exponent

  void validate() const {
    if (subsets != 2 && subsets != 3)
      throw std::invalid_argument("SamplingPlan: subsets must be 2 or 3");
    if (holdout_validation && subsets != 3)
      throw std::invalid_argument(
          "SamplingPlan: holdout validation requires 3 subsets");
    if (subsets == 3 && resplit != ResplitMode::kDisjoint)
      throw std::invalid_argument(
          "SamplingPlan: 3-subset plans must be disjoint");
  }
};

inline double draw_ratio(const RatioSpec& spec, Rng& rng) {
  if (!spec.random) return spec.value;
  const double lo = std::max(spec.lo, kRatioClip);
  const double hi = std::min(spec.hi, 1.0 - kRatioClip);
  return rng.uniform(lo, hi);
}

inline double draw_acceleration(const AccelerationSpec& spec, Rng& rng) {
  if (!spec.random) return spec.value;
  return static_cast<double>(rng.uniform_int(spec.r_min, spec.r_max));
}

namespace sampling_detail {

inline bool in_acs_band(int y, int ny, int acs_lines) {
  if (acs_lines <= 0) return false;
  const int c0 = ny / 2;
  const int lo = c0 - acs_lines / 2;
  return y >= lo && y < lo + acs_lines;
}

/// Variable-density ky line sampler; VISTA surrogate. Samples a constant
/// ny/R lines per frame (the always-on ACS band counts toward the
/// budget, keeping the overall density at 1/R), warping a golden-ratio
/// offset low-discrepancy sequence through the density profile so
/// patterns decorrelate across frames while temporal resolution stays
/// constant.
inline void fill_line_mask(SamplingMask& mask, double r, int acs_lines,
                           double gamma, Rng& rng) {
  const int nx = mask.nx(), ny = mask.ny(), nt = mask.nt();
  const int budget =
      std::clamp(static_cast<int>(std::lround(ny / r)) - acs_lines, 0,
                 ny - acs_lines);

  // density profile over the non-ACS lines, as a discrete CDF
  std::vector<int> free_lines;
  free_lines.reserve(ny);
  for (int y = 0; y < ny; ++y)
    if (!in_acs_band(y, ny, acs_lines)) free_lines.push_back(y);
  std::vector<double> cdf(free_lines.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < free_lines.size(); ++j) {
    const double d = std::abs(free_lines[j] - ny / 2.0) / (ny / 2.0 + 1.0);
    acc += std::pow(1.0 - d, gamma) + 0.08;
    cdf[j] = acc;
  }
  for (auto& v : cdf) v /= acc;

  const double golden = 0.61803398874989484820;
  const double jitter = rng.uniform();
  for (int t = 0; t < nt; ++t) {
    std::vector<std::uint8_t> taken(free_lines.size(), 0);
    for (int j = 0; j < budget; ++j) {
      const double u =
          std::fmod((j + 0.5) / budget + t * golden + jitter, 1.0);
      std::size_t idx =
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
      if (idx >= free_lines.size()) idx = free_lines.size() - 1;
      while (taken[idx]) idx = (idx + 1) % free_lines.size();
      taken[idx] = 1;
      const int y = free_lines[idx];
      for (int x = 0; x < nx; ++x) mask.at(x, y, t) = 1;
    }
    if (acs_lines > 0)
      for (int y = 0; y < ny; ++y)
        if (in_acs_band(y, ny, acs_lines))
          for (int x = 0; x < nx; ++x) mask.at(x, y, t) = 1;
  }
}

/// Point-wise Bernoulli mask; the ACS band counts toward the 1/R budget
/// so the overall expected density is 1/R whenever R <= ny/acs.
inline void fill_bernoulli_mask(SamplingMask& mask, double r, int acs_lines,
                                Rng& rng) {
  const int nx = mask.nx(), ny = mask.ny(), nt = mask.nt();
  const double acs_frac = static_cast<double>(acs_lines) / ny;
  const double p =
      std::clamp((1.0 / r - acs_frac) / (1.0 - acs_frac), 0.0, 1.0);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      const bool acs = in_acs_band(y, ny, acs_lines);
      for (int t = 0; t < nt; ++t)
        if (acs || rng.bernoulli(p)) mask.at(x, y, t) = 1;
    }
}

}  // namespace sampling_detail

struct MaskShape {
  int nx, ny, nt;
};

/// Draw an initial undersampling mask M_Y. Expected density is about 1/R
/// plus the always-sampled central ACS band; the line family keeps the
/// per-frame line count constant.
inline SamplingMask draw_initial_mask(const SamplingPlan& plan,
                                      MaskShape shape, Rng& rng) {
  if (shape.nx <= 0 || shape.ny <= 0 || shape.nt <= 0)
    throw std::invalid_argument("draw_initial_mask: invalid shape");
  if (plan.acs_lines > shape.ny)
    throw std::invalid_argument(
        "draw_initial_mask: ACS band wider than ky extent");
  const double r = draw_acceleration(plan.acceleration, rng);
  if (r < 1.0)
    throw std::invalid_argument("draw_initial_mask: acceleration below 1");

  SamplingMask mask(shape.nx, shape.ny, shape.nt);
  switch (plan.mask_family) {
    case MaskFamily::kBernoulli:
      sampling_detail::fill_bernoulli_mask(mask, r, plan.acs_lines, rng);
      break;
    case MaskFamily::kLines:
      sampling_detail::fill_line_mask(mask, r, plan.acs_lines,
                                      plan.line_density_gamma, rng);
      break;
  }
  return mask;
}

/// Re-undersample the acquired set into L subset masks (M_1 ... M_L).
///
/// Disjoint mode partitions the acquired set; ACS locations are assigned
/// to the input subset. Independent mode runs an independent Bernoulli
/// trial per subset and acquired location, overlap permitted. Degenerate
/// draws that leave a subset empty are redrawn a bounded number of times.
inline std::vector<SamplingMask> re_undersample(const SamplingMask& my,
                                                const SamplingPlan& plan,
                                                Rng& rng) {
  plan.validate();
  if (my.count_ones() == 0)
    throw std::invalid_argument("re_undersample: acquired mask is empty");
  const int L = plan.subsets;
  constexpr int kMaxRetries = 8;

  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    std::vector<SamplingMask> out(
        L, SamplingMask(my.nx(), my.ny(), my.nt()));
    if (plan.resplit == ResplitMode::kDisjoint) {
      const double q = draw_ratio(plan.input_ratio, rng);
      const double hold = (L == 3) ? plan.holdout_ratio : 0.0;
      for (int x = 0; x < my.nx(); ++x)
        for (int y = 0; y < my.ny(); ++y)
          for (int t = 0; t < my.nt(); ++t) {
            if (!my.at(x, y, t)) continue;
            if (sampling_detail::in_acs_band(y, my.ny(), plan.acs_lines)) {
              out[0].at(x, y, t) = 1;  // SSDU convention: ACS feeds the input
              continue;
            }
            const double u = rng.uniform();
            if (u < q)
              out[0].at(x, y, t) = 1;
            else if (L == 3 && u < q + (1.0 - q) * hold)
              out[2].at(x, y, t) = 1;  // self-validation holdout
            else
              out[1].at(x, y, t) = 1;
          }
    } else {
      const double q = draw_ratio(plan.input_ratio, rng);
      const double r = draw_ratio(plan.loss_ratio, rng);
      if (q <= 0.0 || q >= 1.0 || r <= 0.0 || r >= 1.0)
        throw std::invalid_argument(
            "re_undersample: independent ratios must lie in (0, 1)");
      for (std::size_t i = 0; i < my.size(); ++i) {
        if (!my[i]) continue;
        if (rng.bernoulli(q)) out[0][i] = 1;
        if (rng.bernoulli(r)) out[1][i] = 1;
      }
    }
    bool ok = true;
    for (const auto& m : out)
      if (m.count_ones() == 0) ok = false;
    if (ok) return out;
  }
  throw std::runtime_error("re_undersample: empty subset after retries");
}

/// Effective mask of a subset: M ⊙ M_Y.
inline SamplingMask effective_mask(const SamplingMask& m,
                                   const SamplingMask& my) {
  return mask_and(m, my);
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "units-fix", "rand-init-seed",  "rand-ratio", "independent-mask",
      "units-base", "units-cross",    "ssdu",       "zs-ssl"};
  return names;
}

/// Named sampling configurations: the ablation ladder rows plus the
/// mapped prior methods.
inline SamplingPlan preset(const std::string& name) {
  SamplingPlan p;  // defaults: per-step seed, R=8 lines, ACS 4, disjoint 0.4
  if (name == "units-fix" || name == "ssdu") {
    p.initial_seed_mode = SeedMode::kFixed;
    p.deterministic_resplit = true;
    return p;
  }
  if (name == "rand-init-seed") return p;
  if (name == "rand-ratio") {
    p.input_ratio = RatioSpec::uniform(0.0, 1.0);
    return p;
  }
  if (name == "independent-mask") {
    p.resplit = ResplitMode::kIndependent;
    p.input_ratio = RatioSpec::uniform(0.0, 1.0);
    p.loss_ratio = RatioSpec::uniform(0.0, 1.0);
    return p;
  }
  if (name == "units-base" || name == "units-cross") {
    p.acceleration = AccelerationSpec::uniform_int(2, 16);
    p.resplit = ResplitMode::kIndependent;
    p.input_ratio = RatioSpec::uniform(0.0, 1.0);
    p.loss_ratio = RatioSpec::uniform(0.0, 1.0);
    return p;
  }
  if (name == "zs-ssl") {
    p.initial_seed_mode = SeedMode::kFixed;
    p.deterministic_resplit = true;
    p.subsets = 3;
    p.holdout_validation = true;
    p.holdout_ratio = 0.2;
    return p;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += " " + n;
  throw std::invalid_argument("unknown preset '" + name + "'; valid:" + valid);
}

}  // namespace units
