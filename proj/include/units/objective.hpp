#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "units/model.hpp"
#include "units/sampling.hpp"

namespace units {

enum class LossKind { kSingle, kCross, kSupervised };
enum class NormKind { kL1, kL2 };

namespace objective_detail {

inline void require_masked(const ComplexGrid& target, const SamplingMask& m) {
  const GridShape s = target.shape();
  std::size_t gi = 0;
  for (std::size_t mi = 0; mi < m.size(); ++mi) {
    if (!m[mi])
      for (int c = 0; c < s.nc; ++c)
        if (target[gi + c] != cdouble{0.0, 0.0})
          throw std::invalid_argument("masked_loss: target not masked");
    gi += s.nc;
  }
}

}  // namespace objective_detail

/// Masked k-space loss: mean over sampled entries of |pred - target| (l1,
/// on the complex modulus) or |pred - target|^2 (l2). Normalizing by the
/// sampled count keeps losses comparable across random ratios.
inline double masked_loss(const ComplexGrid& pred_k,
                          const ComplexGrid& target_k, const SamplingMask& m,
                          NormKind norm) {
  const GridShape s = pred_k.shape();
  if (!(s == target_k.shape()))
    throw std::invalid_argument("masked_loss: shape mismatch");
  if (m.nx() != s.nx || m.ny() != s.ny || m.nt() != s.nt)
    throw std::invalid_argument("masked_loss: mask shape mismatch");
  objective_detail::require_masked(target_k, m);
  const std::size_t count = m.count_ones() * s.nc;
  if (count == 0) throw std::invalid_argument("empty loss mask");
  double acc = 0.0;
  std::size_t gi = 0;
  for (std::size_t mi = 0; mi < m.size(); ++mi) {
    if (m[mi])
      for (int c = 0; c < s.nc; ++c) {
        const cdouble d = pred_k[gi + c] - target_k[gi + c];
        acc += (norm == NormKind::kL1) ? std::abs(d) : std::norm(d);
      }
    gi += s.nc;
  }
  return acc / static_cast<double>(count);
}

/// dL/d(pred) for masked_loss in the real-pair packing.
inline ComplexGrid masked_loss_cotangent(const ComplexGrid& pred_k,
                                         const ComplexGrid& target_k,
                                         const SamplingMask& m,
                                         NormKind norm) {
  const GridShape s = pred_k.shape();
  const std::size_t count = m.count_ones() * s.nc;
  if (count == 0) throw std::invalid_argument("empty loss mask");
  ComplexGrid g(s);
  const double inv = 1.0 / static_cast<double>(count);
  std::size_t gi = 0;
  for (std::size_t mi = 0; mi < m.size(); ++mi) {
    if (m[mi])
      for (int c = 0; c < s.nc; ++c) {
        const cdouble d = pred_k[gi + c] - target_k[gi + c];
        if (norm == NormKind::kL1) {
          const double mag = std::abs(d);
          if (mag > 0.0) g[gi + c] = d / mag * inv;
        } else {
          g[gi + c] = 2.0 * d * inv;
        }
      }
    gi += s.nc;
  }
  return g;
}

/// Symmetric two-direction loss: each subset supervises the
/// reconstruction of the other through shared parameters.
inline double cross_loss(const ModelParams& params, const ComplexGrid& y1,
                         const ComplexGrid& y2, const SamplingMask& my1,
                         const SamplingMask& my2, const CoilMaps& coils,
                         NormKind norm) {
  const double dir1 =
      masked_loss(reconstruct(params, y1, my1, coils), y2, my2, norm);
  const double dir2 =
      masked_loss(reconstruct(params, y2, my2, coils), y1, my1, norm);
  return 0.5 * dir1 + 0.5 * dir2;
}

struct EarlyStopConfig {
  bool enabled = false;
  int patience = 10;  // non-improving evaluations before stopping
  int cadence = 25;   // steps between evaluations
};

struct TrainConfig {
  SamplingPlan plan;
  LossKind loss = LossKind::kSingle;
  NormKind norm = NormKind::kL1;
  int steps = 100;
  double lr = 4e-4;
  int batch = 1;
  std::uint64_t seed = 0;
  EarlyStopConfig early_stop;
  int unrolls = 6;
  int channels = 4;

  void validate() const {
    plan.validate();
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (batch != 1) throw std::invalid_argument("TrainConfig: batch is 1");
    if (steps < 0) throw std::invalid_argument("TrainConfig: negative steps");
    if (loss == LossKind::kCross && plan.subsets != 2)
      throw std::invalid_argument("TrainConfig: cross loss needs 2 subsets");
    if (early_stop.enabled && plan.subsets != 3)
      throw std::invalid_argument(
          "TrainConfig: early stopping needs a third subset");
  }
};

struct StepLog {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct TrainRun {
  std::vector<StepLog> logs;
  ModelParams params;
  std::uint64_t seed = 0;  // rng provenance
  int executed_steps = 0;
  bool early_stopped = false;
  double wall_seconds = 0.0;
};

struct TrainSample {
  const ComplexGrid* y0;    // fully-sampled k-space
  const CoilMaps* coils;
};

using DataSource = std::function<TrainSample(int step)>;

/// Adam with the usual bias correction. Zero gradients leave parameters
/// untouched (moments stay identically zero).
class Adam {
 public:
  Adam(double lr, const ModelParams& like)
      : lr_(lr),
        m_(ModelParams::zeros(like.unrolls, like.channels, like.spatial_k,
                              like.temporal_k)),
        v_(ModelParams::zeros(like.unrolls, like.channels, like.spatial_k,
                              like.temporal_k)) {}

  void step(ModelParams& params, ModelParams& grad) {
    ++t_;
    auto p = collect_dof(params), g = collect_dof(grad);
    auto m = collect_dof(m_), v = collect_dof(v_);
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      *m[i] = kBeta1 * *m[i] + (1.0 - kBeta1) * *g[i];
      *v[i] = kBeta2 * *v[i] + (1.0 - kBeta2) * *g[i] * *g[i];
      if (*m[i] == 0.0 && *v[i] == 0.0) continue;
      *p[i] -= lr_ * (*m[i] / c1) / (std::sqrt(*v[i] / c2) + kEps);
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  double lr_;
  int t_ = 0;
  ModelParams m_, v_;
};

namespace objective_detail {

inline void add_scaled(ModelParams& acc, ModelParams& g, double s) {
  auto a = collect_dof(acc), b = collect_dof(g);
  for (std::size_t i = 0; i < a.size(); ++i) *a[i] += s * *b[i];
}

struct StepDraw {
  SamplingMask my;
  std::vector<SamplingMask> subsets;
};

}  // namespace objective_detail

/// Mask draws for training step `step`; exposed so external checks can
/// re-derive any step's masks from the seed alone.
inline objective_detail::StepDraw step_masks(const TrainConfig& config,
                                             const GridShape& shape,
                                             int step) {
  objective_detail::StepDraw d;
  const std::uint64_t mask_counter =
      config.plan.initial_seed_mode == SeedMode::kFixed
          ? 0
          : static_cast<std::uint64_t>(step);
  Rng mask_rng(derive_seed(config.seed, "initial-mask", mask_counter));
  d.my = draw_initial_mask(config.plan, {shape.nx, shape.ny, shape.nt},
                           mask_rng);
  const std::uint64_t split_counter =
      config.plan.deterministic_resplit ? 0
                                        : static_cast<std::uint64_t>(step);
  Rng split_rng(derive_seed(config.seed, "resplit", split_counter));
  d.subsets = re_undersample(d.my, config.plan, split_rng);
  return d;
}

/// One training step's loss and parameter gradient at fixed masks.
inline double step_loss_and_grad(const ModelParams& params,
                                 const TrainConfig& config,
                                 const ComplexGrid& y0, const CoilMaps& coils,
                                 const objective_detail::StepDraw& draw,
                                 ModelParams* grad_out,
                                 double* val_loss = nullptr) {
  const SamplingMask& my = draw.my;
  const ComplexGrid y = apply_mask(my, y0);
  const SamplingMask my1 = effective_mask(draw.subsets[0], my);
  const SamplingMask my2 = effective_mask(draw.subsets[1], my);
  const ComplexGrid y1 = apply_mask(my1, y);
  const ComplexGrid y2 = apply_mask(my2, y);

  double loss = 0.0;
  ModelParams grad = ModelParams::zeros(params.unrolls, params.channels,
                                        params.spatial_k, params.temporal_k);
  switch (config.loss) {
    case LossKind::kSingle: {
      ReconTape tape;
      ComplexGrid pred = reconstruct(params, y1, my1, coils, &tape);
      loss = masked_loss(pred, y2, my2, config.norm);
      if (grad_out) {
        ComplexGrid cot = masked_loss_cotangent(pred, y2, my2, config.norm);
        grad = backward(params, y1, my1, coils, cot, tape);
      }
      if (val_loss && draw.subsets.size() == 3) {
        const SamplingMask my3 = effective_mask(draw.subsets[2], my);
        *val_loss = masked_loss(pred, apply_mask(my3, y), my3, config.norm);
      }
      break;
    }
    case LossKind::kCross: {
      ReconTape tape1, tape2;
      ComplexGrid pred1 = reconstruct(params, y1, my1, coils, &tape1);
      ComplexGrid pred2 = reconstruct(params, y2, my2, coils, &tape2);
      const double l1 = masked_loss(pred1, y2, my2, config.norm);
      const double l2 = masked_loss(pred2, y1, my1, config.norm);
      loss = 0.5 * l1 + 0.5 * l2;
      if (grad_out) {
        ComplexGrid cot1 = masked_loss_cotangent(pred1, y2, my2, config.norm);
        ComplexGrid cot2 = masked_loss_cotangent(pred2, y1, my1, config.norm);
        ModelParams g1 = backward(params, y1, my1, coils, cot1, tape1);
        ModelParams g2 = backward(params, y2, my2, coils, cot2, tape2);
        objective_detail::add_scaled(grad, g1, 0.5);
        objective_detail::add_scaled(grad, g2, 0.5);
      }
      break;
    }
    case LossKind::kSupervised: {
      ReconTape tape;
      ComplexGrid pred = reconstruct(params, y1, my1, coils, &tape);
      const SamplingMask full = SamplingMask::ones(my.nx(), my.ny(), my.nt());
      loss = masked_loss(pred, y0, full, config.norm);
      if (grad_out) {
        ComplexGrid cot = masked_loss_cotangent(pred, y0, full, config.norm);
        grad = backward(params, y1, my1, coils, cot, tape);
      }
      break;
    }
  }
  if (grad_out) *grad_out = std::move(grad);
  return loss;
}

/// Per-step workflow: draw M_Y, form Y, draw subsets, compute the
/// configured loss, Adam update. Single-threaded and bit-deterministic
/// given (config, data); wall-time fields are the only nondeterminism.
inline TrainRun train(const TrainConfig& config, const DataSource& data) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  ModelParams params =
      ModelParams::init(config.unrolls, config.channels,
                        derive_seed(config.seed, "model-init"));
  Adam opt(config.lr, params);

  TrainRun run;
  run.seed = config.seed;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_evals = 0;

  for (int step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainSample sample = data(step);
    const GridShape shape = sample.y0->shape();

    const auto draw = step_masks(config, shape, step);
    const bool eval_now = config.early_stop.enabled &&
                          (step + 1) % config.early_stop.cadence == 0;
    double val = std::numeric_limits<double>::quiet_NaN();
    ModelParams grad;
    const double loss =
        step_loss_and_grad(params, config, *sample.y0, *sample.coils, draw,
                           &grad, eval_now ? &val : nullptr);
    if (!std::isfinite(loss))
      throw std::runtime_error("non-finite loss at step " +
                               std::to_string(step));
    opt.step(params, grad);

    StepLog log;
    log.step = step;
    log.loss = loss;
    log.grad_norm = grad_norm(grad);
    log.lr = config.lr;
    log.val_loss = val;
    log.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    run.logs.push_back(log);
    run.executed_steps = step + 1;

    if (eval_now && std::isfinite(val)) {
      if (val < best_val) {
        best_val = val;
        bad_evals = 0;
      } else if (++bad_evals >= config.early_stop.patience) {
        run.early_stopped = true;
        break;
      }
    }
  }
  run.params = std::move(params);
  run.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
  return run;
}

enum class Scenario { kId, kOod };

/// Inference. OOD feeds the acquired k-space directly; ID applies one
/// input-subset re-undersampling draw first, mirroring the training
/// distribution. A ratio >= 1 keeps every acquired sample.
inline ComplexGrid infer(const ModelParams& params, const ComplexGrid& y,
                         const SamplingMask& my, const CoilMaps& coils,
                         Scenario scenario, const SamplingPlan& plan,
                         double id_ratio, Rng& rng) {
  if (scenario == Scenario::kOod || id_ratio >= 1.0)
    return reconstruct_image(params, y, my, coils);
  SamplingMask m1(my.nx(), my.ny(), my.nt());
  for (int attempt = 0; attempt < 8; ++attempt) {
    for (int x = 0; x < my.nx(); ++x)
      for (int yy = 0; yy < my.ny(); ++yy)
        for (int t = 0; t < my.nt(); ++t) {
          if (!my.at(x, yy, t)) {
            m1.at(x, yy, t) = 0;
            continue;
          }
          const bool acs =
              plan.resplit == ResplitMode::kDisjoint &&
              sampling_detail::in_acs_band(yy, my.ny(), plan.acs_lines);
          m1.at(x, yy, t) = acs || rng.bernoulli(id_ratio) ? 1 : 0;
        }
    if (m1.count_ones() > 0) break;
  }
  if (m1.count_ones() == 0)
    throw std::runtime_error("infer: empty input subset after retries");
  return reconstruct_image(params, apply_mask(m1, y), m1, coils);
}

}  // namespace units
