// Experiment runner: dataset synthesis, self-supervised training under the
// sampling presets, ID/OOD evaluation sweeps, the sampling-stochasticity
// ablation grid, and the estimator-theory verification suite. All outputs
// are CSV or the raw grid format; a master seed pins every random draw.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "units/experiment.hpp"

namespace {

void print_verify_summary(const units::VerifyOutcome& out) {
  std::printf("%-28s %12s %12s %10s  %s\n", "claim", "estimate", "reference",
              "tolerance", "pass");
  for (const auto& r : out.reports)
    std::printf("%-28s %12.6g %12.6g %10.3g  %s\n", r.claim.c_str(),
                r.estimate, r.reference, r.tolerance,
                r.pass ? "yes" : "NO");
  std::printf("verification %s\n", out.all_pass ? "PASSED" : "FAILED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "units — desk-scale self-supervised MRI reconstruction laboratory"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir;
  std::string preset_name;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int steps = -1;
  std::uint64_t trials = 1000000;
  bool inject_bias = false;
  std::string checkpoint = "";

  app.add_option("--spec", spec_path, "experiment spec file (JSON)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--preset", preset_name,
                 "sampling preset (units-fix rand-init-seed rand-ratio "
                 "independent-mask units-base units-cross ssdu zs-ssl)");
  app.add_option("--seed", seed, "master seed")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--steps", steps, "training step budget");

  auto* sim = app.add_subcommand("simulate",
                                 "write phantom, coils and example masks");
  auto* trn = app.add_subcommand("train", "train under the configured plan");
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint (ID/OOD)");
  evl->add_option("--checkpoint", checkpoint, "checkpoint directory");
  auto* abl = app.add_subcommand(
      "ablate", "train and evaluate all sampling-stochasticity variants");
  auto* ver = app.add_subcommand("verify",
                                 "run the estimator-theory verification");
  ver->add_option("--trials", trials, "Monte Carlo trials per claim");
  ver->add_flag("--debug-inject-bias", inject_bias,
                "fault injection: bias the predictor under test");
  for (auto* sub : {sim, trn, evl, abl, ver}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    units::ExperimentSpec spec;
    if (!spec_path.empty()) spec = units::load_spec(spec_path);
    if (seed_set) spec.master_seed = seed;
    if (!out_dir.empty()) spec.out_dir = out_dir;
    if (!preset_name.empty()) {
      spec.preset_name = preset_name;
      spec.inline_plan.reset();
    }
    if (steps >= 0) spec.steps = steps;

    if (sim->parsed()) {
      units::cmd_simulate(spec);
      std::printf("simulate: wrote %s\n", spec.out_dir.string().c_str());
    } else if (trn->parsed()) {
      units::TrainRun run = units::cmd_train(spec);
      std::printf("train: %d steps%s, final loss %.6g, wrote %s\n",
                  run.executed_steps,
                  run.early_stopped ? " (early stop)" : "",
                  run.logs.empty() ? 0.0 : run.logs.back().loss,
                  spec.out_dir.string().c_str());
    } else if (evl->parsed()) {
      if (checkpoint.empty())
        checkpoint = (spec.out_dir / "checkpoint").string();
      units::EvalOutcome out = units::cmd_eval(spec, checkpoint);
      for (const auto& s : out.summary)
        std::printf("eval %s r=%g: ssim %.4f ± %.4f, psnr %.2f dB\n",
                    s.scenario.c_str(), s.r, s.ssim.mean, s.ssim.stddev,
                    s.psnr.mean);
    } else if (abl->parsed()) {
      units::AblateOutcome out = units::cmd_ablate(spec);
      for (const auto& r : out.rows)
        std::printf("ablate %-18s %-10s ssim %.4f ± %.4f\n",
                    r.variant.c_str(), r.condition.c_str(), r.ssim.mean,
                    r.ssim.stddev);
    } else if (ver->parsed()) {
      units::VerifyOutcome out = units::cmd_verify(spec, trials, inject_bias);
      print_verify_summary(out);
      if (!out.all_pass) return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
