// End-to-end tour: train TinyConvNet under GHFP at 40% pruning, show the
// schedule trajectory, compact the result and verify it matches.

#include <cstdio>

#include "prunekit/prunekit.hpp"

int main() {
  using namespace prunekit;

  RunConfig cfg;
  cfg.arch = "tinyconvnet";
  cfg.schedule = ScheduleConfig::for_mode(Mode::GHFP, 0.4, 20);
  cfg.n_train = 512;
  cfg.n_test = 256;
  cfg.seed = 7;

  std::printf("training %s, mode %s, goal rate %.0f%%, %d epochs\n", cfg.arch.c_str(),
              mode_name(cfg.schedule.mode), cfg.schedule.goal_rate * 100.0, cfg.schedule.t_max);

  const RunResult result = run_ghfp(cfg);
  for (const auto& m : result.metrics)
    if (m.t % 5 == 0 || m.t == cfg.schedule.t_max - 1)
      std::printf("  t=%2d loss=%.4f acc=%.3f alpha=%.4f lambda_h=%.3f rate=%.3f flops=%.0f\n",
                  m.t, m.train_loss, m.test_acc, m.alpha, m.lambda_h, m.rate, m.masked_flops);

  const CompactResult compacted = compact(result.model, result.mask);
  std::printf("\ncompaction report:\n%s", compacted.report.c_str());

  const double dev = verify_equivalence(result.model, result.mask, compacted.model, 100);
  std::printf("masked vs compacted max logit deviation: %.3g\n", dev);

  const FlopsReport before = count_flops(result.model.arch);
  const FlopsReport after = count_flops(compacted.model.arch);
  std::printf("FLOPs %.0f -> %.0f (%.1f%% reduction)\n", before.total, after.total,
              100.0 * (1.0 - after.total / before.total));
  return 0;
}
