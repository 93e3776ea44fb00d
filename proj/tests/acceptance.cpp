// Acceptance gate: one PASS/FAIL line per release criterion, pinned
// tolerances, nonzero exit if anything fails. Runs standalone (no test
// framework) so the output reads as a checklist.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/prunekit.hpp"

using namespace prunekit;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.empty() ? "" : ": ",
              detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// ==========================================================================
// 1+2. Static FLOPs accounting: reduction targets and baseline magnitudes.
// ==========================================================================

void check_flops() {
  const auto start = std::chrono::steady_clock::now();

  const struct {
    const char* arch;
    double rate, expected_pct;
  } reductions[] = {
      {"resnet20", 0.20, 29.3}, {"resnet20", 0.40, 54.0}, {"resnet56", 0.20, 28.4},
      {"resnet56", 0.40, 52.6}, {"resnet56", 0.60, 72.6}, {"resnet110", 0.20, 28.2},
      {"vgg16", 0.20, 34.2},
  };
  double worst_pp = 0.0;
  for (const auto& row : reductions) {
    const ArchSpec arch = build_arch(row.arch);
    const double pct = count_flops(arch, uniform_rates(arch, row.rate)).reduction_pct;
    worst_pp = std::max(worst_pp, std::abs(pct - row.expected_pct));
  }

  const struct {
    const char* arch;
    double expected;
  } baselines[] = {
      {"resnet20", 4.06e7}, {"resnet56", 1.254e8}, {"resnet110", 2.535e8}, {"vgg16", 3.10e8}};
  double worst_rel = 0.0;
  for (const auto& row : baselines) {
    const double total = count_flops(build_arch(row.arch)).total;
    worst_rel = std::max(worst_rel, std::abs(total - row.expected) / row.expected);
  }

  const double elapsed = seconds_since(start);
  report("flops_reduction_targets", worst_pp <= 2.0 && elapsed < 1.0,
         fmt("worst |dev| %.2f pp (tol 2.0), %.3fs (limit 1s)", worst_pp, elapsed));
  report("baseline_flops_magnitudes", worst_rel <= 0.05,
         fmt("worst rel dev %.2f%% (tol 5%%)", 100.0 * worst_rel));
}

// ==========================================================================
// 3. Schedule exactness against direct evaluation of the closed forms.
// ==========================================================================

void check_schedules() {
  bool ok = true;
  std::string why;
  const auto fail = [&](const std::string& msg) {
    if (ok) why = msg;
    ok = false;
  };

  for (int t_max : {2, 40, 200}) {
    ScheduleConfig cfg = ScheduleConfig::for_mode(Mode::GHFP, 0.4, t_max);

    // boundaries, exact
    if (alpha_schedule(cfg, 0) != cfg.alpha0) fail(fmt("alpha(0) != alpha0 at t_max %d", t_max));
    if (alpha_schedule(cfg, t_max - 1) != 0.0) fail(fmt("alpha(end) != 0 at t_max %d", t_max));
    if (lambda_schedule(cfg, 0) != cfg.lambda_i) fail(fmt("lambda(0) != lambda_i, %d", t_max));
    if (lambda_schedule(cfg, t_max - 1) != cfg.lambda_f) fail(fmt("lambda(end), %d", t_max));
    if (rate_schedule(cfg, "", t_max - 1) != cfg.goal_rate) fail(fmt("rate(end), %d", t_max));

    // midpoints against the closed forms, written out here independently
    const int mid = (t_max - 1) / 2;
    if (mid > 0) {
      const double direct_alpha =
          cfg.alpha0 * std::pow(cfg.alpha0 / cfg.epsilon,
                                -static_cast<double>(mid) / static_cast<double>(t_max - 1));
      const double u = static_cast<double>(mid) / static_cast<double>(t_max - 1);
      const double direct_cubic = 1.0 - (1.0 - u) * (1.0 - u) * (1.0 - u);
      const double direct_lambda = cfg.lambda_i + (cfg.lambda_f - cfg.lambda_i) * direct_cubic;
      const double direct_rate = cfg.goal_rate * direct_cubic;
      if (std::abs(alpha_schedule(cfg, mid) - direct_alpha) > 1e-12)
        fail(fmt("alpha midpoint off at t_max %d", t_max));
      if (std::abs(lambda_schedule(cfg, mid) - direct_lambda) > 1e-12)
        fail(fmt("lambda midpoint off at t_max %d", t_max));
      if (std::abs(rate_schedule(cfg, "", mid) - direct_rate) > 1e-12)
        fail(fmt("rate midpoint off at t_max %d", t_max));
    }

    // monotone across the whole range
    for (int t = 0; t + 1 < t_max; ++t) {
      if (alpha_schedule(cfg, t + 1) > alpha_schedule(cfg, t))
        fail(fmt("alpha not non-increasing at t=%d, t_max %d", t, t_max));
      if (lambda_schedule(cfg, t + 1) < lambda_schedule(cfg, t))
        fail(fmt("lambda not non-decreasing at t=%d, t_max %d", t, t_max));
      if (rate_schedule(cfg, "", t + 1) < rate_schedule(cfg, "", t))
        fail(fmt("rate not non-decreasing at t=%d, t_max %d", t, t_max));
    }
  }
  report("schedule_exactness", ok, ok ? "boundaries exact, midpoints within 1e-12" : why);
}

// ==========================================================================
// 4. Gradient correctness by central finite differences through the full
//    executable network (conv, relu, pool, linear, softmax cross-entropy).
// ==========================================================================

struct GradCase {
  Model model;
  Tensor images;
  std::vector<int> labels;

  double loss() const { return softmax_cross_entropy(model.forward(images), labels).first; }

  // Reverse pass identical in structure to the training step, minus the
  // optimizer: returns parameter gradients.
  std::map<std::string, Tensor> grads() const {
    std::vector<Tensor> inputs(model.chain.size());
    std::vector<Tensor> preacts(model.chain.size());
    Tensor x = images;
    for (std::size_t i = 0; i < model.chain.size(); ++i) {
      const auto& l = model.chain[i];
      if (l.kind == LayerKind::Conv) {
        inputs[i] = x;
        preacts[i] = conv2d_forward(x, model.params.at(l.id), static_cast<int>(l.stride),
                                    static_cast<int>(l.padding));
        x = relu_forward(preacts[i]);
      } else if (l.kind == LayerKind::Pool) {
        inputs[i] = x;
        x = avgpool2d_forward(x, static_cast<int>(l.kernel), static_cast<int>(l.stride));
      } else {
        x.shape = {x.extent(0), x.extent(1)};
        inputs[i] = x;
        x = linear_forward(x, model.params.at(l.id + ".w"), model.params.at(l.id + ".b"));
      }
    }
    auto [loss_value, probs] = softmax_cross_entropy(x, labels);
    (void)loss_value;

    std::map<std::string, Tensor> out;
    Tensor g = softmax_cross_entropy_backward(probs, labels);
    for (std::size_t idx = model.chain.size(); idx-- > 0;) {
      const auto& l = model.chain[idx];
      if (l.kind == LayerKind::Conv) {
        g = relu_backward(g, preacts[idx]);
        auto [ig, wg] =
            conv2d_backward(g, inputs[idx], model.params.at(l.id), static_cast<int>(l.stride),
                            static_cast<int>(l.padding), idx != 0);
        out[l.id] = std::move(wg);
        g = std::move(ig);
      } else if (l.kind == LayerKind::Pool) {
        g = avgpool2d_backward(g, inputs[idx].shape, static_cast<int>(l.kernel),
                               static_cast<int>(l.stride));
      } else {
        auto [ig, wg, bg] = linear_backward(g, inputs[idx], model.params.at(l.id + ".w"));
        out[l.id + ".w"] = std::move(wg);
        out[l.id + ".b"] = std::move(bg);
        g = std::move(ig);
        g.shape = {g.extent(0), g.extent(1), 1, 1};
      }
    }
    return out;
  }
};

void check_gradients() {
  const auto start = std::chrono::steady_clock::now();

  GradCase gc;
  std::mt19937_64 rng(2024);
  gc.model = Model::build(build_arch("tinyconvnet"), rng);
  gc.images = Tensor::uniform({4, 3, 8, 8}, rng);
  gc.labels = {0, 3, 7, 9};

  const auto analytic = gc.grads();
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t conv_entries = 0, linear_entries = 0;

  const auto probe = [&](const std::string& id, std::size_t i) {
    Tensor& p = gc.model.params.at(id);
    const double keep = p.data[i];
    p.data[i] = keep + h;
    const double up = gc.loss();
    p.data[i] = keep - h;
    const double down = gc.loss();
    p.data[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic.at(id).data[i];
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4}));
  };

  // strided samples from every conv, the whole linear layer
  for (const char* id : {"conv1", "conv2", "conv3"}) {
    for (std::size_t i = 0; i < gc.model.params.at(id).numel(); i += 31) {
      probe(id, i);
      ++conv_entries;
    }
  }
  for (std::size_t i = 0; i < gc.model.params.at("fc.w").numel(); i += 2) {
    probe("fc.w", i);
    ++linear_entries;
  }
  for (std::size_t i = 0; i < gc.model.params.at("fc.b").numel(); ++i) {
    probe("fc.b", i);
    ++linear_entries;
  }

  const double elapsed = seconds_since(start);
  const bool ok = worst < 1e-4 && conv_entries >= 100 && linear_entries >= 100 && elapsed < 30.0;
  report("gradient_correctness", ok,
         fmt("worst rel err %.2e (tol 1e-4), %zu conv + %zu linear entries, %.1fs (limit 30s)",
             worst, conv_entries, linear_entries, elapsed));
}

// ==========================================================================
// 5. Mask semantics over full runs.
// ==========================================================================

RunConfig desk_config(Mode mode, double goal, int t_max, std::uint64_t seed, std::size_t n_train,
                      std::size_t n_test, double sigma = 0.3) {
  RunConfig cfg;
  cfg.arch = "tinyconvnet";
  cfg.schedule = ScheduleConfig::for_mode(mode, goal, t_max);
  cfg.sgd = {0.05, 0.9, 5e-4};
  cfg.batch_size = 64;
  cfg.seed = seed;
  cfg.n_train = n_train;
  cfg.n_test = n_test;
  cfg.sigma = sigma;
  return cfg;
}

struct RunTrace {
  std::vector<FilterMask> masks;
  std::vector<PruneState> states;

  RunObserver observer() {
    return [this](const EpochMetrics&, const Model&, const FilterMask& mask,
                  const PruneState& st) {
      masks.push_back(mask);
      states.push_back(st);
    };
  }
};

void check_mask_semantics(const RunTrace& ghfp40) {
  bool ok = true;
  std::string why;
  const auto fail = [&](const std::string& msg) {
    if (ok) why = msg;
    ok = false;
  };
  const ArchSpec arch = build_arch("tinyconvnet");

  // (a) hard filters frozen at bitwise zero across the full 40-epoch run:
  // after a further epoch of training, their pre-mask norms are still 0.0
  for (std::size_t t = 0; t + 1 < ghfp40.masks.size(); ++t) {
    for (const auto& [id, states] : ghfp40.masks[t].layers)
      for (std::size_t j = 0; j < states.size(); ++j)
        if (states[j] == FilterState::Hard && ghfp40.states[t + 1].norms.at(id)[j] != 0.0)
          fail(fmt("hard filter drifted: %s[%zu] at epoch %zu", id.c_str(), j, t + 1));
  }
  std::size_t final_hard = 0;
  for (const auto& [id, states] : ghfp40.masks.back().layers)
    final_hard += count_state(states, FilterState::Hard);
  if (final_hard == 0) fail("run hardened nothing");

  // (b) zeroized count equals floor(rate * n) in every layer, every epoch
  for (std::size_t t = 0; t < ghfp40.masks.size(); ++t) {
    for (const auto& id : arch.prunable) {
      const std::size_t n = arch.at(id).out_channels;
      const double rate = ghfp40.states[t].rates.at(id);
      const auto want = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
      const auto& states = ghfp40.masks[t].layers.at(id);
      const std::size_t got =
          count_state(states, FilterState::Soft) + count_state(states, FilterState::Hard);
      if (got != want)
        fail(fmt("zeroized %zu != floor %zu, %s epoch %zu", got, want, id.c_str(), t));
    }
  }

  // (c) hard sets only grow
  for (std::size_t t = 0; t + 1 < ghfp40.masks.size(); ++t)
    for (const auto& [id, states] : ghfp40.masks[t].layers)
      for (std::size_t j = 0; j < states.size(); ++j)
        if (states[j] == FilterState::Hard &&
            ghfp40.masks[t + 1].layers.at(id)[j] != FilterState::Hard)
          fail(fmt("hard set not nested: %s[%zu] epoch %zu", id.c_str(), j, t));

  // (d) soft revival in a 40-epoch run with the hard fraction pinned to 0
  RunTrace soft_trace;
  run_ghfp(desk_config(Mode::ASFP, 0.4, 40, 1, 256, 128), soft_trace.observer());
  std::size_t revived = 0;
  for (std::size_t t = 0; t + 1 < soft_trace.masks.size(); ++t)
    for (const auto& [id, states] : soft_trace.masks[t].layers)
      for (std::size_t j = 0; j < states.size(); ++j)
        if (states[j] == FilterState::Soft && soft_trace.states[t + 1].norms.at(id)[j] > 0.0)
          ++revived;
  if (revived == 0) fail("no soft filter revived under a zero hard fraction");

  // (e) parameter degenerations select identically to the dedicated modes
  const struct {
    Mode mode;
    double lambda, alpha0;
    RateRamp ramp;
  } pairs[] = {
      {Mode::SFP, 0.0, 0.0, RateRamp::Constant},
      {Mode::ASFP, 0.0, 0.0, RateRamp::Cubic},
      {Mode::ASRFP, 0.0, 1.0, RateRamp::Cubic},
      {Mode::HFP, 1.0, 0.0, RateRamp::Cubic},
  };
  for (const auto& pair : pairs) {
    RunTrace dedicated, degenerate;
    run_ghfp(desk_config(pair.mode, 0.4, 6, 5, 128, 64), dedicated.observer());
    RunConfig degen = desk_config(Mode::GHFP, 0.4, 6, 5, 128, 64);
    degen.schedule.lambda_i = degen.schedule.lambda_f = pair.lambda;
    degen.schedule.alpha0 = pair.alpha0;
    degen.schedule.rate_ramp = pair.ramp;
    run_ghfp(degen, degenerate.observer());
    for (std::size_t t = 0; t < dedicated.states.size(); ++t)
      for (const auto& [id, sel] : dedicated.states[t].selections) {
        const LayerSelection& other = degenerate.states[t].selections.at(id);
        if (sel.hard != other.hard || sel.soft != other.soft)
          fail(fmt("%s degeneration diverged at epoch %zu, %s", mode_name(pair.mode), t,
                   id.c_str()));
      }
  }

  report("mask_semantics", ok, ok ? "frozen, counts, nesting, revival, degenerations" : why);
}

// ==========================================================================
// 6. Compaction equivalence on a finished (snapped) run.
// ==========================================================================

void check_compaction(const RunResult& run) {
  bool ok = true;
  std::string why;

  const CompactResult compacted = compact(run.model, run.mask);
  const double dev = verify_equivalence(run.model, run.mask, compacted.model, 100);
  if (dev > 1e-9) {
    ok = false;
    why = fmt("max logit deviation %.3e > 1e-9", dev);
  }

  const double compact_flops = count_flops(compacted.model.arch).total;
  if (compact_flops != run.metrics.back().masked_flops) {
    ok = false;
    why = fmt("flops %.17g != masked accounting %.17g", compact_flops,
              run.metrics.back().masked_flops);
  }

  CompactResult mutated = compact(run.model, run.mask);
  mutated.model.params.at("conv2").data[11] += 1e-6;
  const double mutated_dev = verify_equivalence(run.model, run.mask, mutated.model, 100);
  if (mutated_dev <= 1e-9) {
    ok = false;
    why = "mutation not detected";
  }

  report("compaction_equivalence", ok,
         ok ? fmt("deviation %.1e, flops exact, mutation seen at %.1e", dev, mutated_dev) : why);
}

// ==========================================================================
// 7. Desk-scale behavior, 4 seeds: pruning 40% with a hardness ramp tracks
//    the unpruned baseline and beats pure soft pruning at 80%.
// ==========================================================================

void check_behavior() {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seeds[] = {1, 2, 3, 4};

  double worst_gap = -1.0;  // unpruned minus ramped-40%, per seed
  int wins = 0;
  for (std::uint64_t seed : seeds) {
    const double ghfp =
        run_ghfp(desk_config(Mode::GHFP, 0.4, 40, seed, 512, 256, 0.6)).metrics.back().test_acc;
    const double base =
        run_ghfp(desk_config(Mode::GHFP, 0.0, 40, seed, 512, 256, 0.6)).metrics.back().test_acc;
    const double asp80 =
        run_ghfp(desk_config(Mode::ASFP, 0.8, 40, seed, 512, 256, 0.6)).metrics.back().test_acc;
    worst_gap = std::max(worst_gap, base - ghfp);
    if (ghfp > asp80) ++wins;
  }

  const double elapsed = seconds_since(start);
  const bool ok = worst_gap <= 0.05 && wins >= 3 && elapsed < 300.0;
  report("desk_scale_behavior", ok,
         fmt("worst gap to baseline %.1f pts (tol 5), beats 80%% soft on %d/4 seeds, %.0fs "
             "(limit 300s)",
             100.0 * worst_gap, wins, elapsed));
}

// ==========================================================================
// 8. Bitwise determinism of the metrics CSV and the checkpoint.
// ==========================================================================

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_determinism(const std::string& tmpdir) {
  RunConfig cfg = desk_config(Mode::GHFP, 0.4, 8, 77, 128, 64);
  cfg.metrics_path = tmpdir + "/acceptance_det.csv";
  cfg.checkpoint_path = tmpdir + "/acceptance_det.pkpt";

  run_ghfp(cfg);
  const std::string csv_first = file_bytes(cfg.metrics_path);
  const std::string ck_first = file_bytes(cfg.checkpoint_path);
  run_ghfp(cfg);
  const bool csv_equal = file_bytes(cfg.metrics_path) == csv_first;
  const bool ck_equal = file_bytes(cfg.checkpoint_path) == ck_first;

  std::remove(cfg.metrics_path.c_str());
  std::remove(cfg.checkpoint_path.c_str());
  report("determinism", csv_equal && ck_equal,
         csv_equal && ck_equal ? "metrics CSV and checkpoint bitwise identical"
                               : (csv_equal ? "checkpoint differs" : "metrics CSV differs"));
}

}  // namespace

int main() {
  const char* env_tmp = std::getenv("TMPDIR");
  const std::string tmpdir = env_tmp && *env_tmp ? env_tmp : "/tmp";

  check_flops();
  check_schedules();
  check_gradients();

  // one 40-epoch ramped run feeds both the mask-semantics and the
  // compaction checks
  RunTrace ghfp40_trace;
  const RunResult ghfp40 =
      run_ghfp(desk_config(Mode::GHFP, 0.4, 40, 1, 256, 128), ghfp40_trace.observer());
  check_mask_semantics(ghfp40_trace);
  check_compaction(ghfp40);

  check_behavior();
  check_determinism(tmpdir);

  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  return g_failures ? 1 : 0;
}
