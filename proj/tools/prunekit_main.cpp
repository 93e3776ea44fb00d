// prunekit command-line surface: static FLOPs accounting, schedule dumps,
// training runs, compaction, checkpoint evaluation.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prunekit/prunekit.hpp"

namespace {

using namespace prunekit;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int max_threads_from_env() {
  const char* env = std::getenv("PRUNEKIT_THREADS");
  if (!env || !*env) return 0;
  try {
    const int v = std::stoi(env);
    if (v < 1) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("PRUNEKIT_THREADS must be a positive integer, got '" + std::string(env) +
                      "'");
  }
}

std::map<std::string, double> rates_from_file(const ArchSpec& arch, const std::string& path) {
  std::map<std::string, double> rates;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("rates file line " + std::to_string(lineno) + ": expected 'layer = rate'");
    const std::string id = detail::trim(t.substr(0, eq));
    try {
      rates[id] = detail::parse_double(detail::trim(t.substr(eq + 1)));
    } catch (const std::exception&) {
      throw ConfigError("rates file line " + std::to_string(lineno) + ": bad rate value");
    }
  }
  (void)arch;
  return rates;
}

int cmd_flops(const std::string& arch_name, double rate, const std::string& rates_file) {
  const ArchSpec arch = build_arch(arch_name);
  std::map<std::string, double> rates;
  if (!rates_file.empty())
    rates = rates_from_file(arch, rates_file);
  else
    rates = uniform_rates(arch, rate);
  const FlopsReport report = count_flops(arch, rates);
  std::cout << flops_csv(report);
  return 0;
}

int cmd_schedule(const ScheduleConfig& cfg) {
  cfg.validate();
  std::cout << schedule_csv(cfg);
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& mode_override,
            std::optional<std::uint64_t> seed_override, int sweep) {
  RunConfig cfg = parse_run_config(read_file(config_path));
  if (!mode_override.empty()) {
    const Mode m = mode_from_name(mode_override);
    ScheduleConfig sch = ScheduleConfig::for_mode(m, cfg.schedule.goal_rate, cfg.schedule.t_max);
    sch.epsilon = cfg.schedule.epsilon;
    sch.layer_goals = cfg.schedule.layer_goals;
    cfg.schedule = sch;
  }
  if (seed_override) cfg.seed = *seed_override;
  cfg.validate();

  if (sweep > 1) {
    const auto results = run_sweep(cfg, sweep, max_threads_from_env());
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& last = results[i].metrics.back();
      std::printf("seed=%llu final_test_acc=%.17g\n",
                  static_cast<unsigned long long>(cfg.seed + i), last.test_acc);
    }
    return 0;
  }
  const RunResult result = run_ghfp(cfg);
  const auto& last = result.metrics.back();
  std::printf("final_test_acc=%.17g masked_flops=%.17g\n", last.test_acc, last.masked_flops);
  if (cfg.metrics_path.empty()) std::cout << result.metrics_csv;
  return 0;
}

int cmd_compact(const std::string& checkpoint_path, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Model model = model_from_checkpoint(ck);
  const CompactResult result = compact(model, ck.mask);
  std::cout << result.report;
  const double dev = verify_equivalence(model, ck.mask, result.model, 100);
  std::printf("max_deviation=%.17g\n", dev);
  if (!out_path.empty()) {
    PruneState state;
    state.t = ck.state.t;
    save_checkpoint(out_path, result.model, result.mask, state, ck.config_text);
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Model model = model_from_checkpoint(ck);
  const RunConfig cfg = parse_run_config(ck.config_text);
  const SyntheticDataset ds =
      make_dataset(cfg.seed, cfg.classes, cfg.n_train, cfg.n_test, cfg.sigma);
  const auto [loss, acc] = evaluate(model, ds.test_images, ds.test_labels);
  std::printf("test_acc=%.17g test_loss=%.17g\n", acc, loss);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prunekit: soft-to-hard filter pruning toolkit"};
  app.require_subcommand(1);

  // flops
  std::string flops_arch;
  double flops_rate = 0.0;
  std::string flops_rates_file;
  auto* flops = app.add_subcommand("flops", "static FLOPs accounting for an architecture");
  flops->add_option("arch", flops_arch, "resnet20|resnet56|resnet110|vgg16|tinyconvnet")
      ->required();
  flops->add_option("--rate", flops_rate, "uniform pruning rate on prunable layers (default 0)");
  flops->add_option("--rates", flops_rates_file, "per-layer rates file (layer = rate lines)");

  // schedule
  ScheduleConfig sch;
  sch.goal_rate = 0.4;
  std::string sch_mode = "GHFP", sch_ramp = "cubic";
  auto* schedule = app.add_subcommand("schedule", "dump alpha/lambda/rate trajectories as CSV");
  schedule->add_option("--t-max", sch.t_max, "epoch count (default 200)");
  schedule->add_option("--alpha0", sch.alpha0, "initial decay factor (default 1)");
  schedule->add_option("--epsilon", sch.epsilon, "decay floor before snap to 0 (default 1e-4)");
  schedule->add_option("--lambda-i", sch.lambda_i, "initial hard fraction (default 0)");
  schedule->add_option("--lambda-f", sch.lambda_f, "final hard fraction (default 1)");
  schedule->add_option("--rate", sch.goal_rate, "goal pruning rate (default 0.4)");
  schedule->add_option("--ramp", sch_ramp, "rate ramp: cubic|linear|constant");
  schedule->add_option("--mode", sch_mode, "SFP|SRFP|ASFP|ASRFP|HFP|GHFP|SoftAndHard");

  // run
  std::string run_config, run_mode;
  std::optional<std::uint64_t> run_seed;
  int run_sweep_count = 1;
  auto* run = app.add_subcommand("run", "train with the configured pruning schedule");
  run->add_option("config", run_config, "run config file")->required();
  run->add_option("--mode", run_mode, "override the config's mode");
  run->add_option("--seed", run_seed, "override the config's seed");
  run->add_option("--sweep", run_sweep_count, "run N consecutive seeds (env PRUNEKIT_THREADS caps workers)");

  // compact
  std::string compact_in, compact_out;
  auto* compact_cmd = app.add_subcommand("compact", "strip zero frozen filters from a checkpoint");
  compact_cmd->add_option("checkpoint", compact_in, "source checkpoint")->required();
  compact_cmd->add_option("-o,--out", compact_out, "compacted checkpoint path");

  // eval
  std::string eval_in;
  auto* eval_cmd = app.add_subcommand("eval", "report test accuracy of a checkpoint");
  eval_cmd->add_option("checkpoint", eval_in, "checkpoint to evaluate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (flops->parsed()) {
      if (!(flops_rate >= 0.0 && flops_rate < 1.0))
        throw ConfigError("--rate must be in [0,1), got " + std::to_string(flops_rate));
      return cmd_flops(flops_arch, flops_rate, flops_rates_file);
    }
    if (schedule->parsed()) {
      const Mode m = mode_from_name(sch_mode);
      ScheduleConfig cfg = ScheduleConfig::for_mode(m, sch.goal_rate, sch.t_max);
      // explicit flags win over mode conventions
      for (const auto* opt : {"--alpha0", "--epsilon", "--lambda-i", "--lambda-f", "--ramp"}) {
        if (!schedule->count(opt)) continue;
        if (std::string(opt) == "--alpha0") cfg.alpha0 = sch.alpha0;
        if (std::string(opt) == "--epsilon") cfg.epsilon = sch.epsilon;
        if (std::string(opt) == "--lambda-i") cfg.lambda_i = sch.lambda_i;
        if (std::string(opt) == "--lambda-f") cfg.lambda_f = sch.lambda_f;
        if (std::string(opt) == "--ramp") cfg.rate_ramp = ramp_from_name(sch_ramp);
      }
      return cmd_schedule(cfg);
    }
    if (run->parsed()) return cmd_run(run_config, run_mode, run_seed, run_sweep_count);
    if (compact_cmd->parsed()) return cmd_compact(compact_in, compact_out);
    if (eval_cmd->parsed()) return cmd_eval(eval_in);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
