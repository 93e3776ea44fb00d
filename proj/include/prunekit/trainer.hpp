#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "prunekit/checkpoint.hpp"
#include "prunekit/config.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/flops.hpp"
#include "prunekit/masks.hpp"
#include "prunekit/model.hpp"
#include "prunekit/schedule.hpp"

namespace prunekit {

struct EpochMetrics {
  int t = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
  double alpha = 0.0;
  double lambda_h = 0.0;
  double rate = 0.0;
  std::vector<std::size_t> hard_counts;  // arch.prunable order
  std::vector<std::size_t> soft_counts;
  double masked_flops = 0.0;
};

struct RunResult {
  Model model;
  FilterMask mask;
  PruneState state;
  std::vector<EpochMetrics> metrics;
  std::string metrics_csv;
  SyntheticDataset dataset;
};

/// Called after each epoch's selection and masking, before the next epoch.
using RunObserver =
    std::function<void(const EpochMetrics&, const Model&, const FilterMask&, const PruneState&)>;

inline constexpr char kMetricsHeader[] =
    "t,train_loss,test_acc,alpha,lambda_h,rate,hard_counts,soft_counts,masked_flops";

/// One pass over the shuffled training split. Gradient masking for the
/// current Hard set is active in every batch. Returns the mean batch loss.
inline double epoch_train(Model& model, const SyntheticDataset& ds, const SgdConfig& sgd,
                          const FilterMask& mask, int batch_size,
                          std::map<std::string, Tensor>& velocity, std::mt19937_64& rng) {
  const std::size_t n = ds.train_images.extent(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size), n - start);
    std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + count);
    Tensor batch = gather_batch(ds.train_images, idx);
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = ds.train_labels[idx[i]];
    loss_sum += train_batch(model, batch, labels, mask, sgd, velocity);
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

namespace detail {

inline std::string join_counts(const std::vector<std::size_t>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) s += '|';
    s += std::to_string(counts[i]);
  }
  return s;
}

inline std::string metrics_row(const EpochMetrics& m) {
  char head[192];
  std::snprintf(head, sizeof(head), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,", m.t, m.train_loss,
                m.test_acc, m.alpha, m.lambda_h, m.rate);
  char tail[40];
  std::snprintf(tail, sizeof(tail), ",%.17g", m.masked_flops);
  return std::string(head) + join_counts(m.hard_counts) + "," + join_counts(m.soft_counts) + tail;
}

}  // namespace detail

/// The full training-time algorithm: per epoch, refresh the three
/// schedules, train with hard-gradient masking, then re-rank filters and
/// re-apply masks from the fresh selection.
inline RunResult run_ghfp(const RunConfig& cfg, const RunObserver& observer = {}) {
  cfg.validate();
  const ScheduleConfig& sch = cfg.schedule;

  SyntheticDataset ds = make_dataset(cfg.seed, cfg.classes, cfg.n_train, cfg.n_test, cfg.sigma);
  std::mt19937_64 model_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  const ArchSpec arch = build_arch(cfg.arch, cfg.classes);
  Model model = Model::build(arch, model_rng);
  if (!cfg.init_checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(cfg.init_checkpoint);
    if (ck.arch.name != arch.name)
      throw ConfigError("init checkpoint holds arch '" + ck.arch.name + "', run wants '" +
                        arch.name + "'");
    model = model_from_checkpoint(ck);
  }
  SgdConfig sgd = cfg.sgd;
  if (cfg.pretrained_start) sgd.lr /= 10.0;

  auto velocity = make_velocity(model);
  FilterMask mask = FilterMask::for_arch(arch);
  PruneState state;

  RunResult result;
  std::ostringstream csv;
  csv << kMetricsHeader << "\n";

  for (int t = 0; t < sch.t_max; ++t) {
    state.t = t;
    state.alpha = alpha_schedule(sch, t);
    state.lambda_h = lambda_schedule(sch, t);
    for (const auto& id : arch.prunable) state.rates[id] = rate_schedule(sch, id, t);

    double train_loss = 0.0;
    try {
      train_loss = epoch_train(model, ds, sgd, mask, cfg.batch_size, velocity, model_rng);
    } catch (const RuntimeAbort& e) {
      throw RuntimeAbort("epoch " + std::to_string(t) + ": " + e.what());
    }

    std::map<std::string, std::size_t> zeroized;
    for (const auto& id : arch.prunable) {
      auto& states = mask.layers.at(id);
      const std::vector<double> norms = importance_l2(model.params.at(id));
      const LayerSelection sel = select_filters(norms, states, state.rates.at(id), state.lambda_h);
      apply_selection(states, sel);
      apply_soft_mask(model.params.at(id), sel, state.alpha);
      apply_grad_mask(velocity.at(id), states);  // freeze momentum of Hard rows
      state.norms[id] = norms;
      state.selections[id] = sel;
      zeroized[id] = sel.pruned_count();
    }

    EpochMetrics m;
    m.t = t;
    m.train_loss = train_loss;
    m.test_acc = evaluate(model, ds.test_images, ds.test_labels).second;
    m.alpha = state.alpha;
    m.lambda_h = state.lambda_h;
    m.rate = rate_schedule(sch, "", t);
    for (const auto& id : arch.prunable) {
      m.hard_counts.push_back(count_state(mask.layers.at(id), FilterState::Hard));
      m.soft_counts.push_back(count_state(mask.layers.at(id), FilterState::Soft));
    }
    m.masked_flops = count_flops_masked(arch, zeroized).total;
    csv << detail::metrics_row(m) << "\n";
    result.metrics.push_back(m);
    if (observer) observer(m, model, mask, state);
  }

  result.metrics_csv = csv.str();
  if (!cfg.metrics_path.empty()) {
    std::ofstream out(cfg.metrics_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + cfg.metrics_path + "' for writing");
    out << result.metrics_csv;
  }
  if (!cfg.checkpoint_path.empty())
    save_checkpoint(cfg.checkpoint_path, model, mask, state, serialize_run_config(cfg));

  result.model = std::move(model);
  result.mask = std::move(mask);
  result.state = std::move(state);
  result.dataset = std::move(ds);
  return result;
}

namespace detail {

inline std::string with_seed_suffix(const std::string& path, std::uint64_t seed) {
  if (path.empty()) return path;
  const std::size_t dot = path.find_last_of('.');
  const std::size_t slash = path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string suffix = "_seed" + std::to_string(seed);
  return has_ext ? path.substr(0, dot) + suffix + path.substr(dot) : path + suffix;
}

}  // namespace detail

/// Independent runs on seeds base..base+count-1, up to max_threads at a
/// time, one model per worker. Output paths get a _seed<k> suffix.
inline std::vector<RunResult> run_sweep(const RunConfig& base, int count, int max_threads = 0) {
  if (count < 1) throw ConfigError("sweep count must be >= 1");
  if (max_threads <= 0) {
    max_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (max_threads <= 0) max_threads = 1;
  }

  std::vector<RunConfig> cfgs;
  for (int i = 0; i < count; ++i) {
    RunConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(i);
    cfg.metrics_path = detail::with_seed_suffix(base.metrics_path, cfg.seed);
    cfg.checkpoint_path = detail::with_seed_suffix(base.checkpoint_path, cfg.seed);
    cfgs.push_back(std::move(cfg));
  }

  std::vector<RunResult> results(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  for (std::size_t start = 0; start < cfgs.size();
       start += static_cast<std::size_t>(max_threads)) {
    const std::size_t end = std::min(cfgs.size(), start + static_cast<std::size_t>(max_threads));
    std::vector<std::thread> pool;
    for (std::size_t i = start; i < end; ++i)
      pool.emplace_back([&, i] {
        try {
          results[i] = run_ghfp(cfgs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace prunekit
