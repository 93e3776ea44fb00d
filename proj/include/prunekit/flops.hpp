#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/arch.hpp"
#include "prunekit/errors.hpp"

namespace prunekit {

/// MAC counts per conv/linear layer. One multiply-accumulate = 1 FLOP;
/// pool, add and activations are free. Counts are reals because rate-based
/// accounting scales channel counts fractionally.
struct FlopsReport {
  std::vector<std::pair<std::string, double>> per_layer;
  double total = 0.0;
  double reduction_pct = 0.0;
};

namespace detail {

inline void check_rates(const ArchSpec& arch, const std::map<std::string, double>& rates) {
  for (const auto& [id, rate] : rates) {
    if (!arch.is_prunable(id))
      throw ConfigError("pruning rate given for non-prunable layer '" + id + "'");
    if (!(rate >= 0.0 && rate < 1.0))
      throw ConfigError("pruning rate for '" + id + "' must be in [0,1), got " +
                        std::to_string(rate));
  }
}

/// Live output channel count per layer, given explicit live-out counts for
/// pruned convs. Adds restore the full count (zeroized channels still
/// occupy positions on shortcut-coupled outputs); pools pass liveness
/// through unchanged.
inline std::map<std::string, double> out_liveness(
    const ArchSpec& arch, const std::map<std::string, double>& conv_live_out) {
  std::map<std::string, double> live;
  for (const auto& l : arch.layers) {
    switch (l.kind) {
      case LayerKind::Input:
        live[l.id] = static_cast<double>(l.out_channels);
        break;
      case LayerKind::Conv: {
        auto it = conv_live_out.find(l.id);
        live[l.id] = it != conv_live_out.end() ? it->second : static_cast<double>(l.out_channels);
        break;
      }
      case LayerKind::Pool:
        live[l.id] = live.at(l.predecessors[0]);
        break;
      case LayerKind::Add:
        live[l.id] = static_cast<double>(l.out_channels);
        break;
      case LayerKind::Linear:
        live[l.id] = static_cast<double>(l.out_channels);
        break;
      case LayerKind::Output:
        live[l.id] = live.at(l.predecessors[0]);
        break;
    }
  }
  return live;
}

inline std::map<std::string, double> live_out_from_rates(const ArchSpec& arch,
                                                         const std::map<std::string, double>& rates) {
  std::map<std::string, double> live_out;
  for (const auto& [id, rate] : rates)
    live_out[id] = static_cast<double>(arch.at(id).out_channels) * (1.0 - rate);
  return live_out;
}

inline FlopsReport accounting(const ArchSpec& arch, const std::map<std::string, double>& out_live) {
  FlopsReport report;
  for (const auto& l : arch.layers) {
    double macs = 0.0;
    if (l.kind == LayerKind::Conv) {
      const double live_in = out_live.at(l.predecessors[0]);
      const double live_out = out_live.at(l.id);
      macs = live_out * live_in * static_cast<double>(l.kernel * l.kernel) *
             static_cast<double>(l.out_h * l.out_w);
    } else if (l.kind == LayerKind::Linear) {
      macs = out_live.at(l.predecessors[0]) * static_cast<double>(l.out_channels);
    } else {
      continue;
    }
    report.per_layer.emplace_back(l.id, macs);
    report.total += macs;
  }
  return report;
}

}  // namespace detail

/// Live input channel count seen by each conv and linear layer under the
/// given per-layer pruning rates.
inline std::map<std::string, double> liveness_propagate(const ArchSpec& arch,
                                                        const std::map<std::string, double>& rates) {
  detail::check_rates(arch, rates);
  const auto out_live = detail::out_liveness(arch, detail::live_out_from_rates(arch, rates));
  std::map<std::string, double> live_in;
  for (const auto& l : arch.layers)
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Linear)
      live_in[l.id] = out_live.at(l.predecessors[0]);
  return live_in;
}

/// Static rate-based accounting: channel counts scale by (1-P) exactly.
/// reduction_pct is relative to the same arch with no rates.
inline FlopsReport count_flops(const ArchSpec& arch,
                               const std::map<std::string, double>& rates = {}) {
  detail::check_rates(arch, rates);
  FlopsReport report =
      detail::accounting(arch, detail::out_liveness(arch, detail::live_out_from_rates(arch, rates)));
  if (!rates.empty()) {
    const FlopsReport base = detail::accounting(arch, detail::out_liveness(arch, {}));
    report.reduction_pct = 100.0 * (1.0 - report.total / base.total);
  }
  return report;
}

/// Mask-based accounting: per prunable layer, `zeroized` gives the number
/// of output channels currently held at zero; live counts stay integral,
/// so every per-layer MAC count is an exact integer. Matches count_flops
/// of the physically compacted arch exactly on chain (add-free) networks.
inline FlopsReport count_flops_masked(const ArchSpec& arch,
                                      const std::map<std::string, std::size_t>& zeroized) {
  std::map<std::string, double> live_out;
  for (const auto& [id, z] : zeroized) {
    if (!arch.is_prunable(id))
      throw ConfigError("zeroized count given for non-prunable layer '" + id + "'");
    const std::size_t n = arch.at(id).out_channels;
    if (z >= n)
      throw ConfigError("zeroized count " + std::to_string(z) + " for layer '" + id +
                        "' must be < " + std::to_string(n));
    live_out[id] = static_cast<double>(n - z);
  }
  const FlopsReport base = detail::accounting(arch, detail::out_liveness(arch, {}));
  FlopsReport report = detail::accounting(arch, detail::out_liveness(arch, live_out));
  report.reduction_pct = 100.0 * (1.0 - report.total / base.total);
  return report;
}

inline std::map<std::string, double> uniform_rates(const ArchSpec& arch, double rate) {
  std::map<std::string, double> rates;
  if (rate != 0.0)
    for (const auto& id : arch.prunable) rates[id] = rate;
  return rates;
}

/// CSV body (layer,macs) followed by the summary line.
inline std::string flops_csv(const FlopsReport& report) {
  std::ostringstream out;
  out << "layer,macs\n";
  for (const auto& [id, macs] : report.per_layer) {
    out << id << ",";
    if (macs == std::floor(macs))
      out << static_cast<std::int64_t>(macs);
    else
      out << macs;
    out << "\n";
  }
  char summary[96];
  std::snprintf(summary, sizeof(summary), "total=%lld reduction_pct=%.4f\n",
                static_cast<long long>(std::llround(report.total)), report.reduction_pct);
  out << summary;
  return out.str();
}

}  // namespace prunekit
