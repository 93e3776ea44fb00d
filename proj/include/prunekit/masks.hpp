#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "prunekit/arch.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

/// Soft filters are masked in the weights but keep training; Hard filters
/// are zero and gradient-frozen. Hard is absorbing within a run.
enum class FilterState : std::uint8_t { Active = 0, Soft = 1, Hard = 2 };

using LayerMask = std::vector<FilterState>;

struct FilterMask {
  std::map<std::string, LayerMask> layers;

  static FilterMask for_arch(const ArchSpec& arch) {
    FilterMask mask;
    for (const auto& id : arch.prunable)
      mask.layers[id] = LayerMask(arch.at(id).out_channels, FilterState::Active);
    return mask;
  }
};

/// One layer's pruning decision for an epoch; both index lists ascending.
struct LayerSelection {
  std::vector<std::size_t> hard;
  std::vector<std::size_t> soft;

  std::size_t pruned_count() const { return hard.size() + soft.size(); }
};

/// Epoch snapshot of the pruning decision. `norms` holds the selection-time
/// (post-update, pre-mask) filter norms; it is transient and not part of
/// the checkpoint payload.
struct PruneState {
  int t = -1;
  double alpha = 0.0;
  double lambda_h = 0.0;
  std::map<std::string, double> rates;
  std::map<std::string, LayerSelection> selections;
  std::map<std::string, std::vector<double>> norms;
};

/// Per-filter l2 norms of a [n,m,s,s] weight tensor.
inline std::vector<double> importance_l2(const Tensor& weights) {
  if (weights.ndim() != 4)
    throw DimensionError("importance_l2: expected 4-D weights, got " + weights.shape_str());
  const std::size_t n = weights.extent(0);
  const std::size_t row = weights.numel() / n;
  std::vector<double> norms(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    const double* p = weights.data.data() + j * row;
    for (std::size_t i = 0; i < row; ++i) acc += p[i] * p[i];
    norms[j] = std::sqrt(acc);
  }
  return norms;
}

/// Absolute-sum variant, selectable as a config alias.
inline std::vector<double> importance_l1(const Tensor& weights) {
  if (weights.ndim() != 4)
    throw DimensionError("importance_l1: expected 4-D weights, got " + weights.shape_str());
  const std::size_t n = weights.extent(0);
  const std::size_t row = weights.numel() / n;
  std::vector<double> norms(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    const double* p = weights.data.data() + j * row;
    for (std::size_t i = 0; i < row; ++i) acc += std::abs(p[i]);
    norms[j] = acc;
  }
  return norms;
}

/// Pick this epoch's pruned set: the floor(P*n) smallest norms, ties to the
/// lower index; the round-half-up(lambda_h * pruned) smallest of those are
/// hard, the rest soft. Previously-Hard filters must land in the new hard
/// subset (they sit at norm zero); anything else is a schedule regression.
inline LayerSelection select_filters(const std::vector<double>& norms, const LayerMask& prev,
                                     double rate, double lambda_h) {
  const std::size_t n = norms.size();
  if (prev.size() != n)
    throw DimensionError("select_filters: mask length " + std::to_string(prev.size()) +
                         " != norm count " + std::to_string(n));
  if (!(rate >= 0.0 && rate < 1.0))
    throw InvariantError("select_filters: rate must be in [0,1), got " + std::to_string(rate));
  if (!(lambda_h >= 0.0 && lambda_h <= 1.0))
    throw InvariantError("select_filters: lambda_h must be in [0,1], got " +
                         std::to_string(lambda_h));

  const auto pruned_count =
      static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
  const auto hard_count = static_cast<std::size_t>(
      std::floor(lambda_h * static_cast<double>(pruned_count) + 0.5));

  std::size_t prev_hard = 0;
  for (FilterState s : prev)
    if (s == FilterState::Hard) ++prev_hard;
  if (hard_count < prev_hard)
    throw InvariantError("select_filters: hard quota " + std::to_string(hard_count) +
                         " below existing hard count " + std::to_string(prev_hard) +
                         " (schedule regression)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (norms[a] != norms[b]) return norms[a] < norms[b];
    return a < b;
  });

  LayerSelection sel;
  sel.hard.assign(order.begin(), order.begin() + hard_count);
  sel.soft.assign(order.begin() + hard_count, order.begin() + pruned_count);
  std::sort(sel.hard.begin(), sel.hard.end());
  std::sort(sel.soft.begin(), sel.soft.end());

  for (std::size_t j = 0; j < n; ++j)
    if (prev[j] == FilterState::Hard &&
        !std::binary_search(sel.hard.begin(), sel.hard.end(), j))
      throw InvariantError("select_filters: previously hard filter " + std::to_string(j) +
                           " fell out of the hard set");
  return sel;
}

/// Rewrite a layer's states from a fresh selection. Filters that dropped
/// out of the pruned set revert to Active (soft revival).
inline void apply_selection(LayerMask& states, const LayerSelection& sel) {
  std::fill(states.begin(), states.end(), FilterState::Active);
  for (std::size_t j : sel.soft) states[j] = FilterState::Soft;
  for (std::size_t j : sel.hard) states[j] = FilterState::Hard;
}

/// Mask the weights in place: hard filters to exact zero, soft filters
/// scaled by alpha (alpha 0 zeroizes), the rest untouched.
inline void apply_soft_mask(Tensor& weights, const LayerSelection& sel, double alpha) {
  if (weights.ndim() != 4)
    throw DimensionError("apply_soft_mask: expected 4-D weights, got " + weights.shape_str());
  const std::size_t n = weights.extent(0);
  const std::size_t row = weights.numel() / n;
  for (std::size_t j : sel.hard) {
    if (j >= n) throw InvariantError("apply_soft_mask: filter index " + std::to_string(j) +
                                     " out of range for n=" + std::to_string(n));
    std::fill_n(weights.data.begin() + j * row, row, 0.0);
  }
  for (std::size_t j : sel.soft) {
    if (j >= n) throw InvariantError("apply_soft_mask: filter index " + std::to_string(j) +
                                     " out of range for n=" + std::to_string(n));
    double* p = weights.data.data() + j * row;
    if (alpha == 0.0)
      std::fill_n(p, row, 0.0);
    else
      for (std::size_t i = 0; i < row; ++i) p[i] *= alpha;
  }
}

/// Zero the gradient rows of Hard filters; Soft and Active rows pass
/// through untouched.
inline void apply_grad_mask(Tensor& grads, const LayerMask& states) {
  if (grads.ndim() != 4)
    throw DimensionError("apply_grad_mask: expected 4-D grads, got " + grads.shape_str());
  const std::size_t n = grads.extent(0);
  if (states.size() != n)
    throw DimensionError("apply_grad_mask: mask length " + std::to_string(states.size()) +
                         " != filter count " + std::to_string(n));
  const std::size_t row = grads.numel() / n;
  for (std::size_t j = 0; j < n; ++j)
    if (states[j] == FilterState::Hard)
      std::fill_n(grads.data.begin() + j * row, row, 0.0);
}

inline std::size_t count_state(const LayerMask& states, FilterState s) {
  std::size_t c = 0;
  for (FilterState v : states)
    if (v == s) ++c;
  return c;
}

}  // namespace prunekit
