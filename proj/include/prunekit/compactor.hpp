#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/arch.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/masks.hpp"
#include "prunekit/model.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

struct CompactResult {
  Model model;
  FilterMask mask;  // fresh all-Active mask sized for the compacted arch
  std::string report;
};

namespace detail {

inline bool filter_row_zero(const Tensor& w, std::size_t j) {
  const std::size_t row = w.numel() / w.extent(0);
  const double* p = w.data.data() + j * row;
  for (std::size_t i = 0; i < row; ++i)
    if (p[i] != 0.0) return false;
  return true;
}

}  // namespace detail

/// Physically delete pruned (zero, frozen) output channels and the
/// matching input slices of downstream layers. Chain models only; every
/// pruned filter must already be exactly zero.
inline CompactResult compact(const Model& model, const FilterMask& mask) {
  // Precondition: the mask's pruned filters are all-zero rows.
  for (const auto& [id, states] : mask.layers) {
    const Tensor& w = model.params.at(id);
    if (states.size() != w.extent(0))
      throw DimensionError("compact: mask length " + std::to_string(states.size()) +
                           " != filter count " + std::to_string(w.extent(0)) + " at layer '" +
                           id + "'");
    for (std::size_t j = 0; j < states.size(); ++j)
      if (states[j] != FilterState::Active && !detail::filter_row_zero(w, j))
        throw InvariantError("not compactible: alpha not snapped (layer '" + id + "', filter " +
                             std::to_string(j) + " is nonzero)");
  }

  CompactResult out;
  out.model.arch = model.arch;
  out.model.arch.name = model.arch.name + "-compact";
  std::ostringstream report;

  // Original-index channel list carried down the chain.
  std::vector<std::size_t> prev_keep;
  std::size_t old_params = 0, new_params = 0;

  for (auto& l : out.model.arch.layers) {
    switch (l.kind) {
      case LayerKind::Input: {
        prev_keep.resize(l.out_channels);
        std::iota(prev_keep.begin(), prev_keep.end(), 0);
        break;
      }
      case LayerKind::Conv: {
        const Tensor& w = model.params.at(l.id);
        std::vector<std::size_t> keep;
        if (auto it = mask.layers.find(l.id); it != mask.layers.end()) {
          for (std::size_t j = 0; j < it->second.size(); ++j)
            if (it->second[j] == FilterState::Active) keep.push_back(j);
        } else {
          keep.resize(l.out_channels);
          std::iota(keep.begin(), keep.end(), 0);
        }

        const std::size_t s = l.kernel;
        Tensor nw = Tensor::zeros({keep.size(), prev_keep.size(), s, s});
        for (std::size_t j = 0; j < keep.size(); ++j)
          for (std::size_t c = 0; c < prev_keep.size(); ++c)
            std::copy_n(w.data.begin() + (keep[j] * w.extent(1) + prev_keep[c]) * s * s, s * s,
                        nw.data.begin() + (j * prev_keep.size() + c) * s * s);
        if (nw.shape != w.shape)
          report << l.id << ": " << w.shape_str() << " -> " << nw.shape_str() << "\n";
        old_params += w.numel();
        new_params += nw.numel();
        out.model.params[l.id] = std::move(nw);

        l.in_channels = prev_keep.size();
        l.out_channels = keep.size();
        prev_keep = std::move(keep);
        break;
      }
      case LayerKind::Pool: {
        l.in_channels = prev_keep.size();
        l.out_channels = prev_keep.size();
        break;
      }
      case LayerKind::Linear: {
        const Tensor& w = model.params.at(l.id + ".w");
        const Tensor& b = model.params.at(l.id + ".b");
        Tensor nw = Tensor::zeros({w.extent(0), prev_keep.size()});
        for (std::size_t o = 0; o < w.extent(0); ++o)
          for (std::size_t c = 0; c < prev_keep.size(); ++c)
            nw.data[o * prev_keep.size() + c] = w.data[o * w.extent(1) + prev_keep[c]];
        if (nw.shape != w.shape)
          report << l.id << ".w: " << w.shape_str() << " -> " << nw.shape_str() << "\n";
        old_params += w.numel() + b.numel();
        new_params += nw.numel() + b.numel();
        out.model.params[l.id + ".w"] = std::move(nw);
        out.model.params[l.id + ".b"] = b;

        l.in_channels = prev_keep.size();
        prev_keep.resize(l.out_channels);
        std::iota(prev_keep.begin(), prev_keep.end(), 0);
        break;
      }
      case LayerKind::Add:
        throw ConfigError("compact: arch '" + model.arch.name + "' is not a chain");
      case LayerKind::Output: {
        l.in_channels = prev_keep.size();
        l.out_channels = prev_keep.size();
        break;
      }
    }
  }

  validate(out.model.arch);
  // Rebuild the chain view against the updated specs.
  Model rebuilt = Model::skeleton(out.model.arch);
  rebuilt.params = std::move(out.model.params);
  out.model = std::move(rebuilt);

  report << "params: " << old_params << " -> " << new_params << " (-"
         << (old_params - new_params) << ")\n";
  out.report = report.str();
  out.mask = FilterMask::for_arch(out.model.arch);
  return out;
}

/// Max absolute logit deviation between the masked original and the
/// compacted model over seeded random inputs. The mask is re-applied to a
/// copy of the original so the comparison cannot silently run unmasked.
inline double verify_equivalence(const Model& original, const FilterMask& mask,
                                 const Model& compacted, int n_samples,
                                 std::uint64_t seed = 0x5EED) {
  const LayerSpec& in_a = original.arch.layers.front();
  const LayerSpec& in_b = compacted.arch.layers.front();
  if (in_a.out_channels != in_b.out_channels || in_a.out_h != in_b.out_h ||
      in_a.out_w != in_b.out_w)
    throw DimensionError("verify_equivalence: input shapes differ");

  Model masked = original;
  for (const auto& [id, states] : mask.layers) {
    Tensor& w = masked.params.at(id);
    const std::size_t row = w.numel() / w.extent(0);
    for (std::size_t j = 0; j < states.size(); ++j)
      if (states[j] != FilterState::Active)
        std::fill_n(w.data.begin() + j * row, row, 0.0);
  }

  std::mt19937_64 rng(seed);
  const Tensor inputs = Tensor::uniform(
      {static_cast<std::size_t>(n_samples), in_a.out_channels, in_a.out_h, in_a.out_w}, rng);
  const Tensor va = masked.forward(inputs);
  const Tensor vb = compacted.forward(inputs);
  if (!same_shape(va, vb))
    throw DimensionError("verify_equivalence: logit shapes differ, " + va.shape_str() + " vs " +
                         vb.shape_str());
  double max_dev = 0.0;
  for (std::size_t i = 0; i < va.numel(); ++i)
    max_dev = std::max(max_dev, std::abs(va.data[i] - vb.data[i]));
  return max_dev;
}

}  // namespace prunekit
