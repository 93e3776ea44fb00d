#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/arch.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/masks.hpp"
#include "prunekit/ops.hpp"
#include "prunekit/sgd.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

/// Executable model over a chain arch (input -> convs/pools -> linear ->
/// output, no residual adds). ReLU follows every conv. Parameters live in
/// a flat id -> tensor map: conv weights under the layer id, the linear
/// layer under "<id>.w" / "<id>.b".
struct Model {
  ArchSpec arch;
  std::vector<LayerSpec> chain;  // conv/pool/linear nodes in execution order
  std::map<std::string, Tensor> params;

  /// Chain extraction plus zero parameters; checkpoint loading fills them.
  static Model skeleton(const ArchSpec& arch) {
    Model m;
    m.arch = arch;
    std::string prev;
    for (const auto& l : arch.layers) {
      switch (l.kind) {
        case LayerKind::Input:
          if (!prev.empty()) throw ConfigError("arch '" + arch.name + "' is not a chain");
          break;
        case LayerKind::Add:
          throw ConfigError("arch '" + arch.name +
                            "' is not executable: residual adds are descriptor-only");
        case LayerKind::Output:
          break;
        default:
          if (l.predecessors.size() != 1 || l.predecessors[0] != prev)
            throw ConfigError("arch '" + arch.name + "' is not a chain at layer '" + l.id + "'");
          m.chain.push_back(l);
          break;
      }
      if (l.kind != LayerKind::Output) prev = l.id;
    }
    if (m.chain.empty() || m.chain.back().kind != LayerKind::Linear)
      throw ConfigError("arch '" + arch.name + "' must end in a linear layer to be executable");

    for (const auto& l : m.chain) {
      if (l.kind == LayerKind::Conv)
        m.params[l.id] = Tensor::zeros({l.out_channels, l.in_channels, l.kernel, l.kernel});
      else if (l.kind == LayerKind::Linear) {
        m.params[l.id + ".w"] = Tensor::zeros({l.out_channels, l.in_channels});
        m.params[l.id + ".b"] = Tensor::zeros({l.out_channels});
      }
    }
    return m;
  }

  static Model build(const ArchSpec& arch, std::mt19937_64& rng) {
    Model m = skeleton(arch);
    // He-style init, drawn in chain order so builds are seed-deterministic.
    for (const auto& l : m.chain) {
      if (l.kind == LayerKind::Conv) {
        const double stddev =
            std::sqrt(2.0 / static_cast<double>(l.in_channels * l.kernel * l.kernel));
        m.params[l.id] = Tensor::gaussian({l.out_channels, l.in_channels, l.kernel, l.kernel},
                                          rng, 0.0, stddev);
      } else if (l.kind == LayerKind::Linear) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(l.in_channels));
        m.params[l.id + ".w"] = Tensor::gaussian({l.out_channels, l.in_channels}, rng, 0.0, stddev);
      }
    }
    return m;
  }

  /// Logits for a [3,h,w] or [N,3,h,w] input. No gradient bookkeeping.
  Tensor forward(const Tensor& input) const {
    Tensor x = input;
    const bool batched = input.ndim() == 4;
    for (const auto& l : chain) {
      switch (l.kind) {
        case LayerKind::Conv:
          x = relu_forward(conv2d_forward(x, params.at(l.id), static_cast<int>(l.stride),
                                          static_cast<int>(l.padding)));
          break;
        case LayerKind::Pool:
          x = avgpool2d_forward(x, static_cast<int>(l.kernel), static_cast<int>(l.stride));
          break;
        case LayerKind::Linear: {
          // collapse [*,C,1,1] to [*,C]
          if (batched)
            x.shape = {x.extent(0), x.extent(1)};
          else
            x.shape = {x.extent(0)};
          x = linear_forward(x, params.at(l.id + ".w"), params.at(l.id + ".b"));
          break;
        }
        default:
          break;
      }
    }
    return x;
  }
};

inline std::map<std::string, Tensor> make_velocity(const Model& model) {
  std::map<std::string, Tensor> vel;
  for (const auto& [id, p] : model.params) vel[id] = Tensor::zeros(p.shape);
  return vel;
}

namespace detail {

struct TraceSlot {
  Tensor input;    // layer input as fed forward
  Tensor preact;   // conv output before ReLU (conv slots only)
};

inline std::string first_nonfinite_layer(const Model& model,
                                         const std::vector<TraceSlot>& trace,
                                         const Tensor& logits) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& l = model.chain[i];
    if (l.kind == LayerKind::Conv && !trace[i].preact.all_finite()) return l.id;
  }
  if (!logits.all_finite()) return model.chain.back().id;
  return "loss";
}

}  // namespace detail

/// One optimization step on a batch: forward, mean cross-entropy, reverse
/// pass, Hard-filter gradient masking, SGD update. Returns the batch loss.
inline double train_batch(Model& model, const Tensor& images, const std::vector<int>& labels,
                          const FilterMask& mask, const SgdConfig& sgd,
                          std::map<std::string, Tensor>& velocity) {
  const bool batched = images.ndim() == 4;
  std::vector<detail::TraceSlot> trace(model.chain.size());

  Tensor x = images;
  for (std::size_t i = 0; i < model.chain.size(); ++i) {
    const auto& l = model.chain[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        trace[i].input = x;
        trace[i].preact = conv2d_forward(x, model.params.at(l.id), static_cast<int>(l.stride),
                                         static_cast<int>(l.padding));
        x = relu_forward(trace[i].preact);
        break;
      }
      case LayerKind::Pool:
        trace[i].input = x;
        x = avgpool2d_forward(x, static_cast<int>(l.kernel), static_cast<int>(l.stride));
        break;
      case LayerKind::Linear: {
        if (batched)
          x.shape = {x.extent(0), x.extent(1)};
        else
          x.shape = {x.extent(0)};
        trace[i].input = x;
        x = linear_forward(x, model.params.at(l.id + ".w"), model.params.at(l.id + ".b"));
        break;
      }
      default:
        break;
    }
  }

  auto [loss, probs] = softmax_cross_entropy(x, labels);
  if (!std::isfinite(loss))
    throw RuntimeAbort("non-finite loss (first non-finite activation at layer '" +
                       detail::first_nonfinite_layer(model, trace, x) + "')");

  std::map<std::string, Tensor> grads;
  Tensor g = softmax_cross_entropy_backward(probs, labels);
  for (std::size_t idx = model.chain.size(); idx-- > 0;) {
    const auto& l = model.chain[idx];
    switch (l.kind) {
      case LayerKind::Conv: {
        g = relu_backward(g, trace[idx].preact);
        auto [ig, wg] =
            conv2d_backward(g, trace[idx].input, model.params.at(l.id),
                            static_cast<int>(l.stride), static_cast<int>(l.padding), idx != 0);
        grads[l.id] = std::move(wg);
        g = std::move(ig);
        break;
      }
      case LayerKind::Pool:
        g = avgpool2d_backward(g, trace[idx].input.shape, static_cast<int>(l.kernel),
                               static_cast<int>(l.stride));
        break;
      case LayerKind::Linear: {
        auto [ig, wg, bg] = linear_backward(g, trace[idx].input, model.params.at(l.id + ".w"));
        grads[l.id + ".w"] = std::move(wg);
        grads[l.id + ".b"] = std::move(bg);
        g = std::move(ig);
        // restore the [*,C,1,1] shape the preceding pool produced
        g.shape = batched ? std::vector<std::size_t>{g.extent(0), g.extent(1), 1, 1}
                          : std::vector<std::size_t>{g.extent(0), 1, 1};
        break;
      }
      default:
        break;
    }
  }

  for (const auto& [id, states] : mask.layers) {
    auto it = grads.find(id);
    if (it != grads.end()) apply_grad_mask(it->second, states);
  }
  for (auto& [id, p] : model.params) sgd_step(p, grads.at(id), velocity.at(id), sgd);
  return loss;
}

/// Mean loss and top-1 accuracy over a labeled set, evaluated in batches.
inline std::pair<double, double> evaluate(const Model& model, const Tensor& images,
                                          const std::vector<int>& labels,
                                          std::size_t batch_size = 100) {
  const std::size_t n = images.extent(0);
  const std::size_t image = images.numel() / n;
  const std::size_t classes = model.chain.back().out_channels;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    Tensor batch{{count, images.extent(1), images.extent(2), images.extent(3)}};
    std::copy_n(images.data.begin() + start * image, count * image, batch.data.begin());
    std::vector<int> batch_labels(labels.begin() + start, labels.begin() + start + count);
    const Tensor logits = model.forward(batch);
    auto [loss, probs] = softmax_cross_entropy(logits, batch_labels);
    loss_sum += loss * static_cast<double>(count);
    for (std::size_t b = 0; b < count; ++b) {
      const double* row = logits.data.data() + b * classes;
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c;
      if (static_cast<int>(best) == batch_labels[b]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(n),
          static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace prunekit
