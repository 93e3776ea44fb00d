#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"

namespace prunekit {

enum class LayerKind { Input, Conv, Linear, Pool, Add, Output };

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::Linear: return "linear";
    case LayerKind::Pool: return "pool";
    case LayerKind::Add: return "add";
    case LayerKind::Output: return "output";
  }
  return "?";
}

inline LayerKind kind_from_name(const std::string& s) {
  if (s == "input") return LayerKind::Input;
  if (s == "conv") return LayerKind::Conv;
  if (s == "linear") return LayerKind::Linear;
  if (s == "pool") return LayerKind::Pool;
  if (s == "add") return LayerKind::Add;
  if (s == "output") return LayerKind::Output;
  throw ConfigError("unknown layer kind '" + s + "'");
}

/// One node of the inference graph. Channel count of the node's output is
/// out_channels for every kind; in_channels is meaningful for conv/linear.
struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Conv;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::vector<std::string> predecessors;
};

struct ArchSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<std::string> prunable;

  const LayerSpec* find(const std::string& id) const {
    for (const auto& l : layers)
      if (l.id == id) return &l;
    return nullptr;
  }

  const LayerSpec& at(const std::string& id) const {
    const LayerSpec* l = find(id);
    if (!l) throw ConfigError("arch '" + name + "' has no layer '" + id + "'");
    return *l;
  }

  bool is_prunable(const std::string& id) const {
    return std::find(prunable.begin(), prunable.end(), id) != prunable.end();
  }
};

namespace detail {

inline void check_spatial(const LayerSpec& l, const LayerSpec& pred) {
  const long h = static_cast<long>(pred.out_h);
  const long w = static_cast<long>(pred.out_w);
  const long s = static_cast<long>(l.kernel);
  const long st = static_cast<long>(l.stride);
  const long p = static_cast<long>(l.padding);
  // Descriptor convention is floor, matching the downsampling convs in the
  // standard CIFAR ResNets (32 -> 16 with kernel 3, stride 2, padding 1).
  const long span_h = h + 2 * p - s;
  const long span_w = w + 2 * p - s;
  if (span_h < 0 || span_w < 0 ||
      static_cast<std::size_t>(span_h / st + 1) != l.out_h ||
      static_cast<std::size_t>(span_w / st + 1) != l.out_w)
    throw ConfigError("layer '" + l.id + "': out_spatial " + std::to_string(l.out_h) + "x" +
                      std::to_string(l.out_w) + " inconsistent with predecessor '" + pred.id +
                      "' (" + std::to_string(h) + "x" + std::to_string(w) + "), kernel " +
                      std::to_string(s) + ", stride " + std::to_string(st) + ", padding " +
                      std::to_string(p));
}

}  // namespace detail

/// Structural validation: unique ids, topological layer order, single
/// input/output, per-kind shape consistency, prunable only names convs.
inline void validate(const ArchSpec& arch) {
  std::map<std::string, const LayerSpec*> seen;
  std::size_t inputs = 0, outputs = 0;
  for (const auto& l : arch.layers) {
    if (l.id.empty()) throw ConfigError("arch '" + arch.name + "': layer with empty id");
    if (!seen.emplace(l.id, &l).second)
      throw ConfigError("arch '" + arch.name + "': duplicate layer id '" + l.id + "'");

    std::vector<const LayerSpec*> preds;
    for (const auto& p : l.predecessors) {
      auto it = seen.find(p);
      if (it == seen.end() || p == l.id)
        throw ConfigError("layer '" + l.id + "': predecessor '" + p +
                          "' not defined earlier (layers must be listed in topological order)");
      preds.push_back(it->second);
    }

    switch (l.kind) {
      case LayerKind::Input:
        ++inputs;
        if (!l.predecessors.empty())
          throw ConfigError("input layer '" + l.id + "' must have no predecessors");
        break;
      case LayerKind::Conv: {
        if (preds.size() != 1)
          throw ConfigError("conv layer '" + l.id + "' must have exactly one predecessor");
        if (preds[0]->out_channels != l.in_channels)
          throw ConfigError("conv layer '" + l.id + "': in_channels " +
                            std::to_string(l.in_channels) + " != predecessor '" + preds[0]->id +
                            "' channels " + std::to_string(preds[0]->out_channels));
        if (l.kernel == 0 || l.out_channels == 0)
          throw ConfigError("conv layer '" + l.id + "': kernel and out_channels must be positive");
        detail::check_spatial(l, *preds[0]);
        break;
      }
      case LayerKind::Pool: {
        if (preds.size() != 1)
          throw ConfigError("pool layer '" + l.id + "' must have exactly one predecessor");
        if (l.out_channels != preds[0]->out_channels)
          throw ConfigError("pool layer '" + l.id + "' must preserve channel count");
        if (l.padding != 0) throw ConfigError("pool layer '" + l.id + "': padding unsupported");
        detail::check_spatial(l, *preds[0]);
        break;
      }
      case LayerKind::Add: {
        if (preds.size() != 2)
          throw ConfigError("add layer '" + l.id + "' must have exactly two predecessors");
        for (const auto* p : preds)
          if (p->out_channels != l.out_channels || p->out_h != l.out_h || p->out_w != l.out_w)
            throw ConfigError("add layer '" + l.id + "': predecessor '" + p->id +
                              "' shape does not match");
        break;
      }
      case LayerKind::Linear: {
        if (preds.size() != 1)
          throw ConfigError("linear layer '" + l.id + "' must have exactly one predecessor");
        if (preds[0]->out_h != 1 || preds[0]->out_w != 1)
          throw ConfigError("linear layer '" + l.id + "': predecessor '" + preds[0]->id +
                            "' must have 1x1 spatial output");
        if (preds[0]->out_channels != l.in_channels)
          throw ConfigError("linear layer '" + l.id + "': in_channels " +
                            std::to_string(l.in_channels) + " != predecessor channels " +
                            std::to_string(preds[0]->out_channels));
        break;
      }
      case LayerKind::Output:
        ++outputs;
        if (preds.size() != 1)
          throw ConfigError("output layer '" + l.id + "' must have exactly one predecessor");
        break;
    }
  }
  if (inputs != 1 || outputs != 1)
    throw ConfigError("arch '" + arch.name + "' must have exactly one input and one output, has " +
                      std::to_string(inputs) + "/" + std::to_string(outputs));
  for (const auto& id : arch.prunable) {
    const LayerSpec* l = arch.find(id);
    if (!l || l->kind != LayerKind::Conv)
      throw ConfigError("prunable id '" + id + "' does not name a conv layer");
  }
  std::set<std::string> uniq(arch.prunable.begin(), arch.prunable.end());
  if (uniq.size() != arch.prunable.size())
    throw ConfigError("arch '" + arch.name + "': duplicate prunable ids");
}

namespace detail {

inline LayerSpec input_node(std::size_t channels, std::size_t spatial) {
  LayerSpec l;
  l.id = "input";
  l.kind = LayerKind::Input;
  l.out_channels = channels;
  l.out_h = l.out_w = spatial;
  return l;
}

inline LayerSpec conv_node(std::string id, const LayerSpec& pred, std::size_t n, std::size_t s,
                           std::size_t stride, std::size_t pad) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::Conv;
  l.in_channels = pred.out_channels;
  l.out_channels = n;
  l.kernel = s;
  l.stride = stride;
  l.padding = pad;
  l.out_h = (pred.out_h + 2 * pad - s) / stride + 1;
  l.out_w = (pred.out_w + 2 * pad - s) / stride + 1;
  l.predecessors = {pred.id};
  return l;
}

inline LayerSpec pool_node(std::string id, const LayerSpec& pred, std::size_t k,
                           std::size_t stride) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::Pool;
  l.in_channels = pred.out_channels;
  l.out_channels = pred.out_channels;
  l.kernel = k;
  l.stride = stride;
  l.out_h = (pred.out_h - k) / stride + 1;
  l.out_w = (pred.out_w - k) / stride + 1;
  l.predecessors = {pred.id};
  return l;
}

inline LayerSpec add_node(std::string id, const LayerSpec& a, const LayerSpec& b) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::Add;
  l.in_channels = a.out_channels;
  l.out_channels = a.out_channels;
  l.out_h = a.out_h;
  l.out_w = a.out_w;
  l.predecessors = {a.id, b.id};
  return l;
}

inline LayerSpec linear_node(std::string id, const LayerSpec& pred, std::size_t out) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::Linear;
  l.in_channels = pred.out_channels;
  l.out_channels = out;
  l.out_h = l.out_w = 1;
  l.predecessors = {pred.id};
  return l;
}

inline LayerSpec output_node(const LayerSpec& pred) {
  LayerSpec l;
  l.id = "output";
  l.kind = LayerKind::Output;
  l.in_channels = pred.out_channels;
  l.out_channels = pred.out_channels;
  l.out_h = pred.out_h;
  l.out_w = pred.out_w;
  l.predecessors = {pred.id};
  return l;
}

inline ArchSpec build_resnet(int depth) {
  if ((depth - 2) % 6 != 0) throw ConfigError("resnet depth must be 6k+2");
  const int blocks = (depth - 2) / 6;
  const std::size_t widths[3] = {16, 32, 64};

  ArchSpec arch;
  arch.name = "resnet" + std::to_string(depth);
  arch.layers.push_back(input_node(3, 32));
  LayerSpec prev = conv_node("stem", arch.layers.back(), 16, 3, 1, 1);
  arch.layers.push_back(prev);
  arch.prunable.push_back("stem");

  for (int stage = 1; stage <= 3; ++stage) {
    const std::size_t width = widths[stage - 1];
    for (int b = 0; b < blocks; ++b) {
      const std::string tag = "s" + std::to_string(stage) + "b" + std::to_string(b);
      const bool transition = stage > 1 && b == 0;
      const std::size_t stride = transition ? 2 : 1;

      LayerSpec shortcut = prev;
      LayerSpec c1 = conv_node(tag + "c1", prev, width, 3, stride, 1);
      arch.layers.push_back(c1);
      arch.prunable.push_back(c1.id);
      LayerSpec c2 = conv_node(tag + "c2", c1, width, 3, 1, 1);
      arch.layers.push_back(c2);
      arch.prunable.push_back(c2.id);
      if (transition) {
        shortcut = conv_node(tag + "proj", prev, width, 1, 2, 0);
        arch.layers.push_back(shortcut);
      }
      prev = add_node(tag + "add", c2, shortcut);
      arch.layers.push_back(prev);
    }
  }

  prev = pool_node("gap", prev, prev.out_h, prev.out_h);
  arch.layers.push_back(prev);
  prev = linear_node("fc", prev, 10);
  arch.layers.push_back(prev);
  arch.layers.push_back(output_node(prev));
  return arch;
}

inline ArchSpec build_vgg16() {
  const std::vector<std::vector<std::size_t>> stages = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  ArchSpec arch;
  arch.name = "vgg16";
  arch.layers.push_back(input_node(3, 32));
  LayerSpec prev = arch.layers.back();
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (std::size_t c = 0; c < stages[s].size(); ++c) {
      const std::string id =
          "conv" + std::to_string(s + 1) + "_" + std::to_string(c + 1);
      prev = conv_node(id, prev, stages[s][c], 3, 1, 1);
      arch.layers.push_back(prev);
      arch.prunable.push_back(id);
    }
    prev = pool_node("pool" + std::to_string(s + 1), prev, 2, 2);
    arch.layers.push_back(prev);
  }
  prev = linear_node("fc", prev, 10);
  arch.layers.push_back(prev);
  arch.layers.push_back(output_node(prev));
  return arch;
}

inline ArchSpec build_tinyconvnet(std::size_t classes) {
  ArchSpec arch;
  arch.name = "tinyconvnet";
  arch.layers.push_back(input_node(3, 8));
  LayerSpec prev = conv_node("conv1", arch.layers.back(), 16, 3, 1, 1);
  arch.layers.push_back(prev);
  prev = conv_node("conv2", prev, 16, 3, 1, 1);
  arch.layers.push_back(prev);
  prev = pool_node("pool", prev, 2, 2);
  arch.layers.push_back(prev);
  prev = conv_node("conv3", prev, 32, 3, 1, 1);
  arch.layers.push_back(prev);
  prev = pool_node("gap", prev, prev.out_h, prev.out_h);
  arch.layers.push_back(prev);
  prev = linear_node("fc", prev, classes);
  arch.layers.push_back(prev);
  arch.layers.push_back(output_node(prev));
  arch.prunable = {"conv1", "conv2", "conv3"};
  return arch;
}

}  // namespace detail

inline ArchSpec build_arch(const std::string& name, std::size_t classes = 10) {
  ArchSpec arch;
  if (name == "resnet20")
    arch = detail::build_resnet(20);
  else if (name == "resnet56")
    arch = detail::build_resnet(56);
  else if (name == "resnet110")
    arch = detail::build_resnet(110);
  else if (name == "vgg16")
    arch = detail::build_vgg16();
  else if (name == "tinyconvnet")
    arch = detail::build_tinyconvnet(classes);
  else
    throw ConfigError("unknown arch '" + name +
                      "'; known: resnet20, resnet56, resnet110, vgg16, tinyconvnet");
  validate(arch);
  return arch;
}

/// One layer per line, space-separated key=value fields, `pred` comma-joined.
inline std::string serialize_arch(const ArchSpec& arch) {
  std::ostringstream out;
  out << "arch " << arch.name << "\n";
  for (const auto& l : arch.layers) {
    out << "layer id=" << l.id << " kind=" << kind_name(l.kind) << " m=" << l.in_channels
        << " n=" << l.out_channels << " s=" << l.kernel << " stride=" << l.stride
        << " pad=" << l.padding << " spatial=" << l.out_h << "x" << l.out_w << " pred=";
    for (std::size_t i = 0; i < l.predecessors.size(); ++i)
      out << (i ? "," : "") << l.predecessors[i];
    out << "\n";
  }
  out << "prunable ";
  for (std::size_t i = 0; i < arch.prunable.size(); ++i)
    out << (i ? "," : "") << arch.prunable[i];
  out << "\n";
  return out.str();
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::size_t parse_size(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("bad " + what + " value '" + s + "'");
  }
}

}  // namespace detail

inline ArchSpec parse_arch(const std::string& text) {
  ArchSpec arch;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto tokens = detail::split(line, ' ');
    if (tokens.empty()) continue;
    try {
      if (tokens[0] == "arch") {
        if (tokens.size() != 2) throw ConfigError("expected 'arch <name>'");
        arch.name = tokens[1];
      } else if (tokens[0] == "layer") {
        LayerSpec l;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
          const auto eq = tokens[i].find('=');
          if (eq == std::string::npos)
            throw ConfigError("expected key=value, got '" + tokens[i] + "'");
          const std::string key = tokens[i].substr(0, eq);
          const std::string val = tokens[i].substr(eq + 1);
          if (key == "id")
            l.id = val;
          else if (key == "kind")
            l.kind = kind_from_name(val);
          else if (key == "m")
            l.in_channels = detail::parse_size(val, "m");
          else if (key == "n")
            l.out_channels = detail::parse_size(val, "n");
          else if (key == "s")
            l.kernel = detail::parse_size(val, "s");
          else if (key == "stride")
            l.stride = detail::parse_size(val, "stride");
          else if (key == "pad")
            l.padding = detail::parse_size(val, "pad");
          else if (key == "spatial") {
            auto hw = detail::split(val, 'x');
            if (hw.size() != 2) throw ConfigError("expected spatial=HxW, got '" + val + "'");
            l.out_h = detail::parse_size(hw[0], "spatial");
            l.out_w = detail::parse_size(hw[1], "spatial");
          } else if (key == "pred")
            l.predecessors = detail::split(val, ',');
          else
            throw ConfigError("unknown layer field '" + key + "'");
        }
        arch.layers.push_back(std::move(l));
      } else if (tokens[0] == "prunable") {
        if (tokens.size() == 2) arch.prunable = detail::split(tokens[1], ',');
      } else {
        throw ConfigError("unknown record '" + tokens[0] + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("arch text line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate(arch);
  return arch;
}

}  // namespace prunekit
