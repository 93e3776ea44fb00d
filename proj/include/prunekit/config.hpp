#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/schedule.hpp"
#include "prunekit/sgd.hpp"

namespace prunekit {

/// Everything a training run needs; serializes to a diff-able key=value
/// text file and back. The epoch count is schedule.t_max.
struct RunConfig {
  std::string arch = "tinyconvnet";
  ScheduleConfig schedule = ScheduleConfig::for_mode(Mode::GHFP, 0.0, 40);
  SgdConfig sgd{0.05, 0.9, 5e-4};
  int batch_size = 64;
  std::uint64_t seed = 1;
  std::size_t classes = 10;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  double sigma = 0.3;
  bool pretrained_start = false;
  std::string init_checkpoint;
  std::string metrics_path;
  std::string checkpoint_path;

  void validate() const {
    schedule.validate();
    sgd.validate();
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (pretrained_start && init_checkpoint.empty())
      throw ConfigError("pretrained_start requires init_checkpoint");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

inline long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

inline std::uint64_t parse_uint(const std::string& s) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument(s);
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "arch = " << cfg.arch << "\n";
  out << "mode = " << mode_name(cfg.schedule.mode) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "epochs = " << cfg.schedule.t_max << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "lr = " << detail::fmt_double(cfg.sgd.lr) << "\n";
  out << "momentum = " << detail::fmt_double(cfg.sgd.momentum) << "\n";
  out << "weight_decay = " << detail::fmt_double(cfg.sgd.weight_decay) << "\n";
  out << "rate = " << detail::fmt_double(cfg.schedule.goal_rate) << "\n";
  out << "rate_ramp = " << ramp_name(cfg.schedule.rate_ramp) << "\n";
  out << "alpha0 = " << detail::fmt_double(cfg.schedule.alpha0) << "\n";
  out << "epsilon = " << detail::fmt_double(cfg.schedule.epsilon) << "\n";
  out << "lambda_i = " << detail::fmt_double(cfg.schedule.lambda_i) << "\n";
  out << "lambda_f = " << detail::fmt_double(cfg.schedule.lambda_f) << "\n";
  out << "lambda_const = " << detail::fmt_double(cfg.schedule.lambda_const) << "\n";
  out << "classes = " << cfg.classes << "\n";
  out << "n_train = " << cfg.n_train << "\n";
  out << "n_test = " << cfg.n_test << "\n";
  out << "sigma = " << detail::fmt_double(cfg.sigma) << "\n";
  out << "pretrained_start = " << (cfg.pretrained_start ? "true" : "false") << "\n";
  if (!cfg.init_checkpoint.empty()) out << "init_checkpoint = " << cfg.init_checkpoint << "\n";
  if (!cfg.metrics_path.empty()) out << "metrics_path = " << cfg.metrics_path << "\n";
  if (!cfg.checkpoint_path.empty()) out << "checkpoint_path = " << cfg.checkpoint_path << "\n";
  if (!cfg.schedule.layer_goals.empty()) {
    out << "\n[layer_rates]\n";
    for (const auto& [id, rate] : cfg.schedule.layer_goals)
      out << id << " = " << detail::fmt_double(rate) << "\n";
  }
  return out.str();
}

/// Parse the key=value format. `mode` applies that mode's conventional
/// schedule settings; explicit keys override them regardless of order.
/// Errors carry the offending line number.
inline RunConfig parse_run_config(const std::string& text) {
  struct Entry {
    std::string key, val;
    int lineno;
    bool layer_rate;
  };
  std::vector<Entry> entries;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool in_layer_rates = false;
  auto fail = [&](int at, const std::string& msg) -> void {
    throw ConfigError("config line " + std::to_string(at) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t == "[layer_rates]")
        in_layer_rates = true;
      else
        fail(lineno, "unknown section '" + t + "'");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value', got '" + t + "'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string val = detail::trim(t.substr(eq + 1));
    if (key.empty()) fail(lineno, "empty key");
    entries.push_back({key, val, lineno, in_layer_rates});
  }

  RunConfig cfg;
  for (const auto& e : entries)
    if (!e.layer_rate && e.key == "mode") {
      try {
        cfg.schedule =
            ScheduleConfig::for_mode(mode_from_name(e.val), cfg.schedule.goal_rate,
                                     cfg.schedule.t_max);
      } catch (const Error& err) {
        fail(e.lineno, err.what());
      }
    }

  for (const auto& e : entries) {
    const std::string& key = e.key;
    const std::string& val = e.val;
    try {
      if (e.layer_rate)
        cfg.schedule.layer_goals[key] = detail::parse_double(val);
      else if (key == "mode")
        ;  // applied above
      else if (key == "arch")
        cfg.arch = val;
      else if (key == "seed")
        cfg.seed = detail::parse_uint(val);
      else if (key == "epochs" || key == "t_max")
        cfg.schedule.t_max = static_cast<int>(detail::parse_int(val));
      else if (key == "batch_size")
        cfg.batch_size = static_cast<int>(detail::parse_int(val));
      else if (key == "lr")
        cfg.sgd.lr = detail::parse_double(val);
      else if (key == "momentum")
        cfg.sgd.momentum = detail::parse_double(val);
      else if (key == "weight_decay")
        cfg.sgd.weight_decay = detail::parse_double(val);
      else if (key == "rate" || key == "goal_rate")
        cfg.schedule.goal_rate = detail::parse_double(val);
      else if (key == "rate_ramp")
        cfg.schedule.rate_ramp = ramp_from_name(val);
      else if (key == "alpha0")
        cfg.schedule.alpha0 = detail::parse_double(val);
      else if (key == "epsilon")
        cfg.schedule.epsilon = detail::parse_double(val);
      else if (key == "lambda_i")
        cfg.schedule.lambda_i = detail::parse_double(val);
      else if (key == "lambda_f")
        cfg.schedule.lambda_f = detail::parse_double(val);
      else if (key == "lambda_const")
        cfg.schedule.lambda_const = detail::parse_double(val);
      else if (key == "classes")
        cfg.classes = static_cast<std::size_t>(detail::parse_uint(val));
      else if (key == "n_train")
        cfg.n_train = static_cast<std::size_t>(detail::parse_uint(val));
      else if (key == "n_test")
        cfg.n_test = static_cast<std::size_t>(detail::parse_uint(val));
      else if (key == "sigma")
        cfg.sigma = detail::parse_double(val);
      else if (key == "pretrained_start")
        cfg.pretrained_start = detail::parse_bool(val);
      else if (key == "init_checkpoint")
        cfg.init_checkpoint = val;
      else if (key == "metrics_path")
        cfg.metrics_path = val;
      else if (key == "checkpoint_path")
        cfg.checkpoint_path = val;
      else
        fail(e.lineno, "unknown config key '" + key + "'");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(e.lineno, "bad value '" + val + "' for key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace prunekit
