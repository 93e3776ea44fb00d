#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"

namespace prunekit {

/// Dense N-dimensional array of 64-bit floats with an optional gradient
/// buffer of the same size. Row-major layout, trailing index fastest.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty when absent, else data.size()

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(count(shape), 0.0);
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor from(std::vector<std::size_t> s, std::vector<double> values) {
    Tensor t;
    t.shape = std::move(s);
    if (values.size() != count(t.shape))
      throw DimensionError("Tensor::from: data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(t.shape));
    t.data = std::move(values);
    return t;
  }

  template <class Rng>
  static Tensor uniform(std::vector<std::size_t> s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(s));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
    return t;
  }

  template <class Rng>
  static Tensor gaussian(std::vector<std::size_t> s, Rng& rng, double mean, double stddev) {
    Tensor t(std::move(s));
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.data) v = dist(rng);
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }

  std::size_t extent(std::size_t axis) const { return shape.at(axis); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  double& at(std::initializer_list<std::size_t> idx) { return data[offset(idx)]; }
  double at(std::initializer_list<std::size_t> idx) const { return data[offset(idx)]; }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0, axis = 0;
    for (std::size_t i : idx) {
      off = off * shape[axis] + i;
      ++axis;
    }
    return off;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
  }

  std::string shape_str() const { return shape_str(shape); }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& want,
                          const std::string& who) {
  if (t.shape != want)
    throw DimensionError(who + ": expected shape " + Tensor::shape_str(want) + ", got " +
                         t.shape_str());
}

}  // namespace prunekit
