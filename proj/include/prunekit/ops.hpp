#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {
namespace detail {

// Inclusive range of output positions o for which i = o*stride + k - pad
// lands inside [0, in_limit). Empty when lo > hi.
struct OutRange {
  long lo, hi;
};

inline OutRange valid_range(long k, long pad, long stride, long in_limit, long out_limit) {
  long lo = 0;
  if (pad - k > 0) lo = (pad - k + stride - 1) / stride;
  long top = in_limit - 1 - k + pad;
  long hi = top < 0 ? -1 : top / stride;
  hi = std::min(hi, out_limit - 1);
  return {lo, hi};
}

inline void check_conv_args(const Tensor& weights, long stride, long padding) {
  if (weights.ndim() != 4)
    throw DimensionError("conv2d: weights must be 4-D [n,m,s,s], got " + weights.shape_str());
  if (weights.extent(2) != weights.extent(3))
    throw DimensionError("conv2d: non-square kernel " + weights.shape_str());
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
}

inline long conv_out_extent(long in, long s, long stride, long padding, const Tensor& input,
                            const Tensor& weights) {
  long span = in + 2 * padding - s;
  if (span < 0 || span % stride != 0 || span / stride + 1 < 1)
    throw DimensionError("conv2d: input " + input.shape_str() + " incompatible with weights " +
                         weights.shape_str() + " at stride " + std::to_string(stride) +
                         ", padding " + std::to_string(padding));
  return span / stride + 1;
}

}  // namespace detail

/// Cross-correlation of a [m,h,w] or [N,m,h,w] input with [n,m,s,s] filters.
/// Output channel j is the correlation of the input with filter j.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& weights, int stride = 1,
                             int padding = 0) {
  detail::check_conv_args(weights, stride, padding);
  const bool batched = input.ndim() == 4;
  if (!batched && input.ndim() != 3)
    throw DimensionError("conv2d: input must be [m,h,w] or [N,m,h,w], got " + input.shape_str());

  const std::size_t batch = batched ? input.extent(0) : 1;
  const long m = static_cast<long>(input.extent(batched ? 1 : 0));
  const long h = static_cast<long>(input.extent(batched ? 2 : 1));
  const long w = static_cast<long>(input.extent(batched ? 3 : 2));
  const long n = static_cast<long>(weights.extent(0));
  const long s = static_cast<long>(weights.extent(2));
  if (static_cast<long>(weights.extent(1)) != m)
    throw DimensionError("conv2d: input channels of " + input.shape_str() +
                         " do not match weights " + weights.shape_str());

  const long oh = detail::conv_out_extent(h, s, stride, padding, input, weights);
  const long ow = detail::conv_out_extent(w, s, stride, padding, input, weights);

  Tensor out = batched ? Tensor::zeros({batch, static_cast<std::size_t>(n),
                                        static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)})
                       : Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(oh),
                                        static_cast<std::size_t>(ow)});

  const std::size_t in_image = static_cast<std::size_t>(m) * h * w;
  const std::size_t out_image = static_cast<std::size_t>(n) * oh * ow;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* in = input.data.data() + b * in_image;
    double* ob = out.data.data() + b * out_image;
    for (long j = 0; j < n; ++j) {
      double* out_ch = ob + j * oh * ow;
      for (long c = 0; c < m; ++c) {
        const double* in_ch = in + c * h * w;
        const double* w_jc = weights.data.data() + (j * m + c) * s * s;
        for (long ky = 0; ky < s; ++ky) {
          const auto ry = detail::valid_range(ky, padding, stride, h, oh);
          for (long kx = 0; kx < s; ++kx) {
            const double wv = w_jc[ky * s + kx];
            const auto rx = detail::valid_range(kx, padding, stride, w, ow);
            for (long oy = ry.lo; oy <= ry.hi; ++oy) {
              const double* in_row = in_ch + (oy * stride + ky - padding) * w + kx - padding;
              double* out_row = out_ch + oy * ow;
              for (long ox = rx.lo; ox <= rx.hi; ++ox)
                out_row[ox] += wv * in_row[ox * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

/// Adjoints of conv2d_forward. Returns (input_grad, weight_grad); weight_grad
/// is summed over the batch. Set want_input_grad=false to skip the input
/// adjoint (first layer of a network).
inline std::pair<Tensor, Tensor> conv2d_backward(const Tensor& output_grad,
                                                 const Tensor& saved_input, const Tensor& weights,
                                                 int stride = 1, int padding = 0,
                                                 bool want_input_grad = true) {
  detail::check_conv_args(weights, stride, padding);
  const bool batched = saved_input.ndim() == 4;
  const std::size_t batch = batched ? saved_input.extent(0) : 1;
  const long m = static_cast<long>(saved_input.extent(batched ? 1 : 0));
  const long h = static_cast<long>(saved_input.extent(batched ? 2 : 1));
  const long w = static_cast<long>(saved_input.extent(batched ? 3 : 2));
  const long n = static_cast<long>(weights.extent(0));
  const long s = static_cast<long>(weights.extent(2));
  const long oh = detail::conv_out_extent(h, s, stride, padding, saved_input, weights);
  const long ow = detail::conv_out_extent(w, s, stride, padding, saved_input, weights);

  std::vector<std::size_t> want_og_shape =
      batched ? std::vector<std::size_t>{batch, static_cast<std::size_t>(n),
                                         static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)}
              : std::vector<std::size_t>{static_cast<std::size_t>(n), static_cast<std::size_t>(oh),
                                         static_cast<std::size_t>(ow)};
  require_shape(output_grad, want_og_shape, "conv2d_backward");

  Tensor input_grad = Tensor::zeros(saved_input.shape);
  Tensor weight_grad = Tensor::zeros(weights.shape);

  const std::size_t in_image = static_cast<std::size_t>(m) * h * w;
  const std::size_t out_image = static_cast<std::size_t>(n) * oh * ow;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* in = saved_input.data.data() + b * in_image;
    const double* og = output_grad.data.data() + b * out_image;
    double* ig = input_grad.data.data() + b * in_image;
    for (long j = 0; j < n; ++j) {
      const double* og_ch = og + j * oh * ow;
      for (long c = 0; c < m; ++c) {
        const double* in_ch = in + c * h * w;
        double* ig_ch = ig + c * h * w;
        const std::size_t w_base = (j * m + c) * s * s;
        for (long ky = 0; ky < s; ++ky) {
          const auto ry = detail::valid_range(ky, padding, stride, h, oh);
          for (long kx = 0; kx < s; ++kx) {
            const auto rx = detail::valid_range(kx, padding, stride, w, ow);
            const double wv = weights.data[w_base + ky * s + kx];
            double acc = 0.0;
            for (long oy = ry.lo; oy <= ry.hi; ++oy) {
              const double* og_row = og_ch + oy * ow;
              const double* in_row = in_ch + (oy * stride + ky - padding) * w + kx - padding;
              if (want_input_grad) {
                double* ig_row = ig_ch + (oy * stride + ky - padding) * w + kx - padding;
                for (long ox = rx.lo; ox <= rx.hi; ++ox) {
                  const double g = og_row[ox];
                  acc += g * in_row[ox * stride];
                  ig_row[ox * stride] += g * wv;
                }
              } else {
                for (long ox = rx.lo; ox <= rx.hi; ++ox) acc += og_row[ox] * in_row[ox * stride];
              }
            }
            weight_grad.data[w_base + ky * s + kx] += acc;
          }
        }
      }
    }
  }
  return {std::move(input_grad), std::move(weight_grad)};
}

/// y = x W^T + b with W of shape [out,in]; input [in] or [N,in].
inline Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.ndim() != 2)
    throw DimensionError("linear: weight must be [out,in], got " + weight.shape_str());
  const bool batched = input.ndim() == 2;
  if (!batched && input.ndim() != 1)
    throw DimensionError("linear: input must be [in] or [N,in], got " + input.shape_str());
  const std::size_t batch = batched ? input.extent(0) : 1;
  const std::size_t in = input.extent(batched ? 1 : 0);
  const std::size_t out = weight.extent(0);
  if (weight.extent(1) != in)
    throw DimensionError("linear: input " + input.shape_str() + " does not match weight " +
                         weight.shape_str());
  require_shape(bias, {out}, "linear bias");

  Tensor y = batched ? Tensor::zeros({batch, out}) : Tensor::zeros({out});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* x = input.data.data() + b * in;
    double* yb = y.data.data() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = weight.data.data() + o * in;
      double acc = bias.data[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      yb[o] = acc;
    }
  }
  return y;
}

/// Adjoints of linear_forward: (input_grad, weight_grad, bias_grad),
/// weight/bias grads summed over the batch.
inline std::tuple<Tensor, Tensor, Tensor> linear_backward(const Tensor& output_grad,
                                                          const Tensor& saved_input,
                                                          const Tensor& weight) {
  const bool batched = saved_input.ndim() == 2;
  const std::size_t batch = batched ? saved_input.extent(0) : 1;
  const std::size_t in = saved_input.extent(batched ? 1 : 0);
  const std::size_t out = weight.extent(0);
  require_shape(output_grad, batched ? std::vector<std::size_t>{batch, out}
                                     : std::vector<std::size_t>{out},
                "linear_backward");

  Tensor input_grad = Tensor::zeros(saved_input.shape);
  Tensor weight_grad = Tensor::zeros(weight.shape);
  Tensor bias_grad = Tensor::zeros({out});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* x = saved_input.data.data() + b * in;
    const double* og = output_grad.data.data() + b * out;
    double* ig = input_grad.data.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = og[o];
      const double* w = weight.data.data() + o * in;
      double* wg = weight_grad.data.data() + o * in;
      bias_grad.data[o] += g;
      for (std::size_t i = 0; i < in; ++i) {
        wg[i] += g * x[i];
        ig[i] += g * w[i];
      }
    }
  }
  return {std::move(input_grad), std::move(weight_grad), std::move(bias_grad)};
}

inline Tensor relu_forward(const Tensor& input) {
  Tensor y = input;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

inline Tensor relu_backward(const Tensor& output_grad, const Tensor& saved_input) {
  if (!same_shape(output_grad, saved_input))
    throw DimensionError("relu_backward: grad " + output_grad.shape_str() +
                         " does not match input " + saved_input.shape_str());
  Tensor ig = output_grad;
  for (std::size_t i = 0; i < ig.data.size(); ++i)
    if (saved_input.data[i] <= 0.0) ig.data[i] = 0.0;
  return ig;
}

/// Average pooling over non-overlapping-or-strided k x k windows.
/// Input [C,H,W] or [N,C,H,W]; window must tile the input exactly.
inline Tensor avgpool2d_forward(const Tensor& input, int k, int stride = 0) {
  if (stride <= 0) stride = k;
  const bool batched = input.ndim() == 4;
  if (!batched && input.ndim() != 3)
    throw DimensionError("avgpool2d: input must be [C,H,W] or [N,C,H,W], got " +
                         input.shape_str());
  const std::size_t batch = batched ? input.extent(0) : 1;
  const long c = static_cast<long>(input.extent(batched ? 1 : 0));
  const long h = static_cast<long>(input.extent(batched ? 2 : 1));
  const long w = static_cast<long>(input.extent(batched ? 3 : 2));
  if (k < 1 || (h - k) % stride != 0 || (w - k) % stride != 0 || h < k || w < k)
    throw DimensionError("avgpool2d: window " + std::to_string(k) + "/" + std::to_string(stride) +
                         " does not tile input " + input.shape_str());
  const long oh = (h - k) / stride + 1;
  const long ow = (w - k) / stride + 1;

  Tensor out = batched ? Tensor::zeros({batch, static_cast<std::size_t>(c),
                                        static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)})
                       : Tensor::zeros({static_cast<std::size_t>(c), static_cast<std::size_t>(oh),
                                        static_cast<std::size_t>(ow)});
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* in = input.data.data() + b * c * h * w;
    double* ob = out.data.data() + b * c * oh * ow;
    for (long ch = 0; ch < c; ++ch)
      for (long oy = 0; oy < oh; ++oy)
        for (long ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (long ky = 0; ky < k; ++ky) {
            const double* row = in + ch * h * w + (oy * stride + ky) * w + ox * stride;
            for (long kx = 0; kx < k; ++kx) acc += row[kx];
          }
          ob[ch * oh * ow + oy * ow + ox] = acc * inv;
        }
  }
  return out;
}

inline Tensor avgpool2d_backward(const Tensor& output_grad,
                                 const std::vector<std::size_t>& input_shape, int k,
                                 int stride = 0) {
  if (stride <= 0) stride = k;
  const bool batched = input_shape.size() == 4;
  const std::size_t batch = batched ? input_shape[0] : 1;
  const long c = static_cast<long>(input_shape[batched ? 1 : 0]);
  const long h = static_cast<long>(input_shape[batched ? 2 : 1]);
  const long w = static_cast<long>(input_shape[batched ? 3 : 2]);
  const long oh = (h - k) / stride + 1;
  const long ow = (w - k) / stride + 1;

  Tensor ig = Tensor::zeros(input_shape);
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* og = output_grad.data.data() + b * c * oh * ow;
    double* gb = ig.data.data() + b * c * h * w;
    for (long ch = 0; ch < c; ++ch)
      for (long oy = 0; oy < oh; ++oy)
        for (long ox = 0; ox < ow; ++ox) {
          const double g = og[ch * oh * ow + oy * ow + ox] * inv;
          for (long ky = 0; ky < k; ++ky) {
            double* row = gb + ch * h * w + (oy * stride + ky) * w + ox * stride;
            for (long kx = 0; kx < k; ++kx) row[kx] += g;
          }
        }
  }
  return ig;
}

/// Mean cross-entropy of softmax(logits) against integer labels.
/// Logits [N,C] or [C]; returns (loss, probs) with probs saved for backward.
inline std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                       const std::vector<int>& labels) {
  const bool batched = logits.ndim() == 2;
  if (!batched && logits.ndim() != 1)
    throw DimensionError("softmax_cross_entropy: logits must be [C] or [N,C], got " +
                         logits.shape_str());
  const std::size_t batch = batched ? logits.extent(0) : 1;
  const std::size_t classes = logits.extent(batched ? 1 : 0);
  if (labels.size() != batch)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(batch));

  Tensor probs = logits;
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw InvariantError("softmax_cross_entropy: label " + std::to_string(label) +
                           " out of range [0," + std::to_string(classes) + ")");
    double* row = probs.data.data() + b * classes;
    double mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < classes; ++c) row[c] /= sum;
    loss -= std::log(row[label]);
  }
  return {loss / static_cast<double>(batch), std::move(probs)};
}

/// Gradient of the mean loss w.r.t. logits: (softmax - onehot) / N.
inline Tensor softmax_cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels) {
  const bool batched = probs.ndim() == 2;
  const std::size_t batch = batched ? probs.extent(0) : 1;
  const std::size_t classes = probs.extent(batched ? 1 : 0);
  Tensor grad = probs;
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = grad.data.data() + b * classes;
    row[labels[b]] -= 1.0;
    for (std::size_t c = 0; c < classes; ++c) row[c] *= inv;
  }
  return grad;
}

}  // namespace prunekit
