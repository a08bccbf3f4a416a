/* Copyright 2026 The GradPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "gradprune/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradprune/errors.hpp"

namespace gradprune::ops {

namespace {

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t padding,
                            const char* axis) {
  if (in + 2 * padding < kernel) {
    throw DimensionError(std::string("conv2d: kernel larger than padded ") +
                         axis + " extent");
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " must have rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_to_string(t.shape()));
  }
}

void check_labels(const Tensor& logits, std::span<const std::size_t> labels) {
  require_rank(logits, 2, "cross-entropy logits");
  if (labels.size() != logits.dim(0)) {
    throw DimensionError("cross-entropy: batch axis 0 has " +
                         std::to_string(logits.dim(0)) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t label : labels) {
    if (label >= logits.dim(1)) {
      throw InputError("cross-entropy: label " + std::to_string(label) +
                       " outside [0, " + std::to_string(logits.dim(1)) + ")");
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, Conv2dGeometry geometry) {
  require_rank(input, 4, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  require_rank(bias, 1, "conv2d bias");
  if (input.dim(1) != weights.dim(1)) {
    throw DimensionError("conv2d: input axis 1 (channels) = " +
                         std::to_string(input.dim(1)) +
                         " but weights axis 1 (in-channels) = " +
                         std::to_string(weights.dim(1)));
  }
  if (bias.dim(0) != weights.dim(0)) {
    throw DimensionError("conv2d: bias axis 0 = " +
                         std::to_string(bias.dim(0)) +
                         " but weights axis 0 (out-channels) = " +
                         std::to_string(weights.dim(0)));
  }
  if (geometry.stride == 0) throw InputError("conv2d: stride must be >= 1");

  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t filters = weights.dim(0);
  const std::size_t kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t stride = geometry.stride, pad = geometry.padding;
  const std::size_t out_h = conv_out_extent(height, kh, stride, pad, "height");
  const std::size_t out_w = conv_out_extent(width, kw, stride, pad, "width");

  Tensor output({batch, filters, out_h, out_w});
  const auto x = input.data();
  const auto w = weights.data();
  auto y = output.data();
  std::size_t out_index = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < filters; ++o) {
      for (std::size_t oh = 0; oh < out_h; ++oh) {
        for (std::size_t ow = 0; ow < out_w; ++ow) {
          double acc = 0.0;
          for (std::size_t c = 0; c < channels; ++c) {
            const double* plane = &x[(n * channels + c) * height * width];
            const double* kernel = &w[(o * channels + c) * kh * kw];
            for (std::size_t i = 0; i < kh; ++i) {
              // Signed arithmetic for the padded coordinate.
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh * stride + i) -
                  static_cast<std::ptrdiff_t>(pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
              for (std::size_t j = 0; j < kw; ++j) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow * stride + j) -
                    static_cast<std::ptrdiff_t>(pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
                acc += plane[ih * static_cast<std::ptrdiff_t>(width) + iw] *
                       kernel[i * kw + j];
              }
            }
          }
          y[out_index++] = acc + bias[o];
        }
      }
    }
  }
  return output;
}

void conv2d_backward(const Tensor& input, const Tensor& weights,
                     std::span<const double> grad_output,
                     Conv2dGeometry geometry, std::span<double> grad_input,
                     std::span<double> grad_weights,
                     std::span<double> grad_bias) {
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t filters = weights.dim(0);
  const std::size_t kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t stride = geometry.stride, pad = geometry.padding;
  const std::size_t out_h = (height + 2 * pad - kh) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - kw) / stride + 1;

  const auto x = input.data();
  const auto w = weights.data();
  const bool want_input = !grad_input.empty();
  const bool want_weights = !grad_weights.empty();
  std::size_t out_index = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < filters; ++o) {
      for (std::size_t oh = 0; oh < out_h; ++oh) {
        for (std::size_t ow = 0; ow < out_w; ++ow) {
          const double g = grad_output[out_index++];
          if (!grad_bias.empty()) grad_bias[o] += g;
          if (g == 0.0) continue;
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t plane = (n * channels + c) * height * width;
            const std::size_t kernel = (o * channels + c) * kh * kw;
            for (std::size_t i = 0; i < kh; ++i) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh * stride + i) -
                  static_cast<std::ptrdiff_t>(pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
              for (std::size_t j = 0; j < kw; ++j) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow * stride + j) -
                    static_cast<std::ptrdiff_t>(pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
                const std::size_t xi =
                    plane + static_cast<std::size_t>(ih) * width +
                    static_cast<std::size_t>(iw);
                const std::size_t wi = kernel + i * kw + j;
                if (want_weights) grad_weights[wi] += g * x[xi];
                if (want_input) grad_input[xi] += g * w[wi];
              }
            }
          }
        }
      }
    }
  }
}

Tensor dense_forward(const Tensor& input, const Tensor& weights,
                     const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  if (input.dim(1) != weights.dim(0)) {
    throw DimensionError("dense: input axis 1 = " +
                         std::to_string(input.dim(1)) +
                         " but weights axis 0 = " +
                         std::to_string(weights.dim(0)));
  }
  if (bias.dim(0) != weights.dim(1)) {
    throw DimensionError("dense: bias axis 0 = " +
                         std::to_string(bias.dim(0)) +
                         " but weights axis 1 = " +
                         std::to_string(weights.dim(1)));
  }
  const std::size_t rows = input.dim(0), inner = input.dim(1);
  const std::size_t cols = weights.dim(1);
  Tensor output({rows, cols});
  const auto x = input.data();
  const auto w = weights.data();
  auto y = output.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += x[r * inner + k] * w[k * cols + c];
      y[r * cols + c] = acc + bias[c];
    }
  }
  return output;
}

void dense_backward(const Tensor& input, const Tensor& weights,
                    std::span<const double> grad_output,
                    std::span<double> grad_input,
                    std::span<double> grad_weights,
                    std::span<double> grad_bias) {
  const std::size_t rows = input.dim(0), inner = input.dim(1);
  const std::size_t cols = weights.dim(1);
  const auto x = input.data();
  const auto w = weights.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double g = grad_output[r * cols + c];
      if (!grad_bias.empty()) grad_bias[c] += g;
      for (std::size_t k = 0; k < inner; ++k) {
        if (!grad_weights.empty()) grad_weights[k * cols + c] += g * x[r * inner + k];
        if (!grad_input.empty()) grad_input[r * inner + k] += g * w[k * cols + c];
      }
    }
  }
}

Tensor relu_forward(const Tensor& input) {
  Tensor output = input;
  for (double& v : output.data()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return output;
}

void relu_backward(const Tensor& input, std::span<const double> grad_output,
                   std::span<double> grad_input) {
  const auto x = input.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) grad_input[i] += grad_output[i];
  }
}

PoolResult max_pool2d_forward(const Tensor& input, std::size_t window,
                              std::size_t stride) {
  require_rank(input, 4, "max_pool2d input");
  if (window == 0 || stride == 0) {
    throw InputError("max_pool2d: window and stride must be >= 1");
  }
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (height < window || width < window) {
    throw DimensionError("max_pool2d: window " + std::to_string(window) +
                         " exceeds spatial axes of " +
                         shape_to_string(input.shape()));
  }
  const std::size_t out_h = (height - window) / stride + 1;
  const std::size_t out_w = (width - window) / stride + 1;

  PoolResult result{Tensor({batch, channels, out_h, out_w}), {}};
  result.argmax.resize(result.output.size());
  const auto x = input.data();
  auto y = result.output.data();
  std::size_t out_index = 0;
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t oh = 0; oh < out_h; ++oh) {
      for (std::size_t ow = 0; ow < out_w; ++ow) {
        std::size_t best = base + oh * stride * width + ow * stride;
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx =
                base + (oh * stride + i) * width + ow * stride + j;
            if (x[idx] > x[best] || std::isnan(x[idx])) best = idx;
          }
        }
        y[out_index] = x[best];
        result.argmax[out_index] = best;
        ++out_index;
      }
    }
  }
  return result;
}

void max_pool2d_backward(const PoolResult& forward,
                         std::span<const double> grad_output,
                         std::span<double> grad_input) {
  for (std::size_t i = 0; i < forward.argmax.size(); ++i) {
    grad_input[forward.argmax[i]] += grad_output[i];
  }
}

std::vector<double> softmax_cross_entropy_per_sample(
    const Tensor& logits, std::span<const std::size_t> labels) {
  check_labels(logits, labels);
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  const auto z = logits.data();
  std::vector<double> losses(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &z[r * classes];
    const double peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - peak);
    losses[r] = std::log(denom) - (row[labels[r]] - peak);
  }
  return losses;
}

CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                         std::span<const std::size_t> labels) {
  check_labels(logits, labels);
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  CrossEntropyResult result{0.0, Tensor(logits.shape())};
  const auto z = logits.data();
  auto p = result.probabilities.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &z[r * classes];
    const double peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[r * classes + c] = std::exp(row[c] - peak);
      denom += p[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[r * classes + c] /= denom;
    total += std::log(denom) - (row[labels[r]] - peak);
  }
  result.loss = total / static_cast<double>(rows);
  return result;
}

void softmax_cross_entropy_backward(const CrossEntropyResult& forward,
                                    std::span<const std::size_t> labels,
                                    double grad_loss,
                                    std::span<double> grad_logits) {
  const std::size_t rows = forward.probabilities.dim(0);
  const std::size_t classes = forward.probabilities.dim(1);
  const double scale = grad_loss / static_cast<double>(rows);
  const auto p = forward.probabilities.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < classes; ++c) {
      const double target = c == labels[r] ? 1.0 : 0.0;
      grad_logits[r * classes + c] += scale * (p[r * classes + c] - target);
    }
  }
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "argmax logits");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  std::vector<std::size_t> out(rows);
  const auto z = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (z[r * classes + c] > z[r * classes + best]) best = c;
    }
    out[r] = best;
  }
  return out;
}

}  // namespace gradprune::ops
