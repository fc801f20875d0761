#pragma once

// Forward and backward kernels for the CNN layer vocabulary. Every function
// here is pure: outputs depend only on the arguments (and the seed, for
// dropout).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mrs/errors.hpp"
#include "mrs/random.hpp"
#include "mrs/tensor.hpp"

namespace mrs::ops {

enum class Mode { Train, Infer };

namespace detail {

inline void require_rank(const Shape& s, Index rank, const char* op, const char* what) {
  if (static_cast<Index>(s.size()) != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + to_string(s));
  }
}

inline void require_axis(const char* op, const std::string& lhs, Index a, const std::string& rhs, Index b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": " + lhs + " (" + std::to_string(a) + ") != " + rhs + " (" +
                         std::to_string(b) + ")");
  }
}

// Unfolds one C x H x W image into a (C*9) x (H*W) matrix for a 3x3,
// stride-1, zero same-padded convolution.
template <typename Scalar, typename Out>
void im2col3x3(const Scalar* image, Index channels, Index height, Index width, Out& col) {
  col.setZero();
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = image + c * height * width;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        Scalar* row = col.row((c * 3 + ky) * 3 + kx).data();
        const Index x_lo = std::max<Index>(0, 1 - kx);
        const Index x_hi = std::min<Index>(width, width + 1 - kx);
        for (Index y = 0; y < height; ++y) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          const Scalar* src = plane + sy * width + (kx - 1);
          Scalar* dst = row + y * width;
          for (Index x = x_lo; x < x_hi; ++x) dst[x] = src[x];
        }
      }
    }
  }
}

template <typename Scalar, typename In>
void col2im3x3(const In& col, Index channels, Index height, Index width, Scalar* image) {
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = image + c * height * width;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        const Scalar* row = col.row((c * 3 + ky) * 3 + kx).data();
        const Index x_lo = std::max<Index>(0, 1 - kx);
        const Index x_hi = std::min<Index>(width, width + 1 - kx);
        for (Index y = 0; y < height; ++y) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          Scalar* dst = plane + sy * width + (kx - 1);
          const Scalar* src = row + y * width;
          for (Index x = x_lo; x < x_hi; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conv2D: 3x3 kernels, stride 1, zero same-padding.

template <typename Scalar>
struct Conv2DGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernels;
  Tensor<Scalar> bias;
};

template <typename Scalar>
void check_conv2d(const Shape& input, const Shape& kernels, const Shape& bias) {
  detail::require_rank(input, 4, "conv2d", "input");
  detail::require_rank(kernels, 4, "conv2d", "kernels");
  detail::require_rank(bias, 1, "conv2d", "bias");
  detail::require_axis("conv2d", "input axis 1 (channels)", input[1], "kernels axis 1 (channels)", kernels[1]);
  detail::require_axis("conv2d", "kernels axis 2 (height)", kernels[2], "3", 3);
  detail::require_axis("conv2d", "kernels axis 3 (width)", kernels[3], "3", 3);
  detail::require_axis("conv2d", "bias axis 0", bias[0], "kernels axis 0 (filters)", kernels[0]);
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels, const Tensor<Scalar>& bias) {
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  check_conv2d<Scalar>(input.shape(), kernels.shape(), bias.shape());
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index k = kernels.dim(0);
  Tensor<Scalar> output({n, k, h, w});
  const Eigen::Map<const RowMatrix> weights(kernels.data(), k, c * 9);
  const auto b = bias.values().matrix();
  RowMatrix col(c * 9, h * w);
  for (Index i = 0; i < n; ++i) {
    detail::im2col3x3(input.data() + i * c * h * w, c, h, w, col);
    Eigen::Map<RowMatrix> out(output.data() + i * k * h * w, k, h * w);
    out.noalias() = weights * col;
    out.colwise() += b;
  }
  return output;
}

template <typename Scalar>
Conv2DGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                                    const Tensor<Scalar>& upstream) {
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index k = kernels.dim(0);
  if (upstream.shape() != Shape{n, k, h, w}) {
    throw DimensionError("conv2d_backward: upstream " + to_string(upstream.shape()) + " expected " +
                         to_string(Shape{n, k, h, w}));
  }
  Conv2DGrads<Scalar> g{Tensor<Scalar>(input.shape()), Tensor<Scalar>(kernels.shape()), Tensor<Scalar>({k})};
  const Eigen::Map<const RowMatrix> weights(kernels.data(), k, c * 9);
  Eigen::Map<RowMatrix> d_weights(g.kernels.data(), k, c * 9);
  RowMatrix col(c * 9, h * w);
  RowMatrix d_col(c * 9, h * w);
  for (Index i = 0; i < n; ++i) {
    const Eigen::Map<const RowMatrix> up(upstream.data() + i * k * h * w, k, h * w);
    detail::im2col3x3(input.data() + i * c * h * w, c, h, w, col);
    d_weights.noalias() += up * col.transpose();
    g.bias.values().matrix() += up.rowwise().sum();
    d_col.noalias() = weights.transpose() * up;
    detail::col2im3x3(d_col, c, h, w, g.input.data() + i * c * h * w);
  }
  return g;
}

// ---------------------------------------------------------------------------
// MaxPool2D: 2x2 window, stride 2. Odd extents drop the trailing row/column.

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input index of each output element's max
};

template <typename Scalar>
PoolResult<Scalar> maxpool2d(const Tensor<Scalar>& input) {
  detail::require_rank(input.shape(), 4, "maxpool2d", "input");
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) {
    throw DimensionError("maxpool2d: spatial extent " + std::to_string(h) + "x" + std::to_string(w) +
                         " is smaller than the 2x2 window");
  }
  PoolResult<Scalar> r{Tensor<Scalar>({n, c, oh, ow}), std::vector<Index>(static_cast<std::size_t>(n * c * oh * ow))};
  const Scalar* in = input.data();
  Scalar* out = r.output.data();
  Index o = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const Index base = plane * h * w;
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x, ++o) {
        Index best = base + (2 * y) * w + 2 * x;
        for (Index dy = 0; dy < 2; ++dy) {
          for (Index dx = 0; dx < 2; ++dx) {
            const Index idx = base + (2 * y + dy) * w + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;  // strict: first max in row-major scan wins
          }
        }
        out[o] = in[best];
        r.argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const Shape& input_shape, const std::vector<Index>& argmax,
                                  const Tensor<Scalar>& upstream) {
  if (static_cast<Index>(argmax.size()) != upstream.size()) {
    throw DimensionError("maxpool2d_backward: upstream size " + std::to_string(upstream.size()) +
                         " does not match pooled size " + std::to_string(argmax.size()));
  }
  Tensor<Scalar> d_input(input_shape);
  for (Index i = 0; i < upstream.size(); ++i) d_input[argmax[static_cast<std::size_t>(i)]] += upstream[i];
  return d_input;
}

// ---------------------------------------------------------------------------
// BatchNorm2D: per-channel normalization over (N, H, W).

template <typename Scalar>
struct BatchNormStats {
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
};

template <typename Scalar>
struct BatchNormResult {
  Tensor<Scalar> output;
  Tensor<Scalar> normalized;  // x-hat, kept for backward
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std;
};

template <typename Scalar>
struct BatchNormGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

// In Train mode `stats` is updated: running = momentum*running + (1-momentum)*batch.
template <typename Scalar>
BatchNormResult<Scalar> batchnorm2d(const Tensor<Scalar>& input, const Tensor<Scalar>& gamma,
                                    const Tensor<Scalar>& beta, Mode mode, BatchNormStats<Scalar>& stats,
                                    double epsilon = 1e-5, double momentum = 0.9) {
  detail::require_rank(input.shape(), 4, "batchnorm2d", "input");
  const Index n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  detail::require_axis("batchnorm2d", "gamma axis 0", gamma.size(), "input axis 1 (channels)", c);
  detail::require_axis("batchnorm2d", "beta axis 0", beta.size(), "input axis 1 (channels)", c);
  if (mode == Mode::Train && n < 2) {
    throw DegenerateBatchError("batchnorm2d: train mode needs a batch of at least 2, got " + std::to_string(n));
  }
  BatchNormResult<Scalar> r{Tensor<Scalar>(input.shape()), Tensor<Scalar>(input.shape()),
                            Eigen::Array<Scalar, Eigen::Dynamic, 1>(c)};
  const Scalar m = static_cast<Scalar>(n * hw);
  for (Index ch = 0; ch < c; ++ch) {
    Scalar mean, var;
    if (mode == Mode::Train) {
      Scalar sum = 0;
      for (Index i = 0; i < n; ++i) sum += input.values().segment((i * c + ch) * hw, hw).sum();
      mean = sum / m;
      Scalar sq = 0;
      for (Index i = 0; i < n; ++i) sq += (input.values().segment((i * c + ch) * hw, hw) - mean).square().sum();
      var = sq / m;
      const auto mom = static_cast<Scalar>(momentum);
      stats.running_mean[ch] = mom * stats.running_mean[ch] + (1 - mom) * mean;
      stats.running_var[ch] = mom * stats.running_var[ch] + (1 - mom) * var;
    } else {
      mean = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const Scalar inv_std = Scalar(1) / std::sqrt(var + static_cast<Scalar>(epsilon));
    r.inv_std[ch] = inv_std;
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + ch) * hw;
      r.normalized.values().segment(off, hw) = (input.values().segment(off, hw) - mean) * inv_std;
      r.output.values().segment(off, hw) = r.normalized.values().segment(off, hw) * gamma[ch] + beta[ch];
    }
  }
  return r;
}

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm2d_backward(const BatchNormResult<Scalar>& forward, const Tensor<Scalar>& gamma,
                                            const Tensor<Scalar>& upstream, Mode mode) {
  const Shape& s = forward.normalized.shape();
  if (upstream.shape() != s) {
    throw DimensionError("batchnorm2d_backward: upstream " + to_string(upstream.shape()) + " expected " +
                         to_string(s));
  }
  const Index n = s[0], c = s[1], hw = s[2] * s[3];
  BatchNormGrads<Scalar> g{Tensor<Scalar>(s), Tensor<Scalar>({c}), Tensor<Scalar>({c})};
  const Scalar m = static_cast<Scalar>(n * hw);
  for (Index ch = 0; ch < c; ++ch) {
    Scalar sum_dy = 0, sum_dy_xhat = 0;
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + ch) * hw;
      const auto dy = upstream.values().segment(off, hw);
      sum_dy += dy.sum();
      sum_dy_xhat += (dy * forward.normalized.values().segment(off, hw)).sum();
    }
    g.beta[ch] = sum_dy;
    g.gamma[ch] = sum_dy_xhat;
    const Scalar scale = gamma[ch] * forward.inv_std[ch];
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + ch) * hw;
      const auto dy = upstream.values().segment(off, hw);
      if (mode == Mode::Train) {
        const auto xhat = forward.normalized.values().segment(off, hw);
        g.input.values().segment(off, hw) = scale / m * (m * dy - sum_dy - xhat * sum_dy_xhat);
      } else {
        g.input.values().segment(off, hw) = scale * dy;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dropout (inverted). `mask` holds 0 or 1/(1-rate) per element.

template <typename Scalar>
struct DropoutResult {
  Tensor<Scalar> output;
  Tensor<Scalar> mask;
};

template <typename Scalar>
DropoutResult<Scalar> dropout(const Tensor<Scalar>& input, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::Infer || rate == 0.0) {
    return {input, Tensor<Scalar>::constant(input.shape(), Scalar(1))};
  }
  DropoutResult<Scalar> r{Tensor<Scalar>(input.shape()), Tensor<Scalar>(input.shape())};
  Rng rng(seed);
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Index i = 0; i < input.size(); ++i) r.mask[i] = rng.uniform() < rate ? Scalar(0) : keep;
  r.output.values() = input.values() * r.mask.values();
  return r;
}

template <typename Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar>& mask, const Tensor<Scalar>& upstream) {
  if (mask.shape() != upstream.shape()) {
    throw DimensionError("dropout_backward: upstream " + to_string(upstream.shape()) + " expected " +
                         to_string(mask.shape()));
  }
  return Tensor<Scalar>(upstream.shape(), upstream.values() * mask.values());
}

// ---------------------------------------------------------------------------
// Dense: [N,F] x [F,G] + [G].

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  detail::require_rank(input.shape(), 2, "dense", "input");
  detail::require_rank(weights.shape(), 2, "dense", "weights");
  detail::require_axis("dense", "input axis 1 (features)", input.dim(1), "weights axis 0", weights.dim(0));
  detail::require_axis("dense", "bias axis 0", bias.size(), "weights axis 1", weights.dim(1));
  Tensor<Scalar> out({input.dim(0), weights.dim(1)});
  out.matrix().noalias() = input.matrix() * weights.matrix();
  out.matrix().rowwise() += bias.values().matrix().transpose();
  return out;
}

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                                  const Tensor<Scalar>& upstream) {
  detail::require_axis("dense_backward", "upstream axis 0", upstream.dim(0), "input axis 0", input.dim(0));
  detail::require_axis("dense_backward", "upstream axis 1", upstream.dim(1), "weights axis 1", weights.dim(1));
  DenseGrads<Scalar> g{Tensor<Scalar>(input.shape()), Tensor<Scalar>(weights.shape()),
                       Tensor<Scalar>({weights.dim(1)})};
  g.input.matrix().noalias() = upstream.matrix() * weights.matrix().transpose();
  g.weights.matrix().noalias() = input.matrix().transpose() * upstream.matrix();
  g.bias.values() = upstream.matrix().colwise().sum().transpose().array();
  return g;
}

// ---------------------------------------------------------------------------
// Activations.

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.values().max(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& upstream) {
  return Tensor<Scalar>(upstream.shape(), (input.values() > Scalar(0)).select(upstream.values(), Scalar(0)));
}

// Softmax over the last axis, shift-stabilized by the row max.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x) {
  if (x.rank() < 1) throw DimensionError("softmax: input must have rank >= 1");
  const Index cols = x.shape().back();
  const Index rows = x.size() / cols;
  Tensor<Scalar> y(x.shape());
  for (Index r = 0; r < rows; ++r) {
    const auto in = x.values().segment(r * cols, cols);
    auto out = y.values().segment(r * cols, cols);
    out = (in - in.maxCoeff()).exp();
    out /= out.sum();
  }
  return y;
}

// dx = y * (g - sum(g * y)) per row.
template <typename Scalar>
Tensor<Scalar> softmax_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& upstream) {
  const Index cols = output.shape().back();
  const Index rows = output.size() / cols;
  Tensor<Scalar> dx(output.shape());
  for (Index r = 0; r < rows; ++r) {
    const auto y = output.values().segment(r * cols, cols);
    const auto g = upstream.values().segment(r * cols, cols);
    dx.values().segment(r * cols, cols) = y * (g - (g * y).sum());
  }
  return dx;
}

}  // namespace mrs::ops
