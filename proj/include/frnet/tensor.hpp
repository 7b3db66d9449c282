#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frnet/error.hpp"

namespace frnet {

struct Shape4 {
  std::size_t n = 0;  // batch
  std::size_t c = 0;  // channels
  std::size_t h = 0;  // height
  std::size_t w = 0;  // width

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

/// Dense (batch, channel, height, width) array, row-major with width fastest.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  /// All channels of batch item `n`.
  std::span<T> item(std::size_t n) {
    const std::size_t len = shape_.c * shape_.plane();
    return {data_.data() + n * len, len};
  }
  std::span<const T> item(std::size_t n) const {
    const std::size_t len = shape_.c * shape_.plane();
    return {data_.data() + n * len, len};
  }

  std::span<T> plane(std::size_t n, std::size_t c) {
    return {data_.data() + (n * shape_.c + c) * shape_.plane(), shape_.plane()};
  }
  std::span<const T> plane(std::size_t n, std::size_t c) const {
    return {data_.data() + (n * shape_.c + c) * shape_.plane(), shape_.plane()};
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  Shape4 shape_;
  std::vector<T> data_;
};

/// Weights (out, in, k, k) and per-output-channel bias of a 2-D convolution.
template <typename T>
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t k = 3;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvKernel() = default;
  ConvKernel(std::size_t out, std::size_t in, std::size_t ksize = 3)
      : out_channels(out), in_channels(in), k(ksize), weights(out * in * ksize * ksize, T{0}), bias(out, T{0}) {}

  T& weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights[((o * in_channels + i) * k + ky) * k + kx];
  }
  const T& weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * k + ky) * k + kx];
  }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

template <typename T>
struct ConvGrads {
  Tensor4<T> grad_input;
  ConvKernel<T> grad_kernel;
};

/// Argmax bookkeeping produced by a 2x2 max pool.
struct PoolIndex {
  Shape4 input_shape;
  std::vector<std::uint32_t> argmax;  // in-plane flat index into the input, one per output element
};

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  PoolIndex index;
};

// Element checks -------------------------------------------------------------

template <typename T>
bool all_finite(std::span<const T> values) {
  for (const T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void require_finite(std::span<const T> values, const char* what) {
  if (!all_finite(values)) throw NumericError(std::string(what) + ": non-finite value");
}

template <typename T>
void require_finite(const Tensor4<T>& t, const char* what) {
  require_finite(t.data(), what);
}

// Kernels --------------------------------------------------------------------
//
// Stride is fixed at 1. `padding` is the zero padding applied on every border
// and must be 0 or 1.

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvKernel<T>& kernel, std::size_t padding);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvKernel<T>& kernel, const Tensor4<T>& grad_output,
                             std::size_t padding);

/// Accumulating form used by the network: adds the kernel gradient into
/// `grad_kernel` and, when `grad_input` is non-null, overwrites it with the
/// input gradient.
template <typename T>
void conv2d_backward_accumulate(const Tensor4<T>& input, const ConvKernel<T>& kernel, const Tensor4<T>& grad_output,
                                std::size_t padding, Tensor4<T>* grad_input, ConvKernel<T>& grad_kernel);

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& input);

/// Multiplies grad_output by the 0/1 mask of input > 0 (derivative at 0 is 0).
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& grad_output);

/// 2x2 window, stride 2. Ties go to the first element in row-major order.
template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& input);

template <typename T>
Tensor4<T> maxpool2_backward(const PoolIndex& index, const Tensor4<T>& grad_output);

/// Nearest-neighbour x2: every pixel becomes a 2x2 block.
template <typename T>
Tensor4<T> upsample2_forward(const Tensor4<T>& input);

/// Adjoint of upsample2_forward: sums each 2x2 block.
template <typename T>
Tensor4<T> upsample2_backward(const Tensor4<T>& grad_output);

/// Concatenates along the channel axis, `a` first.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

/// Inverse of concat_channels: the first `first_channels` go to the first result.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& t, std::size_t first_channels);

// Gradient-check oracle ------------------------------------------------------

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate.
std::vector<double> finite_diff_grad(const ScalarFunction& loss_fn, std::vector<double> params, double step);

}  // namespace frnet
