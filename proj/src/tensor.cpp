#include "frnet/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>

namespace frnet {

std::string to_string(const Shape4& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  std::size_t in_c, in_h, in_w;
  std::size_t out_h, out_w;
  std::size_t k, pad;

  std::size_t rows() const { return in_c * k * k; }
  std::size_t cols() const { return out_h * out_w; }
};

template <typename T>
ConvGeometry check_conv(const Tensor4<T>& input, const ConvKernel<T>& kernel, std::size_t padding) {
  const Shape4& s = input.shape();
  if (padding > 1) throw ConfigError("conv2d: padding must be 0 or 1, got " + std::to_string(padding));
  if (kernel.k == 0) throw ShapeError("conv2d: kernel size must be positive");
  if (s.c != kernel.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(s.c) + " channels, kernel expects " +
                     std::to_string(kernel.in_channels));
  }
  if (kernel.weights.size() != kernel.out_channels * kernel.in_channels * kernel.k * kernel.k ||
      kernel.bias.size() != kernel.out_channels) {
    throw ShapeError("conv2d: kernel storage inconsistent with its dimensions");
  }
  if (s.h + 2 * padding < kernel.k || s.w + 2 * padding < kernel.k) {
    throw ShapeError("conv2d: input " + to_string(s) + " smaller than kernel");
  }
  return {s.c, s.h, s.w, s.h + 2 * padding - (kernel.k - 1), s.w + 2 * padding - (kernel.k - 1), kernel.k, padding};
}

// Column matrix (in_c*k*k, out_h*out_w) for one batch item.
template <typename T>
void im2col(std::span<const T> item, const ConvGeometry& g, std::vector<T>& col) {
  col.assign(g.rows() * g.cols(), T{0});
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto in_h = static_cast<std::ptrdiff_t>(g.in_h);
  const auto in_w = static_cast<std::ptrdiff_t>(g.in_w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const T* plane = item.data() + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        T* dst = col.data() + row * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          if (iy < 0 || iy >= in_h) continue;
          const T* src = plane + iy * in_w;
          T* out = dst + oy * g.out_w;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.out_w), in_w - shift);
          for (std::ptrdiff_t ox = lo; ox < hi; ++ox) out[ox] = src[ox + shift];
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the input plane.
template <typename T>
void col2im(const std::vector<T>& col, const ConvGeometry& g, std::span<T> item) {
  std::fill(item.begin(), item.end(), T{0});
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto in_h = static_cast<std::ptrdiff_t>(g.in_h);
  const auto in_w = static_cast<std::ptrdiff_t>(g.in_w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    T* plane = item.data() + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        const T* src = col.data() + row * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          if (iy < 0 || iy >= in_h) continue;
          T* dst = plane + iy * in_w;
          const T* in = src + oy * g.out_w;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.out_w), in_w - shift);
          for (std::ptrdiff_t ox = lo; ox < hi; ++ox) dst[ox + shift] += in[ox];
        }
      }
    }
  }
}

void require_same(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvKernel<T>& kernel, std::size_t padding) {
  const ConvGeometry g = check_conv(input, kernel, padding);
  require_finite(input, "conv2d_forward input");
  const Shape4& s = input.shape();
  Tensor4<T> output({s.n, kernel.out_channels, g.out_h, g.out_w});

  const ConstMatrixMap<T> w(kernel.weights.data(), kernel.out_channels, g.rows());
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(kernel.bias.data(), kernel.out_channels);
  std::vector<T> col;
  for (std::size_t n = 0; n < s.n; ++n) {
    im2col(input.item(n), g, col);
    const ConstMatrixMap<T> cm(col.data(), g.rows(), g.cols());
    MatrixMap<T> out(output.item(n).data(), kernel.out_channels, g.cols());
    out.noalias() = w * cm;
    out.colwise() += b;
  }
  return output;
}

template <typename T>
void conv2d_backward_accumulate(const Tensor4<T>& input, const ConvKernel<T>& kernel, const Tensor4<T>& grad_output,
                                std::size_t padding, Tensor4<T>* grad_input, ConvKernel<T>& grad_kernel) {
  const ConvGeometry g = check_conv(input, kernel, padding);
  const Shape4& s = input.shape();
  require_same(grad_output.shape(), Shape4{s.n, kernel.out_channels, g.out_h, g.out_w}, "conv2d_backward grad_output");
  if (grad_kernel.weights.size() != kernel.weights.size() || grad_kernel.bias.size() != kernel.bias.size()) {
    throw ShapeError("conv2d_backward: gradient kernel does not mirror the kernel");
  }
  require_finite(grad_output, "conv2d_backward grad_output");

  const ConstMatrixMap<T> w(kernel.weights.data(), kernel.out_channels, g.rows());
  MatrixMap<T> gw(grad_kernel.weights.data(), kernel.out_channels, g.rows());
  if (grad_input != nullptr && !(grad_input->shape() == s)) *grad_input = Tensor4<T>(s);

  std::vector<T> col;
  std::vector<T> grad_col(g.rows() * g.cols());
  for (std::size_t n = 0; n < s.n; ++n) {
    const ConstMatrixMap<T> go(grad_output.item(n).data(), kernel.out_channels, g.cols());
    im2col(input.item(n), g, col);
    const ConstMatrixMap<T> cm(col.data(), g.rows(), g.cols());
    gw.noalias() += go * cm.transpose();
    // Plain loop: Eigen's vectorized redux peels by address alignment, which
    // would make the summation order (and the last bits) vary between runs.
    for (std::size_t o = 0; o < kernel.out_channels; ++o) {
      const T* row = grad_output.item(n).data() + o * g.cols();
      T acc{0};
      for (std::size_t j = 0; j < g.cols(); ++j) acc += row[j];
      grad_kernel.bias[o] += acc;
    }
    if (grad_input != nullptr) {
      MatrixMap<T> gc(grad_col.data(), g.rows(), g.cols());
      gc.noalias() = w.transpose() * go;
      col2im(grad_col, g, grad_input->item(n));
    }
  }
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvKernel<T>& kernel, const Tensor4<T>& grad_output,
                             std::size_t padding) {
  ConvGrads<T> grads{Tensor4<T>(input.shape()), ConvKernel<T>(kernel.out_channels, kernel.in_channels, kernel.k)};
  conv2d_backward_accumulate(input, kernel, grad_output, padding, &grads.grad_input, grads.grad_kernel);
  return grads;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& input) {
  require_finite(input, "relu_forward input");
  Tensor4<T> out(input.shape());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : T{0};
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& grad_output) {
  require_same(input.shape(), grad_output.shape(), "relu_backward");
  require_finite(input, "relu_backward input");
  Tensor4<T> out(input.shape());
  auto x = input.data();
  auto g = grad_output.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > T{0} ? g[i] : T{0};
  return out;
}

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& input) {
  const Shape4& s = input.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("maxpool2: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) + " is not even");
  }
  require_finite(input, "maxpool2_forward input");
  const Shape4 os{s.n, s.c, s.h / 2, s.w / 2};
  PoolResult<T> result{Tensor4<T>(os), PoolIndex{s, std::vector<std::uint32_t>(os.size())}};
  std::size_t k = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto in = input.plane(n, c);
      auto out = result.output.plane(n, c);
      std::size_t o = 0;
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t x = 0; x < os.w; ++x, ++o, ++k) {
          std::size_t best = (2 * y) * s.w + 2 * x;
          const std::size_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
          for (const std::size_t idx : cand) {
            if (in[idx] > in[best]) best = idx;
          }
          out[o] = in[best];
          result.index.argmax[k] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return result;
}

template <typename T>
Tensor4<T> maxpool2_backward(const PoolIndex& index, const Tensor4<T>& grad_output) {
  const Shape4& s = index.input_shape;
  const Shape4 os{s.n, s.c, s.h / 2, s.w / 2};
  require_same(grad_output.shape(), os, "maxpool2_backward");
  if (index.argmax.size() != os.size()) throw ShapeError("maxpool2_backward: argmax map size mismatch");
  Tensor4<T> grad(s);
  std::size_t k = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto go = grad_output.plane(n, c);
      auto gi = grad.plane(n, c);
      for (std::size_t o = 0; o < os.plane(); ++o, ++k) gi[index.argmax[k]] += go[o];
    }
  }
  return grad;
}

template <typename T>
Tensor4<T> upsample2_forward(const Tensor4<T>& input) {
  require_finite(input, "upsample2_forward input");
  const Shape4& s = input.shape();
  Tensor4<T> out({s.n, s.c, 2 * s.h, 2 * s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto in = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t y = 0; y < 2 * s.h; ++y) {
        for (std::size_t x = 0; x < 2 * s.w; ++x) dst[y * 2 * s.w + x] = in[(y / 2) * s.w + x / 2];
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> upsample2_backward(const Tensor4<T>& grad_output) {
  const Shape4& s = grad_output.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("upsample2_backward: spatial size is not even");
  Tensor4<T> grad({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto go = grad_output.plane(n, c);
      auto gi = grad.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) gi[(y / 2) * (s.w / 2) + x / 2] += go[y * s.w + x];
      }
    }
  }
  return grad;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  const Shape4& sa = a.shape();
  const Shape4& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + to_string(sa) + " vs " + to_string(sb));
  }
  Tensor4<T> out({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.n; ++n) {
    auto dst = out.item(n);
    std::copy(a.item(n).begin(), a.item(n).end(), dst.begin());
    std::copy(b.item(n).begin(), b.item(n).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.item(n).size()));
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& t, std::size_t first_channels) {
  const Shape4& s = t.shape();
  if (first_channels > s.c) throw ShapeError("split_channels: more channels requested than present");
  Tensor4<T> a({s.n, first_channels, s.h, s.w});
  Tensor4<T> b({s.n, s.c - first_channels, s.h, s.w});
  const std::size_t cut = first_channels * s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    auto src = t.item(n);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(cut), a.item(n).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(cut), src.end(), b.item(n).begin());
  }
  return {std::move(a), std::move(b)};
}

std::vector<double> finite_diff_grad(const ScalarFunction& loss_fn, std::vector<double> params, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("finite_diff_grad: step must be positive");
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss_fn(params);
    params[i] = saved - step;
    const double down = loss_fn(params);
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite loss at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

#define FRNET_INSTANTIATE_TENSOR(T)                                                                                  \
  template Tensor4<T> conv2d_forward(const Tensor4<T>&, const ConvKernel<T>&, std::size_t);                         \
  template ConvGrads<T> conv2d_backward(const Tensor4<T>&, const ConvKernel<T>&, const Tensor4<T>&, std::size_t);   \
  template void conv2d_backward_accumulate(const Tensor4<T>&, const ConvKernel<T>&, const Tensor4<T>&, std::size_t, \
                                           Tensor4<T>*, ConvKernel<T>&);                                            \
  template Tensor4<T> relu_forward(const Tensor4<T>&);                                                              \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                                          \
  template PoolResult<T> maxpool2_forward(const Tensor4<T>&);                                                       \
  template Tensor4<T> maxpool2_backward(const PoolIndex&, const Tensor4<T>&);                                       \
  template Tensor4<T> upsample2_forward(const Tensor4<T>&);                                                         \
  template Tensor4<T> upsample2_backward(const Tensor4<T>&);                                                        \
  template Tensor4<T> concat_channels(const Tensor4<T>&, const Tensor4<T>&);                                        \
  template std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>&, std::size_t);

FRNET_INSTANTIATE_TENSOR(float)
FRNET_INSTANTIATE_TENSOR(double)

#undef FRNET_INSTANTIATE_TENSOR

}  // namespace frnet
