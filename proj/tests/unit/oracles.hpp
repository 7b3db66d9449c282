#pragma once

// Independent loop implementations used as reference values in the tests.
// They share nothing with the library beyond the container types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "frnet/net.hpp"
#include "frnet/tensor.hpp"

namespace oracle {

using frnet::ConvKernel;
using frnet::Shape4;
using frnet::Tensor4;

template <typename T>
Tensor4<T> random_tensor(Shape4 shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor4<T> t(shape);
  for (T& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
ConvKernel<T> random_kernel(std::size_t out, std::size_t in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ConvKernel<T> k(out, in, 3);
  for (T& v : k.weights) v = static_cast<T>(u(rng));
  for (T& v : k.bias) v = static_cast<T>(u(rng));
  return k;
}

template <typename T>
Tensor4<T> conv(const Tensor4<T>& x, const ConvKernel<T>& k, std::size_t pad) {
  const Shape4 s = x.shape();
  const std::size_t ho = s.h + 2 * pad - k.k + 1;
  const std::size_t wo = s.w + 2 * pad - k.k + 1;
  Tensor4<T> y({s.n, k.out_channels, ho, wo});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < k.out_channels; ++o) {
      for (std::size_t r = 0; r < ho; ++r) {
        for (std::size_t c = 0; c < wo; ++c) {
          double acc = static_cast<double>(k.bias[o]);
          for (std::size_t i = 0; i < k.in_channels; ++i) {
            for (std::size_t ky = 0; ky < k.k; ++ky) {
              for (std::size_t kx = 0; kx < k.k; ++kx) {
                const long rr = static_cast<long>(r + ky) - static_cast<long>(pad);
                const long cc = static_cast<long>(c + kx) - static_cast<long>(pad);
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(s.h) || cc >= static_cast<long>(s.w)) continue;
                acc += static_cast<double>(k.weight(o, i, ky, kx)) *
                       static_cast<double>(x(n, i, static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)));
              }
            }
          }
          y(n, o, r, c) = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> relu(Tensor4<T> x) {
  for (T& v : x.data()) v = v > T{0} ? v : T{0};
  return x;
}

template <typename T>
Tensor4<T> pool(const Tensor4<T>& x) {
  const Shape4 s = x.shape();
  Tensor4<T> y({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < s.h / 2; ++r)
        for (std::size_t q = 0; q < s.w / 2; ++q)
          y(n, c, r, q) = std::max({x(n, c, 2 * r, 2 * q), x(n, c, 2 * r, 2 * q + 1), x(n, c, 2 * r + 1, 2 * q),
                                    x(n, c, 2 * r + 1, 2 * q + 1)});
  return y;
}

template <typename T>
Tensor4<T> upsample(const Tensor4<T>& x) {
  const Shape4 s = x.shape();
  Tensor4<T> y({s.n, s.c, 2 * s.h, 2 * s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < 2 * s.h; ++r)
        for (std::size_t q = 0; q < 2 * s.w; ++q) y(n, c, r, q) = x(n, c, r / 2, q / 2);
  return y;
}

template <typename T>
Tensor4<T> concat(const Tensor4<T>& a, const Tensor4<T>& b) {
  const Shape4 sa = a.shape();
  const Shape4 sb = b.shape();
  Tensor4<T> y({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.n; ++n)
    for (std::size_t c = 0; c < sa.c + sb.c; ++c)
      for (std::size_t r = 0; r < sa.h; ++r)
        for (std::size_t q = 0; q < sa.w; ++q) y(n, c, r, q) = c < sa.c ? a(n, c, r, q) : b(n, c - sa.c, r, q);
  return y;
}

/// U-Net forward written directly from the layer manifest naming.
template <typename T>
Tensor4<T> unet(const frnet::UNetParams<T>& p, const Tensor4<T>& batch) {
  const std::size_t d = p.config.depth;
  auto layer = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < p.manifest.size(); ++i)
      if (p.manifest[i].name == name) return i;
    throw std::runtime_error("no layer " + name);
  };
  auto apply = [&](const std::string& name, const Tensor4<T>& x) {
    const std::size_t i = layer(name);
    Tensor4<T> z = conv(x, p.layers[i], 1);
    return p.manifest[i].relu ? relu(z) : z;
  };
  Tensor4<T> x = batch;
  std::vector<Tensor4<T>> skips;
  for (std::size_t s = 0; s < d; ++s) {
    const std::string st = "enc" + std::to_string(s);
    x = apply(st + ".conv1", apply(st + ".conv0", x));
    skips.push_back(x);
    x = pool(x);
  }
  x = apply("bottleneck.conv1", apply("bottleneck.conv0", x));
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t s = d - 1 - k;
    const std::string st = "dec" + std::to_string(s);
    const Tensor4<T> up = apply(st + ".up", upsample(x));
    x = apply(st + ".conv1", apply(st + ".conv0", concat(skips[s], up)));
  }
  return apply("out", x);
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename T>
double max_abs_diff(std::span<const T> a, std::span<const T> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

/// max|a - b| / max(max|a|, max|b|).
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  return scale > 0.0 ? max_abs_diff<double>(a, b) / scale : 0.0;
}

}  // namespace oracle
