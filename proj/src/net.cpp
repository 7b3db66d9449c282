#include "frnet/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace frnet {

void UNetConfig::validate() const {
  if (depth < 1) throw ConfigError("net depth must be >= 1");
  if (depth > 8) throw ConfigError("net depth must be <= 8");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  const std::size_t factor = std::size_t{1} << depth;
  if (input_size == 0 || input_size % factor != 0) {
    throw ConfigError("input size " + std::to_string(input_size) + " is not divisible by 2^depth = " +
                      std::to_string(factor));
  }
}

std::vector<LayerSpec> layer_manifest(const UNetConfig& config) {
  config.validate();
  const std::size_t d = config.depth;
  auto width = [&](std::size_t s) { return config.base_channels << s; };
  std::vector<LayerSpec> layers;
  for (std::size_t s = 0; s < d; ++s) {
    const std::size_t in = s == 0 ? 1 : width(s - 1);
    const std::string stage = "enc" + std::to_string(s);
    layers.push_back({stage + ".conv0", LayerRole::encoder, s, in, width(s), true});
    layers.push_back({stage + ".conv1", LayerRole::encoder, s, width(s), width(s), true});
  }
  layers.push_back({"bottleneck.conv0", LayerRole::bottleneck, d, width(d - 1), width(d), true});
  layers.push_back({"bottleneck.conv1", LayerRole::bottleneck, d, width(d), width(d), true});
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t s = d - 1 - k;
    const std::string stage = "dec" + std::to_string(s);
    layers.push_back({stage + ".up", LayerRole::upsample_conv, s, width(s + 1), width(s), true});
    layers.push_back({stage + ".conv0", LayerRole::decoder, s, 2 * width(s), width(s), true});
    layers.push_back({stage + ".conv1", LayerRole::decoder, s, width(s), width(s), true});
  }
  layers.push_back({"out", LayerRole::output, 0, width(0), 1, false});
  return layers;
}

std::size_t parameter_count(const UNetConfig& config) {
  std::size_t count = 0;
  for (const LayerSpec& l : layer_manifest(config)) count += 9 * l.in_channels * l.out_channels + l.out_channels;
  return count;
}

template <typename T>
std::size_t UNetParams<T>::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers) count += l.parameter_count();
  return count;
}

template <typename T>
std::vector<std::span<T>> UNetParams<T>::tensors() {
  std::vector<std::span<T>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

template <typename T>
std::vector<std::span<const T>> UNetParams<T>::tensors() const {
  std::vector<std::span<const T>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

template <typename T>
UNetParams<T> UNetParams<T>::zeros_like() const {
  UNetParams<T> z{config, manifest, {}};
  z.layers.reserve(layers.size());
  for (const auto& l : layers) z.layers.emplace_back(l.out_channels, l.in_channels, l.k);
  return z;
}

template <typename T>
std::vector<T> UNetParams<T>::flatten() const {
  std::vector<T> flat;
  flat.reserve(parameter_count());
  for (const auto t : tensors()) flat.insert(flat.end(), t.begin(), t.end());
  return flat;
}

template <typename T>
void UNetParams<T>::assign_flat(std::span<const T> values) {
  if (values.size() != parameter_count()) throw ShapeError("assign_flat: parameter count mismatch");
  std::size_t offset = 0;
  for (auto t : tensors()) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
              values.begin() + static_cast<std::ptrdiff_t>(offset + t.size()), t.begin());
    offset += t.size();
  }
}

template <typename T>
UNetParams<T> build(const UNetConfig& config) {
  UNetParams<T> params{config, layer_manifest(config), {}};
  std::mt19937_64 rng(config.seed);
  for (const LayerSpec& spec : params.manifest) {
    ConvKernel<T> kernel(spec.out_channels, spec.in_channels, 3);
    const double fan_in = 9.0 * static_cast<double>(spec.in_channels);
    const double fan_out = 9.0 * static_cast<double>(spec.out_channels);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& w : kernel.weights) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      w = static_cast<T>((2.0 * u - 1.0) * limit);
    }
    params.layers.push_back(std::move(kernel));
  }
  return params;
}

template <typename To, typename From>
UNetParams<To> convert_params(const UNetParams<From>& params) {
  UNetParams<To> out{params.config, params.manifest, {}};
  for (const auto& l : params.layers) {
    ConvKernel<To> k(l.out_channels, l.in_channels, l.k);
    std::transform(l.weights.begin(), l.weights.end(), k.weights.begin(), [](From v) { return static_cast<To>(v); });
    std::transform(l.bias.begin(), l.bias.end(), k.bias.begin(), [](From v) { return static_cast<To>(v); });
    out.layers.push_back(std::move(k));
  }
  return out;
}

namespace {

constexpr std::size_t kPadding = 1;

struct LayerIndex {
  std::size_t depth;

  std::size_t encoder(std::size_t s, std::size_t r) const { return 2 * s + r; }
  std::size_t bottleneck(std::size_t r) const { return 2 * depth + r; }
  std::size_t decoder(std::size_t s, std::size_t r) const { return 2 * depth + 2 + 3 * (depth - 1 - s) + r; }
  std::size_t output() const { return 5 * depth + 2; }
};

template <typename T>
void check_params(const UNetParams<T>& params) {
  params.config.validate();
  if (params.layers.size() != params.manifest.size() || params.manifest.size() != 5 * params.config.depth + 3) {
    throw ShapeError("net parameters do not match the layer manifest");
  }
}

template <typename T>
void check_batch(const UNetParams<T>& params, const Tensor4<T>& batch) {
  const Shape4& s = batch.shape();
  const std::size_t size = params.config.input_size;
  if (s.c != 1 || s.h != size || s.w != size || s.n == 0) {
    throw ShapeError("net forward: expected Nx1x" + std::to_string(size) + "x" + std::to_string(size) + " batch, got " +
                     to_string(s));
  }
}

// Runs the network; when `cache` is non-null every layer input and
// pre-activation is recorded.
template <typename T>
Tensor4<T> run_forward(const UNetParams<T>& params, const Tensor4<T>& batch, ForwardCache<T>* cache) {
  check_params(params);
  check_batch(params, batch);
  const std::size_t d = params.config.depth;
  const LayerIndex idx{d};
  if (cache != nullptr) {
    *cache = ForwardCache<T>{params.config, batch.shape(), {}, {}, {}};
    cache->layer_inputs.resize(params.layers.size());
    cache->preactivations.resize(params.layers.size());
  }

  auto apply = [&](std::size_t li, Tensor4<T> x) {
    Tensor4<T> z = conv2d_forward(x, params.layers[li], kPadding);
    Tensor4<T> a = params.manifest[li].relu ? relu_forward(z) : z;
    if (cache != nullptr) {
      cache->layer_inputs[li] = std::move(x);
      if (params.manifest[li].relu) cache->preactivations[li] = std::move(z);
    }
    return a;
  };

  Tensor4<T> x = batch;
  std::vector<Tensor4<T>> skips(d);
  for (std::size_t s = 0; s < d; ++s) {
    x = apply(idx.encoder(s, 0), std::move(x));
    x = apply(idx.encoder(s, 1), std::move(x));
    PoolResult<T> pooled = maxpool2_forward(x);
    skips[s] = std::move(x);
    if (cache != nullptr) cache->pools.push_back(std::move(pooled.index));
    x = std::move(pooled.output);
  }
  x = apply(idx.bottleneck(0), std::move(x));
  x = apply(idx.bottleneck(1), std::move(x));
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t s = d - 1 - k;
    Tensor4<T> up = apply(idx.decoder(s, 0), upsample2_forward(x));
    x = apply(idx.decoder(s, 1), concat_channels(skips[s], up));
    x = apply(idx.decoder(s, 2), std::move(x));
  }
  return apply(idx.output(), std::move(x));
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const UNetParams<T>& params, const Tensor4<T>& batch) {
  ForwardResult<T> result;
  result.output = run_forward(params, batch, &result.cache);
  return result;
}

template <typename T>
Tensor4<T> infer(const UNetParams<T>& params, const Tensor4<T>& batch) {
  return run_forward<T>(params, batch, nullptr);
}

template <typename T>
UNetParams<T> backward(const UNetParams<T>& params, const ForwardCache<T>& cache, const Tensor4<T>& grad_output) {
  check_params(params);
  const std::size_t d = params.config.depth;
  if (!(cache.config == params.config) || cache.layer_inputs.size() != params.layers.size() ||
      cache.pools.size() != d) {
    throw ShapeError("net backward: cache does not belong to these parameters");
  }
  if (!(grad_output.shape() == cache.input_shape)) {
    throw ShapeError("net backward: grad_output " + to_string(grad_output.shape()) + " does not match cached batch " +
                     to_string(cache.input_shape));
  }
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    if (cache.layer_inputs[li].empty()) throw ShapeError("net backward: cache is incomplete");
  }
  require_finite(grad_output, "net backward grad_output");

  const LayerIndex idx{d};
  UNetParams<T> grads = params.zeros_like();

  // Takes the gradient w.r.t. layer li's activation, returns it w.r.t. the layer input.
  auto back = [&](std::size_t li, const Tensor4<T>& g_act, bool need_input_grad) {
    const Tensor4<T> g_pre = params.manifest[li].relu ? relu_backward(cache.preactivations[li], g_act) : g_act;
    Tensor4<T> g_in;
    conv2d_backward_accumulate(cache.layer_inputs[li], params.layers[li], g_pre, kPadding,
                               need_input_grad ? &g_in : nullptr, grads.layers[li]);
    return g_in;
  };

  Tensor4<T> g = back(idx.output(), grad_output, true);
  std::vector<Tensor4<T>> skip_grads(d);
  for (std::size_t s = 0; s < d; ++s) {
    g = back(idx.decoder(s, 2), g, true);
    g = back(idx.decoder(s, 1), g, true);
    auto [g_skip, g_up] = split_channels(g, params.manifest[idx.decoder(s, 1)].in_channels / 2);
    skip_grads[s] = std::move(g_skip);
    g = upsample2_backward(back(idx.decoder(s, 0), g_up, true));
  }
  g = back(idx.bottleneck(1), g, true);
  g = back(idx.bottleneck(0), g, true);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t s = d - 1 - k;
    g = maxpool2_backward(cache.pools[s], g);
    auto gd = g.data();
    const auto gs = skip_grads[s].data();
    if (gd.size() != gs.size()) throw ShapeError("net backward: skip gradient shape mismatch");
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += gs[i];
    g = back(idx.encoder(s, 1), g, true);
    g = back(idx.encoder(s, 0), g, s != 0);
  }
  return grads;
}

template <typename T>
LossAndGradients<T> loss_and_gradients(const UNetParams<T>& params, const Tensor4<T>& batch, LossVariant variant,
                                       const LossConfig& cfg) {
  ForwardResult<T> fwd = forward(params, batch);
  LossResult<T> loss = evaluate_loss(variant, fwd.output, batch, cfg);
  return {loss.value, backward(params, fwd.cache, loss.grad)};
}

#define FRNET_INSTANTIATE_NET(T)                                                                            \
  template struct UNetParams<T>;                                                                            \
  template UNetParams<T> build<T>(const UNetConfig&);                                                       \
  template ForwardResult<T> forward(const UNetParams<T>&, const Tensor4<T>&);                               \
  template Tensor4<T> infer(const UNetParams<T>&, const Tensor4<T>&);                                       \
  template UNetParams<T> backward(const UNetParams<T>&, const ForwardCache<T>&, const Tensor4<T>&);         \
  template LossAndGradients<T> loss_and_gradients(const UNetParams<T>&, const Tensor4<T>&, LossVariant,     \
                                                  const LossConfig&);

FRNET_INSTANTIATE_NET(float)
FRNET_INSTANTIATE_NET(double)

template UNetParams<double> convert_params<double, float>(const UNetParams<float>&);
template UNetParams<float> convert_params<float, double>(const UNetParams<double>&);
template UNetParams<float> convert_params<float, float>(const UNetParams<float>&);
template UNetParams<double> convert_params<double, double>(const UNetParams<double>&);

#undef FRNET_INSTANTIATE_NET

}  // namespace frnet
