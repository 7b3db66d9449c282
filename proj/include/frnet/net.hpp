#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frnet/loss.hpp"
#include "frnet/tensor.hpp"

namespace frnet {

/// U-Net shape. Stage s of the contracting path has base_channels * 2^s
/// channels; the bottleneck has base_channels * 2^depth.
struct UNetConfig {
  std::size_t depth = 2;
  std::size_t base_channels = 16;
  std::size_t input_size = 48;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

enum class LayerRole { encoder, bottleneck, upsample_conv, decoder, output };

/// One 3x3 convolution in the layer manifest.
struct LayerSpec {
  std::string name;
  LayerRole role = LayerRole::encoder;
  std::size_t stage = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  bool relu = true;

  bool operator==(const LayerSpec&) const = default;
};

/// Forward order: per contracting stage s two convs (the second one's output
/// is skip s, then 2x2 max pool), two bottleneck convs, then per expanding
/// stage s = depth-1..0 an upsample + conv, concat [skip s, upsampled] and two
/// convs, and a final linear conv to one channel.
std::vector<LayerSpec> layer_manifest(const UNetConfig& config);

/// Closed-form parameter count of the manifest.
std::size_t parameter_count(const UNetConfig& config);

template <typename T>
struct UNetParams {
  UNetConfig config;
  std::vector<LayerSpec> manifest;
  std::vector<ConvKernel<T>> layers;  // parallel to manifest

  std::size_t parameter_count() const;

  /// Weight then bias arrays of every layer, in manifest order.
  std::vector<std::span<T>> tensors();
  std::vector<std::span<const T>> tensors() const;

  /// Same structure, all values zero (gradient accumulator).
  UNetParams zeros_like() const;

  std::vector<T> flatten() const;
  void assign_flat(std::span<const T> values);
};

/// Xavier-uniform weights, zero biases, deterministic per config.seed.
template <typename T>
UNetParams<T> build(const UNetConfig& config);

template <typename To, typename From>
UNetParams<To> convert_params(const UNetParams<From>& params);

template <typename T>
struct ForwardCache {
  UNetConfig config;
  Shape4 input_shape;
  std::vector<Tensor4<T>> layer_inputs;   // per manifest layer
  std::vector<Tensor4<T>> preactivations; // per manifest layer
  std::vector<PoolIndex> pools;           // per contracting stage
};

template <typename T>
struct ForwardResult {
  Tensor4<T> output;
  ForwardCache<T> cache;
};

template <typename T>
ForwardResult<T> forward(const UNetParams<T>& params, const Tensor4<T>& batch);

/// Forward pass without keeping the cache.
template <typename T>
Tensor4<T> infer(const UNetParams<T>& params, const Tensor4<T>& batch);

/// Parameter gradients of sum(grad_output * output) for the cached forward call.
template <typename T>
UNetParams<T> backward(const UNetParams<T>& params, const ForwardCache<T>& cache, const Tensor4<T>& grad_output);

template <typename T>
struct LossAndGradients {
  LossValue loss;
  UNetParams<T> grads;
};

/// Loss of the network output against its own input, with parameter gradients.
template <typename T>
LossAndGradients<T> loss_and_gradients(const UNetParams<T>& params, const Tensor4<T>& batch, LossVariant variant,
                                       const LossConfig& cfg);

}  // namespace frnet
