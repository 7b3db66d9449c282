#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frnet/data.hpp"
#include "frnet/loss.hpp"
#include "frnet/net.hpp"

namespace frnet {

struct TrainConfig {
  double learning_rate = 1.0e-3;
  std::size_t batch_size = 5;
  std::size_t epochs = 200;
  LossConfig loss;
  LossVariant loss_variant = LossVariant::frnet;
  std::uint64_t shuffle_seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0 disables intermediate checkpoints

  void validate() const;
};

/// Adam moments over the flattened parameter vector.
struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1.0e-8;

  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t parameter_count = 0) : m(parameter_count, 0.0), v(parameter_count, 0.0) {}
};

/// One bias-corrected Adam update. Throws NumericError (leaving everything
/// untouched) if any gradient is non-finite.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state, double learning_rate);

void adam_step(UNetParams<float>& params, const UNetParams<float>& grads, AdamState& state, double learning_rate);

struct TrainReport {
  std::vector<LossValue> history;  // epoch means, one per epoch
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  std::string checkpoint_path;
  TrainConfig config;
};

struct TrainHooks {
  std::function<void(std::size_t epoch, const LossValue&)> on_epoch;
  std::function<void(std::size_t epoch, const UNetParams<float>&)> on_checkpoint;
};

struct TrainResult {
  UNetParams<float> params;
  TrainReport report;
};

/// Minimizes the selected loss over normalized single-channel patches.
/// Every epoch visits each patch once in a seeded shuffle; the final partial
/// batch is kept.
TrainResult train(UNetParams<float> params, const Tensor4<float>& patches, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

struct DenoiseResult {
  Volume clean_estimate;
  Volume footprint_estimate;  // input - clean_estimate, rounded once
};

/// Slice-wise, patch-wise inference with mean blending; the footprint
/// estimate is the float residual of the clean estimate.
DenoiseResult denoise_volume(const UNetParams<float>& params, const Volume& volume, const PatchGrid& grid,
                             const ScaleRecord& scale);

/// residual = input - clean, rounded once to float. This is the identity that
/// holds bit for bit at float precision: a float pair (c, r) with c + r == y
/// does not exist in general when |c| is far above |y|, since c and r then
/// share a coarser grid than y.
void split_residual(std::span<const float> input, std::span<const float> clean, std::span<float> residual);

/// Number of samples where residual != float(input - clean) bitwise.
std::size_t decomposition_mismatches(const Volume& input, const Volume& clean, const Volume& residual);

void write_loss_csv(const TrainReport& report, const std::string& path);

}  // namespace frnet
