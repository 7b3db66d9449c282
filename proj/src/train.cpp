#include "frnet/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

namespace frnet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  loss.validate();
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state, double learning_rate) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state sizes differ");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  require_finite(grads, "adam_step gradient");

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(AdamState::beta1, t);
  const double c2 = 1.0 - std::pow(AdamState::beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    state.m[i] = AdamState::beta1 * state.m[i] + (1.0 - AdamState::beta1) * g;
    state.v[i] = AdamState::beta2 * state.v[i] + (1.0 - AdamState::beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) - learning_rate * m_hat / (std::sqrt(v_hat) + AdamState::epsilon));
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamState&, double);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState&, double);

void adam_step(UNetParams<float>& params, const UNetParams<float>& grads, AdamState& state, double learning_rate) {
  if (params.layers.size() != grads.layers.size()) throw ShapeError("adam_step: gradient structure mismatch");
  for (const auto g : grads.tensors()) require_finite(g, "adam_step gradient");
  std::vector<float> p = params.flatten();
  const std::vector<float> g = grads.flatten();
  adam_step<float>(p, g, state, learning_rate);
  params.assign_flat(p);
}

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Tensor4<float> gather(const Tensor4<float>& patches, std::span<const std::size_t> indices) {
  const Shape4& s = patches.shape();
  Tensor4<float> batch({indices.size(), s.c, s.h, s.w});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto src = patches.item(indices[k]);
    std::copy(src.begin(), src.end(), batch.item(k).begin());
  }
  return batch;
}

}  // namespace

TrainResult train(UNetParams<float> params, const Tensor4<float>& patches, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  const Shape4& s = patches.shape();
  if (s.n == 0) throw ConfigError("train: no patches");
  if (s.c != 1 || s.h != params.config.input_size || s.w != params.config.input_size) {
    throw ShapeError("train: patches " + to_string(s) + " do not match net input size " +
                     std::to_string(params.config.input_size));
  }
  require_finite(patches, "train patches");

  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.config = cfg;
  AdamState adam(params.parameter_count());
  std::mt19937_64 rng(cfg.shuffle_seed);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_order(s.n, rng);
    LossValue sum;
    for (std::size_t first = 0; first < s.n; first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, s.n - first);
      const Tensor4<float> batch = gather(patches, std::span(order).subspan(first, count));
      LossAndGradients<float> step = loss_and_gradients(params, batch, cfg.loss_variant, cfg.loss);
      if (!std::isfinite(step.loss.total)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           "; lower the learning rate or the lambda weights");
      }
      try {
        adam_step(params, step.grads, adam, cfg.learning_rate);
      } catch (const NumericError&) {
        throw NumericError("train: non-finite gradient at epoch " + std::to_string(epoch) +
                           "; lower the learning rate or the lambda weights");
      }
      ++report.steps;
      const double w = static_cast<double>(count);
      sum.total += w * step.loss.total;
      sum.mse_term += w * step.loss.mse_term;
      sum.utv_clean_term += w * step.loss.utv_clean_term;
      sum.utv_residual_term += w * step.loss.utv_residual_term;
    }
    const double inv = 1.0 / static_cast<double>(s.n);
    LossValue mean{sum.total * inv, sum.mse_term * inv, sum.utv_clean_term * inv, sum.utv_residual_term * inv};
    report.history.push_back(mean);
    if (hooks.on_epoch) hooks.on_epoch(epoch, mean);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(epoch, params);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(params), std::move(report)};
}

void split_residual(std::span<const float> input, std::span<const float> clean, std::span<float> residual) {
  if (input.size() != clean.size() || input.size() != residual.size()) {
    throw ShapeError("split_residual: size mismatch");
  }
  for (std::size_t k = 0; k < input.size(); ++k) residual[k] = input[k] - clean[k];
}

std::size_t decomposition_mismatches(const Volume& input, const Volume& clean, const Volume& residual) {
  if (!input.same_dims(clean) || !input.same_dims(residual)) throw ShapeError("decomposition check: dims differ");
  std::size_t bad = 0;
  for (std::size_t k = 0; k < input.size(); ++k) {
    const float r = input.samples[k] - clean.samples[k];
    if (std::bit_cast<std::uint32_t>(r) != std::bit_cast<std::uint32_t>(residual.samples[k])) ++bad;
  }
  return bad;
}

DenoiseResult denoise_volume(const UNetParams<float>& params, const Volume& volume, const PatchGrid& grid,
                             const ScaleRecord& scale) {
  volume.validate();
  if (grid.patch_size != params.config.input_size) {
    throw ConfigError("denoise: patch size " + std::to_string(grid.patch_size) + " does not match the checkpoint's " +
                      std::to_string(params.config.input_size));
  }
  if (grid.slice_height != volume.n_inline || grid.slice_width != volume.n_xline) {
    throw ShapeError("denoise: patch grid does not match volume dims " + dims_string(volume));
  }
  const std::vector<Image> slices = normalize(time_slices(volume), scale);
  const Tensor4<float> patches = extract_patches(slices, grid);

  constexpr std::size_t kChunk = 16;
  const Shape4& s = patches.shape();
  Tensor4<float> restored(s);
  std::vector<std::size_t> indices;
  for (std::size_t first = 0; first < s.n; first += kChunk) {
    const std::size_t count = std::min(kChunk, s.n - first);
    indices.resize(count);
    std::iota(indices.begin(), indices.end(), first);
    const Tensor4<float> out = infer(params, gather(patches, indices));
    std::copy(out.data().begin(), out.data().end(), restored.item(first).begin());
  }

  DenoiseResult result;
  result.clean_estimate = from_time_slices(denormalize(reassemble_slices(restored, grid), scale));
  result.clean_estimate.amplitude_unit = volume.amplitude_unit;
  result.footprint_estimate = Volume(volume.n_inline, volume.n_xline, volume.n_time);
  result.footprint_estimate.amplitude_unit = volume.amplitude_unit;
  split_residual(volume.samples, result.clean_estimate.samples, result.footprint_estimate.samples);
  return result;
}

void write_loss_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path);
  out << "epoch,total,mse,utv_clean,utv_residual\n" << std::setprecision(10);
  for (std::size_t e = 0; e < report.history.size(); ++e) {
    const LossValue& v = report.history[e];
    out << e + 1 << "," << v.total << "," << v.mse_term << "," << v.utv_clean_term << "," << v.utv_residual_term << "\n";
  }
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path);
}

}  // namespace frnet
