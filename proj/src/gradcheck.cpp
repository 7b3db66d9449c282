#include "frnet/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace frnet {

std::vector<GradcheckCase> default_gradcheck_matrix() {
  std::vector<GradcheckCase> cases;
  for (std::size_t depth : {1, 2}) {
    for (std::size_t base : {2, 4}) {
      GradcheckCase c;
      c.depth = depth;
      c.base_channels = base;
      c.seed = 10 * depth + base;
      cases.push_back(c);
    }
  }
  return cases;
}

namespace {

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

// Which piece of the piecewise-smooth network a forward pass landed on.
std::vector<std::uint32_t> activation_pattern(const UNetParams<double>& params, const ForwardCache<double>& cache) {
  std::vector<std::uint32_t> bits;
  for (std::size_t l = 0; l < params.manifest.size(); ++l) {
    if (!params.manifest[l].relu) continue;
    for (const double v : cache.preactivations[l].data()) bits.push_back(v > 0.0 ? 1u : 0u);
  }
  for (const PoolIndex& p : cache.pools) bits.insert(bits.end(), p.argmax.begin(), p.argmax.end());
  return bits;
}

}  // namespace

GradcheckResult run_gradcheck(const GradcheckCase& c, const GradcheckOptions& options) {
  options.loss.validate();
  if (!(options.step > 0.0) || !std::isfinite(options.step)) {
    throw ConfigError("gradcheck: finite-difference step must be positive");
  }
  if (c.batch < 1) throw ConfigError("gradcheck: batch must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  UNetConfig config{c.depth, c.base_channels, c.size, c.seed};
  config.validate();
  UNetParams<double> params = build<double>(config);
  std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  for (ConvKernel<double>& layer : params.layers) {
    for (double& b : layer.bias) b = 0.1 * uniform(rng);
  }
  Tensor4<double> batch({c.batch, 1, c.size, c.size});
  for (double& v : batch.data()) v = uniform(rng);

  const LossAndGradients<double> analytic = loss_and_gradients(params, batch, options.variant, options.loss);
  const std::vector<double> g = analytic.grads.flatten();
  const std::vector<std::uint32_t> base_pattern = activation_pattern(params, forward(params, batch).cache);

  // Central differences, one coordinate at a time, noting probes that leave
  // the base point's smooth piece.
  UNetParams<double> probe = params;
  std::vector<double> flat = params.flatten();
  std::vector<double> numeric(flat.size());
  std::vector<bool> kink(flat.size(), false);
  auto evaluate = [&](std::size_t k) {
    probe.assign_flat(flat);
    ForwardResult<double> fr = forward(probe, batch);
    if (activation_pattern(probe, fr.cache) != base_pattern) kink[k] = true;
    return evaluate_loss(options.variant, fr.output, batch, options.loss).value.total;
  };
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double saved = flat[k];
    flat[k] = saved + options.step;
    const double up = evaluate(k);
    flat[k] = saved - options.step;
    const double down = evaluate(k);
    flat[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("gradcheck: non-finite loss while probing");
    numeric[k] = (up - down) / (2.0 * options.step);
  }

  GradcheckResult result;
  result.test_case = c;
  result.coordinates = flat.size();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const ConvKernel<double>& layer = params.layers[l];
    const std::pair<const char*, std::size_t> parts[] = {{".weights", layer.weights.size()},
                                                         {".bias", layer.bias.size()}};
    for (const auto& [suffix, count] : parts) {
      double scale = 0.0;
      for (std::size_t k = offset; k < offset + count; ++k) {
        if (!kink[k]) scale = std::max({scale, std::abs(g[k]), std::abs(numeric[k])});
      }
      GradcheckEntry worst;
      worst.tensor = params.manifest[l].name + suffix;
      for (std::size_t k = offset; k < offset + count; ++k) {
        if (kink[k]) {
          ++result.kink_crossings;
          continue;
        }
        const double rel = scale > 0.0 ? std::abs(g[k] - numeric[k]) / scale : 0.0;
        if (rel >= worst.rel_error) worst = {worst.tensor, k - offset, g[k], numeric[k], rel};
      }
      offset += count;
      result.max_rel_error = std::max(result.max_rel_error, worst.rel_error);
      result.worst_per_tensor.push_back(worst);
    }
  }
  const double kink_fraction = static_cast<double>(result.kink_crossings) / static_cast<double>(result.coordinates);
  result.passed = std::isfinite(result.max_rel_error) && result.max_rel_error < options.tolerance &&
                  kink_fraction <= options.max_kink_fraction;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace frnet
