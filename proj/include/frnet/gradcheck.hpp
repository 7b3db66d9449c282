#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frnet/loss.hpp"
#include "frnet/net.hpp"

namespace frnet {

struct GradcheckCase {
  std::size_t depth = 1;
  std::size_t base_channels = 2;
  std::size_t size = 8;
  std::size_t batch = 2;
  std::uint64_t seed = 0;
};

struct GradcheckOptions {
  LossVariant variant = LossVariant::frnet;
  LossConfig loss;
  double step = 3.0e-5;
  double tolerance = 1.0e-3;
  // Upper bound on the fraction of coordinates whose probes cross a ReLU or
  // max-pool switch (those are excluded from the comparison).
  double max_kink_fraction = 0.01;
};

/// Worst element of one parameter array (weights or bias of one layer). The
/// error is |analytic - numeric| relative to the array's largest gradient
/// magnitude, so entries that are nearly zero do not turn rounding noise into
/// spurious failures.
struct GradcheckEntry {
  std::string tensor;  // e.g. "enc0.conv1.weights"
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckResult {
  GradcheckCase test_case;
  std::vector<GradcheckEntry> worst_per_tensor;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t kink_crossings = 0;  // coordinates skipped as non-differentiable
  double seconds = 0.0;
  bool passed = false;
};

std::vector<GradcheckCase> default_gradcheck_matrix();

/// Central finite differences of the full loss (network output against its
/// own input) versus backpropagation, in double precision. Weights are the
/// seeded initialization; biases and the input batch are seeded uniform noise.
/// A coordinate whose +-step probes change any ReLU mask or pooling argmax is
/// not differentiable on that interval and is counted instead of compared.
GradcheckResult run_gradcheck(const GradcheckCase& c, const GradcheckOptions& options);

}  // namespace frnet
