#pragma once

#include <string>

#include "frnet/matrix.hpp"
#include "frnet/tensor.hpp"

namespace frnet {

/// Axis along which footprint stripes are constant. `rows` means the stripe
/// value does not change as the row index moves, i.e. vertical stripes
/// S(i, j) = s(j); the along-stripe derivative is then diff_rows and the
/// across-stripe derivative is diff_cols.
enum class FootprintAxis { rows, columns };

enum class LossVariant { frnet, tv_baseline, mse_only };

std::string to_string(FootprintAxis axis);
std::string to_string(LossVariant variant);
FootprintAxis parse_footprint_axis(const std::string& text);
LossVariant parse_loss_variant(const std::string& text);

struct LossConfig {
  double lambda1 = 6.0e4;  // clean estimate, across-stripe derivative
  double lambda2 = 4.0e5;  // residual, along-stripe derivative
  FootprintAxis footprint_axis = FootprintAxis::rows;
  double eps_smooth = 1.0e-3;

  void validate() const;
};

/// Batch-mean loss and its three summands. For the TV baseline the isotropic
/// TV term is reported in `utv_clean_term` and `utv_residual_term` is zero.
struct LossValue {
  double total = 0.0;
  double mse_term = 0.0;
  double utv_clean_term = 0.0;
  double utv_residual_term = 0.0;
};

template <typename T>
struct LossResult {
  LossValue value;
  Tensor4<T> grad;  // d total / d output
};

template <typename T>
struct SmoothL1 {
  double value = 0.0;
  Matrix<T> grad;
};

/// X(i+1, j) - X(i, j); one row fewer than the input.
template <typename T>
Matrix<T> diff_rows(const Matrix<T>& image);

/// X(i, j+1) - X(i, j); one column fewer than the input.
template <typename T>
Matrix<T> diff_cols(const Matrix<T>& image);

/// Unsmoothed anisotropic TV: sum |diff_rows| + sum |diff_cols|.
template <typename T>
double tv_norm(const Matrix<T>& image);

/// Charbonnier surrogate sum sqrt(u^2 + eps^2) and its gradient u / sqrt(u^2 + eps^2).
template <typename T>
SmoothL1<T> smooth_l1(const Matrix<T>& values, double eps);

/// 1/2 |out - in|^2 + lambda1 |across(out)|_1 + lambda2 |along(out - in)|_1,
/// pixel sums averaged over the batch, both L1 terms Charbonnier-smoothed.
template <typename T>
LossResult<T> frnet_loss(const Tensor4<T>& output, const Tensor4<T>& input, const LossConfig& cfg);

/// Same data term with isotropic TV of the output weighted by lambda1.
template <typename T>
LossResult<T> tv_baseline_loss(const Tensor4<T>& output, const Tensor4<T>& input, const LossConfig& cfg);

template <typename T>
LossResult<T> evaluate_loss(LossVariant variant, const Tensor4<T>& output, const Tensor4<T>& input,
                            const LossConfig& cfg);

}  // namespace frnet
