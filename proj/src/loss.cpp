#include "frnet/loss.hpp"

#include <cmath>
#include <vector>

namespace frnet {

std::string to_string(FootprintAxis axis) { return axis == FootprintAxis::rows ? "rows" : "columns"; }

std::string to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::frnet:
      return "frnet";
    case LossVariant::tv_baseline:
      return "tv_baseline";
    case LossVariant::mse_only:
      return "mse_only";
  }
  return "unknown";
}

FootprintAxis parse_footprint_axis(const std::string& text) {
  if (text == "rows") return FootprintAxis::rows;
  if (text == "columns") return FootprintAxis::columns;
  throw ConfigError("footprint axis must be 'rows' or 'columns', got '" + text + "'");
}

LossVariant parse_loss_variant(const std::string& text) {
  if (text == "frnet") return LossVariant::frnet;
  if (text == "tv_baseline") return LossVariant::tv_baseline;
  if (text == "mse_only") return LossVariant::mse_only;
  throw ConfigError("loss variant must be frnet, tv_baseline or mse_only, got '" + text + "'");
}

void LossConfig::validate() const {
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ConfigError("lambda1 must be a finite value >= 0");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("lambda2 must be a finite value >= 0");
  if (!(eps_smooth > 0.0) || !std::isfinite(eps_smooth)) throw ConfigError("eps_smooth must be positive");
}

template <typename T>
Matrix<T> diff_rows(const Matrix<T>& image) {
  if (image.rows() < 2) throw ShapeError("diff_rows: need at least 2 rows");
  Matrix<T> out(image.rows() - 1, image.cols());
  for (std::size_t i = 0; i + 1 < image.rows(); ++i) {
    for (std::size_t j = 0; j < image.cols(); ++j) out(i, j) = image(i + 1, j) - image(i, j);
  }
  return out;
}

template <typename T>
Matrix<T> diff_cols(const Matrix<T>& image) {
  if (image.cols() < 2) throw ShapeError("diff_cols: need at least 2 columns");
  Matrix<T> out(image.rows(), image.cols() - 1);
  for (std::size_t i = 0; i < image.rows(); ++i) {
    for (std::size_t j = 0; j + 1 < image.cols(); ++j) out(i, j) = image(i, j + 1) - image(i, j);
  }
  return out;
}

template <typename T>
double tv_norm(const Matrix<T>& image) {
  if (image.rows() < 2 || image.cols() < 2) throw ShapeError("tv_norm: image must be at least 2x2");
  double sum = 0.0;
  const Matrix<T> rows = diff_rows(image);
  const Matrix<T> cols = diff_cols(image);
  for (const T v : rows.data()) sum += std::abs(static_cast<double>(v));
  for (const T v : cols.data()) sum += std::abs(static_cast<double>(v));
  return sum;
}

template <typename T>
SmoothL1<T> smooth_l1(const Matrix<T>& values, double eps) {
  if (!(eps > 0.0)) throw ConfigError("smooth_l1: eps must be positive");
  SmoothL1<T> result{0.0, Matrix<T>(values.rows(), values.cols())};
  auto src = values.data();
  auto grad = result.grad.data();
  const double eps2 = eps * eps;
  for (std::size_t k = 0; k < src.size(); ++k) {
    const double u = static_cast<double>(src[k]);
    const double r = std::sqrt(u * u + eps2);
    result.value += r;
    grad[k] = static_cast<T>(u / r);
  }
  return result;
}

namespace {

enum class Direction { down_rows, across_cols };

// Neumaier-compensated sum; the regularizers add many similar terms whose
// total is large next to their variation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

Direction along_stripes(FootprintAxis axis) {
  return axis == FootprintAxis::rows ? Direction::down_rows : Direction::across_cols;
}

Direction across_stripes(FootprintAxis axis) {
  return axis == FootprintAxis::rows ? Direction::across_cols : Direction::down_rows;
}

// Adds weight * d/dfield of sum sqrt(d^2 + eps^2) over first differences of
// `field` in direction `dir` to `grad`; returns the unweighted sum.
double charbonnier_of_differences(const std::vector<double>& field, std::size_t h, std::size_t w, Direction dir,
                                  double eps, double weight, std::vector<double>& grad) {
  const double eps2 = eps * eps;
  CompensatedSum sum;
  const std::size_t step = dir == Direction::down_rows ? w : 1;
  const std::size_t i_end = dir == Direction::down_rows ? h - 1 : h;
  const std::size_t j_end = dir == Direction::down_rows ? w : w - 1;
  for (std::size_t i = 0; i < i_end; ++i) {
    for (std::size_t j = 0; j < j_end; ++j) {
      const std::size_t a = i * w + j;
      const double d = field[a + step] - field[a];
      const double r = std::sqrt(d * d + eps2);
      sum.add(r);
      const double g = weight * d / r;
      grad[a + step] += g;
      grad[a] -= g;
    }
  }
  return sum.value();
}

template <typename T>
void check_loss_inputs(const Tensor4<T>& output, const Tensor4<T>& input, const LossConfig& cfg) {
  cfg.validate();
  if (!(output.shape() == input.shape())) {
    throw ShapeError("loss: output " + to_string(output.shape()) + " vs input " + to_string(input.shape()));
  }
  const Shape4& s = output.shape();
  if (s.c != 1) throw ShapeError("loss: expected single-channel images, got " + std::to_string(s.c) + " channels");
  if (s.n == 0 || s.h < 2 || s.w < 2) throw ShapeError("loss: images must be non-empty and at least 2x2");
  require_finite(output, "loss output");
  require_finite(input, "loss input");
}

template <typename T>
LossResult<T> compute_loss(const Tensor4<T>& output, const Tensor4<T>& input, const LossConfig& cfg, bool isotropic) {
  check_loss_inputs(output, input, cfg);
  const Shape4& s = output.shape();
  const std::size_t px = s.plane();
  const double inv_n = 1.0 / static_cast<double>(s.n);

  LossResult<T> result{LossValue{}, Tensor4<T>(s)};
  std::vector<double> out(px), residual(px), grad(px);
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto o = output.plane(n, 0);
    const auto y = input.plane(n, 0);
    CompensatedSum mse;
    for (std::size_t k = 0; k < px; ++k) {
      out[k] = static_cast<double>(o[k]);
      residual[k] = out[k] - static_cast<double>(y[k]);
      mse.add(0.5 * residual[k] * residual[k]);
      grad[k] = residual[k] * inv_n;
    }
    result.value.mse_term += mse.value() * inv_n;

    if (isotropic) {
      if (cfg.lambda1 > 0.0) {
        const double w = cfg.lambda1 * inv_n;
        double tv = charbonnier_of_differences(out, s.h, s.w, Direction::down_rows, cfg.eps_smooth, w, grad);
        tv += charbonnier_of_differences(out, s.h, s.w, Direction::across_cols, cfg.eps_smooth, w, grad);
        result.value.utv_clean_term += cfg.lambda1 * tv * inv_n;
      }
    } else {
      if (cfg.lambda1 > 0.0) {
        const double c = charbonnier_of_differences(out, s.h, s.w, across_stripes(cfg.footprint_axis), cfg.eps_smooth,
                                                    cfg.lambda1 * inv_n, grad);
        result.value.utv_clean_term += cfg.lambda1 * c * inv_n;
      }
      if (cfg.lambda2 > 0.0) {
        const double r = charbonnier_of_differences(residual, s.h, s.w, along_stripes(cfg.footprint_axis),
                                                    cfg.eps_smooth, cfg.lambda2 * inv_n, grad);
        result.value.utv_residual_term += cfg.lambda2 * r * inv_n;
      }
    }

    auto g = result.grad.plane(n, 0);
    for (std::size_t k = 0; k < px; ++k) g[k] = static_cast<T>(grad[k]);
  }
  result.value.total = result.value.mse_term + result.value.utv_clean_term + result.value.utv_residual_term;
  if (!std::isfinite(result.value.total)) throw NumericError("loss: non-finite total");
  return result;
}

}  // namespace

template <typename T>
LossResult<T> frnet_loss(const Tensor4<T>& output, const Tensor4<T>& input, const LossConfig& cfg) {
  return compute_loss(output, input, cfg, false);
}

template <typename T>
LossResult<T> tv_baseline_loss(const Tensor4<T>& output, const Tensor4<T>& input, const LossConfig& cfg) {
  return compute_loss(output, input, cfg, true);
}

template <typename T>
LossResult<T> evaluate_loss(LossVariant variant, const Tensor4<T>& output, const Tensor4<T>& input,
                            const LossConfig& cfg) {
  switch (variant) {
    case LossVariant::frnet:
      return frnet_loss(output, input, cfg);
    case LossVariant::tv_baseline:
      return tv_baseline_loss(output, input, cfg);
    case LossVariant::mse_only: {
      LossConfig plain = cfg;
      plain.lambda1 = 0.0;
      plain.lambda2 = 0.0;
      return frnet_loss(output, input, plain);
    }
  }
  throw ConfigError("unknown loss variant");
}

#define FRNET_INSTANTIATE_LOSS(T)                                                                          \
  template Matrix<T> diff_rows(const Matrix<T>&);                                                          \
  template Matrix<T> diff_cols(const Matrix<T>&);                                                          \
  template double tv_norm(const Matrix<T>&);                                                               \
  template SmoothL1<T> smooth_l1(const Matrix<T>&, double);                                                \
  template LossResult<T> frnet_loss(const Tensor4<T>&, const Tensor4<T>&, const LossConfig&);              \
  template LossResult<T> tv_baseline_loss(const Tensor4<T>&, const Tensor4<T>&, const LossConfig&);        \
  template LossResult<T> evaluate_loss(LossVariant, const Tensor4<T>&, const Tensor4<T>&, const LossConfig&);

FRNET_INSTANTIATE_LOSS(float)
FRNET_INSTANTIATE_LOSS(double)

#undef FRNET_INSTANTIATE_LOSS

}  // namespace frnet
