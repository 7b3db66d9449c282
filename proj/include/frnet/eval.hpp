#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "frnet/data.hpp"
#include "frnet/loss.hpp"

namespace frnet {

/// SNR in dB. A perfect estimate is reported as the explicit `infinite`
/// sentinel rather than a floating-point infinity.
struct Snr {
  bool infinite = false;
  double db = 0.0;

  std::string to_string() const;
  bool operator==(const Snr&) const = default;
};

/// 10 log10(|truth|^2 / |truth - estimate|^2), accumulated in double.
Snr snr(std::span<const float> truth, std::span<const float> estimate);
Snr snr(const Volume& truth, const Volume& estimate);

/// One SNR per time slice.
std::vector<Snr> snr_per_slice(const Volume& truth, const Volume& estimate);

struct DerivativeMaps {
  Image horizontal;  // diff_cols
  Image vertical;    // diff_rows
};

DerivativeMaps derivative_maps(const Image& image);

std::vector<float> extract_trace(const Volume& v, std::size_t inline_index, std::size_t xline_index);

/// Writes an 8-bit binary PGM. Amplitudes are clipped symmetrically at the
/// given percentile of |value| and mapped so that 0 is mid-gray; the clip
/// level is stored as a header comment. Returns the clip level.
double export_slice_image(const Image& image, const std::filesystem::path& path, double clip_percentile = 99.0);

/// 8-bit pixel values that export_slice_image would write.
std::vector<unsigned char> slice_pixels(const Image& image, double clip_percentile, double* clip_out = nullptr);

struct MetricsRow {
  std::string variant;
  std::optional<Snr> snr;        // only with ground truth
  double residual_energy = 0.0;  // |noisy - estimate|^2
  double along_stripe_residual = 0.0;  // mean |along-stripe diff| of the residual
};

struct MetricsReport {
  std::optional<Snr> input_snr;
  std::vector<MetricsRow> rows;  // sorted by variant name

  const MetricsRow& row(const std::string& variant) const;
};

using NamedVolume = std::pair<std::string, Volume>;

MetricsReport compare_report(const Volume* truth, const Volume& noisy, const std::vector<NamedVolume>& variants,
                             FootprintAxis axis = FootprintAxis::rows);

/// Columns: variant, snr_db, residual_energy, along_stripe_residual. The
/// first row is the noisy input itself ("input").
void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path);

void write_slice_snr_csv(const Volume& truth, const std::vector<NamedVolume>& variants,
                         const std::filesystem::path& path);

/// Columns: t_index, clean (when given), noisy, denoised_<variant>...
void write_trace_csv(const Volume* clean, const Volume& noisy, const std::vector<NamedVolume>& variants,
                     std::size_t inline_index, std::size_t xline_index, const std::filesystem::path& path);

/// Pearson correlation coefficient of two equally sized sample sets.
double correlation(std::span<const float> a, std::span<const float> b);

}  // namespace frnet
