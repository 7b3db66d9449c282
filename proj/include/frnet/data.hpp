#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "frnet/matrix.hpp"
#include "frnet/tensor.hpp"

namespace frnet {

/// 3-D block of amplitudes indexed (inline, xline, time), time fastest.
struct Volume {
  std::size_t n_inline = 0;
  std::size_t n_xline = 0;
  std::size_t n_time = 0;
  std::vector<float> samples;
  std::string amplitude_unit = "normalized";

  Volume() = default;
  Volume(std::size_t ni, std::size_t nx, std::size_t nt, float fill = 0.0f)
      : n_inline(ni), n_xline(nx), n_time(nt), samples(ni * nx * nt, fill) {}

  std::size_t size() const { return samples.size(); }
  std::size_t index(std::size_t i, std::size_t x, std::size_t t) const { return (i * n_xline + x) * n_time + t; }
  float& at(std::size_t i, std::size_t x, std::size_t t) { return samples[index(i, x, t)]; }
  float at(std::size_t i, std::size_t x, std::size_t t) const { return samples[index(i, x, t)]; }
  bool same_dims(const Volume& o) const { return n_inline == o.n_inline && n_xline == o.n_xline && n_time == o.n_time; }

  /// Throws ShapeError when samples.size() disagrees with the dims, NumericError on NaN/Inf.
  void validate() const;
};

std::string dims_string(const Volume& v);

struct EventDip {
  double per_inline = 0.0;  // time shift in samples per inline step
  double per_xline = 0.0;   // time shift in samples per xline step
};

struct SyntheticConfig {
  std::size_t n_inline = 64;
  std::size_t n_xline = 64;
  std::size_t n_time = 128;
  double sample_interval = 0.002;  // seconds
  std::size_t event_count = 3;
  std::vector<double> wavelet_peak_freqs{20.0, 30.0, 40.0};
  std::vector<EventDip> event_dips{{0.2, 0.15}, {-0.15, 0.2}, {0.1, -0.2}};
  std::size_t footprint_period = 4;   // traces
  double footprint_amplitude = 0.3;   // events have unit peak amplitude
  double footprint_decay = 0.02;      // per trace
  double random_noise_sigma = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticVolumes {
  Volume clean;
  Volume footprint;
  Volume noisy;
};

/// Zero-phase Ricker pulse (1 - 2 a) exp(-a), a = (pi f t)^2.
double ricker(double peak_freq, double t);

/// Superposes `event_count` dipping planar Ricker events, adds a vertical
/// footprint (constant along inline and time, cosine-periodic along xline
/// with amplitude A exp(-decay * xline)) and Gaussian noise.
SyntheticVolumes gen_synthetic(const SyntheticConfig& cfg);

// FRV1: "FRV1", three u32 LE dims (inline, xline, time), then float32 LE
// samples with time fastest.
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

/// Slice t holds pixel (i, j) = v(i, j, t); one slice per time sample.
std::vector<Image> time_slices(const Volume& v);
Volume from_time_slices(const std::vector<Image>& slices);

struct PatchGrid {
  std::size_t patch_size = 48;
  std::size_t stride = 24;
  std::size_t slice_height = 0;
  std::size_t slice_width = 0;
  std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col), row-major
  std::string pad_policy = "clamp";

  std::size_t patches_per_slice() const { return origins.size(); }
};

/// Origins step by `stride`; the last origin on each axis is clamped so the
/// final patch ends at the border.
PatchGrid make_patch_grid(std::size_t height, std::size_t width, std::size_t patch_size, std::size_t stride);

Tensor4<float> extract_patches(const Image& image, const PatchGrid& grid);
/// Patches of every slice, slice-major.
Tensor4<float> extract_patches(const std::vector<Image>& slices, const PatchGrid& grid);

/// Each pixel becomes the mean of every patch value covering it.
Image reassemble(const Tensor4<float>& patches, const PatchGrid& grid);
std::vector<Image> reassemble_slices(const Tensor4<float>& patches, const PatchGrid& grid);

struct ScaleRecord {
  double scale = 1.0;  // global max |amplitude| of the training data
};

ScaleRecord fit_scale(const std::vector<Image>& images);
std::vector<Image> normalize(const std::vector<Image>& images, const ScaleRecord& record);
std::pair<std::vector<Image>, ScaleRecord> normalize(const std::vector<Image>& images);
std::vector<Image> denormalize(const std::vector<Image>& images, const ScaleRecord& record);

}  // namespace frnet
