#include "frnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "binary_io.hpp"

namespace frnet {

void Volume::validate() const {
  if (samples.size() != n_inline * n_xline * n_time) {
    throw ShapeError("volume holds " + std::to_string(samples.size()) + " samples but dims are " + dims_string(*this));
  }
  require_finite(std::span<const float>(samples), "volume");
}

std::string dims_string(const Volume& v) {
  return std::to_string(v.n_inline) + "x" + std::to_string(v.n_xline) + "x" + std::to_string(v.n_time);
}

double ricker(double peak_freq, double t) {
  const double a = std::pow(std::numbers::pi * peak_freq * t, 2);
  return (1.0 - 2.0 * a) * std::exp(-a);
}

namespace {

// Samples beyond which exp(-(pi f t)^2) < 1e-3.
std::size_t ricker_half_support(double peak_freq, double dt) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(std::log(1000.0)) / (std::numbers::pi * peak_freq * dt)));
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_inline < 2 || n_xline < 2 || n_time < 2) throw ConfigError("synthetic dims must all be >= 2");
  if (!(sample_interval > 0.0)) throw ConfigError("sample interval must be positive");
  if (event_count != wavelet_peak_freqs.size() || event_count != event_dips.size()) {
    throw ConfigError("event_count must equal the number of peak frequencies and of dips");
  }
  for (const double f : wavelet_peak_freqs) {
    if (!(f > 0.0)) throw ConfigError("wavelet peak frequencies must be positive");
    if (f >= 0.5 / sample_interval) throw ConfigError("wavelet peak frequency at or above Nyquist");
    const std::size_t support = 2 * ricker_half_support(f, sample_interval) + 1;
    if (n_time < support) {
      throw ConfigError("n_time = " + std::to_string(n_time) + " is too small for the " + std::to_string(f) +
                        " Hz wavelet support of " + std::to_string(support) + " samples");
    }
  }
  if (footprint_period < 2) throw ConfigError("footprint period must be >= 2 traces");
  if (!std::isfinite(footprint_amplitude)) throw ConfigError("footprint amplitude must be finite");
  if (!(footprint_decay >= 0.0)) throw ConfigError("footprint decay must be >= 0");
  if (!(random_noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
}

SyntheticVolumes gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t ni = cfg.n_inline, nx = cfg.n_xline, nt = cfg.n_time;
  SyntheticVolumes out{Volume(ni, nx, nt), Volume(ni, nx, nt), Volume(ni, nx, nt)};
  out.clean.amplitude_unit = out.footprint.amplitude_unit = out.noisy.amplitude_unit = "synthetic";

  const double ci = 0.5 * static_cast<double>(ni - 1);
  const double cx = 0.5 * static_cast<double>(nx - 1);
  std::vector<double> trace(nt);
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t x = 0; x < nx; ++x) {
      std::fill(trace.begin(), trace.end(), 0.0);
      for (std::size_t e = 0; e < cfg.event_count; ++e) {
        const double t0 = static_cast<double>(nt) * static_cast<double>(e + 1) / static_cast<double>(cfg.event_count + 1);
        const EventDip& dip = cfg.event_dips[e];
        const double center = t0 + dip.per_inline * (static_cast<double>(i) - ci) + dip.per_xline * (static_cast<double>(x) - cx);
        for (std::size_t t = 0; t < nt; ++t) {
          trace[t] += ricker(cfg.wavelet_peak_freqs[e], (static_cast<double>(t) - center) * cfg.sample_interval);
        }
      }
      for (std::size_t t = 0; t < nt; ++t) out.clean.at(i, x, t) = static_cast<float>(trace[t]);
    }
  }

  const double period = static_cast<double>(cfg.footprint_period);
  for (std::size_t x = 0; x < nx; ++x) {
    const double xd = static_cast<double>(x);
    const auto stripe = static_cast<float>(cfg.footprint_amplitude * std::cos(2.0 * std::numbers::pi * xd / period) *
                                           std::exp(-cfg.footprint_decay * xd));
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t t = 0; t < nt; ++t) out.footprint.at(i, x, t) = stripe;
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < out.noisy.size(); ++k) {
    const double noise = cfg.random_noise_sigma > 0.0 ? cfg.random_noise_sigma * gauss(rng) : 0.0;
    out.noisy.samples[k] = static_cast<float>(static_cast<double>(out.clean.samples[k]) +
                                              static_cast<double>(out.footprint.samples[k]) + noise);
  }
  return out;
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  v.validate();
  constexpr std::size_t kMax = 0xffffffffu;
  if (v.n_inline > kMax || v.n_xline > kMax || v.n_time > kMax) throw ShapeError("volume dims exceed FRV1 limits");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  out.write("FRV1", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(v.n_inline));
  detail::put_u32(out, static_cast<std::uint32_t>(v.n_xline));
  detail::put_u32(out, static_cast<std::uint32_t>(v.n_time));
  detail::put_f32(out, v.samples);
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "FRV1")) {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + ": bad magic");
  }
  if (bytes.size() < 16) throw FormatError(FormatError::Kind::truncated, path.string() + ": truncated header");
  Volume v;
  v.n_inline = detail::decode_u32(bytes.data() + 4);
  v.n_xline = detail::decode_u32(bytes.data() + 8);
  v.n_time = detail::decode_u32(bytes.data() + 12);
  const std::size_t expected = v.n_inline * v.n_xline * v.n_time;
  const std::size_t payload = bytes.size() - 16;
  if (payload != 4 * expected) {
    throw FormatError(FormatError::Kind::size_mismatch, path.string() + ": size mismatch (header " + dims_string(v) +
                                                            " needs " + std::to_string(4 * expected) +
                                                            " payload bytes, file has " + std::to_string(payload) + ")");
  }
  v.samples.resize(expected);
  detail::decode_f32(std::span<const unsigned char>(bytes).subspan(16), v.samples);
  v.amplitude_unit = "unknown";
  return v;
}

std::vector<Image> time_slices(const Volume& v) {
  if (v.samples.size() != v.n_inline * v.n_xline * v.n_time) throw ShapeError("time_slices: inconsistent volume");
  std::vector<Image> slices(v.n_time, Image(v.n_inline, v.n_xline));
  for (std::size_t i = 0; i < v.n_inline; ++i) {
    for (std::size_t x = 0; x < v.n_xline; ++x) {
      const float* trace = v.samples.data() + v.index(i, x, 0);
      for (std::size_t t = 0; t < v.n_time; ++t) slices[t](i, x) = trace[t];
    }
  }
  return slices;
}

Volume from_time_slices(const std::vector<Image>& slices) {
  if (slices.empty()) throw ShapeError("from_time_slices: no slices");
  Volume v(slices[0].rows(), slices[0].cols(), slices.size());
  for (std::size_t t = 0; t < slices.size(); ++t) {
    if (slices[t].rows() != v.n_inline || slices[t].cols() != v.n_xline) {
      throw ShapeError("from_time_slices: slice " + std::to_string(t) + " has different dims");
    }
    for (std::size_t i = 0; i < v.n_inline; ++i) {
      for (std::size_t x = 0; x < v.n_xline; ++x) v.at(i, x, t) = slices[t](i, x);
    }
  }
  return v;
}

namespace {

std::vector<std::size_t> axis_origins(std::size_t dim, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> origins;
  for (std::size_t o = 0;; o += stride) {
    if (o + patch >= dim) {
      origins.push_back(dim - patch);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

void check_grid_image(const Image& image, const PatchGrid& grid) {
  if (image.rows() != grid.slice_height || image.cols() != grid.slice_width) {
    throw ShapeError("patch grid built for " + std::to_string(grid.slice_height) + "x" +
                     std::to_string(grid.slice_width) + " slices, got " + std::to_string(image.rows()) + "x" +
                     std::to_string(image.cols()));
  }
}

}  // namespace

PatchGrid make_patch_grid(std::size_t height, std::size_t width, std::size_t patch_size, std::size_t stride) {
  if (patch_size == 0) throw ConfigError("patch size must be positive");
  if (stride == 0 || stride > patch_size) throw ConfigError("patch stride must be in [1, patch size]");
  if (patch_size > height || patch_size > width) {
    throw ShapeError("patch size " + std::to_string(patch_size) + " larger than image " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  PatchGrid grid{patch_size, stride, height, width, {}, "clamp"};
  const auto rows = axis_origins(height, patch_size, stride);
  const auto cols = axis_origins(width, patch_size, stride);
  for (const std::size_t r : rows) {
    for (const std::size_t c : cols) grid.origins.emplace_back(r, c);
  }
  return grid;
}

Tensor4<float> extract_patches(const Image& image, const PatchGrid& grid) {
  return extract_patches(std::vector<Image>{image}, grid);
}

Tensor4<float> extract_patches(const std::vector<Image>& slices, const PatchGrid& grid) {
  const std::size_t p = grid.patch_size;
  Tensor4<float> out({slices.size() * grid.origins.size(), 1, p, p});
  std::size_t n = 0;
  for (const Image& image : slices) {
    check_grid_image(image, grid);
    for (const auto& [r0, c0] : grid.origins) {
      auto dst = out.plane(n++, 0);
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) dst[r * p + c] = image(r0 + r, c0 + c);
      }
    }
  }
  return out;
}

std::vector<Image> reassemble_slices(const Tensor4<float>& patches, const PatchGrid& grid) {
  const Shape4& s = patches.shape();
  const std::size_t per = grid.origins.size();
  const std::size_t p = grid.patch_size;
  if (per == 0 || s.c != 1 || s.h != p || s.w != p || s.n % per != 0) {
    throw ShapeError("reassemble: patches " + to_string(s) + " inconsistent with grid of " + std::to_string(per) +
                     " patches of " + std::to_string(p));
  }
  std::vector<Image> slices;
  slices.reserve(s.n / per);
  std::vector<double> sum(grid.slice_height * grid.slice_width);
  std::vector<std::uint32_t> count(sum.size());
  for (std::size_t slice = 0; slice < s.n / per; ++slice) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0u);
    for (std::size_t k = 0; k < per; ++k) {
      const auto [r0, c0] = grid.origins[k];
      const auto src = patches.plane(slice * per + k, 0);
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
          const std::size_t idx = (r0 + r) * grid.slice_width + c0 + c;
          sum[idx] += static_cast<double>(src[r * p + c]);
          ++count[idx];
        }
      }
    }
    Image image(grid.slice_height, grid.slice_width);
    auto dst = image.data();
    for (std::size_t idx = 0; idx < sum.size(); ++idx) {
      if (count[idx] == 0) throw ShapeError("reassemble: pixel not covered by any patch");
      dst[idx] = static_cast<float>(sum[idx] / count[idx]);
    }
    slices.push_back(std::move(image));
  }
  return slices;
}

Image reassemble(const Tensor4<float>& patches, const PatchGrid& grid) {
  if (patches.shape().n != grid.origins.size()) {
    throw ShapeError("reassemble: expected " + std::to_string(grid.origins.size()) + " patches, got " +
                     std::to_string(patches.shape().n));
  }
  return std::move(reassemble_slices(patches, grid).front());
}

ScaleRecord fit_scale(const std::vector<Image>& images) {
  double peak = 0.0;
  for (const Image& im : images) {
    require_finite(im.data(), "normalize input");
    for (const float v : im.data()) peak = std::max(peak, std::abs(static_cast<double>(v)));
  }
  if (!(peak > 0.0)) throw NumericError("normalize: input is all zero");
  return {peak};
}

std::vector<Image> normalize(const std::vector<Image>& images, const ScaleRecord& record) {
  if (!(record.scale > 0.0)) throw ConfigError("normalize: scale must be positive");
  std::vector<Image> out = images;
  for (Image& im : out) {
    for (float& v : im.data()) v = static_cast<float>(static_cast<double>(v) / record.scale);
  }
  return out;
}

std::pair<std::vector<Image>, ScaleRecord> normalize(const std::vector<Image>& images) {
  const ScaleRecord record = fit_scale(images);
  return {normalize(images, record), record};
}

std::vector<Image> denormalize(const std::vector<Image>& images, const ScaleRecord& record) {
  std::vector<Image> out = images;
  for (Image& im : out) {
    for (float& v : im.data()) v = static_cast<float>(static_cast<double>(v) * record.scale);
  }
  return out;
}

}  // namespace frnet
