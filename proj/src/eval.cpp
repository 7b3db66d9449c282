#include "frnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace frnet {

std::string Snr::to_string() const {
  if (infinite) return "inf";
  std::ostringstream s;
  s << std::setprecision(10) << db;
  return s.str();
}

Snr snr(std::span<const float> truth, std::span<const float> estimate) {
  if (truth.size() != estimate.size()) throw ShapeError("snr: truth and estimate differ in size");
  double signal = 0.0;
  double error = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double x = truth[k];
    const double e = x - static_cast<double>(estimate[k]);
    signal += x * x;
    error += e * e;
  }
  if (!(signal > 0.0)) throw NumericError("snr: truth is all zero");
  if (error == 0.0) return {true, 0.0};
  return {false, 10.0 * std::log10(signal / error)};
}

Snr snr(const Volume& truth, const Volume& estimate) {
  if (!truth.same_dims(estimate)) {
    throw ShapeError("snr: dims " + dims_string(truth) + " vs " + dims_string(estimate));
  }
  return snr(std::span<const float>(truth.samples), std::span<const float>(estimate.samples));
}

std::vector<Snr> snr_per_slice(const Volume& truth, const Volume& estimate) {
  if (!truth.same_dims(estimate)) throw ShapeError("snr_per_slice: dims differ");
  const auto a = time_slices(truth);
  const auto b = time_slices(estimate);
  std::vector<Snr> out;
  out.reserve(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    try {
      out.push_back(snr(a[t].data(), b[t].data()));
    } catch (const NumericError&) {
      out.push_back({false, std::nan("")});  // all-zero truth slice
    }
  }
  return out;
}

DerivativeMaps derivative_maps(const Image& image) {
  if (image.rows() < 2 || image.cols() < 2) throw ShapeError("derivative_maps: image must be at least 2x2");
  return {diff_cols(image), diff_rows(image)};
}

std::vector<float> extract_trace(const Volume& v, std::size_t inline_index, std::size_t xline_index) {
  if (inline_index >= v.n_inline || xline_index >= v.n_xline) {
    throw ConfigError("trace (" + std::to_string(inline_index) + "," + std::to_string(xline_index) +
                      ") outside volume " + dims_string(v));
  }
  const auto first = v.samples.begin() + static_cast<std::ptrdiff_t>(v.index(inline_index, xline_index, 0));
  return {first, first + static_cast<std::ptrdiff_t>(v.n_time)};
}

std::vector<unsigned char> slice_pixels(const Image& image, double clip_percentile, double* clip_out) {
  if (!(clip_percentile > 0.0 && clip_percentile <= 100.0)) throw ConfigError("clip percentile must be in (0, 100]");
  require_finite(image.data(), "export_slice_image");
  std::vector<double> mags;
  mags.reserve(image.size());
  for (const float v : image.data()) mags.push_back(std::abs(static_cast<double>(v)));
  double clip = 0.0;
  if (!mags.empty()) {
    const auto rank = static_cast<std::size_t>(std::ceil(clip_percentile / 100.0 * static_cast<double>(mags.size())));
    const std::size_t k = std::min(mags.size() - 1, rank == 0 ? 0 : rank - 1);
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    clip = mags[k];
  }
  if (clip_out != nullptr) *clip_out = clip;
  const double scale = clip > 0.0 ? clip : 1.0;
  std::vector<unsigned char> pixels(image.size());
  auto src = image.data();
  for (std::size_t k = 0; k < src.size(); ++k) {
    const double v = std::clamp(static_cast<double>(src[k]) / scale, -1.0, 1.0);
    pixels[k] = static_cast<unsigned char>(std::clamp(std::floor((v + 1.0) * 128.0), 0.0, 255.0));
  }
  return pixels;
}

double export_slice_image(const Image& image, const std::filesystem::path& path, double clip_percentile) {
  double clip = 0.0;
  const auto pixels = slice_pixels(image, clip_percentile, &clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  out << "P5\n# clip_percentile=" << clip_percentile << " clip=" << std::setprecision(9) << clip << "\n"
      << image.cols() << " " << image.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
  return clip;
}

const MetricsRow& MetricsReport::row(const std::string& variant) const {
  for (const MetricsRow& r : rows) {
    if (r.variant == variant) return r;
  }
  throw ConfigError("no metrics row for variant '" + variant + "'");
}

namespace {

double along_stripe_mean_abs(const Volume& noisy, const Volume& estimate, FootprintAxis axis) {
  const std::size_t ni = noisy.n_inline, nx = noisy.n_xline, nt = noisy.n_time;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t x = 0; x < nx; ++x) {
      const bool has_next = axis == FootprintAxis::rows ? i + 1 < ni : x + 1 < nx;
      if (!has_next) continue;
      const std::size_t ni2 = axis == FootprintAxis::rows ? i + 1 : i;
      const std::size_t nx2 = axis == FootprintAxis::rows ? x : x + 1;
      for (std::size_t t = 0; t < nt; ++t) {
        const double r0 = static_cast<double>(noisy.at(i, x, t)) - estimate.at(i, x, t);
        const double r1 = static_cast<double>(noisy.at(ni2, nx2, t)) - estimate.at(ni2, nx2, t);
        sum += std::abs(r1 - r0);
        ++count;
      }
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

std::string snr_cell(const std::optional<Snr>& s) { return s ? s->to_string() : "NA"; }

}  // namespace

MetricsReport compare_report(const Volume* truth, const Volume& noisy, const std::vector<NamedVolume>& variants,
                             FootprintAxis axis) {
  noisy.validate();
  if (truth != nullptr && !truth->same_dims(noisy)) {
    throw ShapeError("compare_report: truth " + dims_string(*truth) + " vs noisy " + dims_string(noisy));
  }
  MetricsReport report;
  if (truth != nullptr) report.input_snr = snr(*truth, noisy);
  for (const auto& [name, estimate] : variants) {
    if (!estimate.same_dims(noisy)) {
      throw ShapeError("compare_report: variant '" + name + "' has dims " + dims_string(estimate) + ", expected " +
                       dims_string(noisy));
    }
    MetricsRow row;
    row.variant = name;
    if (truth != nullptr) row.snr = snr(*truth, estimate);
    for (std::size_t k = 0; k < noisy.size(); ++k) {
      const double r = static_cast<double>(noisy.samples[k]) - estimate.samples[k];
      row.residual_energy += r * r;
    }
    row.along_stripe_residual = along_stripe_mean_abs(noisy, estimate, axis);
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const MetricsRow& a, const MetricsRow& b) { return a.variant < b.variant; });
  return report;
}

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  out << "variant,snr_db,residual_energy,along_stripe_residual\n" << std::setprecision(10);
  out << "input," << snr_cell(report.input_snr) << ",0,0\n";
  for (const MetricsRow& r : report.rows) {
    out << r.variant << "," << snr_cell(r.snr) << "," << r.residual_energy << "," << r.along_stripe_residual << "\n";
  }
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
}

void write_slice_snr_csv(const Volume& truth, const std::vector<NamedVolume>& variants,
                         const std::filesystem::path& path) {
  std::vector<std::vector<Snr>> columns;
  for (const auto& [name, v] : variants) columns.push_back(snr_per_slice(truth, v));
  std::ofstream out(path);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  out << "t_index";
  for (const auto& [name, v] : variants) out << ",snr_db_" << name;
  out << "\n";
  for (std::size_t t = 0; t < truth.n_time; ++t) {
    out << t;
    for (const auto& col : columns) out << "," << col[t].to_string();
    out << "\n";
  }
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
}

void write_trace_csv(const Volume* clean, const Volume& noisy, const std::vector<NamedVolume>& variants,
                     std::size_t inline_index, std::size_t xline_index, const std::filesystem::path& path) {
  std::vector<std::vector<float>> columns;
  std::ofstream out(path);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  out << "t_index";
  if (clean != nullptr) {
    if (!clean->same_dims(noisy)) throw ShapeError("trace export: clean volume dims differ from noisy");
    out << ",clean";
    columns.push_back(extract_trace(*clean, inline_index, xline_index));
  }
  out << ",noisy";
  columns.push_back(extract_trace(noisy, inline_index, xline_index));
  for (const auto& [name, v] : variants) {
    if (!v.same_dims(noisy)) throw ShapeError("trace export: variant '" + name + "' dims differ from noisy");
    out << ",denoised_" << name;
    columns.push_back(extract_trace(v, inline_index, xline_index));
  }
  out << "\n" << std::setprecision(9);
  for (std::size_t t = 0; t < noisy.n_time; ++t) {
    out << t;
    for (const auto& col : columns) out << "," << col[t];
    out << "\n";
  }
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
}

double correlation(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("correlation: sizes differ or empty");
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - ma;
    const double db = b[k] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericError("correlation: zero variance");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace frnet
