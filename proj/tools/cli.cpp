#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frnet/checkpoint.hpp"
#include "frnet/data.hpp"
#include "frnet/eval.hpp"
#include "frnet/gradcheck.hpp"
#include "frnet/train.hpp"

namespace fs = std::filesystem;

namespace frnet::cli {
namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

// One manifest per command, written next to its outputs. The config block is
// CLI11's own serialization, so the manifest can be fed back via --config.
class RunManifest {
 public:
  RunManifest(std::string command, const CLI::App* app) : command_(std::move(command)), app_(app), started_(utc_now()) {}

  void add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void add(const std::string& key, double value) { add(key, num(value)); }

  void write(const fs::path& dir) const {
    const fs::path path = dir / (command_ + ".manifest");
    std::ofstream out(path);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
    out << "# frnet run manifest\n"
        << "command=\"" << command_ << "\"\n"
        << "tool_version=\"" << FRNET_VERSION << "\"\n"
        << "started_utc=\"" << started_ << "\"\n"
        << "finished_utc=\"" << utc_now() << "\"\n"
        << "# config\n"
        << app_->config_to_str(true, false) << "# inputs, outputs, results\n";
    for (const auto& [k, v] : entries_) out << k << "=\"" << v << "\"\n";
    if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
  }

 private:
  std::string command_;
  const CLI::App* app_;
  std::string started_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError(FormatError::Kind::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

// Placeholder so --config shows up in --help; the file itself is expanded
// into flags by expand_config() before parsing.
std::string g_config_placeholder;

void add_config(CLI::App* sub) {
  sub->add_option("--config", g_config_placeholder,
                  "key=value file with the same names as the flags; flags override it")
      ->configurable(false);
}

std::string trim(const std::string& v) {
  const auto a = v.find_first_not_of(" \t");
  const auto b = v.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
}

std::string unquote(std::string v) {
  v = trim(v);
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '[' && v.back() == ']'))) {
    v = v.substr(1, v.size() - 2);
  }
  return v;
}

// Rewrites `sub ... --config FILE ...` into `sub --key=value ... ...` for every
// key naming an option of `sub` that is not given on the command line. Keys
// that are not options (e.g. result lines of a run manifest) are ignored.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  std::size_t sub_at = 1;
  while (sub_at < args.size() && app.get_subcommand_no_throw(args[sub_at]) == nullptr) ++sub_at;
  if (sub_at >= args.size()) return args;
  const CLI::App* sub = app.get_subcommand_no_throw(args[sub_at]);

  std::vector<std::string> files;
  std::vector<std::string> rest;
  for (std::size_t k = sub_at + 1; k < args.size(); ++k) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw CLI::ArgumentMismatch("--config", 1, 0);
      files.push_back(args[++k]);
    } else if (args[k].rfind("--config=", 0) == 0) {
      files.push_back(args[k].substr(9));
    } else {
      rest.push_back(args[k]);
    }
  }
  if (files.empty()) return args;

  auto given = [&](const std::string& flag) {
    for (const std::string& a : rest) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1);
  for (const std::string& file : files) {
    if (!fs::is_regular_file(file)) throw CLI::FileError::Missing(file);
    for (const auto& [raw_key, value] : read_key_values(file)) {
      const std::string key = trim(raw_key);
      const std::string flag = "--" + key;
      if (key == "config" || sub->get_option_no_throw(flag) == nullptr || given(flag)) continue;
      const std::string v = unquote(value);
      if (!v.empty()) out.push_back(flag + "=" + v);
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::vector<std::size_t> dims{64, 64, 128};
  SyntheticConfig cfg;
  std::string out = ".";
};

void setup_gen(CLI::App& app, GenArgs& a) {
  auto* sub = app.add_subcommand("gen", "Generate the synthetic benchmark (clean, footprint, noisy)");
  add_config(sub);
  sub->add_option("--dims", a.dims, "n_inline,n_xline,n_time")->delimiter(',')->expected(3)->capture_default_str();
  sub->add_option("--seed", a.cfg.seed, "noise seed")->capture_default_str();
  sub->add_option("--dt", a.cfg.sample_interval, "sample interval in seconds")->capture_default_str();
  sub->add_option("--events", a.cfg.event_count, "number of linear events")->capture_default_str();
  sub->add_option("--freqs", a.cfg.wavelet_peak_freqs, "Ricker peak frequency per event (Hz)")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--footprint-period", a.cfg.footprint_period, "stripe period in traces")->capture_default_str();
  sub->add_option("--footprint-amplitude", a.cfg.footprint_amplitude)->capture_default_str();
  sub->add_option("--footprint-decay", a.cfg.footprint_decay, "exponential decay per trace")->capture_default_str();
  sub->add_option("--noise-sigma", a.cfg.random_noise_sigma)->capture_default_str();
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
}

int cmd_gen(const CLI::App* sub, GenArgs a) {
  a.cfg.n_inline = a.dims[0];
  a.cfg.n_xline = a.dims[1];
  a.cfg.n_time = a.dims[2];
  RunManifest manifest("gen", sub);
  const SyntheticVolumes v = gen_synthetic(a.cfg);
  const fs::path out(a.out);
  ensure_dir(out);
  save_volume(v.clean, out / "clean.frv");
  save_volume(v.footprint, out / "footprint.frv");
  save_volume(v.noisy, out / "noisy.frv");
  manifest.add("output.clean", (out / "clean.frv").string());
  manifest.add("output.footprint", (out / "footprint.frv").string());
  manifest.add("output.noisy", (out / "noisy.frv").string());
  manifest.add("output.dims", dims_string(v.noisy));
  manifest.add("seed.noise", std::to_string(a.cfg.seed));
  const Snr input_snr = snr(v.clean, v.noisy);
  manifest.add("result.input_snr_db", input_snr.to_string());
  manifest.write(out);
  std::cout << "wrote " << dims_string(v.noisy) << " volumes to " << out.string() << "\n"
            << "input SNR (noisy vs clean): " << input_snr.to_string() << " dB\n";
  return ok;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string input;
  std::string truth;
  std::string out = "run";
  std::string loss = "frnet";
  std::string axis = "rows";
  TrainConfig cfg;
  UNetConfig net;
  std::size_t stride = 24;
  bool quiet = false;
  bool deterministic = true;
};

void setup_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train the autoencoder on one noisy volume (unsupervised)");
  add_config(sub);
  sub->add_option("--input", a.input, "noisy FRV1 volume")->required()->check(CLI::ExistingFile);
  sub->add_option("--truth", a.truth, "optional clean FRV1 volume; adds SNR to the manifest")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  sub->add_option("--loss", a.loss, "frnet | tv_baseline | mse_only")
      ->check(CLI::IsMember({"frnet", "tv_baseline", "mse_only"}))
      ->capture_default_str();
  sub->add_option("--lambda1", a.cfg.loss.lambda1, "clean-estimate across-stripe weight")->capture_default_str();
  sub->add_option("--lambda2", a.cfg.loss.lambda2, "residual along-stripe weight")->capture_default_str();
  sub->add_option("--eps", a.cfg.loss.eps_smooth, "L1 smoothing")->capture_default_str();
  sub->add_option("--footprint-axis", a.axis, "rows | columns")
      ->check(CLI::IsMember({"rows", "columns"}))
      ->capture_default_str();
  sub->add_option("--lr", a.cfg.learning_rate)->capture_default_str();
  sub->add_option("--batch", a.cfg.batch_size)->capture_default_str();
  sub->add_option("--epochs", a.cfg.epochs)->capture_default_str();
  sub->add_option("--seed", a.net.seed, "weight-initialization seed")->capture_default_str();
  sub->add_option("--shuffle-seed", a.cfg.shuffle_seed)->capture_default_str();
  sub->add_option("--depth", a.net.depth)->capture_default_str();
  sub->add_option("--base", a.net.base_channels, "channels of the first stage")->capture_default_str();
  sub->add_option("--patch", a.net.input_size, "patch size (= network input size)")->capture_default_str();
  sub->add_option("--stride", a.stride, "patch stride")->capture_default_str();
  sub->add_option("--checkpoint-every", a.cfg.checkpoint_every, "epochs between extra checkpoints (0: off)")
      ->capture_default_str();
  sub->add_option("--deterministic", a.deterministic,
                  "fixed reduction order; kernels are single-threaded, so every run is deterministic")
      ->capture_default_str();
  sub->add_flag("--quiet", a.quiet, "no per-epoch output");
}

void add_metrics(RunManifest& manifest, const MetricsReport& report) {
  if (report.input_snr) manifest.add("result.input_snr_db", report.input_snr->to_string());
  for (const MetricsRow& row : report.rows) {
    const std::string p = "result." + row.variant + ".";
    if (row.snr) manifest.add(p + "snr_db", row.snr->to_string());
    manifest.add(p + "residual_energy", row.residual_energy);
    manifest.add(p + "along_stripe_residual", row.along_stripe_residual);
  }
}

int cmd_train(const CLI::App* sub, TrainArgs a) {
  a.cfg.loss_variant = parse_loss_variant(a.loss);
  a.cfg.loss.footprint_axis = parse_footprint_axis(a.axis);
  a.cfg.validate();
  a.net.validate();
  RunManifest manifest("train", sub);

  const Volume noisy = load_volume(a.input);
  noisy.validate();
  std::optional<Volume> truth;
  if (!a.truth.empty()) truth = load_volume(a.truth);

  const PatchGrid grid = make_patch_grid(noisy.n_inline, noisy.n_xline, a.net.input_size, a.stride);
  const auto [slices, scale] = normalize(time_slices(noisy));
  const Tensor4<float> patches = extract_patches(slices, grid);

  const fs::path out(a.out);
  ensure_dir(out);
  CheckpointMeta meta;
  meta.variant = a.cfg.loss_variant;
  meta.loss = a.cfg.loss;
  meta.scale = scale.scale;
  meta.patch_stride = a.stride;
  meta.extra["epochs"] = std::to_string(a.cfg.epochs);
  meta.extra["learning_rate"] = num(a.cfg.learning_rate);
  meta.extra["batch_size"] = std::to_string(a.cfg.batch_size);
  meta.extra["shuffle_seed"] = std::to_string(a.cfg.shuffle_seed);
  meta.extra["input"] = a.input;

  TrainHooks hooks;
  if (!a.quiet) {
    hooks.on_epoch = [&](std::size_t epoch, const LossValue& v) {
      std::cout << "epoch " << epoch << "/" << a.cfg.epochs << "  total " << num(v.total) << "  mse "
                << num(v.mse_term) << "  utv_clean " << num(v.utv_clean_term) << "  utv_residual "
                << num(v.utv_residual_term) << std::endl;
    };
  }
  hooks.on_checkpoint = [&](std::size_t epoch, const UNetParams<float>& p) {
    save_checkpoint(out / ("checkpoint_e" + std::to_string(epoch) + ".ckpt"), p, meta);
  };

  std::cout << "training " << to_string(a.cfg.loss_variant) << " on " << patches.shape().n << " patches of "
            << a.net.input_size << "x" << a.net.input_size << " (" << parameter_count(a.net) << " parameters)"
            << std::endl;
  TrainResult result = train(build<float>(a.net), patches, a.cfg, hooks);

  const fs::path ckpt = out / "checkpoint.ckpt";
  result.report.checkpoint_path = ckpt.string();
  save_checkpoint(ckpt, result.params, meta);
  write_loss_csv(result.report, (out / "loss.csv").string());

  {
    std::ofstream log(out / "train_report.txt");
    if (!log) throw FormatError(FormatError::Kind::io, "cannot write train_report.txt");
    const LossValue& last = result.report.history.back();
    log << "checkpoint=" << ckpt.string() << "\n"
        << "epochs=" << result.report.history.size() << "\n"
        << "steps=" << result.report.steps << "\n"
        << "wall_seconds=" << num(result.report.wall_seconds) << "\n"
        << "patches=" << patches.shape().n << "\n"
        << "final.total=" << num(last.total) << "\n"
        << "final.mse=" << num(last.mse_term) << "\n"
        << "final.utv_clean=" << num(last.utv_clean_term) << "\n"
        << "final.utv_residual=" << num(last.utv_residual_term) << "\n"
        << "config.loss_variant=" << to_string(a.cfg.loss_variant) << "\n"
        << "config.lambda1=" << num(a.cfg.loss.lambda1) << "\n"
        << "config.lambda2=" << num(a.cfg.loss.lambda2) << "\n"
        << "config.eps_smooth=" << num(a.cfg.loss.eps_smooth) << "\n"
        << "config.footprint_axis=" << to_string(a.cfg.loss.footprint_axis) << "\n"
        << "config.learning_rate=" << num(a.cfg.learning_rate) << "\n"
        << "config.batch_size=" << a.cfg.batch_size << "\n"
        << "config.shuffle_seed=" << a.cfg.shuffle_seed << "\n";
  }

  const DenoiseResult d = denoise_volume(result.params, noisy, grid, scale);
  const MetricsReport report =
      compare_report(truth ? &*truth : nullptr, noisy, {{to_string(a.cfg.loss_variant), d.clean_estimate}},
                     a.cfg.loss.footprint_axis);

  manifest.add("input.noisy", a.input);
  if (truth) manifest.add("input.truth", a.truth);
  manifest.add("output.checkpoint", ckpt.string());
  manifest.add("output.weights", weights_path(ckpt).string());
  manifest.add("output.loss_csv", (out / "loss.csv").string());
  manifest.add("output.report", (out / "train_report.txt").string());
  manifest.add("seed.init", std::to_string(a.net.seed));
  manifest.add("seed.shuffle", std::to_string(a.cfg.shuffle_seed));
  manifest.add("data.scale", scale.scale);
  manifest.add("result.wall_seconds", result.report.wall_seconds);
  add_metrics(manifest, report);
  manifest.write(out);

  std::cout << "checkpoint: " << ckpt.string() << "  (" << num(result.report.wall_seconds) << " s)\n";
  for (const MetricsRow& row : report.rows) {
    if (report.input_snr) std::cout << "input SNR " << report.input_snr->to_string() << " dB, ";
    if (row.snr) std::cout << row.variant << " SNR " << row.snr->to_string() << " dB, ";
    std::cout << "residual energy " << num(row.residual_energy) << "\n";
  }
  return ok;
}

// ---------------------------------------------------------------- denoise

struct DenoiseArgs {
  std::string checkpoint;
  std::string input;
  std::string out = ".";
  std::size_t stride = 0;
  bool verify = false;
};

void setup_denoise(CLI::App& app, DenoiseArgs& a) {
  auto* sub = app.add_subcommand("denoise", "Split a volume into clean and footprint estimates");
  add_config(sub);
  sub->add_option("--checkpoint", a.checkpoint, "checkpoint manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--input", a.input, "FRV1 volume")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  sub->add_option("--stride", a.stride, "patch stride (0: the training stride)")->capture_default_str();
  sub->add_flag("--verify", a.verify, "re-read the outputs and check footprint == input - clean bitwise");
}

int cmd_denoise(const CLI::App* sub, const DenoiseArgs& a) {
  RunManifest manifest("denoise", sub);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Volume input = load_volume(a.input);
  input.validate();
  const std::size_t stride = a.stride > 0 ? a.stride : ck.meta.patch_stride;
  const PatchGrid grid = make_patch_grid(input.n_inline, input.n_xline, ck.params.config.input_size, stride);
  const DenoiseResult d = denoise_volume(ck.params, input, grid, ScaleRecord{ck.meta.scale});

  const fs::path out(a.out);
  ensure_dir(out);
  const fs::path clean_path = out / "clean_estimate.frv";
  const fs::path foot_path = out / "footprint_estimate.frv";
  save_volume(d.clean_estimate, clean_path);
  save_volume(d.footprint_estimate, foot_path);
  manifest.add("input.checkpoint", a.checkpoint);
  manifest.add("input.volume", a.input);
  manifest.add("output.clean_estimate", clean_path.string());
  manifest.add("output.footprint_estimate", foot_path.string());
  manifest.add("grid.patch_size", std::to_string(grid.patch_size));
  manifest.add("grid.stride", std::to_string(grid.stride));

  if (a.verify) {
    const Volume c = load_volume(clean_path);
    const Volume f = load_volume(foot_path);
    const std::size_t bad = decomposition_mismatches(input, c, f);
    manifest.add("verify.mismatched_samples", std::to_string(bad));
    manifest.write(out);
    if (bad > 0) {
      std::cerr << "verify: " << bad << " samples where footprint != input - clean\n";
      return numeric_failure;
    }
    std::cout << "verify: footprint == input - clean (float32, bitwise) for all " << input.size() << " samples\n";
    return ok;
  }
  manifest.write(out);
  std::cout << "wrote " << clean_path.string() << " and " << foot_path.string() << "\n";
  return ok;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string noisy;
  std::string truth;
  std::vector<std::string> estimates;
  std::string out = ".";
  std::string trace;
  std::vector<std::size_t> slices;
  std::string axis = "rows";
  double clip = 99.0;
};

void setup_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Metrics, slice images, derivative maps and trace export");
  add_config(sub);
  sub->add_option("--noisy", a.noisy, "noisy input volume")->required()->check(CLI::ExistingFile);
  sub->add_option("--truth", a.truth, "clean volume (omit for field data)")->check(CLI::ExistingFile);
  sub->add_option("--estimate", a.estimates, "name=path of a clean estimate (repeatable)")->required();
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  sub->add_option("--trace", a.trace, "inline,xline of a trace to export");
  sub->add_option("--slice", a.slices, "time indices to export as images (default: middle)")->delimiter(',');
  sub->add_option("--footprint-axis", a.axis, "rows | columns")
      ->check(CLI::IsMember({"rows", "columns"}))
      ->capture_default_str();
  sub->add_option("--clip-percentile", a.clip)->capture_default_str();
}

std::pair<std::size_t, std::size_t> parse_trace(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const std::size_t i = std::stoul(text.substr(0, comma), &used);
    const std::string rest = text.substr(comma + 1);
    std::size_t used2 = 0;
    const std::size_t x = std::stoul(rest, &used2);
    if (used != comma || used2 != rest.size()) throw std::invalid_argument(text);
    return {i, x};
  } catch (const std::logic_error&) {
    throw ConfigError("--trace expects inline,xline; got '" + text + "'");
  }
}

void export_slice_set(const std::string& name, const Volume& v, std::size_t t, const fs::path& dir, double clip) {
  std::ostringstream stem;
  stem << name << "_t" << std::setw(4) << std::setfill('0') << t;
  const std::string suffix = "_clip" + num(clip) + ".pgm";
  const Image slice = time_slices(v)[t];
  export_slice_image(slice, dir / (stem.str() + suffix), clip);
  const DerivativeMaps maps = derivative_maps(slice);
  export_slice_image(maps.horizontal, dir / (stem.str() + "_dh" + suffix), clip);
  export_slice_image(maps.vertical, dir / (stem.str() + "_dv" + suffix), clip);
}

int cmd_eval(const CLI::App* sub, const EvalArgs& a) {
  RunManifest manifest("eval", sub);
  const FootprintAxis axis = parse_footprint_axis(a.axis);
  const Volume noisy = load_volume(a.noisy);
  std::optional<Volume> truth;
  if (!a.truth.empty()) truth = load_volume(a.truth);
  std::vector<NamedVolume> variants;
  for (const std::string& spec : a.estimates) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(path).stem().string() : spec.substr(0, eq);
    if (name.empty() || name.find(',') != std::string::npos) throw ConfigError("bad estimate name in '" + spec + "'");
    if (!fs::exists(path)) throw ConfigError("estimate file not found: " + path);
    variants.emplace_back(name, load_volume(path));
    manifest.add("input.estimate." + name, path);
  }
  const bool with_trace = !a.trace.empty();
  const auto [trace_i, trace_x] = with_trace ? parse_trace(a.trace) : std::pair<std::size_t, std::size_t>{0, 0};
  std::vector<std::size_t> slices = a.slices;
  if (slices.empty()) slices.push_back(noisy.n_time / 2);
  for (std::size_t t : slices) {
    if (t >= noisy.n_time) throw ConfigError("--slice " + std::to_string(t) + " outside volume " + dims_string(noisy));
  }

  const MetricsReport report = compare_report(truth ? &*truth : nullptr, noisy, variants, axis);
  const fs::path out(a.out);
  ensure_dir(out);
  write_metrics_csv(report, out / "metrics.csv");
  manifest.add("input.noisy", a.noisy);
  if (truth) manifest.add("input.truth", a.truth);
  manifest.add("output.metrics_csv", (out / "metrics.csv").string());
  if (truth) {
    write_slice_snr_csv(*truth, variants, out / "slice_snr.csv");
    manifest.add("output.slice_snr_csv", (out / "slice_snr.csv").string());
  }
  if (with_trace) {
    const std::string name = "trace_i" + std::to_string(trace_i) + "_x" + std::to_string(trace_x) + ".csv";
    write_trace_csv(truth ? &*truth : nullptr, noisy, variants, trace_i, trace_x, out / name);
    manifest.add("output.trace_csv", (out / name).string());
  }
  for (std::size_t t : slices) {
    export_slice_set("noisy", noisy, t, out, a.clip);
    if (truth) export_slice_set("truth", *truth, t, out, a.clip);
    for (const auto& [name, v] : variants) {
      export_slice_set(name, v, t, out, a.clip);
      Volume residual(v.n_inline, v.n_xline, v.n_time);
      for (std::size_t k = 0; k < v.size(); ++k) residual.samples[k] = noisy.samples[k] - v.samples[k];
      export_slice_set(name + "_residual", residual, t, out, a.clip);
    }
  }
  add_metrics(manifest, report);
  manifest.write(out);

  // Padded columns followed by a space so long numbers never run together.
  auto row = [](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    std::cout << std::left << std::setw(16) << a << ' ' << std::setw(22) << b << ' ' << std::setw(22) << c << ' ' << d
              << "\n";
  };
  row("variant", "snr_db", "residual_energy", "along_stripe_residual");
  row("input", report.input_snr ? report.input_snr->to_string() : "NA", "0", "0");
  for (const MetricsRow& r : report.rows) {
    row(r.variant, r.snr ? r.snr->to_string() : "NA", num(r.residual_energy), num(r.along_stripe_residual));
  }
  return ok;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::size_t depth = 0;
  std::size_t base = 0;
  std::size_t size = 8;
  std::size_t batch = 2;
  std::uint64_t seed = 0;
  std::string loss = "frnet";
  GradcheckOptions options;
  bool verbose = false;
};

void setup_gradcheck(CLI::App& app, GradcheckArgs& a) {
  auto* sub = app.add_subcommand("gradcheck", "Finite-difference check of backpropagation (64-bit)");
  add_config(sub);
  sub->add_option("--depth", a.depth, "single case depth (default: the {1,2}x{2,4} matrix)");
  sub->add_option("--base", a.base, "single case base channels");
  sub->add_option("--size", a.size, "input size")->capture_default_str();
  sub->add_option("--batch", a.batch)->capture_default_str();
  sub->add_option("--seed", a.seed)->capture_default_str();
  sub->add_option("--loss", a.loss)->check(CLI::IsMember({"frnet", "tv_baseline", "mse_only"}))->capture_default_str();
  sub->add_option("--lambda1", a.options.loss.lambda1)->capture_default_str();
  sub->add_option("--lambda2", a.options.loss.lambda2)->capture_default_str();
  sub->add_option("--eps", a.options.loss.eps_smooth, "L1 smoothing (must be > 0)")->capture_default_str();
  sub->add_option("--step", a.options.step, "finite-difference step")->capture_default_str();
  sub->add_option("--tol", a.options.tolerance, "relative error threshold")->capture_default_str();
  sub->add_flag("--verbose", a.verbose, "print the worst entry of every parameter array");
}

int cmd_gradcheck(const GradcheckArgs& a) {
  GradcheckOptions options = a.options;
  options.variant = parse_loss_variant(a.loss);
  options.loss.validate();

  std::vector<GradcheckCase> cases;
  if (a.depth == 0 && a.base == 0) {
    cases = default_gradcheck_matrix();
    for (GradcheckCase& c : cases) {
      c.size = a.size;
      c.batch = a.batch;
      c.seed += a.seed;
    }
  } else {
    cases.push_back({a.depth == 0 ? 1 : a.depth, a.base == 0 ? 2 : a.base, a.size, a.batch, a.seed});
  }

  bool all = true;
  for (const GradcheckCase& c : cases) {
    const GradcheckResult r = run_gradcheck(c, options);
    all = all && r.passed;
    std::cout << (r.passed ? "PASS" : "FAIL") << "  depth=" << c.depth << " base=" << c.base_channels << " size=" << c.size
              << "  max_rel_error=" << std::scientific << std::setprecision(3) << r.max_rel_error << std::defaultfloat
              << "  skipped=" << r.kink_crossings << "/" << r.coordinates << "  (" << std::fixed << std::setprecision(2) << r.seconds << " s)" << std::defaultfloat << "\n";
    if (!r.passed || a.verbose) {
      for (const GradcheckEntry& e : r.worst_per_tensor) {
        std::cout << "    " << std::left << std::setw(28) << e.tensor << std::right << " [" << e.index << "]"
                  << std::scientific << std::setprecision(6) << "  analytic " << e.analytic << "  numeric "
                  << e.numeric << "  rel " << std::setprecision(3) << e.rel_error << std::defaultfloat << "\n";
      }
    }
  }
  return all ? ok : numeric_failure;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"frnet: unsupervised acquisition-footprint removal with a UTV-regularized autoencoder"};
  app.set_version_flag("--version", std::string(FRNET_VERSION));
  app.require_subcommand(1);

  GenArgs gen;
  TrainArgs tr;
  DenoiseArgs dn;
  EvalArgs ev;
  GradcheckArgs gc;
  setup_gen(app, gen);
  setup_train(app, tr);
  setup_denoise(app, dn);
  setup_eval(app, ev);
  setup_gradcheck(app, gc);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(app, std::move(args));
    std::vector<const char*> cargs;
    for (const std::string& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string& name = sub->get_name();
    if (name == "gen") return cmd_gen(sub, gen);
    if (name == "train") return cmd_train(sub, tr);
    if (name == "denoise") return cmd_denoise(sub, dn);
    if (name == "eval") return cmd_eval(sub, ev);
    return cmd_gradcheck(gc);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return numeric_failure;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return data_error;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return data_error;
  }
}

}  // namespace frnet::cli
