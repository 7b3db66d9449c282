#include "frnet/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "binary_io.hpp"

namespace frnet {

namespace {

constexpr const char* kFormat = "FRNET-CKPT/1";

std::string layer_line(const LayerSpec& l) {
  std::ostringstream s;
  s << l.name << " in=" << l.in_channels << " out=" << l.out_channels << " k=3 relu=" << (l.relu ? 1 : 0)
    << " weights=" << 9 * l.in_channels * l.out_channels << " bias=" << l.out_channels;
  return s.str();
}

std::string exact(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

[[noreturn]] void manifest_error(const std::string& what) {
  throw FormatError(FormatError::Kind::manifest, "checkpoint manifest: " + what);
}

const std::string& field(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) manifest_error("missing key '" + key + "'");
  return it->second;
}

std::size_t to_count(const std::string& text, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size()) manifest_error("bad integer for '" + key + "'");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    manifest_error("bad integer for '" + key + "'");
  }
}

double to_real(const std::string& text, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) manifest_error("bad number for '" + key + "'");
    return v;
  } catch (const std::logic_error&) {
    manifest_error("bad number for '" + key + "'");
  }
}

}  // namespace

std::filesystem::path weights_path(const std::filesystem::path& manifest_path) {
  return std::filesystem::path(manifest_path.string() + ".weights");
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(FormatError::Kind::manifest, path.string() + ": line without '=': " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void save_checkpoint(const std::filesystem::path& manifest_path, const UNetParams<float>& params,
                     const CheckpointMeta& meta) {
  const auto blob = weights_path(manifest_path);
  std::ofstream m(manifest_path);
  if (!m) throw FormatError(FormatError::Kind::io, "cannot write " + manifest_path.string());
  const UNetConfig& c = params.config;
  m << "format=" << kFormat << "\n";
  m << "net.depth=" << c.depth << "\n";
  m << "net.base_channels=" << c.base_channels << "\n";
  m << "net.input_size=" << c.input_size << "\n";
  m << "net.seed=" << c.seed << "\n";
  m << "net.padding=same\n";
  m << "net.upsample=nearest2x+conv3x3\n";
  m << "net.skip=concat\n";
  m << "net.output=linear\n";
  m << "loss.variant=" << to_string(meta.variant) << "\n";
  m << "loss.lambda1=" << exact(meta.loss.lambda1) << "\n";
  m << "loss.lambda2=" << exact(meta.loss.lambda2) << "\n";
  m << "loss.footprint_axis=" << to_string(meta.loss.footprint_axis) << "\n";
  m << "loss.eps_smooth=" << exact(meta.loss.eps_smooth) << "\n";
  m << "loss.reduction=batch_mean_pixel_sum\n";
  m << "data.scale=" << exact(meta.scale) << "\n";
  m << "data.patch_size=" << c.input_size << "\n";
  m << "data.patch_stride=" << meta.patch_stride << "\n";
  for (const auto& [k, v] : meta.extra) m << "run." << k << "=" << v << "\n";
  m << "layers=" << params.manifest.size() << "\n";
  for (std::size_t i = 0; i < params.manifest.size(); ++i) m << "layer." << i << "=" << layer_line(params.manifest[i]) << "\n";
  m << "weights.file=" << blob.filename().string() << "\n";
  m << "weights.floats=" << params.parameter_count() << "\n";
  m << "weights.encoding=float32-le\n";
  if (!m) throw FormatError(FormatError::Kind::io, "write failed: " + manifest_path.string());

  std::ofstream w(blob, std::ios::binary);
  if (!w) throw FormatError(FormatError::Kind::io, "cannot write " + blob.string());
  for (const auto t : params.tensors()) detail::put_f32(w, t);
  if (!w) throw FormatError(FormatError::Kind::io, "write failed: " + blob.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  const auto kv = read_key_values(manifest_path);
  if (field(kv, "format") != kFormat) manifest_error("unsupported format '" + field(kv, "format") + "'");

  UNetConfig config;
  config.depth = to_count(field(kv, "net.depth"), "net.depth");
  config.base_channels = to_count(field(kv, "net.base_channels"), "net.base_channels");
  config.input_size = to_count(field(kv, "net.input_size"), "net.input_size");
  config.seed = to_count(field(kv, "net.seed"), "net.seed");
  try {
    config.validate();
  } catch (const ConfigError& e) {
    manifest_error(e.what());
  }
  if (field(kv, "net.upsample") != "nearest2x+conv3x3" || field(kv, "net.skip") != "concat") {
    manifest_error("unsupported architecture variant");
  }

  const auto manifest = layer_manifest(config);
  if (to_count(field(kv, "layers"), "layers") != manifest.size()) manifest_error("layer count disagrees with config");
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (field(kv, "layer." + std::to_string(i)) != layer_line(manifest[i])) {
      manifest_error("layer " + std::to_string(i) + " disagrees with config");
    }
  }
  const std::size_t floats = to_count(field(kv, "weights.floats"), "weights.floats");
  if (floats != parameter_count(config)) manifest_error("weights.floats disagrees with layer list");

  Checkpoint ckpt;
  ckpt.meta.variant = parse_loss_variant(field(kv, "loss.variant"));
  ckpt.meta.loss.lambda1 = to_real(field(kv, "loss.lambda1"), "loss.lambda1");
  ckpt.meta.loss.lambda2 = to_real(field(kv, "loss.lambda2"), "loss.lambda2");
  ckpt.meta.loss.footprint_axis = parse_footprint_axis(field(kv, "loss.footprint_axis"));
  ckpt.meta.loss.eps_smooth = to_real(field(kv, "loss.eps_smooth"), "loss.eps_smooth");
  ckpt.meta.scale = to_real(field(kv, "data.scale"), "data.scale");
  if (!(ckpt.meta.scale > 0.0)) manifest_error("data.scale must be positive");
  ckpt.meta.patch_stride = to_count(field(kv, "data.patch_stride"), "data.patch_stride");
  for (const auto& [k, v] : kv) {
    if (k.rfind("run.", 0) == 0) ckpt.meta.extra[k.substr(4)] = v;
  }

  const auto blob = manifest_path.parent_path() / field(kv, "weights.file");
  std::ifstream w(blob, std::ios::binary | std::ios::ate);
  if (!w) throw FormatError(FormatError::Kind::io, "cannot open " + blob.string());
  const auto bytes = static_cast<std::size_t>(w.tellg());
  if (bytes != 4 * floats) {
    throw FormatError(FormatError::Kind::size_mismatch, "checkpoint weights: size mismatch (" + std::to_string(bytes) +
                                                            " bytes, manifest needs " + std::to_string(4 * floats) + ")");
  }
  w.seekg(0);
  std::vector<unsigned char> raw(bytes);
  w.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!w) throw FormatError(FormatError::Kind::truncated, "checkpoint weights: truncated read");

  std::vector<float> flat(floats);
  detail::decode_f32(raw, flat);
  ckpt.params = build<float>(config);
  ckpt.params.assign_flat(flat);
  return ckpt;
}

}  // namespace frnet
