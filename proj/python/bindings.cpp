#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>

#include "cli.hpp"
#include "frnet/checkpoint.hpp"
#include "frnet/data.hpp"
#include "frnet/eval.hpp"
#include "frnet/gradcheck.hpp"
#include "frnet/loss.hpp"
#include "frnet/net.hpp"
#include "frnet/train.hpp"

namespace py = pybind11;
using namespace frnet;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Volume to_volume(const F32& a) {
  if (a.ndim() != 3) throw ShapeError("expected a 3-D (inline, xline, time) array");
  Volume v(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
           static_cast<std::size_t>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), v.samples.begin());
  return v;
}

py::array_t<float> from_volume(const Volume& v) {
  py::array_t<float> a({v.n_inline, v.n_xline, v.n_time});
  std::copy(v.samples.begin(), v.samples.end(), a.mutable_data());
  return a;
}

Matrix<double> to_matrix(const F64& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  return Matrix<double>(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                        std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_matrix(const Matrix<double>& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

// Accepts (H, W) or (N, H, W) images as single-channel batches.
Tensor4<double> to_batch(const F64& a) {
  if (a.ndim() == 2) {
    return Tensor4<double>({1, 1, static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                           std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() == 3) {
    return Tensor4<double>({static_cast<std::size_t>(a.shape(0)), 1, static_cast<std::size_t>(a.shape(1)),
                            static_cast<std::size_t>(a.shape(2))},
                           std::vector<double>(a.data(), a.data() + a.size()));
  }
  throw ShapeError("expected a 2-D image or a 3-D (batch, height, width) stack");
}

double snr_value(const Snr& s) { return s.infinite ? std::numeric_limits<double>::infinity() : s.db; }

}  // namespace

PYBIND11_MODULE(_frnet, m) {
  m.doc() = "Acquisition-footprint removal: U-Net autoencoder with a unidirectional TV loss";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  m.def(
      "gen_synthetic",
      [](std::size_t n_inline, std::size_t n_xline, std::size_t n_time, std::uint64_t seed, double amplitude,
         double decay, std::size_t period, double sigma) {
        SyntheticConfig c;
        c.n_inline = n_inline;
        c.n_xline = n_xline;
        c.n_time = n_time;
        c.seed = seed;
        c.footprint_amplitude = amplitude;
        c.footprint_decay = decay;
        c.footprint_period = period;
        c.random_noise_sigma = sigma;
        const auto v = gen_synthetic(c);
        py::dict out;
        out["clean"] = from_volume(v.clean);
        out["footprint"] = from_volume(v.footprint);
        out["noisy"] = from_volume(v.noisy);
        return out;
      },
      py::arg("n_inline") = 64, py::arg("n_xline") = 64, py::arg("n_time") = 128, py::arg("seed") = 0,
      py::arg("footprint_amplitude") = 0.3, py::arg("footprint_decay") = 0.02, py::arg("footprint_period") = 4,
      py::arg("noise_sigma") = 0.01, "Synthetic benchmark volumes as float32 (inline, xline, time) arrays.");

  m.def("load_volume", [](const std::filesystem::path& p) { return from_volume(load_volume(p)); }, py::arg("path"));
  m.def("save_volume", [](const F32& a, const std::filesystem::path& p) { save_volume(to_volume(a), p); },
        py::arg("volume"), py::arg("path"));

  m.def("snr", [](const F32& truth, const F32& est) {
        if (truth.size() != est.size()) throw ShapeError("snr: arrays differ in size");
        return snr_value(snr(std::span<const float>(truth.data(), static_cast<std::size_t>(truth.size())),
                             std::span<const float>(est.data(), static_cast<std::size_t>(est.size()))));
      },
      py::arg("truth"), py::arg("estimate"), "SNR in dB; a perfect estimate gives +inf.");

  m.def("correlation", [](const F32& a, const F32& b) {
        return correlation(std::span<const float>(a.data(), static_cast<std::size_t>(a.size())),
                           std::span<const float>(b.data(), static_cast<std::size_t>(b.size())));
      });

  m.def("diff_rows", [](const F64& a) { return from_matrix(diff_rows(to_matrix(a))); });
  m.def("diff_cols", [](const F64& a) { return from_matrix(diff_cols(to_matrix(a))); });
  m.def("tv_norm", [](const F64& a) { return tv_norm(to_matrix(a)); });

  m.def(
      "loss",
      [](const F64& output, const F64& input, const std::string& variant, double lambda1, double lambda2, double eps,
         const std::string& axis) {
        LossConfig cfg;
        cfg.lambda1 = lambda1;
        cfg.lambda2 = lambda2;
        cfg.eps_smooth = eps;
        cfg.footprint_axis = parse_footprint_axis(axis);
        const auto r = evaluate_loss(parse_loss_variant(variant), to_batch(output), to_batch(input), cfg);
        py::array_t<double> grad(output.request().shape);
        std::copy(r.grad.data().begin(), r.grad.data().end(), grad.mutable_data());
        py::dict d;
        d["total"] = r.value.total;
        d["mse"] = r.value.mse_term;
        d["utv_clean"] = r.value.utv_clean_term;
        d["utv_residual"] = r.value.utv_residual_term;
        d["grad"] = grad;
        return d;
      },
      py::arg("output"), py::arg("input"), py::arg("variant") = "frnet", py::arg("lambda1") = 6.0e4,
      py::arg("lambda2") = 4.0e5, py::arg("eps") = 1.0e-3, py::arg("footprint_axis") = "rows",
      "Batch-mean loss of (H, W) or (N, H, W) images with its gradient w.r.t. the output.");

  m.def(
      "parameter_count",
      [](std::size_t depth, std::size_t base, std::size_t size) {
        UNetConfig c;
        c.depth = depth;
        c.base_channels = base;
        c.input_size = size;
        return parameter_count(c);
      },
      py::arg("depth") = 2, py::arg("base_channels") = 16, py::arg("input_size") = 48);

  m.def(
      "gradcheck",
      [](std::size_t depth, std::size_t base, std::size_t size, std::uint64_t seed) {
        GradcheckCase c;
        c.depth = depth;
        c.base_channels = base;
        c.size = size;
        c.seed = seed;
        const auto r = run_gradcheck(c, GradcheckOptions{});
        py::dict d;
        d["passed"] = r.passed;
        d["max_rel_error"] = r.max_rel_error;
        d["coordinates"] = r.coordinates;
        d["skipped"] = r.kink_crossings;
        return d;
      },
      py::arg("depth") = 1, py::arg("base_channels") = 2, py::arg("size") = 8, py::arg("seed") = 0);

  m.def(
      "denoise",
      [](const std::filesystem::path& checkpoint, const F32& volume, std::size_t stride) {
        const Checkpoint ck = load_checkpoint(checkpoint);
        const Volume v = to_volume(volume);
        const std::size_t s = stride > 0 ? stride : ck.meta.patch_stride;
        const auto grid = make_patch_grid(v.n_inline, v.n_xline, ck.params.config.input_size, s);
        const auto r = denoise_volume(ck.params, v, grid, ScaleRecord{ck.meta.scale});
        return py::make_tuple(from_volume(r.clean_estimate), from_volume(r.footprint_estimate));
      },
      py::arg("checkpoint"), py::arg("volume"), py::arg("stride") = 0,
      "Returns (clean_estimate, footprint_estimate) for a trained checkpoint.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"frnet"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs a frnet command line in-process and returns its exit code.");
}
