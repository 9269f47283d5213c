// Python bindings for the main operations: simulate, recommend latent
// dimensions, train, estimate, and checkpoint round-tripping.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalbgm/data.hpp"
#include "causalbgm/effects.hpp"
#include "causalbgm/pipeline.hpp"
#include "causalbgm/sir.hpp"
#include "causalbgm/trainer.hpp"

namespace py = pybind11;
using namespace causalbgm;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const DoubleArray& a, const char* name) {
  if (a.ndim() != 1) throw std::invalid_argument(std::string(name) + " must be 1-dimensional");
  const auto r = a.unchecked<1>();
  std::vector<double> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out[static_cast<std::size_t>(i)] = r(i);
  return out;
}

Mat to_mat(const DoubleArray& a, const char* name) {
  if (a.ndim() != 2) throw std::invalid_argument(std::string(name) + " must be 2-dimensional");
  const auto r = a.unchecked<2>();
  Mat m(static_cast<int>(r.shape(0)), static_cast<int>(r.shape(1)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    for (py::ssize_t j = 0; j < r.shape(1); ++j) {
      m(static_cast<int>(i), static_cast<int>(j)) = r(i, j);
    }
  }
  return m;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
  return py::array_t<double>({static_cast<py::ssize_t>(v.size())}, v.data());
}

py::array_t<double> from_mat(const Mat& m) {
  return py::array_t<double>({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)},
                             m.data.data());
}

Dataset make_dataset(const DoubleArray& x, const DoubleArray& y, const DoubleArray& v,
                     bool binary) {
  Dataset data;
  data.kind = binary ? TreatmentKind::kBinary : TreatmentKind::kContinuous;
  data.x = to_vector(x, "x");
  data.y = to_vector(y, "y");
  data.v = to_mat(v, "v");
  data.validate();
  return data;
}

TrainConfig make_train_config(int q0, int q1, int q2, int q3, const std::string& init,
                              int epochs, int batch_size, double lr, double latent_lr,
                              int egm_batches, double variance_penalty,
                              double adversarial_weight, double sigma_init, int xi_draws,
                              std::uint64_t seed) {
  TrainConfig tc;
  tc.latent = LatentConfig{q0, q1, q2, q3};
  if (init == "egm") {
    tc.init = InitStrategy::kEgm;
  } else if (init == "random") {
    tc.init = InitStrategy::kRandom;
  } else {
    throw std::invalid_argument("init must be 'egm' or 'random'");
  }
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.lr = lr;
  tc.latent_lr = latent_lr;
  tc.egm_batches = egm_batches;
  tc.variance_penalty = variance_penalty;
  tc.adversarial_weight = adversarial_weight;
  tc.sigma_init = sigma_init;
  tc.xi_draws = xi_draws;
  tc.seed = seed;
  return tc;
}

py::dict estimate_dict(const TrainedModel& tm, const Dataset& data, const EstimateOptions& opt) {
  const EstimateResult res = run_estimate(tm, data, opt);
  py::dict out;
  out["mean_acceptance"] = res.mean_acceptance;
  out["alpha"] = opt.alpha;
  if (res.kind == TreatmentKind::kContinuous) {
    out["kind"] = "continuous";
    std::vector<double> point, lower, upper;
    for (const EffectEstimate& e : res.adrf.estimates) {
      point.push_back(e.point);
      lower.push_back(e.lower);
      upper.push_back(e.upper);
    }
    out["grid"] = from_vector(res.adrf.grid);
    out["point"] = from_vector(point);
    out["lower"] = from_vector(lower);
    out["upper"] = from_vector(upper);
  } else {
    out["kind"] = "binary";
    std::vector<double> point, lower, upper;
    for (const EffectEstimate& e : res.ite) {
      point.push_back(e.point);
      lower.push_back(e.lower);
      upper.push_back(e.upper);
    }
    out["ite"] = from_vector(point);
    out["ite_lower"] = from_vector(lower);
    out["ite_upper"] = from_vector(upper);
    py::dict ate;
    ate["point"] = res.ate.point;
    ate["lower"] = res.ate.lower;
    ate["upper"] = res.ate.upper;
    out["ate"] = ate;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian generative modeling for causal effect estimation";
  m.attr("__version__") = "0.1.0";

  py::class_<TrainedModel>(m, "Model")
      .def_property_readonly("epochs_done", [](const TrainedModel& tm) { return tm.epochs_done; })
      .def_property_readonly("binary",
                             [](const TrainedModel& tm) {
                               return tm.model.kind == TreatmentKind::kBinary;
                             })
      .def_property_readonly("latent_dims",
                             [](const TrainedModel& tm) {
                               return std::vector<int>{tm.model.latent.q0, tm.model.latent.q1,
                                                       tm.model.latent.q2, tm.model.latent.q3};
                             })
      .def_property_readonly("latents",
                             [](const TrainedModel& tm) { return from_mat(tm.latents); })
      .def("save", [](const TrainedModel& tm, const std::string& path) {
        save_checkpoint(tm, path);
      })
      .def(
          "continue_training",
          [](TrainedModel& tm, const DoubleArray& x, const DoubleArray& y, const DoubleArray& v,
             int total_epochs) {
            const Dataset data = make_dataset(x, y, v, tm.model.kind == TreatmentKind::kBinary);
            TrainReport report;
            continue_training(tm, data, total_epochs, &report);
            py::dict out;
            out["epochs_completed"] = report.epochs_completed;
            out["wall_time_sec"] = report.wall_time_sec;
            return out;
          },
          py::arg("x"), py::arg("y"), py::arg("v"), py::arg("total_epochs"))
      .def(
          "estimate",
          [](const TrainedModel& tm, const DoubleArray& x, const DoubleArray& y,
             const DoubleArray& v, double alpha, int burn_in, int draws, double proposal_std,
             std::vector<double> grid, int grid_size, bool resample_theta_per_draw,
             bool mean_only, bool use_stored_latents, std::uint64_t seed) {
            const Dataset data = make_dataset(x, y, v, tm.model.kind == TreatmentKind::kBinary);
            EstimateOptions opt;
            opt.alpha = alpha;
            opt.mh.burn_in = burn_in;
            opt.mh.keep = draws;
            opt.mh.proposal_std = proposal_std;
            opt.grid = std::move(grid);
            opt.grid_size = grid_size;
            opt.resample_theta_per_draw = resample_theta_per_draw;
            opt.mean_only = mean_only;
            opt.use_stored_latents = use_stored_latents;
            opt.seed = seed;
            return estimate_dict(tm, data, opt);
          },
          py::arg("x"), py::arg("y"), py::arg("v"), py::arg("alpha") = 0.05,
          py::arg("burn_in") = 5000, py::arg("draws") = 3000, py::arg("proposal_std") = 1.0,
          py::arg("grid") = std::vector<double>{}, py::arg("grid_size") = 100,
          py::arg("resample_theta_per_draw") = true, py::arg("mean_only") = false,
          py::arg("use_stored_latents") = true, py::arg("seed") = 42);

  m.def(
      "simulate",
      [](const std::string& name, int n, int p, std::uint64_t seed, double noise_scale) {
        DgpSpec spec;
        spec.name = name;
        spec.n = n;
        spec.p = p;
        spec.seed = seed;
        spec.noise_scale = noise_scale;
        auto [data, truth] = generate(spec);
        py::dict out;
        out["x"] = from_vector(data.x);
        out["y"] = from_vector(data.y);
        out["v"] = from_mat(data.v);
        out["binary"] = data.kind == TreatmentKind::kBinary;
        if (truth.is_binary()) {
          out["truth_ite"] = from_vector(truth.ite);
        } else {
          out["truth_grid"] = from_vector(truth.grid);
          out["truth_mu"] = from_vector(truth.mu);
        }
        return out;
      },
      py::arg("name"), py::arg("n") = 3000, py::arg("p") = 20, py::arg("seed") = 42,
      py::arg("noise_scale") = 1.0);

  m.def("dgp_names", []() { return dgp_names(); });

  m.def(
      "recommend_dims",
      [](const DoubleArray& v, const DoubleArray& x, const DoubleArray& y, int q0, int slices) {
        const Mat vm = to_mat(v, "v");
        const PartitionRecommendation rec =
            recommend_partition(vm, to_vector(x, "x"), to_vector(y, "y"), q0, slices);
        py::dict out;
        out["q0"] = rec.latent.q0;
        out["q1"] = rec.latent.q1;
        out["q2"] = rec.latent.q2;
        out["q3"] = rec.latent.q3;
        out["total"] = rec.total_dim;
        out["cov_eigenvalues"] = from_vector(rec.cov_eigenvalues);
        return out;
      },
      py::arg("v"), py::arg("x"), py::arg("y"), py::arg("q0") = 1, py::arg("slices") = 10);

  m.def(
      "train",
      [](const DoubleArray& x, const DoubleArray& y, const DoubleArray& v, bool binary, int q0,
         int q1, int q2, int q3, const std::string& init, int epochs, int batch_size, double lr,
         double latent_lr, int egm_batches, double variance_penalty, double adversarial_weight,
         double sigma_init, int xi_draws, std::uint64_t seed) {
        const Dataset data = make_dataset(x, y, v, binary);
        TrainConfig tc = make_train_config(q0, q1, q2, q3, init, epochs, batch_size, lr,
                                           latent_lr, egm_batches, variance_penalty,
                                           adversarial_weight, sigma_init, xi_draws, seed);
        tc.kind = data.kind;
        return train(data, tc);
      },
      py::arg("x"), py::arg("y"), py::arg("v"), py::arg("binary") = false, py::arg("q0") = 1,
      py::arg("q1") = 1, py::arg("q2") = 1, py::arg("q3") = 0, py::arg("init") = "egm",
      py::arg("epochs") = -1, py::arg("batch_size") = 32, py::arg("lr") = 1e-4,
      py::arg("latent_lr") = 1e-4, py::arg("egm_batches") = 30000,
      py::arg("variance_penalty") = 1e-3, py::arg("adversarial_weight") = 1.0,
      py::arg("sigma_init") = 0.05, py::arg("xi_draws") = 1, py::arg("seed") = 42);

  m.def("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"));

  m.def(
      "quantile",
      [](const DoubleArray& values, double p) {
        const std::vector<double> v = to_vector(values, "values");
        return quantile_type7(v, p);
      },
      py::arg("values"), py::arg("p"),
      "Linear-interpolation (type 7) sample quantile");
}
