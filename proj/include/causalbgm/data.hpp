#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causalbgm/mlp.hpp"
#include "causalbgm/model.hpp"
#include "causalbgm/rng.hpp"

namespace causalbgm {

// Per-column affine standardization record (z = (value - mean) / scale).
// Binary treatments are never standardized.
struct Standardizer {
  std::vector<double> v_mean, v_scale;
  double x_mean = 0.0, x_scale = 1.0;
  double y_mean = 0.0, y_scale = 1.0;
  bool x_standardized = true;
};

struct Dataset {
  TreatmentKind kind = TreatmentKind::kContinuous;
  std::vector<double> x;
  std::vector<double> y;
  Mat v;  // n x p

  int n() const { return static_cast<int>(x.size()); }
  int p() const { return v.cols; }
  void validate() const;  // throws std::invalid_argument
};

// Ground truth emitted alongside simulated data: a dose-response curve on a
// grid for continuous treatments, per-individual effects for binary ones.
struct GroundTruth {
  std::vector<double> grid;
  std::vector<double> mu;
  std::vector<double> ite;
  bool is_binary() const { return !ite.empty(); }
};

struct DgpSpec {
  std::string name = "linear_gaussian";  // linear_gaussian | hirano_imbens | sun |
                                         // colangelo_lee | acic_like
  int n = 3000;
  int p = 20;
  std::uint64_t seed = 42;
  double noise_scale = 1.0;

  void validate() const;
};

std::vector<std::string> dgp_names();

std::pair<Dataset, GroundTruth> generate(const DgpSpec& spec);

// Closed-form dose-response value for the continuous generators.
double true_adrf(const DgpSpec& spec, double x);

// Draws one fresh individual's potential outcome Y(x) (continuous
// generators), used to validate the closed forms by Monte Carlo.
double sample_potential_outcome(const DgpSpec& spec, double x, Rng& rng);

// Default evaluation range of each continuous generator's truth grid.
std::pair<double, double> dgp_grid_range(const DgpSpec& spec);

// CSV layout: header "x,y,v1,...,vp", one row per individual. Truth files:
// "x,mu" rows for continuous, "ite" rows for binary. All values are written
// round-trip exact.
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path);
void save_truth_csv(const GroundTruth& truth, const std::string& path);
GroundTruth load_truth_csv(const std::string& path);

// Fits column standardization on the dataset and applies it in place.
// Near-constant columns (sd < 1e-12) keep scale 1.
Standardizer standardize(Dataset& data);
void apply_standardizer(Dataset& data, const Standardizer& s);

}  // namespace causalbgm
