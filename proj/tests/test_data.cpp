#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalbgm/data.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace causalbgm;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("bgm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("every generator produces well-formed, deterministic data") {
  for (const std::string& name : dgp_names()) {
    CAPTURE(name);
    DgpSpec spec;
    spec.name = name;
    spec.n = 200;
    spec.p = 12;
    spec.seed = 7;
    const auto [data, truth] = generate(spec);
    data.validate();
    CHECK(data.n() == 200);
    CHECK(data.p() == 12);
    for (double v : data.x) CHECK(std::isfinite(v));
    for (double v : data.y) CHECK(std::isfinite(v));
    for (double v : data.v.data) CHECK(std::isfinite(v));

    if (data.kind == TreatmentKind::kBinary) {
      for (double v : data.x) CHECK((v == 0.0 || v == 1.0));
      CHECK(truth.is_binary());
      CHECK(truth.ite.size() == static_cast<std::size_t>(spec.n));
    } else {
      CHECK_FALSE(truth.is_binary());
      CHECK(truth.grid.size() == truth.mu.size());
      CHECK(truth.grid.size() > 10);
      for (std::size_t k = 0; k + 1 < truth.grid.size(); ++k) {
        CHECK(truth.grid[k] < truth.grid[k + 1]);
      }
    }

    const auto [again, truth2] = generate(spec);
    CHECK(again.x == data.x);
    CHECK(again.y == data.y);
    CHECK(again.v.data == data.v.data);

    spec.seed = 8;
    const auto [other, truth3] = generate(spec);
    CHECK(other.x != data.x);
  }
}

TEST_CASE("unknown generator and invalid sizes are rejected") {
  DgpSpec spec;
  spec.name = "no_such_dgp";
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec.name = "linear_gaussian";
  spec.n = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.n = 100;
  spec.p = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("closed-form dose-response matches fresh-draw Monte Carlo") {
  // sample_potential_outcome draws Y(x) for a new individual; its mean must
  // match true_adrf within MC error. This validates the transcribed truth
  // formulas against the generators themselves.
  for (const std::string& name : dgp_names()) {
    if (name == "acic_like") continue;  // binary: no dose-response curve
    CAPTURE(name);
    DgpSpec spec;
    spec.name = name;
    spec.n = 400;
    spec.p = 10;
    spec.seed = 11;
    const auto [lo, hi] = dgp_grid_range(spec);
    Rng rng(1234);
    for (double t : {0.25, 0.5, 0.75}) {
      const double xq = lo + t * (hi - lo);
      const int draws = 40000;
      double mean = 0.0, second = 0.0;
      for (int d = 0; d < draws; ++d) {
        const double yd = sample_potential_outcome(spec, xq, rng);
        mean += yd;
        second += yd * yd;
      }
      mean /= draws;
      const double sd = std::sqrt(std::max(second / draws - mean * mean, 0.0));
      const double se = sd / std::sqrt(static_cast<double>(draws));
      const double want = true_adrf(spec, xq);
      CAPTURE(xq);
      CHECK(std::abs(mean - want) < std::max(4.0 * se, 1e-9));
    }
  }
}

TEST_CASE("binary generator's stored effects average to a plausible ATE") {
  DgpSpec spec;
  spec.name = "acic_like";
  spec.n = 5000;
  spec.p = 8;
  spec.seed = 3;
  const auto [data, truth] = generate(spec);
  CHECK(data.kind == TreatmentKind::kBinary);
  double both = 0.0;
  for (double v : data.x) both += v;
  // Both arms substantially populated.
  CHECK(both / data.n() > 0.1);
  CHECK(both / data.n() < 0.9);
  double ate = 0.0;
  for (double e : truth.ite) ate += e;
  ate /= truth.ite.size();
  CHECK(std::isfinite(ate));
  CHECK(std::abs(ate) < 100.0);
}

TEST_CASE("dataset CSV round-trips exactly") {
  DgpSpec spec;
  spec.name = "hirano_imbens";
  spec.n = 57;
  spec.p = 5;
  spec.seed = 21;
  const auto [data, truth] = generate(spec);
  TempDir dir;
  const std::string path = dir.file("data.csv");
  save_dataset_csv(data, path);
  const Dataset back = load_dataset_csv(path);
  CHECK(back.kind == data.kind);
  CHECK(back.x == data.x);
  CHECK(back.y == data.y);
  CHECK(back.v.rows == data.v.rows);
  CHECK(back.v.cols == data.v.cols);
  CHECK(back.v.data == data.v.data);
}

TEST_CASE("binary dataset CSV round-trip keeps the treatment binary") {
  DgpSpec spec;
  spec.name = "acic_like";
  spec.n = 43;
  spec.p = 4;
  spec.seed = 31;
  const auto [data, truth] = generate(spec);
  TempDir dir;
  const std::string path = dir.file("bin.csv");
  save_dataset_csv(data, path);
  const Dataset back = load_dataset_csv(path);
  CHECK(back.kind == TreatmentKind::kBinary);
  CHECK(back.x == data.x);
}

TEST_CASE("truth CSV round-trips exactly") {
  TempDir dir;
  GroundTruth cont;
  cont.grid = {0.0, 0.5, 1.0 / 3.0};
  cont.mu = {1.25, -2.0, 0.1234567890123456789};
  const std::string cpath = dir.file("truth.csv");
  save_truth_csv(cont, cpath);
  const GroundTruth cback = load_truth_csv(cpath);
  CHECK_FALSE(cback.is_binary());
  CHECK(cback.grid == cont.grid);
  CHECK(cback.mu == cont.mu);

  GroundTruth bin;
  bin.ite = {0.25, -1.5, 3.75};
  const std::string bpath = dir.file("ite.csv");
  save_truth_csv(bin, bpath);
  const GroundTruth bback = load_truth_csv(bpath);
  CHECK(bback.is_binary());
  CHECK(bback.ite == bin.ite);
}

TEST_CASE("CSV loader rejects malformed files") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x,y,v1\n1.0,2.0\n", f);  // short row
    std::fclose(f);
  }
  CHECK_THROWS(load_dataset_csv(path));
  CHECK_THROWS(load_dataset_csv(dir.file("missing.csv")));
}

TEST_CASE("standardization centers and scales, and round-trips via apply") {
  DgpSpec spec;
  spec.name = "linear_gaussian";
  spec.n = 500;
  spec.p = 6;
  spec.seed = 41;
  auto [data, truth] = generate(spec);
  Dataset fresh = data;

  const Standardizer s = standardize(data);
  CHECK(s.x_standardized);
  const int n = data.n();
  for (int j = 0; j < data.p(); ++j) {
    double mean = 0.0, second = 0.0;
    for (int i = 0; i < n; ++i) {
      mean += data.v(i, j);
      second += data.v(i, j) * data.v(i, j);
    }
    mean /= n;
    second = second / n - mean * mean;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::sqrt(second) == doctest::Approx(1.0).epsilon(1e-8));
  }
  double xm = 0.0, ym = 0.0;
  for (double v : data.x) xm += v;
  for (double v : data.y) ym += v;
  CHECK(std::abs(xm / n) < 1e-10);
  CHECK(std::abs(ym / n) < 1e-10);

  // Applying the fitted record to an untouched copy gives the same values.
  apply_standardizer(fresh, s);
  CHECK(fresh.x == data.x);
  CHECK(fresh.y == data.y);
  CHECK(fresh.v.data == data.v.data);
}

TEST_CASE("binary treatments are never standardized") {
  DgpSpec spec;
  spec.name = "acic_like";
  spec.n = 300;
  spec.p = 5;
  spec.seed = 51;
  auto [data, truth] = generate(spec);
  const std::vector<double> x_before = data.x;
  const Standardizer s = standardize(data);
  CHECK_FALSE(s.x_standardized);
  CHECK(s.x_mean == 0.0);
  CHECK(s.x_scale == 1.0);
  CHECK(data.x == x_before);
}

TEST_CASE("near-constant columns keep unit scale") {
  Dataset d;
  d.kind = TreatmentKind::kContinuous;
  d.x = {1.0, 2.0, 3.0};
  d.y = {0.0, 1.0, 2.0};
  d.v = Mat(3, 2);
  for (int i = 0; i < 3; ++i) {
    d.v(i, 0) = 4.0;               // constant column
    d.v(i, 1) = static_cast<double>(i);
  }
  const Standardizer s = standardize(d);
  CHECK(s.v_scale[0] == 1.0);
  for (int i = 0; i < 3; ++i) CHECK(d.v(i, 0) == 0.0);
}
