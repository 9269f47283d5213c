#include "causalbgm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace causalbgm {

namespace {

constexpr int kTruthGridSize = 100;

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double exp1_draw(Rng& rng) { return -std::log(rng.uniform_pos()); }

struct LinearGaussianDraw {
  double z0, w[3], ex, ey;
};

// linear_gaussian: one shared confounder and three nuisance factors.
//   x = z0 + s*ex, y = x + z0 + s*ey,
//   v_j = z0 + 0.5*e (j < p/2), v_j = w[j mod 3] + 0.5*e otherwise.
// Dose response: mu(t) = t. A naive regression of y on x estimates slope 3/2
// at the default noise scale.
void gen_linear_gaussian(const DgpSpec& spec, Dataset& data, Rng& rng) {
  const double s = spec.noise_scale;
  for (int i = 0; i < spec.n; ++i) {
    const double z0 = rng.normal();
    double w[3];
    for (double& wk : w) wk = rng.normal();
    const double ex = rng.normal();
    const double ey = rng.normal();
    data.x[i] = z0 + s * ex;
    data.y[i] = data.x[i] + z0 + s * ey;
    double* vrow = data.v.row(i);
    for (int j = 0; j < spec.p; ++j) {
      const double base = (j < spec.p / 2) ? z0 : w[j % 3];
      vrow[j] = base + 0.5 * rng.normal();
    }
  }
}

// hirano_imbens: exponential covariates, exponentially tilted treatment.
//   v_j ~ Exp(1), x | v ~ Exp(rate v1+v2),
//   y ~ N(x + (v1+v2) exp(-x (v1+v2)), s^2).
// Dose response: mu(t) = t + 2 / (1+t)^3.
void gen_hirano_imbens(const DgpSpec& spec, Dataset& data, Rng& rng) {
  const double s = spec.noise_scale;
  for (int i = 0; i < spec.n; ++i) {
    double* vrow = data.v.row(i);
    for (int j = 0; j < spec.p; ++j) vrow[j] = exp1_draw(rng);
    const double rate = vrow[0] + vrow[1];
    data.x[i] = exp1_draw(rng) / rate;
    data.y[i] = data.x[i] + rate * std::exp(-data.x[i] * rate) + s * rng.normal();
  }
}

// sun: dense Gaussian covariates with a linear confounding index.
//   v ~ N(0, I), psi = (v1+v2+v3+v4)/2, x = psi + s*ex, y = x + psi + s*ey.
// Dose response: mu(t) = t.
void gen_sun(const DgpSpec& spec, Dataset& data, Rng& rng) {
  if (spec.p < 4) throw std::invalid_argument("sun generator needs p >= 4");
  const double s = spec.noise_scale;
  for (int i = 0; i < spec.n; ++i) {
    double* vrow = data.v.row(i);
    for (int j = 0; j < spec.p; ++j) vrow[j] = rng.normal();
    const double psi = 0.5 * (vrow[0] + vrow[1] + vrow[2] + vrow[3]);
    data.x[i] = psi + s * rng.normal();
    data.y[i] = data.x[i] + psi + s * rng.normal();
  }
}

// colangelo_lee: AR(1)-correlated covariates, bounded treatment.
//   v ~ N(0, Sigma) with Sigma_jk = 0.5^|j-k|, theta_j = 1/j^2, idx = 3 v'theta,
//   x = Phi(idx) + 0.75 (u - 0.5), y = 1.2 x + x^2 + 1.2 v'theta + s*ey.
// Dose response: mu(t) = 1.2 t + t^2.
void gen_colangelo_lee(const DgpSpec& spec, Dataset& data, Rng& rng) {
  const double s = spec.noise_scale;
  const double rho = 0.5;
  const double rs = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < spec.n; ++i) {
    double* vrow = data.v.row(i);
    double prev = 0.0;
    double index = 0.0;
    for (int j = 0; j < spec.p; ++j) {
      const double e = rng.normal();
      vrow[j] = (j == 0) ? e : rho * prev + rs * e;
      prev = vrow[j];
      index += vrow[j] / ((j + 1.0) * (j + 1.0));
    }
    data.x[i] = std_normal_cdf(3.0 * index) + 0.75 * (rng.uniform() - 0.5);
    data.y[i] = 1.2 * data.x[i] + data.x[i] * data.x[i] + 1.2 * index + s * rng.normal();
  }
}

// acic_like: binary treatment with three latent factors loading blocks of
// covariates.
//   u1,u2,u3 ~ N(0,1), v_j = u_{block(j)} + 0.5 e,
//   x ~ Bernoulli(sigmoid(0.8 u1 - 0.4 u2)),
//   y = u1 + 0.5 u3 + x (1 + 0.5 u2) + 0.5 s * ey.
// Individual effect: 1 + 0.5 u2.
void gen_acic_like(const DgpSpec& spec, Dataset& data, GroundTruth& truth, Rng& rng) {
  const double s = spec.noise_scale;
  truth.ite.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double u1 = rng.normal();
    const double u2 = rng.normal();
    const double u3 = rng.normal();
    double* vrow = data.v.row(i);
    for (int j = 0; j < spec.p; ++j) {
      const double base = (j < spec.p / 3) ? u1 : (j < 2 * spec.p / 3 ? u2 : u3);
      vrow[j] = base + 0.5 * rng.normal();
    }
    const double prob = sigmoid(0.8 * u1 - 0.4 * u2);
    data.x[i] = rng.uniform() < prob ? 1.0 : 0.0;
    const double tau = 1.0 + 0.5 * u2;
    truth.ite[i] = tau;
    data.y[i] = u1 + 0.5 * u3 + data.x[i] * tau + 0.5 * s * rng.normal();
  }
}

void check_name(const DgpSpec& spec) {
  const auto names = dgp_names();
  if (std::find(names.begin(), names.end(), spec.name) == names.end()) {
    throw std::invalid_argument("unknown generator '" + spec.name + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, int line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                ": field '" + field + "' is not numeric");
  }
  if (pos != field.size()) {
    throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                ": field '" + field + "' is not numeric");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void Dataset::validate() const {
  const int rows = n();
  if (rows < 1) throw std::invalid_argument("dataset: empty");
  if (static_cast<int>(y.size()) != rows || v.rows != rows) {
    throw std::invalid_argument("dataset: column lengths differ");
  }
  if (v.cols < 1) throw std::invalid_argument("dataset: no covariates");
  for (double value : x) {
    if (!std::isfinite(value)) throw std::invalid_argument("dataset: non-finite treatment");
    if (kind == TreatmentKind::kBinary && value != 0.0 && value != 1.0) {
      throw std::invalid_argument("dataset: binary treatment values must be 0 or 1");
    }
  }
  for (double value : y) {
    if (!std::isfinite(value)) throw std::invalid_argument("dataset: non-finite outcome");
  }
  for (double value : v.data) {
    if (!std::isfinite(value)) throw std::invalid_argument("dataset: non-finite covariate");
  }
}

void DgpSpec::validate() const {
  check_name(*this);
  if (n < 1) throw std::invalid_argument("generator: n must be positive");
  if (p < 1) throw std::invalid_argument("generator: p must be positive");
  if (!(noise_scale > 0.0)) throw std::invalid_argument("generator: noise_scale must be positive");
}

std::vector<std::string> dgp_names() {
  return {"linear_gaussian", "hirano_imbens", "sun", "colangelo_lee", "acic_like"};
}

std::pair<double, double> dgp_grid_range(const DgpSpec& spec) {
  if (spec.name == "linear_gaussian" || spec.name == "sun") return {-2.0, 2.0};
  if (spec.name == "hirano_imbens") return {0.0, 3.0};
  if (spec.name == "colangelo_lee") return {0.0, 1.0};
  throw std::invalid_argument("generator '" + spec.name + "' has no dose-response grid");
}

double true_adrf(const DgpSpec& spec, double x) {
  if (spec.name == "linear_gaussian" || spec.name == "sun") return x;
  if (spec.name == "hirano_imbens") return x + 2.0 / std::pow(1.0 + x, 3.0);
  if (spec.name == "colangelo_lee") return 1.2 * x + x * x;
  throw std::invalid_argument("generator '" + spec.name + "' has no closed-form dose response");
}

double sample_potential_outcome(const DgpSpec& spec, double x, Rng& rng) {
  const double s = spec.noise_scale;
  if (spec.name == "linear_gaussian") {
    return x + rng.normal() + s * rng.normal();
  }
  if (spec.name == "sun") {
    double psi = 0.0;
    for (int j = 0; j < 4; ++j) psi += 0.5 * rng.normal();
    return x + psi + s * rng.normal();
  }
  if (spec.name == "hirano_imbens") {
    const double rate = exp1_draw(rng) + exp1_draw(rng);
    return x + rate * std::exp(-x * rate) + s * rng.normal();
  }
  if (spec.name == "colangelo_lee") {
    const double rho = 0.5;
    const double rs = std::sqrt(1.0 - rho * rho);
    double prev = 0.0;
    double index = 0.0;
    for (int j = 0; j < spec.p; ++j) {
      const double e = rng.normal();
      const double vj = (j == 0) ? e : rho * prev + rs * e;
      prev = vj;
      index += vj / ((j + 1.0) * (j + 1.0));
    }
    return 1.2 * x + x * x + 1.2 * index + s * rng.normal();
  }
  throw std::invalid_argument("generator '" + spec.name + "' has no potential-outcome sampler");
}

std::pair<Dataset, GroundTruth> generate(const DgpSpec& spec) {
  spec.validate();
  Dataset data;
  data.x.resize(spec.n);
  data.y.resize(spec.n);
  data.v = Mat(spec.n, spec.p);
  GroundTruth truth;
  Rng rng = Rng::substream(spec.seed, "data");

  if (spec.name == "acic_like") {
    data.kind = TreatmentKind::kBinary;
    gen_acic_like(spec, data, truth, rng);
  } else {
    data.kind = TreatmentKind::kContinuous;
    if (spec.name == "linear_gaussian") {
      gen_linear_gaussian(spec, data, rng);
    } else if (spec.name == "hirano_imbens") {
      gen_hirano_imbens(spec, data, rng);
    } else if (spec.name == "sun") {
      gen_sun(spec, data, rng);
    } else if (spec.name == "colangelo_lee") {
      gen_colangelo_lee(spec, data, rng);
    }
    const auto [lo, hi] = dgp_grid_range(spec);
    truth.grid.resize(kTruthGridSize);
    truth.mu.resize(kTruthGridSize);
    for (int k = 0; k < kTruthGridSize; ++k) {
      truth.grid[k] = lo + (hi - lo) * k / (kTruthGridSize - 1.0);
      truth.mu[k] = true_adrf(spec, truth.grid[k]);
    }
  }
  data.validate();
  return {std::move(data), std::move(truth)};
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "x,y";
  for (int j = 1; j <= data.p(); ++j) out << ",v" << j;
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    out << format_double(data.x[i]) << ',' << format_double(data.y[i]);
    const double* vrow = data.v.row(i);
    for (int j = 0; j < data.p(); ++j) out << ',' << format_double(vrow[j]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "x" || header[1] != "y") {
    throw std::invalid_argument("'" + path + "': header must be x,y,v1,...");
  }
  const int p = static_cast<int>(header.size()) - 2;
  std::vector<double> xs, ys, vs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    xs.push_back(parse_double(fields[0], line_no));
    ys.push_back(parse_double(fields[1], line_no));
    for (int j = 0; j < p; ++j) vs.push_back(parse_double(fields[2 + j], line_no));
  }
  Dataset data;
  data.x = std::move(xs);
  data.y = std::move(ys);
  data.v = Mat(data.n(), p);
  data.v.data = std::move(vs);
  const bool all_binary = std::all_of(data.x.begin(), data.x.end(),
                                      [](double v) { return v == 0.0 || v == 1.0; });
  data.kind = all_binary ? TreatmentKind::kBinary : TreatmentKind::kContinuous;
  data.validate();
  return data;
}

void save_truth_csv(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  if (truth.is_binary()) {
    out << "ite\n";
    for (double t : truth.ite) out << format_double(t) << '\n';
  } else {
    out << "x,mu\n";
    for (std::size_t k = 0; k < truth.grid.size(); ++k) {
      out << format_double(truth.grid[k]) << ',' << format_double(truth.mu[k]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

GroundTruth load_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  GroundTruth truth;
  int line_no = 1;
  if (header.size() == 1 && header[0] == "ite") {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      truth.ite.push_back(parse_double(line, line_no));
    }
  } else if (header.size() == 2 && header[0] == "x" && header[1] == "mu") {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::vector<std::string> fields = split_csv_line(line);
      if (fields.size() != 2) {
        throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected 2 fields");
      }
      truth.grid.push_back(parse_double(fields[0], line_no));
      truth.mu.push_back(parse_double(fields[1], line_no));
    }
  } else {
    throw std::invalid_argument("'" + path + "': header must be 'x,mu' or 'ite'");
  }
  return truth;
}

Standardizer standardize(Dataset& data) {
  data.validate();
  const int n = data.n();
  const int p = data.p();
  Standardizer s;
  s.v_mean.assign(p, 0.0);
  s.v_scale.assign(p, 1.0);
  for (int i = 0; i < n; ++i) {
    const double* vrow = data.v.row(i);
    for (int j = 0; j < p; ++j) s.v_mean[j] += vrow[j];
  }
  for (int j = 0; j < p; ++j) s.v_mean[j] /= n;
  std::vector<double> ss(p, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* vrow = data.v.row(i);
    for (int j = 0; j < p; ++j) {
      const double d = vrow[j] - s.v_mean[j];
      ss[j] += d * d;
    }
  }
  for (int j = 0; j < p; ++j) {
    const double sd = std::sqrt(ss[j] / n);
    s.v_scale[j] = sd < 1e-12 ? 1.0 : sd;
  }
  auto moments = [n](const std::vector<double>& u, double& mean, double& scale) {
    mean = 0.0;
    for (double ui : u) mean += ui;
    mean /= n;
    double acc = 0.0;
    for (double ui : u) acc += (ui - mean) * (ui - mean);
    const double sd = std::sqrt(acc / n);
    scale = sd < 1e-12 ? 1.0 : sd;
  };
  moments(data.y, s.y_mean, s.y_scale);
  if (data.kind == TreatmentKind::kContinuous) {
    moments(data.x, s.x_mean, s.x_scale);
    s.x_standardized = true;
  } else {
    s.x_mean = 0.0;
    s.x_scale = 1.0;
    s.x_standardized = false;
  }
  apply_standardizer(data, s);
  return s;
}

void apply_standardizer(Dataset& data, const Standardizer& s) {
  if (static_cast<int>(s.v_mean.size()) != data.p()) {
    throw std::invalid_argument("standardizer does not match covariate width");
  }
  const int n = data.n();
  for (int i = 0; i < n; ++i) {
    double* vrow = data.v.row(i);
    for (int j = 0; j < data.p(); ++j) vrow[j] = (vrow[j] - s.v_mean[j]) / s.v_scale[j];
    data.y[i] = (data.y[i] - s.y_mean) / s.y_scale;
    if (s.x_standardized) data.x[i] = (data.x[i] - s.x_mean) / s.x_scale;
  }
}

}  // namespace causalbgm
