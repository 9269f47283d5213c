#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "causalbgm/adam.hpp"
#include "causalbgm/data.hpp"
#include "causalbgm/latent.hpp"
#include "causalbgm/model.hpp"

namespace causalbgm {

enum class InitStrategy { kEgm, kRandom };

struct TrainConfig {
  LatentConfig latent{1, 1, 1, 0};
  TreatmentKind kind = TreatmentKind::kContinuous;
  ModelArch arch{};
  std::vector<int> encoder_hidden{64, 64, 64, 64, 64};
  std::vector<int> discriminator_hidden{64, 64, 64};

  InitStrategy init = InitStrategy::kEgm;
  int epochs = -1;  // < 0 resolves to 100 after adversarial init, 500 after random init
  int batch_size = 32;
  double lr = 1e-4;         // variational parameters
  double latent_lr = 1e-4;  // per-individual latent ascent
  AdamConfig adam{};        // betas/eps shared by every optimizer; lr fields above win

  int egm_batches = 30000;
  double variance_penalty = 1e-3;   // adversarial init: weight on sum of squared variances
  double adversarial_weight = 1.0;  // adversarial init: weight on the encoder's GAN term

  double sigma_init = 0.05;  // initial posterior scale of every network parameter
  int xi_draws = 1;          // binary treatment logit draws per likelihood evaluation
  std::uint64_t seed = 42;

  int resolved_epochs() const {
    if (epochs >= 0) return epochs;
    return init == InitStrategy::kEgm ? 100 : 500;
  }
  void validate() const;
};

struct TrainReport {
  std::vector<double> elbo_x, elbo_v, elbo_y;  // per epoch, per example
  std::vector<double> latent_logpost;          // per epoch mean (pre-update values)
  int latent_reinits = 0;                      // non-finite latent gradients recovered
  double wall_time_sec = 0.0;
  int epochs_completed = 0;
};

// Instrumentation for the alternation contract: param_version counts network
// updates, latent_version counts latent batch updates.
struct TrainHooks {
  std::function<void(int epoch, int batch, std::uint64_t param_version)> on_latent_step;
  std::function<void(int epoch, int batch, int net_index, std::uint64_t latent_version)> on_elbo_step;
};

// Adam moments for a variational net, split across mu and rho.
struct VarAdam {
  AdamState mu;
  AdamState rho;
};

// Per-individual Adam moments over the latent matrix (rows follow latents).
struct LatentAdam {
  Mat m;
  Mat v;
  std::vector<std::int64_t> t;
};

struct ElboResult {
  double elbo = 0.0;
  double sum_loglik = 0.0;
  double kl = 0.0;
};

// Batch log-likelihood: reads the network output panel, writes d loglik /
// d output into the cotangent panel (same shape), returns the summed value.
using PanelLoglik = std::function<double(const Mat& outputs, Mat& cotangents)>;

// One variational update on a network: single-sample Flipout forward, ascent
// on sum_loglik - kl_weight * KL. Returns the pre-update objective values.
ElboResult elbo_step(VariationalNet& net, const Mat& inputs, const PanelLoglik& loglik,
                     double kl_weight, VarAdam& adam, Rng& rng);

// Everything needed to resume training or run estimation later.
struct TrainedModel {
  CausalBgmModel model;
  Mat latents;  // n x q, one row per training individual
  Standardizer standardizer;
  TrainConfig config;
  int epochs_done = 0;
  VarAdam adam_v, adam_x, adam_y;
  LatentAdam latent_adam;
  ThetaTriple thetas;          // current sampled parameters
  std::string train_rng_state;
};

struct EgmResult {
  CausalBgmModel model;
  DeterministicNet encoder;
  DeterministicNet discriminator;
  Mat latents;  // n x q, encoder output for every individual
};

// Adversarial initialization: an encoder maps covariates to latents while a
// discriminator pushes the encoded distribution toward the standard-normal
// prior; the generative networks take likelihood steps at their posterior
// means with an L2 penalty on variances. The dataset must already be
// standardized.
EgmResult egm_initialize(const Dataset& data, const TrainConfig& config, Rng& rng);

// Full training pipeline: standardizes a copy of the data, initializes
// (adversarial or random), then runs the iterative latent/parameter updates.
TrainedModel train(const Dataset& raw_data, const TrainConfig& config,
                   TrainReport* report = nullptr, const TrainHooks& hooks = {});

// Continues a trained model up to total_epochs on the same data (the dataset
// is re-standardized with the stored record).
void continue_training(TrainedModel& tm, const Dataset& raw_data, int total_epochs,
                       TrainReport* report = nullptr, const TrainHooks& hooks = {});

void save_checkpoint(const TrainedModel& tm, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace causalbgm
