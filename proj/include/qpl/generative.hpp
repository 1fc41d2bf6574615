#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qpl/tensor.hpp"
#include "qpl/vqe.hpp"

namespace qpl {

struct VaeConfig {
  int d_latent = 16;
  double beta = 1e-3;  // KL weight
  int epochs = 150;
  int batch = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  bool attention = true;
  int heads = 4;
  int mlp_hidden = 128;
  int kernel = 3;
  int channels1 = 8;
  int channels2 = 16;
  int channels3 = 32;
  int n_labels = 0;  // > 0: decoder is conditioned on a one-hot label

  void validate() const;
};

// Attention-VAE over flattened circuit-parameter vectors. Inputs are
// standardized per feature with training-set statistics; decode() returns
// de-standardized vectors (radians).
struct VaeModel {
  VaeConfig cfg;
  int input_len = 0;
  LayerParams params;
  std::vector<double> feat_mean, feat_std;
  std::string layout_id;  // ansatz guard copied from the training dataset
  SweepMetadata source;   // provenance echo so generated data stays evaluable
};

struct LatentRecord {
  std::map<std::string, double> x;
  std::vector<double> mu;
  std::vector<double> z;
  int label = -1;
};

struct TrainReport {
  std::vector<double> loss_history;  // mean total loss per epoch
  double final_loss = 0.0;
  double final_mse = 0.0;
  double final_kl = 0.0;
};

// Fresh model with seeded parameter initialization (no training).
VaeModel make_vae(int input_len, const VaeConfig& cfg);

// (mu, logvar) for one raw parameter vector.
std::pair<std::vector<double>, std::vector<double>> encode(const VaeModel& model,
                                                           std::span<const double> x_raw);

// z = mu + exp(logvar/2) * eps
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps);

std::vector<double> decode(const VaeModel& model, std::span<const double> z);
std::vector<double> decode_conditional(const VaeModel& model, std::span<const double> z,
                                       int label);

// Minimizes mse + beta * kl over the rows. Deterministic under cfg.seed.
VaeModel train_vae(const std::vector<std::vector<double>>& rows, const VaeConfig& cfg,
                   const std::string& layout_id = "", TrainReport* report = nullptr);

// As train_vae with the decoder conditioned on per-row labels in
// [0, cfg.n_labels). Every row must be labeled.
VaeModel train_cvae(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                    const VaeConfig& cfg, const std::string& layout_id = "",
                    TrainReport* report = nullptr);

// Encoder means for a set of rows (analysis uses mu, not sampled z).
std::vector<std::vector<double>> encode_means(const VaeModel& model,
                                              const std::vector<std::vector<double>>& rows);

// ---- conditional latent diffusion -------------------------------------------

struct DiffusionConfig {
  int T = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int hidden = 256;  // width of the two hidden layers of the noise net
  int time_embed_dim = 32;
  int epochs = 400;
  int batch = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DiffusionModel {
  DiffusionConfig cfg;
  int d_latent = 0;
  int n_labels = 0;
  std::vector<double> alphas;      // alpha_t = 1 - beta_t, t = 1..T
  std::vector<double> alpha_bars;  // running products, strictly decreasing
  LayerParams params;
};

DiffusionModel make_diffusion(int d_latent, int n_labels, const DiffusionConfig& cfg);

// Closed-form forward noising: z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_noise(const DiffusionModel& model, std::span<const double> z0, int t,
                                  std::span<const double> eps);

// Noise prediction eps_hat(z_t, label, t); plain forward pass.
std::vector<double> predict_noise(const DiffusionModel& model, std::span<const double> z_t,
                                  int label, int t);

// Trains the noise net on (z0, label) pairs taken from a frozen encoder.
// Loss is the squared noise-prediction error summed over latent dimensions.
DiffusionModel train_diffusion(const std::vector<LatentRecord>& latents, int n_labels,
                               const DiffusionConfig& cfg, TrainReport* report = nullptr);

// Ancestral reverse process from z_T ~ N(0, I), conditioned on `label`.
std::vector<std::vector<double>> sample_diffusion(const DiffusionModel& model, int label,
                                                  int n_samples, std::uint64_t seed);

}  // namespace qpl
