#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpl/generative.hpp"
#include "qpl/models.hpp"
#include "qpl/vqe.hpp"

namespace qpl {

// Raised for schema violations; the CLI maps it to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct GridSegment {
  std::map<std::string, double> fixed;  // e.g. {"h1": 0.6}
  std::string scan_param;
  double start = 0.0, stop = 0.0, step = 1.0;

  std::vector<std::map<std::string, double>> expand() const;
  std::string describe() const;
};

struct SweepSection {
  Family family = Family::TFIM;
  int n_qubits = 0;
  Boundary boundary = Boundary::PERIODIC;
  std::string ansatz_kind;  // "tfim" or "cluster"
  int blocks = 1;
  std::vector<GridSegment> grid;
  VqeConfig vqe;
  bool oracle_attach = false;
  double oracle_penalty = 0.01;
  std::string dataset = "sweep.jsonl";
};

struct LabelRule {
  std::string param;
  double lo = 0.0, hi = 0.0;
  int label = 0;
};

struct TrainSection {
  std::string variant = "vae";  // vae | cvae | diffusion
  std::string dataset;
  std::string checkpoint = "model.ckpt";
  std::string vae_checkpoint;  // diffusion only
  std::string loss_csv = "loss.csv";
  VaeConfig vae;
  int train_count = 0;  // 0 = every (labeled) record
  std::vector<LabelRule> label_rules;
  DiffusionConfig diffusion;
};

struct AnalyzeRowRef {
  std::string dataset;
  std::string checkpoint;
};

struct AnalyzeSection {
  std::vector<AnalyzeRowRef> rows;
  std::string scan_param = "h";
  std::string row_param;  // names the per-row fixed parameter (e.g. "h1"); optional
  int pca_components = 2;
  bool kpca = true;
  int gmm_k = 2;
  int gmm_restarts = 10;
  int window_w = 51;
  int window_s = 5;
  double peak_rel_height = 0.5;
  std::map<int, std::string> label_map;  // cluster -> phase name
};

struct GenerateSection {
  std::string checkpoint;            // VAE or CVAE
  std::string diffusion_checkpoint;  // set => latent diffusion sampling
  std::string dataset = "generated.jsonl";
  std::vector<int> labels;
  int n_per_label = 1000;
};

struct EvalSection {
  std::string dataset;
  std::vector<std::string> metrics;  // magnetization site_z string_order fidelity energy_discrepancy
  double penalty = 0.01;
  std::string per_sample_csv = "metrics.csv";
  std::string summary_csv = "metrics_summary.csv";
};

struct ExactSection {
  Family family = Family::TFIM;
  int n_qubits = 0;
  Boundary boundary = Boundary::PERIODIC;
  std::vector<GridSegment> grid;
  double penalty = 0.01;
  std::vector<std::string> metrics;  // magnetization, string_order
  std::string csv = "exact.csv";
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  int threads = 1;
  std::optional<SweepSection> sweep;
  std::optional<TrainSection> train;
  std::optional<AnalyzeSection> analyze;
  std::optional<GenerateSection> generate;
  std::optional<EvalSection> eval;
  std::optional<ExactSection> exact;
  std::string config_hash;  // over the raw config text

  // Parses and validates; unknown keys anywhere are rejected.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text);

  std::filesystem::path resolve(const std::string& name) const;
};

}  // namespace qpl
