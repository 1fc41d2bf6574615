#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qpl/analysis.hpp"
#include "qpl/config.hpp"
#include "qpl/io.hpp"

namespace qpl {

// Stage drivers shared by the CLI and the acceptance suite. Each resolves
// its input/output paths against cfg.out_dir, enforces layout_id agreement
// between artifacts, and writes deterministic files.

// VQE sweep over the configured grid; writes the dataset and prints a
// one-line summary. Returns the dataset path.
std::filesystem::path run_sweep(const RunConfig& cfg, std::ostream& log);

// Trains vae/cvae/diffusion per train.variant; writes checkpoint and a loss
// history CSV.
std::filesystem::path run_train(const RunConfig& cfg, std::ostream& log);

struct RowAnalysis {
  double row_value = 0.0;           // value of analyze.row_param (or row index)
  std::vector<double> scan;         // scan parameter per record
  std::vector<int> labels;          // canonical GMM labels per record
  VarianceCurve curve;
  std::vector<Peak> peaks;          // dominant peaks, height-sorted
  double kpca_jump_at = 0.0;        // scan value of the largest score jump
  double boundary = 0.0;            // two-cluster step boundary
  double silhouette = 0.0;
  double gmm_log_likelihood = 0.0;
};

struct AnalyzeResult {
  std::vector<RowAnalysis> rows;
  std::vector<std::filesystem::path> files;
};

// Encodes every record, runs PCA/KPCA/GMM/window variance/peaks per row and
// writes the CSV bundle (latent scatter, kpca series, labels, variance
// curve, clustering stats, transitions, phase diagram).
AnalyzeResult run_analyze(const RunConfig& cfg, std::ostream& log);

// Samples latents (standard normal for CVAE, reverse diffusion when a
// diffusion checkpoint is configured), decodes them and writes a
// generated-flagged dataset.
std::filesystem::path run_generate(const RunConfig& cfg, std::ostream& log);

// Physical metrics per record plus grouped aggregates.
struct EvalSummaryRow {
  int label = -1;  // -1 = whole dataset
  std::string metric;
  double mean = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0;
  double p10 = 0.0, p30 = 0.0, p50 = 0.0, p70 = 0.0, p90 = 0.0;
  double frac_abs_gt_04 = 0.0, frac_abs_gt_02 = 0.0;
  int count = 0;
};
std::vector<EvalSummaryRow> run_eval(const RunConfig& cfg, std::ostream& log);

// Exact-oracle sweep (penalized and unpenalized energies, optional
// observables of the penalized ground state).
std::filesystem::path run_exact(const RunConfig& cfg, std::ostream& log);

// Gradient self-checks for the simulator and the tensor layers.
// Returns true when every check passes.
bool run_gradcheck(std::ostream& log);

// Quantile of sorted data by linear interpolation (numpy-style).
double quantile(std::vector<double> values, double q);

}  // namespace qpl
