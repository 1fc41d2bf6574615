#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qpl {

// ---- linear and kernel PCA ---------------------------------------------------

struct PcaModel {
  std::vector<double> mean;                     // d
  std::vector<std::vector<double>> components;  // k rows of length d
  std::vector<double> eigenvalues;              // k, descending
};

// Top-k principal components of centered data. Sign convention: the
// largest-magnitude loading of each component is positive.
PcaModel pca_fit(const std::vector<std::vector<double>>& vectors, int k);
std::vector<double> pca_transform(const PcaModel& model, std::span<const double> v);
std::vector<std::vector<double>> pca_transform_all(const PcaModel& model,
                                                   const std::vector<std::vector<double>>& vs);

struct KpcaModel {
  std::vector<std::vector<double>> train;
  double gamma = 0.0;
  std::vector<double> alpha;       // dual coefficients of the top component
  std::vector<double> k_col_mean;  // per-training-point kernel column means
  double k_total_mean = 0.0;
};

// RBF kernel PCA, top component. gamma <= 0 selects the median heuristic
// 1 / (d * median pairwise squared distance).
KpcaModel kpca_fit(const std::vector<std::vector<double>>& vectors, double gamma = 0.0);
double kpca_transform(const KpcaModel& model, std::span<const double> v);

// ---- Gaussian mixture --------------------------------------------------------

struct GmmModel {
  int K = 0;
  std::vector<double> weights;
  std::vector<std::vector<double>> means;              // K x d
  std::vector<std::vector<double>> covariances;        // K row-major d x d
  double log_likelihood = 0.0;
};

struct GmmOptions {
  int restarts = 10;
  int max_iters = 500;
  double tol = 1e-8;          // on successive log-likelihoods
  double reg = 1e-6;          // diagonal regularization
  std::vector<double>* ll_trace = nullptr;  // per-iteration trace of the best run
};

// Full-covariance EM with k-means++ starts; the best of `restarts` runs is
// returned with clusters relabeled in ascending order of the first mean
// coordinate (canonical labels).
GmmModel gmm_fit(const std::vector<std::vector<double>>& vectors, int K, std::uint64_t seed,
                 const GmmOptions& opts = {});
int gmm_predict(const GmmModel& model, std::span<const double> v);
std::vector<int> gmm_predict_all(const GmmModel& model,
                                 const std::vector<std::vector<double>>& vs);

// Mean silhouette coefficient of a labeling under Euclidean distance.
double silhouette_score(const std::vector<std::vector<double>>& vectors,
                        const std::vector<int>& labels);

// ---- transition detection ----------------------------------------------------

struct VarianceCurve {
  std::vector<double> centers;    // scan value at each window center
  std::vector<double> variances;  // label variance per window
  int w = 0;
  int s = 0;
};

// Sliding-window label variance: windows of w consecutive points advancing
// by s, fully inside the sequence; Var = (1/w) sum (y - mean)^2.
VarianceCurve window_variance(const std::vector<int>& labels, const std::vector<double>& scan,
                              int w, int s);

struct Peak {
  double center;
  double height;
};

// Strict local maxima (plateaus excluded), sorted by height descending.
std::vector<Peak> find_peaks(const VarianceCurve& curve);

// Peaks at least `rel` of the tallest peak's height.
std::vector<Peak> dominant_peaks(const std::vector<Peak>& peaks, double rel = 0.5);

// Best two-segment step fit: scan value at the split minimizing label
// disagreement with a left-constant/right-constant model.
double step_boundary(const std::vector<double>& scan, const std::vector<int>& labels);

// ---- phase diagram -----------------------------------------------------------

struct PhaseDiagramRow {
  double h1 = 0.0;
  std::vector<double> h2;
  std::vector<int> labels;
};

struct PhaseDiagramCell {
  double h1, h2;
  int label;
};

// Flattens per-h1 labeled rows into (h1, h2, label) cells, row order kept.
std::vector<PhaseDiagramCell> phase_diagram(const std::vector<PhaseDiagramRow>& rows);

}  // namespace qpl
