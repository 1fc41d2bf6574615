#include "qpl/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qpl/rng.hpp"

namespace qpl {

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("empty input set");
  const std::size_t d = vectors[0].size();
  Eigen::MatrixXd m(vectors.size(), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) throw std::invalid_argument("ragged input vectors");
    for (std::size_t j = 0; j < d; ++j) m(i, j) = vectors[i][j];
  }
  return m;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

PcaModel pca_fit(const std::vector<std::vector<double>>& vectors, int k) {
  Eigen::MatrixXd x = to_matrix(vectors);
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (k < 1 || k > d) throw std::invalid_argument("pca_fit: k outside [1, dim]");
  if (n < k) throw std::invalid_argument("pca_fit: fewer samples than components");

  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);

  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + d);
  for (int c = 0; c < k; ++c) {
    int idx = d - 1 - c;  // eigenvalues ascend in Eigen
    Eigen::VectorXd comp = solver.eigenvectors().col(idx);
    int top = 0;
    for (int j = 1; j < d; ++j) {
      if (std::abs(comp(j)) > std::abs(comp(top))) top = j;
    }
    if (comp(top) < 0) comp = -comp;
    model.components.emplace_back(comp.data(), comp.data() + d);
    model.eigenvalues.push_back(std::max(0.0, solver.eigenvalues()(idx)));
  }
  return model;
}

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> v) {
  if (v.size() != model.mean.size()) throw std::invalid_argument("pca_transform: dim mismatch");
  std::vector<double> out(model.components.size(), 0.0);
  for (std::size_t c = 0; c < model.components.size(); ++c) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      out[c] += model.components[c][j] * (v[j] - model.mean[j]);
    }
  }
  return out;
}

std::vector<std::vector<double>> pca_transform_all(const PcaModel& model,
                                                   const std::vector<std::vector<double>>& vs) {
  std::vector<std::vector<double>> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(pca_transform(model, v));
  return out;
}

KpcaModel kpca_fit(const std::vector<std::vector<double>>& vectors, double gamma) {
  const int n = static_cast<int>(vectors.size());
  if (n < 2) throw std::invalid_argument("kpca_fit: need at least two samples");
  const std::size_t d = vectors[0].size();

  if (gamma <= 0.0) {
    // Median heuristic: gamma = 1 / (d * median pairwise squared distance).
    std::vector<double> dists;
    dists.reserve(std::size_t(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) dists.push_back(sq_dist(vectors[i], vectors[j]));
    }
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    double med = dists[dists.size() / 2];
    if (med <= 0.0) throw std::invalid_argument("kpca_fit: degenerate kernel (identical points)");
    gamma = 1.0 / (static_cast<double>(d) * med);
  }

  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double v = std::exp(-gamma * sq_dist(vectors[i], vectors[j]));
      k(i, j) = v;
      k(j, i) = v;
    }
  }

  // Double centering: Kc = K - 1K - K1 + 1K1.
  Eigen::VectorXd col_mean = k.colwise().mean();
  double total = col_mean.mean();
  Eigen::MatrixXd kc = k;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) kc(i, j) += total - col_mean(i) - col_mean(j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kc);
  double lambda = solver.eigenvalues()(n - 1);
  if (lambda <= 1e-12) throw std::invalid_argument("kpca_fit: degenerate kernel matrix");
  Eigen::VectorXd a = solver.eigenvectors().col(n - 1) / std::sqrt(lambda);
  int top = 0;
  for (int j = 1; j < n; ++j) {
    if (std::abs(a(j)) > std::abs(a(top))) top = j;
  }
  if (a(top) < 0) a = -a;

  KpcaModel model;
  model.train = vectors;
  model.gamma = gamma;
  model.alpha.assign(a.data(), a.data() + n);
  model.k_col_mean.assign(col_mean.data(), col_mean.data() + n);
  model.k_total_mean = total;
  return model;
}

double kpca_transform(const KpcaModel& model, std::span<const double> v) {
  const int n = static_cast<int>(model.train.size());
  std::vector<double> kx(n);
  double kx_mean = 0.0;
  for (int i = 0; i < n; ++i) {
    kx[i] = std::exp(-model.gamma * sq_dist(model.train[i], v));
    kx_mean += kx[i];
  }
  kx_mean /= n;
  double score = 0.0;
  for (int i = 0; i < n; ++i) {
    double centered = kx[i] - kx_mean - model.k_col_mean[i] + model.k_total_mean;
    score += model.alpha[i] * centered;
  }
  return score;
}

// ---- GMM ----------------------------------------------------------------------

namespace {

struct GmmWork {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  std::vector<double> weights;
  double ll = -std::numeric_limits<double>::infinity();
  std::vector<double> ll_trace;
};

// k-means++ seeding over the rows of x.
std::vector<Eigen::VectorXd> kmeanspp(const Eigen::MatrixXd& x, int K, Rng& rng) {
  const int n = static_cast<int>(x.rows());
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(x.row(static_cast<int>(rng.below(n))));
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < K) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (x.row(i).transpose() - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.below(n));
    }
    centers.push_back(x.row(pick));
  }
  return centers;
}

double log_gauss(const Eigen::VectorXd& v, const Eigen::VectorXd& mean,
                 const Eigen::LLT<Eigen::MatrixXd>& llt, double log_det) {
  const int d = static_cast<int>(v.size());
  Eigen::VectorXd diff = v - mean;
  Eigen::VectorXd sol = llt.solve(diff);
  double quad = diff.dot(sol);
  return -0.5 * (d * std::log(2 * M_PI) + log_det + quad);
}

GmmWork em_run(const Eigen::MatrixXd& x, int K, Rng& rng, const GmmOptions& opts) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());

  GmmWork w;
  w.means = kmeanspp(x, K, rng);
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd base_cov =
      centered.transpose() * centered / std::max(1, n - 1) +
      opts.reg * Eigen::MatrixXd::Identity(d, d);
  w.covs.assign(K, base_cov);
  w.weights.assign(K, 1.0 / K);

  Eigen::MatrixXd resp(n, K);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // E step
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    std::vector<double> log_dets(K), log_w(K);
    for (int k = 0; k < K; ++k) {
      llts.emplace_back(w.covs[k]);
      if (llts[k].info() != Eigen::Success) {
        llts[k] = Eigen::LLT<Eigen::MatrixXd>(w.covs[k] +
                                              opts.reg * Eigen::MatrixXd::Identity(d, d));
      }
      double ld = 0.0;
      for (int j = 0; j < d; ++j) ld += 2.0 * std::log(llts[k].matrixL()(j, j));
      log_dets[k] = ld;
      log_w[k] = std::log(w.weights[k]);
    }
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd xi = x.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        resp(i, k) = log_w[k] + log_gauss(xi, w.means[k], llts[k], log_dets[k]);
        mx = std::max(mx, resp(i, k));
      }
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += std::exp(resp(i, k) - mx);
      double log_z = mx + std::log(z);
      ll += log_z;
      for (int k = 0; k < K; ++k) resp(i, k) = std::exp(resp(i, k) - log_z);
    }
    w.ll = ll;
    w.ll_trace.push_back(ll);

    // M step
    for (int k = 0; k < K; ++k) {
      double nk = resp.col(k).sum();
      if (nk < 1e-10) nk = 1e-10;
      w.weights[k] = nk / n;
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < n; ++i) mu += resp(i, k) * x.row(i).transpose();
      mu /= nk;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd diff = x.row(i).transpose() - mu;
        cov += resp(i, k) * diff * diff.transpose();
      }
      cov /= nk;
      cov += opts.reg * Eigen::MatrixXd::Identity(d, d);
      w.means[k] = mu;
      w.covs[k] = cov;
    }
    if (std::abs(ll - prev_ll) < opts.tol) break;
    prev_ll = ll;
  }
  return w;
}

}  // namespace

GmmModel gmm_fit(const std::vector<std::vector<double>>& vectors, int K, std::uint64_t seed,
                 const GmmOptions& opts) {
  Eigen::MatrixXd x = to_matrix(vectors);
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (K < 1) throw std::invalid_argument("gmm_fit: K must be >= 1");
  if (K > n) throw std::invalid_argument("gmm_fit: K exceeds the sample count");

  GmmWork best;
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng(Rng::derive(seed, 0x6e4d00 + r));
    GmmWork w = em_run(x, K, rng, opts);
    if (w.ll > best.ll) best = std::move(w);
  }
  if (opts.ll_trace) *opts.ll_trace = best.ll_trace;

  // Canonical labels: ascending first-coordinate of the means.
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&best](int a, int b) { return best.means[a](0) < best.means[b](0); });

  GmmModel model;
  model.K = K;
  model.log_likelihood = best.ll;
  for (int k : order) {
    model.weights.push_back(best.weights[k]);
    model.means.emplace_back(best.means[k].data(), best.means[k].data() + d);
    std::vector<double> cov(d * d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) cov[i * d + j] = best.covs[k](i, j);
    }
    model.covariances.push_back(std::move(cov));
  }
  return model;
}

int gmm_predict(const GmmModel& model, std::span<const double> v) {
  const int d = static_cast<int>(v.size());
  if (model.K < 1 || model.means.empty() || static_cast<int>(model.means[0].size()) != d) {
    throw std::invalid_argument("gmm_predict: dimension mismatch");
  }
  Eigen::VectorXd xi(d);
  for (int j = 0; j < d; ++j) xi(j) = v[j];
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.K; ++k) {
    Eigen::VectorXd mu(d);
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i) {
      mu(i) = model.means[k][i];
      for (int j = 0; j < d; ++j) cov(i, j) = model.covariances[k][i * d + j];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double ld = 0.0;
    for (int j = 0; j < d; ++j) ld += 2.0 * std::log(llt.matrixL()(j, j));
    double score = std::log(model.weights[k]) + log_gauss(xi, mu, llt, ld);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

std::vector<int> gmm_predict_all(const GmmModel& model,
                                 const std::vector<std::vector<double>>& vs) {
  std::vector<int> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(gmm_predict(model, v));
  return out;
}

double silhouette_score(const std::vector<std::vector<double>>& vectors,
                        const std::vector<int>& labels) {
  const int n = static_cast<int>(vectors.size());
  if (labels.size() != vectors.size()) throw std::invalid_argument("silhouette: size mismatch");
  int K = 0;
  for (int l : labels) K = std::max(K, l + 1);
  if (K < 2) return 0.0;

  std::vector<int> counts(K, 0);
  for (int l : labels) counts[l]++;

  double acc = 0.0;
  int used = 0;
  std::vector<double> mean_dist(K);
  for (int i = 0; i < n; ++i) {
    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[labels[j]] += std::sqrt(sq_dist(vectors[i], vectors[j]));
    }
    if (counts[labels[i]] <= 1) continue;  // singleton clusters contribute 0
    double a = mean_dist[labels[i]] / (counts[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      if (k == labels[i] || counts[k] == 0) continue;
      b = std::min(b, mean_dist[k] / counts[k]);
    }
    acc += (b - a) / std::max(a, b);
    ++used;
  }
  return used > 0 ? acc / used : 0.0;
}

// ---- transition detection ------------------------------------------------------

VarianceCurve window_variance(const std::vector<int>& labels, const std::vector<double>& scan,
                              int w, int s) {
  if (labels.size() != scan.size()) {
    throw std::invalid_argument("window_variance: labels/scan size mismatch");
  }
  const int n = static_cast<int>(labels.size());
  if (w < 1 || w > n) throw std::invalid_argument("window_variance: w outside [1, n]");
  if (s < 1) throw std::invalid_argument("window_variance: stride must be >= 1");

  VarianceCurve curve;
  curve.w = w;
  curve.s = s;
  // Windows [start, start + w) fully inside the sequence; the center index
  // is start + (w-1)/2 and consecutive centers advance by s.
  for (int start = 0; start + w <= n; start += s) {
    double mean = 0.0;
    for (int j = start; j < start + w; ++j) mean += labels[j];
    mean /= w;
    double var = 0.0;
    for (int j = start; j < start + w; ++j) {
      var += (labels[j] - mean) * (labels[j] - mean);
    }
    var /= w;
    curve.centers.push_back(scan[start + (w - 1) / 2]);
    curve.variances.push_back(var);
  }
  return curve;
}

std::vector<Peak> find_peaks(const VarianceCurve& curve) {
  std::vector<Peak> peaks;
  for (std::size_t i = 1; i + 1 < curve.variances.size(); ++i) {
    if (curve.variances[i - 1] < curve.variances[i] &&
        curve.variances[i] > curve.variances[i + 1]) {
      peaks.push_back({curve.centers[i], curve.variances[i]});
    }
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.height > b.height; });
  return peaks;
}

std::vector<Peak> dominant_peaks(const std::vector<Peak>& peaks, double rel) {
  std::vector<Peak> out;
  if (peaks.empty()) return out;
  double cutoff = rel * peaks.front().height;
  for (const Peak& p : peaks) {
    if (p.height >= cutoff) out.push_back(p);
  }
  return out;
}

double step_boundary(const std::vector<double>& scan, const std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  if (n < 2 || scan.size() != labels.size()) {
    throw std::invalid_argument("step_boundary: need two or more labeled points");
  }
  // Split at b: left takes the majority label of [0,b), right of [b,n);
  // minimize disagreements. Ties resolve to the earliest split.
  int best_split = 1;
  int best_cost = std::numeric_limits<int>::max();
  for (int b = 1; b < n; ++b) {
    std::vector<int> left, right;
    for (int i = 0; i < n; ++i) (i < b ? left : right).push_back(labels[i]);
    auto majority_cost = [](const std::vector<int>& v) {
      std::vector<int> counts;
      for (int l : v) {
        if (l >= static_cast<int>(counts.size())) counts.resize(l + 1, 0);
        counts[l]++;
      }
      int mx = 0;
      for (int c : counts) mx = std::max(mx, c);
      return static_cast<int>(v.size()) - mx;
    };
    int cost = majority_cost(left) + majority_cost(right);
    if (cost < best_cost) {
      best_cost = cost;
      best_split = b;
    }
  }
  return 0.5 * (scan[best_split - 1] + scan[best_split]);
}

std::vector<PhaseDiagramCell> phase_diagram(const std::vector<PhaseDiagramRow>& rows) {
  std::vector<PhaseDiagramCell> cells;
  for (const auto& row : rows) {
    if (row.h2.size() != row.labels.size()) {
      throw std::invalid_argument("phase_diagram: ragged row");
    }
    for (std::size_t i = 0; i < row.h2.size(); ++i) {
      cells.push_back({row.h1, row.h2[i], row.labels[i]});
    }
  }
  return cells;
}

}  // namespace qpl
