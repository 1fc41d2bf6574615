#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qpl/analysis.hpp"
#include "qpl/rng.hpp"

using namespace qpl;

namespace {

std::vector<std::vector<double>> gaussian_blob(int n, std::vector<double> center, double sigma,
                                               Rng& rng) {
  std::vector<std::vector<double>> out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v = center;
    for (double& x : v) x += sigma * rng.normal();
    out.push_back(std::move(v));
  }
  return out;
}

double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&v](int i, int j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  auto ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= ra.size();
  mb /= rb.size();
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("pca: a line in 2-D is captured by one component") {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 20; ++i) {
    double t = 0.1 * i;
    pts.push_back({2.0 * t + 1.0, -t + 3.0});
  }
  PcaModel model = pca_fit(pts, 2);
  double total = model.eigenvalues[0] + model.eigenvalues[1];
  CHECK(model.eigenvalues[0] / total == doctest::Approx(1.0).epsilon(1e-10));

  // the mean maps to the origin
  auto z = pca_transform(model, model.mean);
  CHECK(std::abs(z[0]) < 1e-12);
  CHECK(std::abs(z[1]) < 1e-12);
}

TEST_CASE("pca: two blobs are bimodal along the first component") {
  Rng rng(1);
  auto a = gaussian_blob(40, {0.0, 0.0, 0.0}, 0.3, rng);
  auto b = gaussian_blob(40, {5.0, 5.0, 5.0}, 0.3, rng);
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  PcaModel model = pca_fit(all, 1);
  int below = 0, above = 0, near = 0;
  for (const auto& v : all) {
    double s = pca_transform(model, v)[0];
    if (std::abs(s) < 2.0) {
      ++near;
    } else {
      (s < 0 ? below : above)++;
    }
  }
  CHECK(near == 0);
  CHECK(below == 40);
  CHECK(above == 40);
}

TEST_CASE("pca: centering makes the transform shift-invariant") {
  Rng rng(2);
  auto pts = gaussian_blob(30, {1.0, -2.0, 0.5, 3.0}, 1.0, rng);
  PcaModel base = pca_fit(pts, 2);
  auto shifted = pts;
  for (auto& v : shifted) {
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += 7.5;
  }
  PcaModel moved = pca_fit(shifted, 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto za = pca_transform(base, pts[i]);
    auto zb = pca_transform(moved, shifted[i]);
    for (int c = 0; c < 2; ++c) CHECK(za[c] == doctest::Approx(zb[c]).epsilon(1e-9));
  }
}

TEST_CASE("pca: k validation") {
  Rng rng(3);
  auto pts = gaussian_blob(10, {0.0, 0.0}, 1.0, rng);
  CHECK_THROWS_AS(pca_fit(pts, 3), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(pts, 0), std::invalid_argument);
}

TEST_CASE("kpca: small gamma reproduces linear PCA ordering") {
  Rng rng(4);
  auto pts = gaussian_blob(60, {0.0, 0.0, 0.0}, 1.5, rng);
  PcaModel lin = pca_fit(pts, 1);
  KpcaModel ker = kpca_fit(pts, 1e-6);
  std::vector<double> ls, ks;
  for (const auto& v : pts) {
    ls.push_back(pca_transform(lin, v)[0]);
    ks.push_back(kpca_transform(ker, v));
  }
  CHECK(std::abs(rank_correlation(ls, ks)) > 0.99);
}

TEST_CASE("kpca: duplicate points get identical scores; all-identical input is degenerate") {
  Rng rng(5);
  auto pts = gaussian_blob(20, {0.0, 0.0}, 1.0, rng);
  pts.push_back(pts[4]);
  KpcaModel model = kpca_fit(pts);
  CHECK(kpca_transform(model, pts[4]) ==
        doctest::Approx(kpca_transform(model, pts.back())).epsilon(1e-12));

  std::vector<std::vector<double>> same(8, {1.0, 2.0});
  CHECK_THROWS_AS(kpca_fit(same), std::invalid_argument);
}

TEST_CASE("gmm: K=1 recovers the sample mean") {
  Rng rng(6);
  auto pts = gaussian_blob(50, {2.0, -1.0}, 0.7, rng);
  GmmModel model = gmm_fit(pts, 1, 9);
  std::vector<double> mean(2, 0.0);
  for (const auto& v : pts) {
    mean[0] += v[0] / pts.size();
    mean[1] += v[1] / pts.size();
  }
  CHECK(model.means[0][0] == doctest::Approx(mean[0]).epsilon(1e-8));
  CHECK(model.means[0][1] == doctest::Approx(mean[1]).epsilon(1e-8));
  for (const auto& v : pts) CHECK(gmm_predict(model, v) == 0);
}

TEST_CASE("gmm: two well-separated blobs are labeled perfectly and canonically") {
  Rng rng(7);
  auto left = gaussian_blob(60, {-5.0, 0.0}, 0.5, rng);
  auto right = gaussian_blob(60, {5.0, 0.0}, 0.5, rng);
  auto all = left;
  all.insert(all.end(), right.begin(), right.end());
  GmmModel model = gmm_fit(all, 2, 11);
  // canonical: cluster 0 has the smaller first-coordinate mean
  CHECK(model.means[0][0] < model.means[1][0]);
  for (int i = 0; i < 60; ++i) {
    CHECK(gmm_predict(model, left[i]) == 0);
    CHECK(gmm_predict(model, right[i]) == 1);
  }
}

TEST_CASE("gmm: log-likelihood is nondecreasing over EM iterations") {
  Rng rng(8);
  auto a = gaussian_blob(40, {0.0, 0.0}, 1.0, rng);
  auto b = gaussian_blob(40, {2.5, 1.0}, 0.8, rng);
  a.insert(a.end(), b.begin(), b.end());
  std::vector<double> trace;
  GmmOptions opts;
  opts.restarts = 1;
  opts.ll_trace = &trace;
  gmm_fit(a, 2, 13, opts);
  REQUIRE(trace.size() > 1);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-10);
  }
}

TEST_CASE("gmm: prediction is invariant under weight rescaling") {
  Rng rng(9);
  auto a = gaussian_blob(30, {0.0, 0.0}, 1.0, rng);
  auto b = gaussian_blob(50, {4.0, 0.0}, 1.0, rng);
  a.insert(a.end(), b.begin(), b.end());
  GmmModel model = gmm_fit(a, 2, 17);
  GmmModel rescaled = model;
  for (double& w : rescaled.weights) w *= 3.7;
  for (const auto& v : a) CHECK(gmm_predict(model, v) == gmm_predict(rescaled, v));
}

TEST_CASE("gmm: K larger than the sample count is rejected") {
  std::vector<std::vector<double>> pts = {{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(gmm_fit(pts, 3, 1), std::invalid_argument);
}

TEST_CASE("silhouette: well-separated clustering scores far above a shuffled labeling") {
  Rng rng(10);
  auto a = gaussian_blob(30, {-4.0, 0.0}, 0.4, rng);
  auto b = gaussian_blob(30, {4.0, 0.0}, 0.4, rng);
  a.insert(a.end(), b.begin(), b.end());
  std::vector<int> good(60), bad(60);
  for (int i = 0; i < 60; ++i) {
    good[i] = i < 30 ? 0 : 1;
    bad[i] = i % 2;
  }
  double sg = silhouette_score(a, good);
  double sb = silhouette_score(a, bad);
  CHECK(sg > 0.9);
  CHECK(sg > sb + 0.5);
}

TEST_CASE("window_variance: constant labels give a zero curve") {
  std::vector<int> labels(100, 2);
  std::vector<double> scan(100);
  std::iota(scan.begin(), scan.end(), 0.0);
  VarianceCurve curve = window_variance(labels, scan, 11, 7);
  for (double v : curve.variances) CHECK(v == 0.0);
}

TEST_CASE("window_variance: [0,0,1,1] in one window of 4 has variance 0.25") {
  VarianceCurve curve = window_variance({0, 0, 1, 1}, {0.0, 1.0, 2.0, 3.0}, 4, 1);
  REQUIRE(curve.variances.size() == 1);
  CHECK(curve.variances[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(curve.centers[0] == 1.0);  // center index (w-1)/2
}

TEST_CASE("window_variance: the published window counts") {
  {
    std::vector<int> labels(3901, 0);
    std::vector<double> scan(3901);
    std::iota(scan.begin(), scan.end(), 0.0);
    VarianceCurve curve = window_variance(labels, scan, 501, 50);
    CHECK(curve.centers.size() == 69);
  }
  {
    std::vector<int> labels(391, 0);
    std::vector<double> scan(391);
    std::iota(scan.begin(), scan.end(), 0.0);
    VarianceCurve curve = window_variance(labels, scan, 51, 5);
    CHECK(curve.centers.size() == 69);
  }
}

TEST_CASE("window_variance: rejects oversized windows and mismatched inputs") {
  std::vector<int> labels(10, 0);
  std::vector<double> scan(10, 0.0);
  CHECK_THROWS_AS(window_variance(labels, scan, 11, 1), std::invalid_argument);
  scan.pop_back();
  CHECK_THROWS_AS(window_variance(labels, scan, 3, 1), std::invalid_argument);
}

TEST_CASE("find_peaks: strict local maxima only, sorted by height") {
  VarianceCurve curve;
  curve.centers = {0, 1, 2};
  curve.variances = {0.0, 1.0, 0.0};
  auto peaks = find_peaks(curve);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].center == 1.0);

  curve.centers = {0, 1, 2, 3};
  curve.variances = {0.0, 0.5, 1.0, 1.5};  // monotone
  CHECK(find_peaks(curve).empty());

  curve.variances = {0.0, 1.0, 1.0, 0.0};  // plateau is not a peak
  CHECK(find_peaks(curve).empty());

  curve.centers = {0, 1, 2, 3, 4, 5, 6};
  curve.variances = {0.0, 0.3, 0.1, 0.0, 0.9, 0.2, 0.0};
  peaks = find_peaks(curve);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].center == 4.0);
  CHECK(peaks[1].center == 1.0);
}

TEST_CASE("find_peaks: matches a brute-force scan on 1000 random curves") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 3 + static_cast<int>(rng.below(30));
    VarianceCurve curve;
    curve.centers.resize(n);
    curve.variances.resize(n);
    for (int i = 0; i < n; ++i) {
      curve.centers[i] = i;
      // coarse values make plateaus likely
      curve.variances[i] = std::floor(rng.uniform() * 4.0) / 4.0;
    }
    auto peaks = find_peaks(curve);
    std::vector<double> expect;
    for (int i = 1; i + 1 < n; ++i) {
      if (curve.variances[i] > curve.variances[i - 1] &&
          curve.variances[i] > curve.variances[i + 1]) {
        expect.push_back(curve.centers[i]);
      }
    }
    std::vector<double> got;
    for (const Peak& p : peaks) got.push_back(p.center);
    std::sort(got.begin(), got.end());
    CHECK(got == expect);
  }
}

TEST_CASE("dominant_peaks: filters below half the maximum") {
  std::vector<Peak> peaks = {{1.0, 1.0}, {2.0, 0.6}, {3.0, 0.4}};
  auto dom = dominant_peaks(peaks, 0.5);
  REQUIRE(dom.size() == 2);
  CHECK(dom[0].center == 1.0);
  CHECK(dom[1].center == 2.0);
  CHECK(dominant_peaks({}, 0.5).empty());
}

TEST_CASE("step_boundary: clean and noisy steps") {
  std::vector<double> scan = {0, 1, 2, 3, 4};
  CHECK(step_boundary(scan, {0, 0, 0, 1, 1}) == doctest::Approx(2.5));

  std::vector<double> scan2(40);
  std::iota(scan2.begin(), scan2.end(), 0.0);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[i] = i < 22 ? 0 : 1;
  labels[5] = 1;  // one outlier
  CHECK(step_boundary(scan2, labels) == doctest::Approx(21.5));
}

TEST_CASE("phase_diagram: single row verbatim, constant labels uniform") {
  PhaseDiagramRow row;
  row.h1 = 0.6;
  row.h2 = {-1.0, 0.0, 1.0};
  row.labels = {2, 0, 1};
  auto cells = phase_diagram({row});
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].h1 == 0.6);
  CHECK(cells[0].h2 == -1.0);
  CHECK(cells[0].label == 2);
  CHECK(cells[2].label == 1);

  PhaseDiagramRow flat;
  flat.h1 = 0.2;
  flat.h2 = {0.0, 0.5};
  flat.labels = {1, 1};
  auto uniform = phase_diagram({row, flat});
  CHECK(uniform.size() == 5);
  CHECK(uniform[3].label == 1);
  CHECK(uniform[4].label == 1);
}
