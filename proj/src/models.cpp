#include "qpl/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qpl/rng.hpp"

namespace qpl {

const char* family_name(Family f) {
  switch (f) {
    case Family::TFIM: return "tfim";
    case Family::CLUSTER_ISING: return "cluster_ising";
    case Family::CLUSTER_YY: return "cluster_yy";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "tfim") return Family::TFIM;
  if (name == "cluster_ising") return Family::CLUSTER_ISING;
  if (name == "cluster_yy") return Family::CLUSTER_YY;
  throw std::invalid_argument("unknown Hamiltonian family: " + name);
}

const char* boundary_name(Boundary b) {
  return b == Boundary::OPEN ? "open" : "periodic";
}

Boundary boundary_from_name(const std::string& name) {
  if (name == "open") return Boundary::OPEN;
  if (name == "periodic") return Boundary::PERIODIC;
  throw std::invalid_argument("unknown boundary: " + name);
}

PauliSum build_tfim(int n, double h, Boundary boundary) {
  if (n < 3) throw std::invalid_argument("build_tfim: n >= 3 required");
  PauliSum sum(n);
  int bonds = boundary == Boundary::PERIODIC ? n : n - 1;
  for (int i = 0; i < bonds; ++i) {
    int j = (i + 1) % n;
    int a = std::min(i, j), b = std::max(i, j);
    sum.add_term(-1.0, {{a, 'Z'}, {b, 'Z'}});
  }
  for (int i = 0; i < n; ++i) sum.add_term(-h, {{i, 'X'}});
  return sum;
}

PauliSum build_cluster_ising(int n, double h1, double h2) {
  if (n < 3) throw std::invalid_argument("build_cluster_ising: n >= 3 required");
  PauliSum sum(n);
  for (int i = 0; i + 2 < n; ++i) {
    sum.add_term(-1.0, {{i, 'Z'}, {i + 1, 'X'}, {i + 2, 'Z'}});
  }
  for (int i = 0; i < n; ++i) sum.add_term(-h1, {{i, 'X'}});
  for (int i = 0; i + 1 < n; ++i) sum.add_term(-h2, {{i, 'X'}, {i + 1, 'X'}});
  return sum;
}

PauliSum build_cluster_yy(int n, double lambda) {
  if (n < 3) throw std::invalid_argument("build_cluster_yy: n >= 3 required");
  PauliSum sum(n);
  for (int i = 0; i < n; ++i) {
    int left = (i + n - 1) % n;
    int right = (i + 1) % n;
    std::vector<PauliSum::Op> ops = {{left, 'X'}, {i, 'Z'}, {right, 'X'}};
    std::sort(ops.begin(), ops.end(),
              [](const PauliSum::Op& a, const PauliSum::Op& b) { return a.site < b.site; });
    sum.add_term(1.0, std::move(ops));
  }
  for (int i = 0; i < n; ++i) {
    int j = (i + 1) % n;
    int a = std::min(i, j), b = std::max(i, j);
    sum.add_term(lambda, {{a, 'Y'}, {b, 'Y'}});
  }
  return sum;
}

PauliSum build_hamiltonian(const HamiltonianSpec& spec) {
  auto need = [&spec](const char* key) {
    auto it = spec.params.find(key);
    if (it == spec.params.end()) {
      throw std::invalid_argument(std::string("missing Hamiltonian parameter: ") + key);
    }
    return it->second;
  };
  switch (spec.family) {
    case Family::TFIM:
      return build_tfim(spec.n_qubits, need("h"), spec.boundary);
    case Family::CLUSTER_ISING:
      return build_cluster_ising(spec.n_qubits, need("h1"), need("h2"));
    case Family::CLUSTER_YY:
      return build_cluster_yy(spec.n_qubits, need("lambda"));
  }
  throw std::invalid_argument("build_hamiltonian: bad family");
}

namespace {

PauliSum with_penalty(const PauliSum& h, double penalty_coeff) {
  if (penalty_coeff == 0.0) return h;
  PauliSum out = h;
  out.add_term(penalty_coeff, {{0, 'Z'}});
  return out;
}

bool all_terms_real(const PauliSum& h) {
  for (const auto& t : h.compiled()) {
    if (t.unit.imag() != 0.0) return false;
  }
  return true;
}

GroundResult dense_ground(const PauliSum& h_pen, const PauliSum& h) {
  const int n = h_pen.n_qubits();
  const std::size_t dim = std::size_t{1} << n;
  GroundResult res{0.0, 0.0, StateVector(n)};
  StateVector col(n), out(n);
  if (all_terms_real(h_pen)) {
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t j = 0; j < dim; ++j) {
      col = StateVector::basis_state(n, j);
      apply_pauli_sum(col, h_pen, out);
      for (std::size_t i = 0; i < dim; ++i) m(i, j) = out[i].real();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    res.penalized_energy = solver.eigenvalues()(0);
    const auto v = solver.eigenvectors().col(0);
    for (std::size_t i = 0; i < dim; ++i) res.state[i] = v(i);
  } else {
    Eigen::MatrixXcd m(dim, dim);
    for (std::size_t j = 0; j < dim; ++j) {
      col = StateVector::basis_state(n, j);
      apply_pauli_sum(col, h_pen, out);
      for (std::size_t i = 0; i < dim; ++i) m(i, j) = out[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
    res.penalized_energy = solver.eigenvalues()(0);
    const auto v = solver.eigenvectors().col(0);
    for (std::size_t i = 0; i < dim; ++i) res.state[i] = v(i);
  }
  res.state.normalize();
  res.energy = expectation(res.state, h);
  return res;
}

// Eigenvalues and eigenvectors of a symmetric tridiagonal matrix by implicit
// QL with Wilkinson shifts (diag d, off-diagonal e; e[0] unused on entry).
void tridiag_eigen(std::vector<double>& d, std::vector<double>& e,
                   std::vector<std::vector<double>>& z) {
  const int m = static_cast<int>(d.size());
  for (int i = 1; i < m; ++i) e[i - 1] = e[i];
  e[m - 1] = 0.0;
  for (int l = 0; l < m; ++l) {
    int iter = 0;
    int mm;
    do {
      for (mm = l; mm < m - 1; ++mm) {
        double dd = std::abs(d[mm]) + std::abs(d[mm + 1]);
        if (std::abs(e[mm]) <= 1e-300 || std::abs(e[mm]) <= 2.3e-16 * dd) break;
      }
      if (mm != l) {
        if (++iter == 80) throw std::runtime_error("tridiag_eigen: too many iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[mm] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i = mm - 1;
        bool underflow = false;
        for (; i >= l; --i) {
          double f = s * e[i];
          double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[mm] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (auto& row : z) {
            double zi1 = row[i + 1];
            row[i + 1] = s * row[i] + c * zi1;
            row[i] = c * row[i] - s * zi1;
          }
        }
        if (underflow && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[mm] = 0.0;
      }
    } while (mm != l);
  }
}

struct LanczosOutcome {
  double eigenvalue;
  StateVector state;
  double residual;
};

// One Lanczos pass: builds a Krylov basis from `start`, returns the lowest
// Ritz pair. Full reorthogonalization; stops early on invariant-subspace
// breakdown.
LanczosOutcome lanczos_pass(const PauliSum& h, const StateVector& start, int krylov_dim) {
  const int n = h.n_qubits();
  const std::size_t dim = std::size_t{1} << n;
  std::vector<StateVector> basis;
  basis.reserve(krylov_dim);
  std::vector<double> alpha, beta;

  StateVector v = start;
  v.normalize();
  basis.push_back(v);
  StateVector w(n);
  for (int k = 0; k < krylov_dim; ++k) {
    apply_pauli_sum(basis[k], h, w);
    cplx a = overlap(basis[k], w);
    alpha.push_back(a.real());
    for (std::size_t i = 0; i < dim; ++i) {
      w[i] -= a * basis[k][i];
      if (k > 0) w[i] -= beta[k - 1] * basis[k - 1][i];
    }
    // Full reorthogonalization against the whole basis.
    for (const StateVector& b : basis) {
      cplx c = overlap(b, w);
      for (std::size_t i = 0; i < dim; ++i) w[i] -= c * b[i];
    }
    double nb = w.norm();
    if (k + 1 == krylov_dim || nb < 1e-12) break;
    beta.push_back(nb);
    for (std::size_t i = 0; i < dim; ++i) w[i] /= nb;
    basis.push_back(w);
  }

  const int m = static_cast<int>(alpha.size());
  std::vector<double> d = alpha;
  std::vector<double> e(m, 0.0);
  for (int i = 1; i < m; ++i) e[i] = beta[i - 1];
  // Eigenvector rows: z[i][j] = j-th component of basis vector i's rotation.
  std::vector<std::vector<double>> z(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) z[i][i] = 1.0;
  tridiag_eigen(d, e, z);
  int best = 0;
  for (int j = 1; j < m; ++j) {
    if (d[j] < d[best]) best = j;
  }

  LanczosOutcome out{d[best], StateVector(n), 0.0};
  for (std::size_t i = 0; i < dim; ++i) out.state[i] = 0.0;
  for (int k = 0; k < m; ++k) {
    double c = z[k][best];
    for (std::size_t i = 0; i < dim; ++i) out.state[i] += c * basis[k][i];
  }
  out.state.normalize();
  apply_pauli_sum(out.state, h, w);
  double r2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) r2 += std::norm(w[i] - out.eigenvalue * out.state[i]);
  out.residual = std::sqrt(r2);
  return out;
}

GroundResult lanczos_ground(const PauliSum& h_pen, const PauliSum& h, const GroundOptions& opts) {
  const int n = h_pen.n_qubits();
  const std::size_t dim = std::size_t{1} << n;
  Rng rng(opts.seed);
  StateVector v(n);
  for (std::size_t i = 0; i < dim; ++i) v[i] = cplx{rng.normal(), rng.normal()};
  v.normalize();

  LanczosOutcome out{0.0, v, 1.0};
  for (int restart = 0; restart < opts.max_restarts; ++restart) {
    out = lanczos_pass(h_pen, v, opts.krylov_dim);
    if (out.residual <= opts.tol * std::max(1.0, std::abs(out.eigenvalue))) {
      GroundResult res;
      res.penalized_energy = out.eigenvalue;
      res.state = out.state;
      res.energy = expectation(res.state, h);
      return res;
    }
    v = out.state;
  }
  throw std::runtime_error("exact_ground: Lanczos did not converge within restart budget");
}

}  // namespace

GroundResult exact_ground(const PauliSum& h, double penalty_coeff, const GroundOptions& opts) {
  if (h.n_qubits() > 16) throw std::invalid_argument("exact_ground: supports up to 16 qubits");
  PauliSum h_pen = with_penalty(h, penalty_coeff);
  bool dense = opts.method == GroundOptions::Method::DENSE ||
               (opts.method == GroundOptions::Method::AUTO &&
                h.n_qubits() <= opts.dense_max_qubits);
  return dense ? dense_ground(h_pen, h) : lanczos_ground(h_pen, h, opts);
}

double string_order(const StateVector& state) {
  const int n = state.n_qubits();
  if (n < 5) throw std::invalid_argument("string_order: n >= 5 required");
  PauliSum s(n);
  std::vector<PauliSum::Op> ops;
  ops.push_back({0, 'X'});
  ops.push_back({1, 'Y'});
  for (int k = 2; k <= n - 3; ++k) ops.push_back({k, 'Z'});
  ops.push_back({n - 2, 'Y'});
  ops.push_back({n - 1, 'X'});
  s.add_term(1.0, std::move(ops));
  return expectation(state, s);
}

double magnetization(const StateVector& state) {
  double acc = 0.0;
  for (int i = 0; i < state.n_qubits(); ++i) acc += site_z(state, i);
  return acc / state.n_qubits();
}

double site_z(const StateVector& state, int site) {
  if (site < 0 || site >= state.n_qubits()) {
    throw std::invalid_argument("site_z: index out of range");
  }
  const std::size_t bit = std::size_t{1} << site;
  double acc = 0.0;
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    acc += (i & bit) ? -std::norm(amps[i]) : std::norm(amps[i]);
  }
  return acc;
}

double energy_discrepancy(double vqe_energy, const PauliSum& h, const GroundOptions& opts) {
  return vqe_energy - exact_ground(h, 0.0, opts).penalized_energy;
}

}  // namespace qpl
