#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "qpl/circuit.hpp"
#include "qpl/rng.hpp"
#include "qpl/statevec.hpp"

namespace qpl::testing {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Mat pauli_matrix(char axis) {
  Mat m(2, 2);
  const std::complex<double> I{0, 1};
  switch (axis) {
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, -I, I, 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default:  m << 1, 0, 0, 1; break;
  }
  return m;
}

// Full matrix of a single-qubit operator on qubit q (little-endian: qubit 0
// is the least significant index bit).
inline Mat embed_single(const Mat& g, int q, int n) {
  Mat m = Mat::Identity(1, 1);
  for (int k = 0; k < n; ++k) {
    m = (k == q) ? kron(g, m) : kron(Mat::Identity(2, 2), m);
  }
  return m;
}

inline Mat gate_matrix(const Gate& g, double theta, int n) {
  using std::cos;
  using std::sin;
  const std::complex<double> I{0, 1};
  if (g.kind == GateKind::CZ) {
    const std::size_t dim = std::size_t{1} << n;
    Mat m = Mat::Zero(dim, dim);
    const std::size_t b0 = std::size_t{1} << g.q0;
    const std::size_t b1 = std::size_t{1} << g.q1;
    for (std::size_t i = 0; i < dim; ++i) {
      m(i, i) = ((i & b0) && (i & b1)) ? -1.0 : 1.0;
    }
    return m;
  }
  Mat u(2, 2);
  double c = cos(theta / 2), s = sin(theta / 2);
  switch (g.kind) {
    case GateKind::RX: u << c, -I * s, -I * s, c; break;
    case GateKind::RY: u << c, -s, s, c; break;
    case GateKind::RZ: u << std::exp(-I * (theta / 2)), 0, 0, std::exp(I * (theta / 2)); break;
    default: break;
  }
  return embed_single(u, g.q0, n);
}

// Dense matrix-chain evaluation of a whole circuit; the brute-force oracle
// for run_circuit.
inline Vec circuit_matrix_apply(const CircuitTemplate& tmpl, const std::vector<double>& theta,
                                const Vec& init) {
  Vec v = init;
  for (const Gate& g : tmpl.gates) {
    double t = g.is_rotation() ? theta[g.param_index] : 0.0;
    v = gate_matrix(g, t, tmpl.n_qubits) * v;
  }
  return v;
}

inline Mat pauli_sum_matrix(const PauliSum& h) {
  const std::size_t dim = std::size_t{1} << h.n_qubits();
  Mat m = Mat::Zero(dim, dim);
  for (const auto& term : h.terms()) {
    Mat t = Mat::Identity(dim, dim);
    for (const auto& op : term.ops) {
      t = embed_single(pauli_matrix(op.axis), op.site, h.n_qubits()) * t;
    }
    m += term.coeff * t;
  }
  return m;
}

inline Vec to_eigen(const StateVector& s) {
  Vec v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v(i) = s[i];
  return v;
}

// Random circuit with sequential param indices; CZ mixed in.
inline CircuitTemplate random_template(int n, int depth, Rng& rng) {
  CircuitTemplate tmpl;
  tmpl.n_qubits = n;
  int p = 0;
  for (int d = 0; d < depth; ++d) {
    int pick = static_cast<int>(rng.below(4));
    int q = static_cast<int>(rng.below(n));
    switch (pick) {
      case 0: tmpl.gates.push_back(Gate::rx(q, p++)); break;
      case 1: tmpl.gates.push_back(Gate::ry(q, p++)); break;
      case 2: tmpl.gates.push_back(Gate::rz(q, p++)); break;
      default: {
        int q2 = static_cast<int>(rng.below(n - 1));
        if (q2 >= q) ++q2;
        tmpl.gates.push_back(Gate::cz(q, q2));
        break;
      }
    }
  }
  tmpl.n_params = p;
  return tmpl;
}

inline PauliSum random_pauli_sum(int n, int n_terms, Rng& rng) {
  PauliSum h(n);
  const char axes[3] = {'X', 'Y', 'Z'};
  for (int t = 0; t < n_terms; ++t) {
    std::vector<PauliSum::Op> ops;
    for (int q = 0; q < n; ++q) {
      int pick = static_cast<int>(rng.below(4));
      if (pick < 3) ops.push_back({q, axes[pick]});
    }
    if (ops.empty()) ops.push_back({static_cast<int>(rng.below(n)), 'Z'});
    h.add_term(rng.uniform(-1.0, 1.0), std::move(ops));
  }
  return h;
}

}  // namespace qpl::testing
