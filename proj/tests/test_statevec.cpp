#include <doctest.h>

#include <cmath>
#include <complex>

#include "qpl/ansatz.hpp"
#include "qpl/models.hpp"
#include "qpl/statevec.hpp"
#include "test_helpers.hpp"

using namespace qpl;
namespace T = qpl::testing;

TEST_CASE("apply_gate: RX(0) is the identity") {
  Rng rng(42);
  StateVector s(3);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = cplx{rng.normal(), rng.normal()};
  s.normalize();
  StateVector before = s;
  apply_gate(s, Gate::rx(1, 0), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(s[i] - before[i]) < 1e-15);
  }
}

TEST_CASE("apply_gate: CZ phases |11> only and is symmetric in its qubits") {
  StateVector s00 = StateVector::basis_state(2, 0b00);
  apply_gate(s00, Gate::cz(0, 1));
  CHECK(s00[0] == cplx{1.0, 0.0});

  StateVector s11 = StateVector::basis_state(2, 0b11);
  apply_gate(s11, Gate::cz(0, 1));
  CHECK(s11[3] == cplx{-1.0, 0.0});

  Rng rng(7);
  StateVector a(4);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = cplx{rng.normal(), rng.normal()};
  a.normalize();
  StateVector b = a;
  apply_gate(a, Gate::cz(1, 3));
  apply_gate(b, Gate::cz(3, 1));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("apply_gate: RX(pi)|0> = -i|1>") {
  StateVector s(1);
  apply_gate(s, Gate::rx(0, 0), M_PI);
  CHECK(std::abs(s[0]) < 1e-15);
  CHECK(std::abs(s[1] - cplx{0.0, -1.0}) < 1e-15);
}

TEST_CASE("apply_gate: matches the dense 2x2/4x4 matrix oracle on random states") {
  Rng rng(11);
  const int n = 4;
  for (int trial = 0; trial < 30; ++trial) {
    StateVector s(n);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = cplx{rng.normal(), rng.normal()};
    s.normalize();
    CircuitTemplate tmpl = T::random_template(n, 1, rng);
    double theta = rng.uniform(-M_PI, M_PI);
    T::Vec expect = T::gate_matrix(tmpl.gates[0], theta, n) * T::to_eigen(s);
    apply_gate(s, tmpl.gates[0], tmpl.gates[0].is_rotation() ? theta : 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(s[i] - expect(i)) < 1e-13);
    }
  }
}

TEST_CASE("apply_gate: rejects bad qubit indices and non-finite angles") {
  StateVector s(2);
  CHECK_THROWS_AS(apply_gate(s, Gate::rx(2, 0), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(apply_gate(s, Gate::cz(0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(apply_gate(s, Gate::rx(0, 0), std::nan("")), std::invalid_argument);
}

TEST_CASE("run_circuit: all-zero theta on the TFIM ansatz fixes |0...0>") {
  CircuitTemplate tmpl = tfim_ansatz(4, 2);
  std::vector<double> theta(tmpl.n_params, 0.0);
  StateVector out = run_circuit(tmpl, theta);
  CHECK(std::abs(out[0] - cplx{1.0, 0.0}) < 1e-12);
  for (std::size_t i = 1; i < out.size(); ++i) CHECK(std::abs(out[i]) < 1e-12);
}

TEST_CASE("run_circuit: empty template returns init unchanged") {
  CircuitTemplate tmpl;
  tmpl.n_qubits = 3;
  StateVector init = StateVector::basis_state(3, 0b101);
  StateVector out = run_circuit(tmpl, {}, init);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == init[i]);
}

TEST_CASE("run_circuit: cluster ansatz N=3 all-ones matches the matrix-chain oracle") {
  CircuitTemplate tmpl = cluster_ansatz(3, 1);
  std::vector<double> theta(tmpl.n_params, 1.0);
  T::Vec init = T::Vec::Zero(8);
  init(0) = 1.0;
  T::Vec expect = T::circuit_matrix_apply(tmpl, theta, init);
  StateVector out = run_circuit(tmpl, theta);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(std::abs(out[i] - expect(i)) < 1e-12);
  }
}

TEST_CASE("run_circuit: parameter length mismatch throws") {
  CircuitTemplate tmpl = tfim_ansatz(3, 1);
  std::vector<double> theta(tmpl.n_params - 1, 0.0);
  CHECK_THROWS_AS(run_circuit(tmpl, theta), std::invalid_argument);
}

TEST_CASE("expectation: basis-state Paulis") {
  StateVector zero(3);
  for (int i = 0; i < 3; ++i) {
    PauliSum z(3);
    z.add_term(1.0, {{i, 'Z'}});
    CHECK(expectation(zero, z) == doctest::Approx(1.0).epsilon(1e-12));
    PauliSum x(3);
    x.add_term(1.0, {{i, 'X'}});
    CHECK(expectation(zero, x) == doctest::Approx(0.0).epsilon(1e-12));
  }
  PauliSum tfim = build_tfim(3, 0.0, Boundary::PERIODIC);
  CHECK(expectation(zero, tfim) == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("expectation: agrees with the dense matrix oracle on random states") {
  Rng rng(5);
  const int n = 4;
  for (int trial = 0; trial < 10; ++trial) {
    PauliSum h = T::random_pauli_sum(n, 6, rng);
    StateVector s(n);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = cplx{rng.normal(), rng.normal()};
    s.normalize();
    T::Vec v = T::to_eigen(s);
    double expect = (v.adjoint() * T::pauli_sum_matrix(h) * v)(0).real();
    CHECK(expectation(s, h) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("expectation: linear in the Hamiltonian scale") {
  Rng rng(9);
  PauliSum h = T::random_pauli_sum(4, 5, rng);
  StateVector s(4);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = cplx{rng.normal(), rng.normal()};
  s.normalize();
  double e1 = expectation(s, h);
  double e2 = expectation(s, h.scaled(-3.7));
  CHECK(std::abs(e2 - (-3.7) * e1) < 1e-12);
}

TEST_CASE("fidelity: basic identities") {
  StateVector zero(1);
  StateVector one = StateVector::basis_state(1, 1);
  StateVector plus(1);
  apply_gate(plus, Gate::ry(0, 0), M_PI_2);

  CHECK(fidelity(zero, zero) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fidelity(zero, one) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fidelity(zero, plus) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("norm is preserved through random deep circuits") {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 3 + static_cast<int>(rng.below(6));  // up to 8 qubits
    CircuitTemplate tmpl = T::random_template(n, 40, rng);
    std::vector<double> theta(tmpl.n_params);
    for (double& t : theta) t = rng.uniform(-M_PI, M_PI);
    StateVector out = run_circuit(tmpl, theta);
    CHECK(std::abs(out.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("gradients: constant circuit has zero gradient") {
  CircuitTemplate tmpl;
  tmpl.n_qubits = 2;
  tmpl.gates = {Gate::cz(0, 1)};
  tmpl.n_params = 0;
  PauliSum h = build_tfim(3, 1.0, Boundary::OPEN);
  // qubit mismatch should throw first
  CHECK_THROWS(grad_adjoint(tmpl, {}, h));

  PauliSum h2(2);
  h2.add_term(1.0, {{0, 'Z'}});
  auto g = grad_adjoint(tmpl, {}, h2);
  CHECK(g.empty());
}

TEST_CASE("gradients: adjoint vs parameter shift vs finite differences, random N=4") {
  Rng rng(21);
  const int n = 4;
  for (int trial = 0; trial < 20; ++trial) {
    CircuitTemplate tmpl = T::random_template(n, 12, rng);
    if (tmpl.n_params == 0) continue;
    PauliSum h = T::random_pauli_sum(n, 4, rng);
    std::vector<double> theta(tmpl.n_params);
    for (double& t : theta) t = rng.uniform(-M_PI, M_PI);

    auto adj = grad_adjoint(tmpl, theta, h);
    auto shift = grad_parameter_shift(tmpl, theta, h);
    double scale = 1.0;
    for (double g : shift) scale = std::max(scale, std::abs(g));

    for (int j = 0; j < tmpl.n_params; ++j) {
      CHECK(std::abs(adj[j] - shift[j]) < 1e-8);
    }

    // Central differences, step 1e-5.
    const double step = 1e-5;
    std::vector<double> t2 = theta;
    for (int j = 0; j < tmpl.n_params; ++j) {
      t2[j] = theta[j] + step;
      double ep = expectation(run_circuit(tmpl, t2), h);
      t2[j] = theta[j] - step;
      double em = expectation(run_circuit(tmpl, t2), h);
      t2[j] = theta[j];
      double fd = (ep - em) / (2 * step);
      CHECK(std::abs(adj[j] - fd) / scale < 1e-5);
    }
  }
}

TEST_CASE("grad_adjoint reports the energy byproduct") {
  Rng rng(30);
  CircuitTemplate tmpl = T::random_template(4, 10, rng);
  PauliSum h = T::random_pauli_sum(4, 4, rng);
  std::vector<double> theta(tmpl.n_params);
  for (double& t : theta) t = rng.uniform(-M_PI, M_PI);
  double energy = 0.0;
  grad_adjoint(tmpl, theta, h, &energy);
  CHECK(energy == doctest::Approx(expectation(run_circuit(tmpl, theta), h)).epsilon(1e-12));
}
