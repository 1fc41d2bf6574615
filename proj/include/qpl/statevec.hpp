#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "qpl/circuit.hpp"

namespace qpl {

using cplx = std::complex<double>;

// Dense state vector over n qubits, little-endian: qubit 0 is the least
// significant bit of the amplitude index.
class StateVector {
 public:
  explicit StateVector(int n_qubits);

  // Computational basis state |bits>.
  static StateVector basis_state(int n_qubits, std::uint64_t bits);

  int n_qubits() const { return n_qubits_; }
  std::size_t size() const { return amps_.size(); }
  std::span<cplx> amplitudes() { return amps_; }
  std::span<const cplx> amplitudes() const { return amps_; }
  cplx& operator[](std::size_t i) { return amps_[i]; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }

  double norm() const;
  void normalize();

 private:
  int n_qubits_;
  std::vector<cplx> amps_;
};

// Weighted sum of Pauli strings on n qubits. Within a term, sites are
// strictly increasing; zero-coefficient terms are dropped on insertion.
class PauliSum {
 public:
  struct Op {
    int site;
    char axis;  // 'X', 'Y' or 'Z'
  };
  struct Term {
    double coeff;
    std::vector<Op> ops;
  };

  explicit PauliSum(int n_qubits);

  void add_term(double coeff, std::vector<Op> ops);
  const std::vector<Term>& terms() const { return terms_; }
  int n_qubits() const { return n_qubits_; }

  PauliSum scaled(double factor) const;

  // Precompiled per-term bit masks for fast expectation / apply.
  struct Compiled {
    double coeff;
    std::uint64_t flip;   // X|Y sites: P|i> lands on |i ^ flip>
    std::uint64_t zy;     // Z|Y sites: sign (-1)^popcount(i & zy)
    cplx unit;            // i^{#Y}
  };
  const std::vector<Compiled>& compiled() const { return compiled_; }

 private:
  int n_qubits_;
  std::vector<Term> terms_;
  std::vector<Compiled> compiled_;
};

// Gate application, in place. Rotation convention R_a(theta) = exp(-i theta/2 sigma_a).
void apply_gate(StateVector& state, const Gate& g, double theta = 0.0);
void apply_gate_dagger(StateVector& state, const Gate& g, double theta = 0.0);

// Applies the template's gates in order to `init`.
StateVector run_circuit(const CircuitTemplate& tmpl, std::span<const double> theta,
                        const StateVector& init);
StateVector run_circuit(const CircuitTemplate& tmpl, std::span<const double> theta);

// <state| h |state>, imaginary residue (bounded by rounding for Hermitian
// input) discarded.
double expectation(const StateVector& state, const PauliSum& h);

// out = h * in. `out` is overwritten and may not alias `in`.
void apply_pauli_sum(const StateVector& in, const PauliSum& h, StateVector& out);

// <a|b>
cplx overlap(const StateVector& a, const StateVector& b);

// |<a|b>|^2
double fidelity(const StateVector& a, const StateVector& b);

// d<H>/dtheta_j via one forward and one reverse sweep. When `energy_out` is
// given it receives <H> at theta (a free byproduct of the forward sweep).
std::vector<double> grad_adjoint(const CircuitTemplate& tmpl, std::span<const double> theta,
                                 const PauliSum& h, double* energy_out = nullptr);

// Same gradient via the exact +-pi/2 shift rule; 2*n_params circuit runs.
std::vector<double> grad_parameter_shift(const CircuitTemplate& tmpl,
                                         std::span<const double> theta, const PauliSum& h);

}  // namespace qpl
