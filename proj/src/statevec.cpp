#include "qpl/statevec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace qpl {

const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::CZ: return "CZ";
  }
  return "?";
}

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > 30) {
    throw std::invalid_argument("StateVector: qubit count out of range");
  }
  amps_.assign(std::size_t{1} << n_qubits, cplx{0.0, 0.0});
  amps_[0] = 1.0;
}

StateVector StateVector::basis_state(int n_qubits, std::uint64_t bits) {
  StateVector s(n_qubits);
  if (bits >= s.size()) throw std::invalid_argument("basis_state: bits out of range");
  s.amps_[0] = 0.0;
  s.amps_[bits] = 1.0;
  return s;
}

double StateVector::norm() const {
  double acc = 0.0;
  for (const cplx& a : amps_) acc += std::norm(a);
  return std::sqrt(acc);
}

void StateVector::normalize() {
  double n = norm();
  if (n <= 0.0) throw std::runtime_error("normalize: zero state");
  for (cplx& a : amps_) a /= n;
}

PauliSum::PauliSum(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > 30) {
    throw std::invalid_argument("PauliSum: qubit count out of range");
  }
}

void PauliSum::add_term(double coeff, std::vector<Op> ops) {
  if (!std::isfinite(coeff)) throw std::invalid_argument("PauliSum: non-finite coefficient");
  if (coeff == 0.0) return;
  int prev = -1;
  Compiled c{coeff, 0, 0, cplx{1.0, 0.0}};
  int n_y = 0;
  for (const Op& op : ops) {
    if (op.site <= prev) {
      throw std::invalid_argument("PauliSum: sites must be strictly increasing within a term");
    }
    if (op.site >= n_qubits_) throw std::invalid_argument("PauliSum: site out of range");
    prev = op.site;
    std::uint64_t bit = std::uint64_t{1} << op.site;
    switch (op.axis) {
      case 'X': c.flip |= bit; break;
      case 'Y': c.flip |= bit; c.zy |= bit; ++n_y; break;
      case 'Z': c.zy |= bit; break;
      default: throw std::invalid_argument("PauliSum: axis must be X, Y or Z");
    }
  }
  static const cplx kPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  c.unit = kPow[n_y % 4];
  terms_.push_back({coeff, std::move(ops)});
  compiled_.push_back(c);
}

PauliSum PauliSum::scaled(double factor) const {
  PauliSum out(n_qubits_);
  for (const Term& t : terms_) out.add_term(factor * t.coeff, t.ops);
  return out;
}

namespace {

void check_qubit(const StateVector& s, int q) {
  if (q < 0 || q >= s.n_qubits()) throw std::invalid_argument("gate qubit index out of range");
}

// Applies a single-qubit gate with matrix {{m00, m01}, {m10, m11}} on `q`.
template <typename Update>
void for_each_pair(StateVector& state, int q, Update&& update) {
  const std::size_t bit = std::size_t{1} << q;
  const std::size_t n = state.size();
  cplx* a = state.amplitudes().data();
  // Iterate indices with the target bit clear; (i, i|bit) form the pair.
  const std::size_t low_mask = bit - 1;
  for (std::size_t base = 0; base < n; base += 2 * bit) {
    for (std::size_t low = 0; low < bit; ++low) {
      std::size_t i0 = base | (low & low_mask);
      update(a[i0], a[i0 | bit]);
    }
  }
}

}  // namespace

void apply_gate(StateVector& state, const Gate& g, double theta) {
  check_qubit(state, g.q0);
  if (g.kind == GateKind::CZ) {
    check_qubit(state, g.q1);
    if (g.q0 == g.q1) throw std::invalid_argument("CZ qubits must be distinct");
    const std::size_t m0 = std::size_t{1} << g.q0;
    const std::size_t m1 = std::size_t{1} << g.q1;
    cplx* a = state.amplitudes().data();
    const std::size_t n = state.size();
    const std::size_t both = m0 | m1;
    for (std::size_t i = 0; i < n; ++i) {
      if ((i & both) == both) a[i] = -a[i];
    }
    return;
  }
  if (!std::isfinite(theta)) throw std::invalid_argument("rotation angle must be finite");
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  switch (g.kind) {
    case GateKind::RX:
      // [[c, -is], [-is, c]]
      for_each_pair(state, g.q0, [&](cplx& a0, cplx& a1) {
        cplx t0 = a0, t1 = a1;
        a0 = c * t0 + cplx{0, -s} * t1;
        a1 = cplx{0, -s} * t0 + c * t1;
      });
      break;
    case GateKind::RY:
      // [[c, -s], [s, c]]
      for_each_pair(state, g.q0, [&](cplx& a0, cplx& a1) {
        cplx t0 = a0, t1 = a1;
        a0 = c * t0 - s * t1;
        a1 = s * t0 + c * t1;
      });
      break;
    case GateKind::RZ: {
      // diag(e^{-i theta/2}, e^{+i theta/2})
      const cplx e0{c, -s}, e1{c, s};
      for_each_pair(state, g.q0, [&](cplx& a0, cplx& a1) {
        a0 *= e0;
        a1 *= e1;
      });
      break;
    }
    case GateKind::CZ:
      break;  // handled above
  }
}

void apply_gate_dagger(StateVector& state, const Gate& g, double theta) {
  if (g.kind == GateKind::CZ) {
    apply_gate(state, g, 0.0);  // CZ is self-inverse
  } else {
    apply_gate(state, g, -theta);
  }
}

StateVector run_circuit(const CircuitTemplate& tmpl, std::span<const double> theta,
                        const StateVector& init) {
  if (static_cast<int>(theta.size()) != tmpl.n_params) {
    throw std::invalid_argument("run_circuit: parameter count mismatch");
  }
  if (init.n_qubits() != tmpl.n_qubits) {
    throw std::invalid_argument("run_circuit: qubit count mismatch");
  }
  StateVector state = init;
  for (const Gate& g : tmpl.gates) {
    apply_gate(state, g, g.is_rotation() ? theta[g.param_index] : 0.0);
  }
  return state;
}

StateVector run_circuit(const CircuitTemplate& tmpl, std::span<const double> theta) {
  return run_circuit(tmpl, theta, StateVector(tmpl.n_qubits));
}

double expectation(const StateVector& state, const PauliSum& h) {
  if (state.n_qubits() != h.n_qubits()) {
    throw std::invalid_argument("expectation: qubit count mismatch");
  }
  const cplx* a = state.amplitudes().data();
  const std::size_t n = state.size();
  cplx acc{0.0, 0.0};
  for (const PauliSum::Compiled& t : h.compiled()) {
    cplx term{0.0, 0.0};
    if (t.flip == 0) {
      // Diagonal term: sum of signed probabilities.
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double sign = (std::popcount(i & t.zy) & 1) ? -1.0 : 1.0;
        d += sign * std::norm(a[i]);
      }
      term = d;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double sign = (std::popcount(i & t.zy) & 1) ? -1.0 : 1.0;
        term += sign * std::conj(a[i ^ t.flip]) * a[i];
      }
      term *= t.unit;
    }
    acc += t.coeff * term;
  }
  return acc.real();
}

void apply_pauli_sum(const StateVector& in, const PauliSum& h, StateVector& out) {
  if (in.n_qubits() != h.n_qubits()) {
    throw std::invalid_argument("apply_pauli_sum: qubit count mismatch");
  }
  if (out.n_qubits() != in.n_qubits()) out = StateVector(in.n_qubits());
  const cplx* src = in.amplitudes().data();
  cplx* dst = out.amplitudes().data();
  const std::size_t n = in.size();
  std::fill(dst, dst + n, cplx{0.0, 0.0});
  for (const PauliSum::Compiled& t : h.compiled()) {
    const cplx w = t.coeff * t.unit;
    for (std::size_t i = 0; i < n; ++i) {
      double sign = (std::popcount(i & t.zy) & 1) ? -1.0 : 1.0;
      dst[i ^ t.flip] += sign * w * src[i];
    }
  }
}

cplx overlap(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits()) throw std::invalid_argument("overlap: qubit count mismatch");
  const cplx* pa = a.amplitudes().data();
  const cplx* pb = b.amplitudes().data();
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(pa[i]) * pb[i];
  return acc;
}

double fidelity(const StateVector& a, const StateVector& b) {
  return std::norm(overlap(a, b));
}

namespace {

// <lhs| sigma_a on qubit q |rhs>
cplx pauli_bracket(const StateVector& lhs, GateKind axis, int q, const StateVector& rhs) {
  const cplx* l = lhs.amplitudes().data();
  const cplx* r = rhs.amplitudes().data();
  const std::size_t bit = std::size_t{1} << q;
  const std::size_t n = lhs.size();
  cplx acc{0.0, 0.0};
  for (std::size_t i0 = 0; i0 < n; i0 += 2 * bit) {
    for (std::size_t low = 0; low < bit; ++low) {
      std::size_t i = i0 | low;
      std::size_t j = i | bit;
      switch (axis) {
        case GateKind::RX:
          acc += std::conj(l[i]) * r[j] + std::conj(l[j]) * r[i];
          break;
        case GateKind::RY:
          acc += cplx{0, -1} * std::conj(l[i]) * r[j] + cplx{0, 1} * std::conj(l[j]) * r[i];
          break;
        case GateKind::RZ:
          acc += std::conj(l[i]) * r[i] - std::conj(l[j]) * r[j];
          break;
        default:
          break;
      }
    }
  }
  return acc;
}

}  // namespace

std::vector<double> grad_adjoint(const CircuitTemplate& tmpl, std::span<const double> theta,
                                 const PauliSum& h, double* energy_out) {
  if (static_cast<int>(theta.size()) != tmpl.n_params) {
    throw std::invalid_argument("grad_adjoint: parameter count mismatch");
  }
  std::vector<double> grad(tmpl.n_params, 0.0);
  StateVector phi = run_circuit(tmpl, theta);
  StateVector lambda(tmpl.n_qubits);
  apply_pauli_sum(phi, h, lambda);
  if (energy_out) *energy_out = overlap(phi, lambda).real();

  // Walk the circuit backwards. With phi = psi_j and lambda the adjoint
  // state, dE/dtheta_j = Im(<lambda| sigma_a |phi>) for R_a(theta_j).
  for (auto it = tmpl.gates.rbegin(); it != tmpl.gates.rend(); ++it) {
    const Gate& g = *it;
    if (g.is_rotation()) {
      grad[g.param_index] = pauli_bracket(lambda, g.kind, g.q0, phi).imag();
      apply_gate_dagger(phi, g, theta[g.param_index]);
      apply_gate_dagger(lambda, g, theta[g.param_index]);
    } else {
      apply_gate_dagger(phi, g);
      apply_gate_dagger(lambda, g);
    }
  }
  return grad;
}

std::vector<double> grad_parameter_shift(const CircuitTemplate& tmpl,
                                         std::span<const double> theta, const PauliSum& h) {
  if (static_cast<int>(theta.size()) != tmpl.n_params) {
    throw std::invalid_argument("grad_parameter_shift: parameter count mismatch");
  }
  std::vector<double> shifted(theta.begin(), theta.end());
  std::vector<double> grad(tmpl.n_params, 0.0);
  for (int j = 0; j < tmpl.n_params; ++j) {
    shifted[j] = theta[j] + M_PI_2;
    double plus = expectation(run_circuit(tmpl, shifted), h);
    shifted[j] = theta[j] - M_PI_2;
    double minus = expectation(run_circuit(tmpl, shifted), h);
    shifted[j] = theta[j];
    grad[j] = 0.5 * (plus - minus);
  }
  return grad;
}

}  // namespace qpl
