#pragma once

#include <span>

#include "qpl/circuit.hpp"

namespace qpl {

// Hardware-efficient ansatz used for the transverse-field models: each block
// is [RZ, RX, RZ] layers on all qubits + CZ on even-start pairs, then
// [RZ, RX, RZ] layers + CZ on odd-start pairs. n_params = 6 * n * blocks.
CircuitTemplate tfim_ansatz(int n_qubits, int blocks);

// Low-expressibility ansatz: an initial RY layer, then `blocks` repetitions
// of one CZ layer (even-start and odd-start pairing alternate between
// successive blocks) followed by one RY layer. n_params = n * (blocks + 1).
CircuitTemplate cluster_ansatz(int n_qubits, int blocks);

// Content hash of (n_qubits, gate list); stable across runs and platforms.
std::string layout_hash(int n_qubits, const std::vector<Gate>& gates);

// Canonical 1-D form of the parameters: identity ordering by param_index.
// Both directions validate the vector length against the template.
std::vector<double> flatten(const ParameterVector& theta, const CircuitTemplate& tmpl);
ParameterVector unflatten(std::span<const double> values, const CircuitTemplate& tmpl);

}  // namespace qpl
