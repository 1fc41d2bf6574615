#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qpl {

enum class GateKind { RX, RY, RZ, CZ };

const char* gate_name(GateKind k);

// One gate in a circuit template. Rotations carry the index of their angle
// in the parameter vector; CZ is parameter-free and symmetric in its qubits.
struct Gate {
  GateKind kind = GateKind::RX;
  int q0 = 0;
  int q1 = -1;          // second qubit, CZ only
  int param_index = -1; // rotations only

  bool is_rotation() const { return kind != GateKind::CZ; }

  static Gate rx(int q, int param) { return {GateKind::RX, q, -1, param}; }
  static Gate ry(int q, int param) { return {GateKind::RY, q, -1, param}; }
  static Gate rz(int q, int param) { return {GateKind::RZ, q, -1, param}; }
  static Gate cz(int a, int b) { return {GateKind::CZ, a, b, -1}; }
};

// Fixed ansatz structure: an ordered gate list over n_qubits with n_params
// rotation angles. layout_id is a content hash of the gate list; files that
// carry parameter vectors embed it so a template mismatch is detectable.
struct CircuitTemplate {
  int n_qubits = 0;
  std::vector<Gate> gates;
  int n_params = 0;
  std::string layout_id;
};

// Trainable angles, in radians, ordered by param_index.
struct ParameterVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

}  // namespace qpl
