#include "qpl/ansatz.hpp"

#include <cstdint>
#include <stdexcept>

namespace qpl {

namespace {

void append_rotation_layer(std::vector<Gate>& gates, GateKind kind, int n, int& next_param) {
  for (int q = 0; q < n; ++q) {
    gates.push_back({kind, q, -1, next_param++});
  }
}

// Brickwork CZ layer: pairs (start, start+1), (start+2, start+3), ...
// With `wrap`, an odd-start layer on an even ring also closes (n-1, 0) so
// the two layers jointly cover every ring bond.
void append_cz_layer(std::vector<Gate>& gates, int n, int start, bool wrap = false) {
  for (int q = start; q + 1 < n; q += 2) {
    gates.push_back(Gate::cz(q, q + 1));
  }
  if (wrap && start == 1 && n % 2 == 0) {
    gates.push_back(Gate::cz(0, n - 1));
  }
}

CircuitTemplate finish(int n_qubits, std::vector<Gate> gates, int n_params) {
  CircuitTemplate tmpl;
  tmpl.n_qubits = n_qubits;
  tmpl.gates = std::move(gates);
  tmpl.n_params = n_params;
  tmpl.layout_id = layout_hash(n_qubits, tmpl.gates);
  return tmpl;
}

}  // namespace

CircuitTemplate tfim_ansatz(int n_qubits, int blocks) {
  if (n_qubits < 2 || blocks < 1) throw std::invalid_argument("tfim_ansatz: invalid sizes");
  std::vector<Gate> gates;
  int p = 0;
  for (int b = 0; b < blocks; ++b) {
    append_rotation_layer(gates, GateKind::RZ, n_qubits, p);
    append_rotation_layer(gates, GateKind::RX, n_qubits, p);
    append_rotation_layer(gates, GateKind::RZ, n_qubits, p);
    append_cz_layer(gates, n_qubits, 0);
    append_rotation_layer(gates, GateKind::RZ, n_qubits, p);
    append_rotation_layer(gates, GateKind::RX, n_qubits, p);
    append_rotation_layer(gates, GateKind::RZ, n_qubits, p);
    append_cz_layer(gates, n_qubits, 1, /*wrap=*/true);
  }
  return finish(n_qubits, std::move(gates), p);
}

CircuitTemplate cluster_ansatz(int n_qubits, int blocks) {
  if (n_qubits < 2 || blocks < 1) throw std::invalid_argument("cluster_ansatz: invalid sizes");
  std::vector<Gate> gates;
  int p = 0;
  append_rotation_layer(gates, GateKind::RY, n_qubits, p);
  for (int b = 0; b < blocks; ++b) {
    append_cz_layer(gates, n_qubits, b % 2);
    append_rotation_layer(gates, GateKind::RY, n_qubits, p);
  }
  return finish(n_qubits, std::move(gates), p);
}

std::string layout_hash(int n_qubits, const std::vector<Gate>& gates) {
  // FNV-1a over a canonical byte encoding of the gate list.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(n_qubits));
  for (const Gate& g : gates) {
    mix(static_cast<std::uint64_t>(g.kind));
    mix(static_cast<std::uint64_t>(g.q0));
    mix(static_cast<std::uint64_t>(g.q1 + 1));
    mix(static_cast<std::uint64_t>(g.param_index + 1));
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) buf[i] = hex[(h >> (60 - 4 * i)) & 0xf];
  buf[16] = '\0';
  return std::string(buf);
}

std::vector<double> flatten(const ParameterVector& theta, const CircuitTemplate& tmpl) {
  if (static_cast<int>(theta.values.size()) != tmpl.n_params) {
    throw std::invalid_argument("flatten: length mismatch with template");
  }
  return theta.values;
}

ParameterVector unflatten(std::span<const double> values, const CircuitTemplate& tmpl) {
  if (static_cast<int>(values.size()) != tmpl.n_params) {
    throw std::invalid_argument("unflatten: length mismatch with template");
  }
  return ParameterVector{std::vector<double>(values.begin(), values.end())};
}

}  // namespace qpl
