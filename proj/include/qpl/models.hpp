#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "qpl/statevec.hpp"

namespace qpl {

enum class Family { TFIM, CLUSTER_ISING, CLUSTER_YY };
enum class Boundary { OPEN, PERIODIC };

const char* family_name(Family f);
Family family_from_name(const std::string& name);
const char* boundary_name(Boundary b);
Boundary boundary_from_name(const std::string& name);

// One point of a Hamiltonian family. `params` carries the named physical
// parameters the family requires (TFIM: h; cluster-Ising: h1, h2;
// cluster-YY: lambda).
struct HamiltonianSpec {
  Family family = Family::TFIM;
  int n_qubits = 0;
  std::map<std::string, double> params;
  Boundary boundary = Boundary::PERIODIC;
};

// H = -sum Z_i Z_{i+1} - h sum X_i. PERIODIC wraps the last bond.
PauliSum build_tfim(int n, double h, Boundary boundary);

// H = -sum_{i<=N-2} Z_i X_{i+1} Z_{i+2} - h1 sum X_i - h2 sum_{i<=N-1} X_i X_{i+1}.
// Open chain; the summation limits are the boundary.
PauliSum build_cluster_ising(int n, double h1, double h2);

// H = sum_i (X_{i-1} Z_i X_{i+1} + lambda Y_i Y_{i+1}), indices mod n.
PauliSum build_cluster_yy(int n, double lambda);

PauliSum build_hamiltonian(const HamiltonianSpec& spec);

struct GroundOptions {
  // Dense diagonalization below this size, Lanczos above.
  int dense_max_qubits = 10;
  enum class Method { AUTO, LANCZOS, DENSE } method = Method::AUTO;
  int krylov_dim = 64;
  double tol = 1e-10;
  int max_restarts = 400;
  std::uint64_t seed = 0x9d2c5680;  // start-vector seed
};

struct GroundResult {
  double penalized_energy = 0.0;  // eigenvalue of h + penalty*Z_0
  double energy = 0.0;            // <state| h |state>, penalty excluded
  StateVector state = StateVector(1);
};

// Lowest eigenpair of h + penalty_coeff * Z_0. The penalty lifts ground-state
// degeneracy so the returned eigenvector is well defined in ordered phases.
GroundResult exact_ground(const PauliSum& h, double penalty_coeff = 0.0,
                          const GroundOptions& opts = {});

// <X_0 Y_1 (prod_{k=2}^{N-3} Z_k) Y_{N-2} X_{N-1}>, n >= 5.
double string_order(const StateVector& state);

// (1/N) sum_i <Z_i>
double magnetization(const StateVector& state);

// <Z_i>
double site_z(const StateVector& state, int site);

// vqe_energy minus the exact unpenalized ground energy of h.
double energy_discrepancy(double vqe_energy, const PauliSum& h, const GroundOptions& opts = {});

}  // namespace qpl
