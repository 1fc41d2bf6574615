#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpl/models.hpp"
#include "qpl/statevec.hpp"

namespace qpl {

enum class InitMode { UNIFORM_PI, CONSTANT };

struct VqeConfig {
  std::string optimizer = "adam";  // "adam" or "gd"
  double learning_rate = 0.01;
  int max_iters = 2000;
  double grad_tol = 1e-6;
  std::uint64_t seed = 1;
  InitMode init = InitMode::UNIFORM_PI;
  double init_value = 1.0;  // CONSTANT mode

  void validate() const;
};

struct VqeRecord {
  std::map<std::string, double> x;   // physical parameters of this grid point
  std::vector<double> theta_star;
  double final_energy = 0.0;
  std::optional<double> exact_energy;            // unpenalized ground energy
  std::optional<double> penalized_exact_energy;  // eigenvalue with Z_0 penalty
  std::optional<double> fid;                     // vs penalty-lifted exact state
  int iters_used = 0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct SweepMetadata {
  Family family = Family::TFIM;
  int n_qubits = 0;
  Boundary boundary = Boundary::PERIODIC;
  std::string ansatz_kind;  // "tfim" or "cluster"
  int blocks = 0;
  std::string layout_id;
  int n_params = 0;
  std::string grid_desc;
  VqeConfig vqe;
  double oracle_penalty = 0.0;
  bool oracle_attached = false;
  std::string theta0_hash;
  bool generated = false;  // true for decoder outputs, false for VQE sweeps
  std::string code_version;
  std::string config_hash;
};

struct SweepDataset {
  SweepMetadata meta;
  std::vector<VqeRecord> records;
};

// Draws theta0 once from cfg (shared by every grid point of a sweep).
std::vector<double> draw_initial_parameters(int n_params, const VqeConfig& cfg);

// Bitwise FNV hash of a double vector, hex-encoded.
std::string hash_doubles(const std::vector<double>& v);

// Gradient descent on <H> with grad_adjoint. Stops when the max-norm of the
// gradient drops below grad_tol or max_iters is reached. Local minima are
// kept: a converged=false record is still a valid data point.
VqeRecord minimize(const CircuitTemplate& tmpl, const PauliSum& h,
                   std::span<const double> theta0, const VqeConfig& cfg,
                   std::vector<double>* energy_trace = nullptr);

struct SweepOptions {
  bool attach_oracle = false;  // exact energy + fidelity per record (n <= 16)
  double penalty = 0.01;
  GroundOptions ground;
  int threads = 1;
};

// One VqeRecord per grid point, all points sharing a single theta0 draw.
// Per-point failures are recorded and the sweep continues.
SweepDataset sweep(const HamiltonianSpec& base,
                   const std::vector<std::map<std::string, double>>& grid,
                   const CircuitTemplate& tmpl, const VqeConfig& cfg,
                   const SweepOptions& opts = {});

}  // namespace qpl
