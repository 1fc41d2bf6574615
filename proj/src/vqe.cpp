#include "qpl/vqe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "qpl/rng.hpp"

namespace qpl {

void VqeConfig::validate() const {
  if (optimizer != "adam" && optimizer != "gd") {
    throw std::invalid_argument("VqeConfig: optimizer must be adam or gd");
  }
  if (!(learning_rate > 0)) throw std::invalid_argument("VqeConfig: learning_rate must be > 0");
  if (max_iters < 1) throw std::invalid_argument("VqeConfig: max_iters must be >= 1");
  if (grad_tol < 0) throw std::invalid_argument("VqeConfig: grad_tol must be >= 0");
}

std::vector<double> draw_initial_parameters(int n_params, const VqeConfig& cfg) {
  std::vector<double> theta0(n_params);
  if (cfg.init == InitMode::CONSTANT) {
    std::fill(theta0.begin(), theta0.end(), cfg.init_value);
  } else {
    Rng rng(Rng::derive(cfg.seed, 0x7e7a0));
    for (double& t : theta0) t = rng.uniform(-M_PI, M_PI);
  }
  return theta0;
}

std::string hash_doubles(const std::vector<double>& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) buf[i] = hex[(h >> (60 - 4 * i)) & 0xf];
  buf[16] = '\0';
  return std::string(buf);
}

VqeRecord minimize(const CircuitTemplate& tmpl, const PauliSum& h,
                   std::span<const double> theta0, const VqeConfig& cfg,
                   std::vector<double>* energy_trace) {
  cfg.validate();
  if (static_cast<int>(theta0.size()) != tmpl.n_params) {
    throw std::invalid_argument("minimize: theta0 length mismatch");
  }
  const bool adam = cfg.optimizer == "adam";
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::vector<double> theta(theta0.begin(), theta0.end());
  std::vector<double> m(tmpl.n_params, 0.0), s(tmpl.n_params, 0.0);

  VqeRecord rec;
  rec.theta_star = theta;
  rec.converged = false;

  int iter = 0;
  double energy = 0.0;
  bool theta_dirty = true;  // true when `energy` is stale for current theta
  for (; iter < cfg.max_iters; ++iter) {
    std::vector<double> grad = grad_adjoint(tmpl, theta, h, &energy);
    theta_dirty = false;
    if (!std::isfinite(energy)) {
      throw std::runtime_error("minimize: non-finite energy at iteration " +
                               std::to_string(iter));
    }
    if (energy_trace) energy_trace->push_back(energy);
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (!std::isfinite(gmax)) {
      throw std::runtime_error("minimize: non-finite gradient at iteration " +
                               std::to_string(iter));
    }
    if (gmax < cfg.grad_tol) {
      rec.converged = true;
      break;
    }
    if (adam) {
      double t = iter + 1;
      double corr1 = 1.0 - std::pow(beta1, t);
      double corr2 = 1.0 - std::pow(beta2, t);
      for (int j = 0; j < tmpl.n_params; ++j) {
        m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
        s[j] = beta2 * s[j] + (1.0 - beta2) * grad[j] * grad[j];
        theta[j] -= cfg.learning_rate * (m[j] / corr1) / (std::sqrt(s[j] / corr2) + eps);
      }
    } else {
      for (int j = 0; j < tmpl.n_params; ++j) theta[j] -= cfg.learning_rate * grad[j];
    }
    theta_dirty = true;
  }

  rec.theta_star = theta;
  rec.iters_used = iter;
  rec.final_energy = theta_dirty ? expectation(run_circuit(tmpl, theta), h) : energy;
  if (!std::isfinite(rec.final_energy)) {
    throw std::runtime_error("minimize: non-finite energy after optimization");
  }
  return rec;
}

SweepDataset sweep(const HamiltonianSpec& base,
                   const std::vector<std::map<std::string, double>>& grid,
                   const CircuitTemplate& tmpl, const VqeConfig& cfg, const SweepOptions& opts) {
  cfg.validate();
  std::vector<double> theta0 = draw_initial_parameters(tmpl.n_params, cfg);

  SweepDataset ds;
  ds.meta.family = base.family;
  ds.meta.n_qubits = base.n_qubits;
  ds.meta.boundary = base.boundary;
  ds.meta.layout_id = tmpl.layout_id;
  ds.meta.n_params = tmpl.n_params;
  ds.meta.vqe = cfg;
  ds.meta.oracle_attached = opts.attach_oracle;
  ds.meta.oracle_penalty = opts.penalty;
  ds.meta.theta0_hash = hash_doubles(theta0);
  ds.records.resize(grid.size());

  auto run_point = [&](std::size_t i) {
    HamiltonianSpec spec = base;
    for (const auto& [k, v] : grid[i]) spec.params[k] = v;
    VqeRecord rec;
    rec.x = spec.params;
    try {
      PauliSum h = build_hamiltonian(spec);
      rec = minimize(tmpl, h, theta0, cfg);
      rec.x = spec.params;
      if (opts.attach_oracle) {
        if (base.n_qubits > 16) throw std::runtime_error("oracle unavailable above 16 qubits");
        GroundResult unpen = exact_ground(h, 0.0, opts.ground);
        rec.exact_energy = unpen.penalized_energy;
        GroundResult pen = exact_ground(h, opts.penalty, opts.ground);
        rec.penalized_exact_energy = pen.penalized_energy;
        rec.fid = fidelity(run_circuit(tmpl, rec.theta_star), pen.state);
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    ds.records[i] = std::move(rec);
  };

  int threads = std::max(1, opts.threads);
  if (threads == 1 || grid.size() < 2) {
    for (std::size_t i = 0; i < grid.size(); ++i) run_point(i);
  } else {
    // Grid points are independent; records land at their grid index so the
    // dataset order does not depend on the thread count.
    std::vector<std::thread> pool;
    std::size_t chunk = (grid.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      std::size_t lo = t * chunk;
      std::size_t hi = std::min(grid.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) run_point(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return ds;
}

}  // namespace qpl
