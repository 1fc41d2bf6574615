#include "qpl/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qpl/io.hpp"
#include "qpl/rng.hpp"

namespace qpl {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
T need(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

GridSegment parse_segment(const json& j, const std::string& where) {
  require_keys(j, where, {"fixed", "scan"});
  GridSegment seg;
  if (j.contains("fixed")) {
    if (!j.at("fixed").is_object()) throw ConfigError(where + ".fixed: expected an object");
    for (const auto& [k, v] : j.at("fixed").items()) {
      if (!v.is_number()) throw ConfigError(where + ".fixed." + k + ": expected a number");
      seg.fixed[k] = v.get<double>();
    }
  }
  const json& scan = j.contains("scan") ? j.at("scan") : json::object();
  require_keys(scan, where + ".scan", {"param", "start", "stop", "step"});
  if (!scan.empty()) {
    seg.scan_param = need<std::string>(scan, "param", where + ".scan");
    seg.start = need<double>(scan, "start", where + ".scan");
    seg.stop = need<double>(scan, "stop", where + ".scan");
    seg.step = need<double>(scan, "step", where + ".scan");
    if (!(seg.step > 0)) throw ConfigError(where + ".scan.step: must be > 0");
    if (seg.stop < seg.start) throw ConfigError(where + ".scan: stop < start");
  }
  return seg;
}

std::vector<GridSegment> parse_grid(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    // an explicitly empty grid is allowed (empty dataset case)
    if (j.is_array()) return {};
    throw ConfigError(where + ": expected an array of segments");
  }
  std::vector<GridSegment> grid;
  for (std::size_t i = 0; i < j.size(); ++i) {
    grid.push_back(parse_segment(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return grid;
}

VqeConfig parse_vqe(const json& j, const std::string& where, std::uint64_t seed) {
  require_keys(j, where,
               {"optimizer", "learning_rate", "max_iters", "grad_tol", "init", "init_value"});
  VqeConfig cfg;
  cfg.optimizer = get_or<std::string>(j, "optimizer", where, "adam");
  cfg.learning_rate = get_or<double>(j, "learning_rate", where, 0.02);
  cfg.max_iters = get_or<int>(j, "max_iters", where, 2000);
  cfg.grad_tol = get_or<double>(j, "grad_tol", where, 1e-6);
  std::string init = get_or<std::string>(j, "init", where, "uniform_pi");
  if (init == "uniform_pi") {
    cfg.init = InitMode::UNIFORM_PI;
  } else if (init == "constant") {
    cfg.init = InitMode::CONSTANT;
  } else {
    throw ConfigError(where + ".init: must be uniform_pi or constant");
  }
  cfg.init_value = get_or<double>(j, "init_value", where, 1.0);
  cfg.seed = Rng::derive(seed, 0x53eeb);
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

Family parse_family(const json& j, const std::string& where) {
  try {
    return family_from_name(need<std::string>(j, "family", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ".family: " + e.what());
  }
}

Boundary parse_boundary(const json& j, const std::string& where, Boundary fallback) {
  std::string name = get_or<std::string>(j, "boundary", where,
                                         std::string(boundary_name(fallback)));
  try {
    return boundary_from_name(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ".boundary: " + e.what());
  }
}

SweepSection parse_sweep(const json& j, std::uint64_t seed) {
  const std::string where = "sweep";
  require_keys(j, where,
               {"family", "n_qubits", "boundary", "ansatz", "grid", "vqe", "oracle", "dataset"});
  SweepSection s;
  s.family = parse_family(j, where);
  s.n_qubits = need<int>(j, "n_qubits", where);
  Boundary def = s.family == Family::CLUSTER_ISING ? Boundary::OPEN : Boundary::PERIODIC;
  s.boundary = parse_boundary(j, where, def);
  const json& ansatz = j.contains("ansatz") ? j.at("ansatz") : json::object();
  require_keys(ansatz, where + ".ansatz", {"kind", "blocks"});
  s.ansatz_kind = need<std::string>(ansatz, "kind", where + ".ansatz");
  if (s.ansatz_kind != "tfim" && s.ansatz_kind != "cluster") {
    throw ConfigError(where + ".ansatz.kind: must be tfim or cluster");
  }
  s.blocks = need<int>(ansatz, "blocks", where + ".ansatz");
  s.grid = parse_grid(j.contains("grid") ? j.at("grid") : json::array(), where + ".grid");
  s.vqe = parse_vqe(j.contains("vqe") ? j.at("vqe") : json::object(), where + ".vqe", seed);
  const json& oracle = j.contains("oracle") ? j.at("oracle") : json::object();
  require_keys(oracle, where + ".oracle", {"attach", "penalty"});
  s.oracle_attach = get_or<bool>(oracle, "attach", where + ".oracle", false);
  s.oracle_penalty = get_or<double>(oracle, "penalty", where + ".oracle", 0.01);
  s.dataset = get_or<std::string>(j, "dataset", where, std::string("sweep.jsonl"));
  return s;
}

std::vector<LabelRule> parse_label_rules(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<LabelRule> rules;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string rw = where + "[" + std::to_string(i) + "]";
    require_keys(j[i], rw, {"param", "min", "max", "label"});
    LabelRule r;
    r.param = need<std::string>(j[i], "param", rw);
    r.lo = need<double>(j[i], "min", rw);
    r.hi = need<double>(j[i], "max", rw);
    r.label = need<int>(j[i], "label", rw);
    if (r.label < 0) throw ConfigError(rw + ".label: must be >= 0");
    rules.push_back(r);
  }
  return rules;
}

TrainSection parse_train(const json& j, std::uint64_t seed) {
  const std::string where = "train";
  require_keys(j, where, {"variant", "dataset", "checkpoint", "vae_checkpoint", "loss_csv",
                          "d_latent", "beta", "epochs", "batch", "learning_rate", "attention",
                          "heads", "mlp_hidden", "kernel", "train_count", "label_rules",
                          "diffusion"});
  TrainSection t;
  t.variant = get_or<std::string>(j, "variant", where, std::string("vae"));
  if (t.variant != "vae" && t.variant != "cvae" && t.variant != "diffusion") {
    throw ConfigError(where + ".variant: must be vae, cvae or diffusion");
  }
  t.dataset = need<std::string>(j, "dataset", where);
  t.checkpoint = get_or<std::string>(j, "checkpoint", where, std::string("model.ckpt"));
  t.vae_checkpoint = get_or<std::string>(j, "vae_checkpoint", where, std::string());
  t.loss_csv = get_or<std::string>(j, "loss_csv", where, std::string("loss.csv"));
  t.vae.d_latent = get_or<int>(j, "d_latent", where, 16);
  t.vae.beta = get_or<double>(j, "beta", where, 1e-3);
  t.vae.epochs = get_or<int>(j, "epochs", where, 150);
  t.vae.batch = get_or<int>(j, "batch", where, 32);
  t.vae.learning_rate = get_or<double>(j, "learning_rate", where, 1e-3);
  t.vae.attention = get_or<bool>(j, "attention", where, true);
  t.vae.heads = get_or<int>(j, "heads", where, 4);
  t.vae.mlp_hidden = get_or<int>(j, "mlp_hidden", where, 128);
  t.vae.kernel = get_or<int>(j, "kernel", where, 3);
  t.vae.seed = Rng::derive(seed, 0x7241);
  t.train_count = get_or<int>(j, "train_count", where, 0);
  if (t.train_count < 0) throw ConfigError(where + ".train_count: must be >= 0");
  if (j.contains("label_rules")) {
    t.label_rules = parse_label_rules(j.at("label_rules"), where + ".label_rules");
  }
  const json& d = j.contains("diffusion") ? j.at("diffusion") : json::object();
  require_keys(d, where + ".diffusion",
               {"T", "beta_start", "beta_end", "hidden", "time_embed_dim", "epochs", "batch",
                "learning_rate"});
  t.diffusion.T = get_or<int>(d, "T", where + ".diffusion", 200);
  t.diffusion.beta_start = get_or<double>(d, "beta_start", where + ".diffusion", 1e-4);
  t.diffusion.beta_end = get_or<double>(d, "beta_end", where + ".diffusion", 0.02);
  t.diffusion.hidden = get_or<int>(d, "hidden", where + ".diffusion", 256);
  t.diffusion.time_embed_dim = get_or<int>(d, "time_embed_dim", where + ".diffusion", 32);
  t.diffusion.epochs = get_or<int>(d, "epochs", where + ".diffusion", 400);
  t.diffusion.batch = get_or<int>(d, "batch", where + ".diffusion", 64);
  t.diffusion.learning_rate = get_or<double>(d, "learning_rate", where + ".diffusion", 1e-3);
  t.diffusion.seed = Rng::derive(seed, 0x7242);
  try {
    t.vae.validate();
    t.diffusion.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return t;
}

AnalyzeSection parse_analyze(const json& j) {
  const std::string where = "analyze";
  require_keys(j, where,
               {"rows", "scan_param", "row_param", "pca_components", "kpca", "gmm_k",
                "gmm_restarts", "window_w", "window_s", "peak_rel_height", "label_map"});
  AnalyzeSection a;
  if (!j.contains("rows") || !j.at("rows").is_array() || j.at("rows").empty()) {
    throw ConfigError(where + ".rows: expected a non-empty array");
  }
  for (std::size_t i = 0; i < j.at("rows").size(); ++i) {
    const std::string rw = where + ".rows[" + std::to_string(i) + "]";
    require_keys(j.at("rows")[i], rw, {"dataset", "checkpoint"});
    AnalyzeRowRef ref;
    ref.dataset = need<std::string>(j.at("rows")[i], "dataset", rw);
    ref.checkpoint = need<std::string>(j.at("rows")[i], "checkpoint", rw);
    a.rows.push_back(ref);
  }
  a.scan_param = get_or<std::string>(j, "scan_param", where, std::string("h"));
  a.row_param = get_or<std::string>(j, "row_param", where, std::string());
  a.pca_components = get_or<int>(j, "pca_components", where, 2);
  if (a.pca_components < 1) throw ConfigError(where + ".pca_components: must be >= 1");
  a.kpca = get_or<bool>(j, "kpca", where, true);
  a.gmm_k = get_or<int>(j, "gmm_k", where, 2);
  if (a.gmm_k < 1) throw ConfigError(where + ".gmm_k: must be >= 1");
  a.gmm_restarts = get_or<int>(j, "gmm_restarts", where, 10);
  a.window_w = get_or<int>(j, "window_w", where, 51);
  a.window_s = get_or<int>(j, "window_s", where, 5);
  if (a.window_w < 1 || a.window_s < 1) throw ConfigError(where + ": bad window settings");
  a.peak_rel_height = get_or<double>(j, "peak_rel_height", where, 0.5);
  if (j.contains("label_map")) {
    if (!j.at("label_map").is_object()) throw ConfigError(where + ".label_map: expected object");
    for (const auto& [k, v] : j.at("label_map").items()) {
      try {
        a.label_map[std::stoi(k)] = v.get<std::string>();
      } catch (const std::exception&) {
        throw ConfigError(where + ".label_map: keys must be integers, values strings");
      }
    }
  }
  return a;
}

GenerateSection parse_generate(const json& j) {
  const std::string where = "generate";
  require_keys(j, where,
               {"checkpoint", "diffusion_checkpoint", "dataset", "labels", "n_per_label"});
  GenerateSection g;
  g.checkpoint = need<std::string>(j, "checkpoint", where);
  g.diffusion_checkpoint = get_or<std::string>(j, "diffusion_checkpoint", where, std::string());
  g.dataset = get_or<std::string>(j, "dataset", where, std::string("generated.jsonl"));
  g.labels = need<std::vector<int>>(j, "labels", where);
  if (g.labels.empty()) throw ConfigError(where + ".labels: expected at least one label");
  g.n_per_label = get_or<int>(j, "n_per_label", where, 1000);
  if (g.n_per_label < 0) throw ConfigError(where + ".n_per_label: must be >= 0");
  return g;
}

EvalSection parse_eval(const json& j) {
  const std::string where = "eval";
  require_keys(j, where, {"dataset", "metrics", "penalty", "per_sample_csv", "summary_csv"});
  EvalSection e;
  e.dataset = need<std::string>(j, "dataset", where);
  e.metrics = get_or<std::vector<std::string>>(j, "metrics", where,
                                               std::vector<std::string>{"magnetization"});
  const std::set<std::string> known = {"magnetization", "site_z", "string_order", "fidelity",
                                       "energy_discrepancy"};
  for (const auto& m : e.metrics) {
    if (!known.count(m)) throw ConfigError(where + ".metrics: unknown metric '" + m + "'");
  }
  e.penalty = get_or<double>(j, "penalty", where, 0.01);
  e.per_sample_csv = get_or<std::string>(j, "per_sample_csv", where, std::string("metrics.csv"));
  e.summary_csv =
      get_or<std::string>(j, "summary_csv", where, std::string("metrics_summary.csv"));
  return e;
}

ExactSection parse_exact(const json& j) {
  const std::string where = "exact";
  require_keys(j, where, {"family", "n_qubits", "boundary", "grid", "penalty", "metrics", "csv"});
  ExactSection e;
  e.family = parse_family(j, where);
  e.n_qubits = need<int>(j, "n_qubits", where);
  Boundary def = e.family == Family::CLUSTER_ISING ? Boundary::OPEN : Boundary::PERIODIC;
  e.boundary = parse_boundary(j, where, def);
  e.grid = parse_grid(j.contains("grid") ? j.at("grid") : json::array(), where + ".grid");
  e.penalty = get_or<double>(j, "penalty", where, 0.01);
  e.metrics = get_or<std::vector<std::string>>(j, "metrics", where, std::vector<std::string>{});
  for (const auto& m : e.metrics) {
    if (m != "magnetization" && m != "string_order") {
      throw ConfigError(where + ".metrics: unknown metric '" + m + "'");
    }
  }
  e.csv = get_or<std::string>(j, "csv", where, std::string("exact.csv"));
  return e;
}

}  // namespace

std::vector<std::map<std::string, double>> GridSegment::expand() const {
  std::vector<std::map<std::string, double>> points;
  if (scan_param.empty()) {
    points.push_back(fixed);
    return points;
  }
  long count = std::lround((stop - start) / step) + 1;
  if (count < 1) count = 1;
  for (long i = 0; i < count; ++i) {
    double v = start + static_cast<double>(i) * step;
    if (v > stop + 0.5 * step) break;
    auto p = fixed;
    p[scan_param] = v;
    points.push_back(std::move(p));
  }
  return points;
}

std::string GridSegment::describe() const {
  std::ostringstream ss;
  for (const auto& [k, v] : fixed) ss << k << "=" << format_double(v) << ";";
  if (!scan_param.empty()) {
    ss << scan_param << ":" << format_double(start) << ":" << format_double(stop) << ":"
       << format_double(step);
  }
  return ss.str();
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RunConfig RunConfig::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(j, "config",
               {"seed", "out_dir", "threads", "sweep", "train", "analyze", "generate", "eval",
                "exact"});
  RunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", "config", 1);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "config", std::string("out"));
  cfg.threads = get_or<int>(j, "threads", "config", 1);
  if (cfg.threads < 1) throw ConfigError("config.threads: must be >= 1");
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j.at("sweep"), cfg.seed);
  if (j.contains("train")) cfg.train = parse_train(j.at("train"), cfg.seed);
  if (j.contains("analyze")) cfg.analyze = parse_analyze(j.at("analyze"));
  if (j.contains("generate")) cfg.generate = parse_generate(j.at("generate"));
  if (j.contains("eval")) cfg.eval = parse_eval(j.at("eval"));
  if (j.contains("exact")) cfg.exact = parse_exact(j.at("exact"));
  cfg.config_hash = hash_string(j.dump());
  return cfg;
}

std::filesystem::path RunConfig::resolve(const std::string& name) const {
  std::filesystem::path p(name);
  return p.is_absolute() ? p : out_dir / p;
}

}  // namespace qpl
