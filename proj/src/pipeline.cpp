#include "qpl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "qpl/ansatz.hpp"
#include "qpl/rng.hpp"
#include "qpl/tensor.hpp"

namespace qpl {

namespace {

CircuitTemplate template_from_meta(const std::string& kind, int n_qubits, int blocks) {
  if (kind == "tfim") return tfim_ansatz(n_qubits, blocks);
  if (kind == "cluster") return cluster_ansatz(n_qubits, blocks);
  throw ConfigError("unknown ansatz kind: " + kind);
}

CircuitTemplate checked_template(const SweepMetadata& meta) {
  CircuitTemplate tmpl = template_from_meta(meta.ansatz_kind, meta.n_qubits, meta.blocks);
  if (tmpl.layout_id != meta.layout_id) {
    throw std::runtime_error("layout_id mismatch: dataset built with a different ansatz (" +
                             meta.layout_id + " vs " + tmpl.layout_id + ")");
  }
  return tmpl;
}

std::vector<std::map<std::string, double>> expand_grid(const std::vector<GridSegment>& grid,
                                                       std::string& desc) {
  std::vector<std::map<std::string, double>> points;
  desc.clear();
  for (const GridSegment& seg : grid) {
    if (!desc.empty()) desc += "|";
    desc += seg.describe();
    auto part = seg.expand();
    points.insert(points.end(), part.begin(), part.end());
  }
  return points;
}

// Labels per record from the config rules; -1 when no rule matches.
std::vector<int> apply_label_rules(const std::vector<VqeRecord>& records,
                                   const std::vector<LabelRule>& rules) {
  std::vector<int> labels(records.size(), -1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const LabelRule& rule : rules) {
      auto it = records[i].x.find(rule.param);
      if (it == records[i].x.end()) continue;
      if (it->second >= rule.lo - 1e-12 && it->second <= rule.hi + 1e-12) {
        labels[i] = rule.label;
        break;
      }
    }
  }
  return labels;
}

int label_count(const std::vector<LabelRule>& rules) {
  int n = 0;
  for (const LabelRule& r : rules) n = std::max(n, r.label + 1);
  return n;
}

}  // namespace

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  double pos = q * (values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(values.size() - 1, lo + 1);
  double frac = pos - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::filesystem::path run_sweep(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.sweep) throw ConfigError("sweep: section missing from config");
  const SweepSection& s = *cfg.sweep;

  CircuitTemplate tmpl = template_from_meta(s.ansatz_kind, s.n_qubits, s.blocks);
  HamiltonianSpec base;
  base.family = s.family;
  base.n_qubits = s.n_qubits;
  base.boundary = s.boundary;

  std::string desc;
  auto grid = expand_grid(s.grid, desc);

  SweepOptions opts;
  opts.attach_oracle = s.oracle_attach;
  opts.penalty = s.oracle_penalty;
  opts.threads = cfg.threads;

  SweepDataset ds = sweep(base, grid, tmpl, s.vqe, opts);
  ds.meta.ansatz_kind = s.ansatz_kind;
  ds.meta.blocks = s.blocks;
  ds.meta.grid_desc = desc;
  ds.meta.code_version = kCodeVersion;
  ds.meta.config_hash = cfg.config_hash;

  std::filesystem::path path = cfg.resolve(s.dataset);
  write_dataset(path, ds);

  int converged = 0, failed = 0;
  double mean_energy = 0.0, min_fid = 1.0;
  bool have_fid = false;
  for (const auto& rec : ds.records) {
    converged += rec.converged;
    failed += rec.failed;
    mean_energy += rec.final_energy / std::max<std::size_t>(1, ds.records.size());
    if (rec.fid) {
      min_fid = std::min(min_fid, *rec.fid);
      have_fid = true;
    }
  }
  log << "sweep: " << ds.records.size() << " records (" << converged << " converged, " << failed
      << " failed), theta length " << ds.meta.n_params << ", mean energy "
      << format_double(mean_energy);
  if (have_fid) log << ", min fidelity " << format_double(min_fid);
  log << " -> " << path.string() << "\n";
  return path;
}

namespace {

void write_loss_csv(const std::filesystem::path& path, const TrainReport& report,
                    const std::string& layout_id, const std::string& config_hash) {
  CsvWriter csv(path, {"epoch", "loss"}, layout_id, config_hash);
  for (std::size_t e = 0; e < report.loss_history.size(); ++e) {
    csv.row({std::to_string(e), format_double(report.loss_history[e])});
  }
}

// Seeded sample of `count` indices (without replacement, ascending) from [0, n).
std::vector<std::size_t> training_split(std::size_t n, int count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (count <= 0 || static_cast<std::size_t>(count) >= n) return idx;
  Rng rng(Rng::derive(seed, 0x5b17));
  shuffle(idx, rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::filesystem::path run_train(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.train) throw ConfigError("train: section missing from config");
  const TrainSection& t = *cfg.train;

  SweepDataset ds = read_dataset(cfg.resolve(t.dataset));
  checked_template(ds.meta);

  // usable records: completed runs only
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (!ds.records[i].failed) ok.push_back(i);
  }
  if (ok.empty()) throw std::runtime_error("train: dataset has no usable records");

  std::filesystem::path ckpt_path = cfg.resolve(t.checkpoint);

  if (t.variant == "vae" || t.variant == "cvae") {
    VaeConfig vcfg = t.vae;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    if (t.variant == "cvae") {
      if (t.label_rules.empty()) {
        throw ConfigError("train: cvae requires label_rules");
      }
      vcfg.n_labels = label_count(t.label_rules);
      auto all_labels = apply_label_rules(ds.records, t.label_rules);
      std::vector<std::size_t> labeled;
      for (std::size_t i : ok) {
        if (all_labels[i] >= 0) labeled.push_back(i);
      }
      if (labeled.empty()) throw std::runtime_error("train: no record matches any label rule");
      auto split = training_split(labeled.size(), t.train_count, cfg.seed);
      for (std::size_t k : split) {
        rows.push_back(ds.records[labeled[k]].theta_star);
        labels.push_back(all_labels[labeled[k]]);
      }
    } else {
      auto split = training_split(ok.size(), t.train_count, cfg.seed);
      for (std::size_t k : split) rows.push_back(ds.records[ok[k]].theta_star);
    }

    TrainReport report;
    VaeModel model = t.variant == "cvae"
                         ? train_cvae(rows, labels, vcfg, ds.meta.layout_id, &report)
                         : train_vae(rows, vcfg, ds.meta.layout_id, &report);
    model.source = ds.meta;
    write_vae_checkpoint(ckpt_path, model, cfg.config_hash);
    write_loss_csv(cfg.resolve(t.loss_csv), report, ds.meta.layout_id, cfg.config_hash);
    log << "train(" << t.variant << "): " << rows.size() << " rows, final loss "
        << format_double(report.final_loss) << " (mse " << format_double(report.final_mse)
        << ", kl " << format_double(report.final_kl) << ") -> " << ckpt_path.string() << "\n";
    return ckpt_path;
  }

  // diffusion
  if (t.vae_checkpoint.empty()) {
    throw ConfigError("train: diffusion requires vae_checkpoint");
  }
  if (t.label_rules.empty()) throw ConfigError("train: diffusion requires label_rules");
  VaeModel vae = read_vae_checkpoint(cfg.resolve(t.vae_checkpoint));
  if (vae.layout_id != ds.meta.layout_id) {
    throw std::runtime_error("train: VAE checkpoint layout " + vae.layout_id +
                             " does not match dataset layout " + ds.meta.layout_id);
  }
  auto all_labels = apply_label_rules(ds.records, t.label_rules);
  std::vector<LatentRecord> latents;
  for (std::size_t i : ok) {
    if (all_labels[i] < 0) continue;
    LatentRecord rec;
    rec.x = ds.records[i].x;
    rec.mu = encode(vae, ds.records[i].theta_star).first;
    rec.z = rec.mu;  // frozen-encoder means are the diffusion training points
    rec.label = all_labels[i];
    latents.push_back(std::move(rec));
  }
  if (latents.empty()) throw std::runtime_error("train: no labeled records for diffusion");
  auto split = training_split(latents.size(), t.train_count, cfg.seed);
  std::vector<LatentRecord> selected;
  for (std::size_t k : split) selected.push_back(latents[k]);

  TrainReport report;
  DiffusionModel model = train_diffusion(selected, label_count(t.label_rules), t.diffusion,
                                         &report);
  write_diffusion_checkpoint(ckpt_path, model, ds.meta.layout_id, cfg.config_hash);
  write_loss_csv(cfg.resolve(t.loss_csv), report, ds.meta.layout_id, cfg.config_hash);
  log << "train(diffusion): " << selected.size() << " latents, final loss "
      << format_double(report.final_loss) << " -> " << ckpt_path.string() << "\n";
  return ckpt_path;
}

AnalyzeResult run_analyze(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.analyze) throw ConfigError("analyze: section missing from config");
  const AnalyzeSection& a = *cfg.analyze;
  AnalyzeResult result;

  auto label_name = [&a](int l) {
    auto it = a.label_map.find(l);
    return it == a.label_map.end() ? std::to_string(l) : it->second;
  };

  std::vector<PhaseDiagramRow> diagram_rows;
  std::filesystem::path clustering_path = cfg.resolve("clustering.csv");
  std::filesystem::path transitions_path = cfg.resolve("transitions.csv");
  std::string combined_layouts;

  struct TransitionLine {
    double row_value;
    int rank;
    double center, height;
  };
  std::vector<TransitionLine> transition_lines;
  std::vector<RowAnalysis> row_stats;

  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    SweepDataset ds = read_dataset(cfg.resolve(a.rows[r].dataset));
    VaeModel model = read_vae_checkpoint(cfg.resolve(a.rows[r].checkpoint));
    if (model.layout_id != ds.meta.layout_id) {
      throw std::runtime_error("analyze: checkpoint layout " + model.layout_id +
                               " does not match dataset layout " + ds.meta.layout_id);
    }
    combined_layouts = ds.meta.layout_id;

    // records in ascending scan order, failures skipped
    std::vector<std::pair<double, const VqeRecord*>> ordered;
    for (const auto& rec : ds.records) {
      if (rec.failed) continue;
      auto it = rec.x.find(a.scan_param);
      if (it == rec.x.end()) {
        throw ConfigError("analyze: records carry no parameter '" + a.scan_param + "'");
      }
      ordered.push_back({it->second, &rec});
    }
    if (ordered.size() < 2) throw std::runtime_error("analyze: too few usable records");
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });

    RowAnalysis row;
    row.row_value = static_cast<double>(r);
    if (!a.row_param.empty()) {
      auto it = ordered.front().second->x.find(a.row_param);
      if (it != ordered.front().second->x.end()) row.row_value = it->second;
    }

    std::vector<std::vector<double>> mus;
    mus.reserve(ordered.size());
    for (const auto& [scan, rec] : ordered) {
      row.scan.push_back(scan);
      mus.push_back(encode(model, rec->theta_star).first);
    }

    PcaModel pca = pca_fit(mus, std::min<int>(a.pca_components, model.cfg.d_latent));
    auto projected = pca_transform_all(pca, mus);
    GmmModel gmm = gmm_fit(projected, a.gmm_k, Rng::derive(cfg.seed, 0x96300 + r),
                           GmmOptions{a.gmm_restarts, 500, 1e-8, 1e-6, nullptr});
    row.labels = gmm_predict_all(gmm, projected);
    row.gmm_log_likelihood = gmm.log_likelihood;
    row.silhouette = silhouette_score(projected, row.labels);
    row.boundary = a.gmm_k == 2 ? step_boundary(row.scan, row.labels) : 0.0;

    // KPCA series + largest consecutive jump
    std::vector<double> scores;
    if (a.kpca) {
      KpcaModel kpca = kpca_fit(mus);
      for (const auto& mu : mus) scores.push_back(kpca_transform(kpca, mu));
      double best = -1.0;
      for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
        double jump = std::abs(scores[i + 1] - scores[i]);
        if (jump > best) {
          best = jump;
          row.kpca_jump_at = 0.5 * (row.scan[i] + row.scan[i + 1]);
        }
      }
    }

    if (a.window_w <= static_cast<int>(row.labels.size())) {
      row.curve = window_variance(row.labels, row.scan, a.window_w, a.window_s);
      row.peaks = dominant_peaks(find_peaks(row.curve), a.peak_rel_height);
    }

    // CSV bundle for this row
    std::string stem = "row" + std::to_string(r) + "_";
    {
      std::vector<std::string> header{a.scan_param};
      for (std::size_t c = 0; c < pca.components.size(); ++c) {
        header.push_back("pc" + std::to_string(c + 1));
      }
      CsvWriter csv(cfg.resolve(stem + "latent.csv"), header, ds.meta.layout_id,
                    cfg.config_hash);
      for (std::size_t i = 0; i < projected.size(); ++i) {
        std::vector<double> vals{row.scan[i]};
        vals.insert(vals.end(), projected[i].begin(), projected[i].end());
        csv.row_values(vals);
      }
      result.files.push_back(cfg.resolve(stem + "latent.csv"));
    }
    if (a.kpca) {
      CsvWriter csv(cfg.resolve(stem + "kpca.csv"), {a.scan_param, "score"}, ds.meta.layout_id,
                    cfg.config_hash);
      for (std::size_t i = 0; i < scores.size(); ++i) csv.row_values({row.scan[i], scores[i]});
      result.files.push_back(cfg.resolve(stem + "kpca.csv"));
    }
    {
      CsvWriter csv(cfg.resolve(stem + "labels.csv"), {a.scan_param, "label", "phase"},
                    ds.meta.layout_id, cfg.config_hash);
      for (std::size_t i = 0; i < row.labels.size(); ++i) {
        csv.row({format_double(row.scan[i]), std::to_string(row.labels[i]),
                 label_name(row.labels[i])});
      }
      result.files.push_back(cfg.resolve(stem + "labels.csv"));
    }
    if (!row.curve.centers.empty()) {
      CsvWriter csv(cfg.resolve(stem + "variance.csv"), {"center", "variance"},
                    ds.meta.layout_id, cfg.config_hash);
      for (std::size_t i = 0; i < row.curve.centers.size(); ++i) {
        csv.row_values({row.curve.centers[i], row.curve.variances[i]});
      }
      result.files.push_back(cfg.resolve(stem + "variance.csv"));
    }

    PhaseDiagramRow drow;
    drow.h1 = row.row_value;
    drow.h2 = row.scan;
    drow.labels = row.labels;
    diagram_rows.push_back(std::move(drow));

    for (std::size_t p = 0; p < row.peaks.size(); ++p) {
      transition_lines.push_back(
          {row.row_value, static_cast<int>(p), row.peaks[p].center, row.peaks[p].height});
    }

    log << "analyze row " << r << ": " << row.labels.size() << " records, silhouette "
        << format_double(row.silhouette) << ", " << row.peaks.size() << " dominant peak(s)";
    if (a.gmm_k == 2) log << ", boundary " << format_double(row.boundary);
    if (a.kpca) log << ", kpca jump at " << format_double(row.kpca_jump_at);
    log << "\n";
    row_stats.push_back(std::move(row));
  }

  // combined outputs
  {
    std::string row_col = a.row_param.empty() ? "row" : a.row_param;
    CsvWriter csv(cfg.resolve("phase_diagram.csv"), {row_col, a.scan_param, "label", "phase"},
                  combined_layouts, cfg.config_hash);
    auto cells = phase_diagram(diagram_rows);
    for (const auto& cell : cells) {
      csv.row({format_double(cell.h1), format_double(cell.h2), std::to_string(cell.label),
               label_name(cell.label)});
    }
    result.files.push_back(cfg.resolve("phase_diagram.csv"));
  }
  {
    std::string row_col = a.row_param.empty() ? "row" : a.row_param;
    CsvWriter csv(transitions_path, {row_col, "peak_rank", "center", "height"},
                  combined_layouts, cfg.config_hash);
    for (const auto& line : transition_lines) {
      csv.row({format_double(line.row_value), std::to_string(line.rank),
               format_double(line.center), format_double(line.height)});
    }
    result.files.push_back(transitions_path);
  }
  {
    std::string row_col = a.row_param.empty() ? "row" : a.row_param;
    CsvWriter csv(clustering_path,
                  {row_col, "silhouette", "log_likelihood", "boundary", "kpca_jump"},
                  combined_layouts, cfg.config_hash);
    for (const auto& row : row_stats) {
      csv.row_values({row.row_value, row.silhouette, row.gmm_log_likelihood, row.boundary,
                      row.kpca_jump_at});
    }
    result.files.push_back(clustering_path);
  }
  result.rows = std::move(row_stats);
  return result;
}

std::filesystem::path run_generate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.generate) throw ConfigError("generate: section missing from config");
  const GenerateSection& g = *cfg.generate;

  VaeModel vae = read_vae_checkpoint(cfg.resolve(g.checkpoint));
  SweepDataset out;
  out.meta = vae.source;
  out.meta.generated = true;
  out.meta.grid_desc = "generated";
  out.meta.vqe = VqeConfig{};
  out.meta.oracle_attached = false;
  out.meta.theta0_hash = "";
  out.meta.code_version = kCodeVersion;
  out.meta.config_hash = cfg.config_hash;

  const bool use_diffusion = !g.diffusion_checkpoint.empty();
  DiffusionCheckpoint diff;
  if (use_diffusion) {
    diff = read_diffusion_checkpoint(cfg.resolve(g.diffusion_checkpoint));
    if (diff.layout_id != vae.layout_id) {
      throw std::runtime_error("generate: diffusion layout " + diff.layout_id +
                               " does not match VAE layout " + vae.layout_id);
    }
    if (diff.model.d_latent != vae.cfg.d_latent) {
      throw std::runtime_error("generate: diffusion latent width differs from the VAE");
    }
    if (vae.cfg.n_labels != 0) {
      throw ConfigError("generate: latent diffusion expects an unconditional VAE decoder");
    }
  } else if (vae.cfg.n_labels == 0) {
    throw ConfigError("generate: checkpoint is unconditional; supply a diffusion checkpoint");
  }

  for (int label : g.labels) {
    if (use_diffusion) {
      auto zs = sample_diffusion(diff.model, label, g.n_per_label,
                                 Rng::derive(cfg.seed, 0x9e0 + label));
      for (auto& z : zs) {
        VqeRecord rec;
        rec.x = {{"label", static_cast<double>(label)}};
        rec.theta_star = decode(vae, z);
        out.records.push_back(std::move(rec));
      }
    } else {
      if (label < 0 || label >= vae.cfg.n_labels) {
        throw ConfigError("generate: label outside the trained label set");
      }
      Rng rng(Rng::derive(cfg.seed, 0x9e0 + label));
      for (int i = 0; i < g.n_per_label; ++i) {
        std::vector<double> z(vae.cfg.d_latent);
        for (double& v : z) v = rng.normal();
        VqeRecord rec;
        rec.x = {{"label", static_cast<double>(label)}};
        rec.theta_star = decode_conditional(vae, z, label);
        out.records.push_back(std::move(rec));
      }
    }
  }

  std::filesystem::path path = cfg.resolve(g.dataset);
  write_dataset(path, out);
  log << "generate(" << (use_diffusion ? "diffusion" : "cvae") << "): " << out.records.size()
      << " samples -> " << path.string() << "\n";
  return path;
}

std::vector<EvalSummaryRow> run_eval(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.eval) throw ConfigError("eval: section missing from config");
  const EvalSection& e = *cfg.eval;

  SweepDataset ds = read_dataset(cfg.resolve(e.dataset));
  CircuitTemplate tmpl = checked_template(ds.meta);

  std::set<std::string> metrics(e.metrics.begin(), e.metrics.end());
  const bool wants_oracle = metrics.count("fidelity") || metrics.count("energy_discrepancy");
  if (wants_oracle && ds.meta.generated) {
    throw ConfigError("eval: fidelity/energy_discrepancy need physical parameters; "
                      "generated datasets carry only labels");
  }
  if (metrics.count("string_order") && ds.meta.n_qubits < 5) {
    throw ConfigError("eval: string_order needs at least 5 qubits");
  }

  // per-sample columns: sample id, x parameters (sorted keys), metrics
  std::vector<std::string> x_keys;
  for (const auto& rec : ds.records) {
    for (const auto& [k, v] : rec.x) {
      if (std::find(x_keys.begin(), x_keys.end(), k) == x_keys.end()) x_keys.push_back(k);
    }
  }
  std::sort(x_keys.begin(), x_keys.end());

  std::vector<std::string> header{"sample"};
  header.insert(header.end(), x_keys.begin(), x_keys.end());
  std::vector<std::string> metric_cols;
  for (const std::string& m : e.metrics) {
    if (m == "site_z") {
      for (int q = 0; q < ds.meta.n_qubits; ++q) {
        metric_cols.push_back("site_z_" + std::to_string(q));
      }
    } else {
      metric_cols.push_back(m);
    }
  }
  header.insert(header.end(), metric_cols.begin(), metric_cols.end());

  CsvWriter csv(cfg.resolve(e.per_sample_csv), header, ds.meta.layout_id, cfg.config_hash);

  // grouped values for the summary: label -> metric -> values
  std::map<int, std::map<std::string, std::vector<double>>> groups;
  int evaluated = 0;

  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const VqeRecord& rec = ds.records[i];
    if (rec.failed) continue;
    StateVector state = run_circuit(tmpl, rec.theta_star);

    std::optional<GroundResult> pen, unpen;
    std::optional<PauliSum> ham;
    if (wants_oracle) {
      HamiltonianSpec spec;
      spec.family = ds.meta.family;
      spec.n_qubits = ds.meta.n_qubits;
      spec.boundary = ds.meta.boundary;
      spec.params = rec.x;
      ham = build_hamiltonian(spec);
      if (metrics.count("fidelity")) pen = exact_ground(*ham, e.penalty);
      if (metrics.count("energy_discrepancy")) unpen = exact_ground(*ham, 0.0);
    }

    int label = ds.meta.generated && rec.x.count("label")
                    ? static_cast<int>(std::lround(rec.x.at("label")))
                    : -1;

    std::vector<std::string> cells{std::to_string(i)};
    for (const std::string& k : x_keys) {
      auto it = rec.x.find(k);
      cells.push_back(it == rec.x.end() ? "" : format_double(it->second));
    }
    for (const std::string& m : e.metrics) {
      if (m == "magnetization") {
        double v = magnetization(state);
        cells.push_back(format_double(v));
        groups[label][m].push_back(v);
      } else if (m == "string_order") {
        double v = string_order(state);
        cells.push_back(format_double(v));
        groups[label][m].push_back(v);
      } else if (m == "fidelity") {
        double v = fidelity(state, pen->state);
        cells.push_back(format_double(v));
        groups[label][m].push_back(v);
      } else if (m == "energy_discrepancy") {
        double v = expectation(state, *ham) - unpen->penalized_energy;
        cells.push_back(format_double(v));
        groups[label][m].push_back(v);
      } else if (m == "site_z") {
        for (int q = 0; q < ds.meta.n_qubits; ++q) {
          cells.push_back(format_double(site_z(state, q)));
        }
      }
    }
    csv.row(cells);
    ++evaluated;
  }

  std::vector<EvalSummaryRow> summary;
  for (auto& [label, per_metric] : groups) {
    for (auto& [metric, values] : per_metric) {
      if (metric == "__energy" || values.empty()) continue;
      EvalSummaryRow row;
      row.label = label;
      row.metric = metric;
      row.count = static_cast<int>(values.size());
      row.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
      row.q1 = quantile(values, 0.25);
      row.median = quantile(values, 0.5);
      row.q3 = quantile(values, 0.75);
      row.p10 = quantile(values, 0.1);
      row.p30 = quantile(values, 0.3);
      row.p50 = quantile(values, 0.5);
      row.p70 = quantile(values, 0.7);
      row.p90 = quantile(values, 0.9);
      int gt04 = 0, gt02 = 0;
      for (double v : values) {
        gt04 += std::abs(v) > 0.4;
        gt02 += std::abs(v) > 0.2;
      }
      row.frac_abs_gt_04 = static_cast<double>(gt04) / values.size();
      row.frac_abs_gt_02 = static_cast<double>(gt02) / values.size();
      summary.push_back(std::move(row));
    }
  }

  {
    CsvWriter out(cfg.resolve(e.summary_csv),
                  {"label", "metric", "count", "mean", "q1", "median", "q3", "p10", "p30", "p50",
                   "p70", "p90", "frac_abs_gt_0.4", "frac_abs_gt_0.2"},
                  ds.meta.layout_id, cfg.config_hash);
    for (const auto& row : summary) {
      out.row({std::to_string(row.label), row.metric, std::to_string(row.count),
               format_double(row.mean), format_double(row.q1), format_double(row.median),
               format_double(row.q3), format_double(row.p10), format_double(row.p30),
               format_double(row.p50), format_double(row.p70), format_double(row.p90),
               format_double(row.frac_abs_gt_04), format_double(row.frac_abs_gt_02)});
    }
  }
  log << "eval: " << evaluated << " records -> " << cfg.resolve(e.per_sample_csv).string()
      << ", " << cfg.resolve(e.summary_csv).string() << "\n";
  return summary;
}

std::filesystem::path run_exact(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.exact) throw ConfigError("exact: section missing from config");
  const ExactSection& e = *cfg.exact;

  std::string desc;
  auto grid = expand_grid(e.grid, desc);

  std::vector<std::string> x_keys;
  for (const auto& point : grid) {
    for (const auto& [k, v] : point) {
      if (std::find(x_keys.begin(), x_keys.end(), k) == x_keys.end()) x_keys.push_back(k);
    }
  }
  std::sort(x_keys.begin(), x_keys.end());

  std::vector<std::string> header = x_keys;
  header.push_back("energy");
  header.push_back("penalized_energy");
  header.push_back("penalty");
  for (const std::string& m : e.metrics) header.push_back(m);

  std::filesystem::path path = cfg.resolve(e.csv);
  CsvWriter csv(path, header, "", cfg.config_hash);
  int failures = 0;
  for (const auto& point : grid) {
    HamiltonianSpec spec;
    spec.family = e.family;
    spec.n_qubits = e.n_qubits;
    spec.boundary = e.boundary;
    spec.params = point;
    std::vector<std::string> cells;
    for (const std::string& k : x_keys) {
      auto it = point.find(k);
      cells.push_back(it == point.end() ? "" : format_double(it->second));
    }
    try {
      PauliSum h = build_hamiltonian(spec);
      GroundResult unpen = exact_ground(h, 0.0);
      GroundResult pen = e.penalty != 0.0 ? exact_ground(h, e.penalty) : unpen;
      cells.push_back(format_double(unpen.penalized_energy));
      cells.push_back(format_double(pen.penalized_energy));
      cells.push_back(format_double(e.penalty));
      for (const std::string& m : e.metrics) {
        cells.push_back(format_double(m == "magnetization" ? magnetization(pen.state)
                                                           : string_order(pen.state)));
      }
    } catch (const std::exception& ex) {
      log << "exact: point failed (" << ex.what() << ")\n";
      ++failures;
      while (cells.size() < header.size()) cells.push_back("nan");
    }
    csv.row(cells);
  }
  log << "exact: " << grid.size() << " points (" << failures << " failed) -> " << path.string()
      << "\n";
  return path;
}

bool run_gradcheck(std::ostream& log) {
  bool all_ok = true;
  auto check = [&](const std::string& name, bool ok) {
    log << (ok ? "ok   " : "FAIL ") << name << "\n";
    all_ok = all_ok && ok;
  };

  // simulator: adjoint vs parameter shift vs finite differences
  {
    Rng rng(20240);
    bool shift_ok = true, fd_ok = true;
    for (int trial = 0; trial < 20; ++trial) {
      int n = 4;
      CircuitTemplate tmpl;
      tmpl.n_qubits = n;
      int p = 0;
      for (int d = 0; d < 12; ++d) {
        int pick = static_cast<int>(rng.below(4));
        int q = static_cast<int>(rng.below(n));
        if (pick == 3) {
          int q2 = static_cast<int>(rng.below(n - 1));
          if (q2 >= q) ++q2;
          tmpl.gates.push_back(Gate::cz(q, q2));
        } else {
          GateKind kind = pick == 0 ? GateKind::RX : pick == 1 ? GateKind::RY : GateKind::RZ;
          tmpl.gates.push_back({kind, q, -1, p++});
        }
      }
      tmpl.n_params = p;
      if (p == 0) continue;
      PauliSum h(n);
      for (int t = 0; t < 4; ++t) {
        std::vector<PauliSum::Op> ops;
        const char axes[3] = {'X', 'Y', 'Z'};
        for (int q = 0; q < n; ++q) {
          int pick = static_cast<int>(rng.below(4));
          if (pick < 3) ops.push_back({q, axes[pick]});
        }
        if (ops.empty()) ops.push_back({0, 'Z'});
        h.add_term(rng.uniform(-1.0, 1.0), std::move(ops));
      }
      std::vector<double> theta(p);
      for (double& v : theta) v = rng.uniform(-M_PI, M_PI);

      auto adj = grad_adjoint(tmpl, theta, h);
      auto shift = grad_parameter_shift(tmpl, theta, h);
      double scale = 1.0;
      for (double gv : shift) scale = std::max(scale, std::abs(gv));
      for (int j = 0; j < p; ++j) {
        if (std::abs(adj[j] - shift[j]) >= 1e-8) shift_ok = false;
      }
      const double step = 1e-5;
      std::vector<double> tt = theta;
      for (int j = 0; j < p; ++j) {
        tt[j] = theta[j] + step;
        double ep = expectation(run_circuit(tmpl, tt), h);
        tt[j] = theta[j] - step;
        double em = expectation(run_circuit(tmpl, tt), h);
        tt[j] = theta[j];
        if (std::abs(adj[j] - (ep - em) / (2 * step)) / scale >= 1e-4) fd_ok = false;
      }
    }
    check("statevec adjoint vs parameter-shift (20 random N=4 instances, 1e-8)", shift_ok);
    check("statevec adjoint vs central differences (relative 1e-4)", fd_ok);
  }

  // tensor layers vs finite differences
  {
    Rng rng(555);
    auto fd_check = [&rng](auto&& builder, LayerParams& params) {
      params.zero_grads();
      Tensor loss = builder();
      loss.backward();
      const double step = 1e-5;
      for (auto& [name, t] : params.tensors) {
        auto value = t.data();
        auto grad = t.grad();
        for (std::size_t i = 0; i < value.size(); ++i) {
          double saved = value[i];
          value[i] = saved + step;
          double lp = builder().item();
          value[i] = saved - step;
          double lm = builder().item();
          value[i] = saved;
          double fd = (lp - lm) / (2 * step);
          if (std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)) >= 1e-4) return false;
        }
      }
      return true;
    };

    auto rnd = [&rng](std::vector<int> shape, bool grad) {
      Tensor t = Tensor::zeros(std::move(shape), grad);
      for (double& v : t.data()) v = rng.normal();
      return t;
    };

    {
      LayerParams p;
      p.add("w", rnd({3, 2, 3}, true));
      p.add("b", rnd({3}, true));
      Tensor x = rnd({6, 2}, false);
      Tensor target = rnd({6, 3}, false);
      check("conv1d gradient", fd_check(
                                   [&] {
                                     return mse_loss(conv1d(x, p.at("w"), p.at("b")), target);
                                   },
                                   p));
    }
    {
      LayerParams p;
      p.add("w", rnd({3, 3, 2}, true));
      p.add("b", rnd({2}, true));
      Tensor x = rnd({6, 3}, false);
      Tensor target = rnd({6, 2}, false);
      check("conv1d_transposed gradient",
            fd_check([&] { return mse_loss(conv1d_transposed(x, p.at("w"), p.at("b")), target); },
                     p));
    }
    {
      LayerParams p;
      for (const char* n : {"a.wq", "a.wk", "a.wv", "a.wo"}) p.add(n, rnd({8, 8}, true));
      Tensor x = rnd({5, 8}, false);
      Tensor target = rnd({5, 8}, false);
      check("attention gradient",
            fd_check([&] { return mse_loss(attention(x, p, "a", 2), target); }, p));
    }
    {
      LayerParams p;
      p.add("r.w1", rnd({3, 3, 3}, true));
      p.add("r.b1", rnd({3}, true));
      p.add("r.w2", rnd({3, 3, 3}, true));
      p.add("r.b2", rnd({3}, true));
      Tensor x = rnd({5, 3}, false);
      Tensor target = rnd({5, 3}, false);
      check("resnet_block gradient",
            fd_check([&] { return mse_loss(resnet_block(x, p, "r"), target); }, p));
    }
    {
      LayerParams p;
      init_mlp(p, "m", {4, 8, 3}, rng);
      Tensor x = rnd({1, 4}, false);
      Tensor target = rnd({1, 3}, false);
      check("mlp gradient",
            fd_check([&] { return mse_loss(mlp(x, p, "m", {4, 8, 3}), target); }, p));
    }
    {
      LayerParams p;
      p.add("mu", rnd({4}, true));
      p.add("lv", rnd({4}, true));
      check("kl_gauss gradient", fd_check([&] { return kl_gauss(p.at("mu"), p.at("lv")); }, p));
    }
  }
  log << (all_ok ? "gradcheck: all checks passed\n" : "gradcheck: FAILURES detected\n");
  return all_ok;
}

}  // namespace qpl
