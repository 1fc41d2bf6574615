#include "qpl/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qpl {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

ordered_json vqe_config_json(const VqeConfig& cfg) {
  ordered_json j;
  j["optimizer"] = cfg.optimizer;
  j["learning_rate"] = cfg.learning_rate;
  j["max_iters"] = cfg.max_iters;
  j["grad_tol"] = cfg.grad_tol;
  j["seed"] = cfg.seed;
  j["init"] = cfg.init == InitMode::UNIFORM_PI ? "uniform_pi" : "constant";
  j["init_value"] = cfg.init_value;
  return j;
}

VqeConfig vqe_config_from_json(const ordered_json& j) {
  VqeConfig cfg;
  cfg.optimizer = j.at("optimizer").get<std::string>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.grad_tol = j.at("grad_tol").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.init = j.at("init").get<std::string>() == "constant" ? InitMode::CONSTANT
                                                           : InitMode::UNIFORM_PI;
  cfg.init_value = j.at("init_value").get<double>();
  return cfg;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const SweepDataset& ds) {
  std::string out;
  ordered_json meta;
  meta["format"] = "qpl-dataset";
  meta["version"] = kDatasetFormatVersion;
  meta["family"] = family_name(ds.meta.family);
  meta["n_qubits"] = ds.meta.n_qubits;
  meta["boundary"] = boundary_name(ds.meta.boundary);
  meta["qubit_order"] = "little-endian";
  meta["ansatz"] = ds.meta.ansatz_kind;
  meta["blocks"] = ds.meta.blocks;
  meta["layout_id"] = ds.meta.layout_id;
  meta["n_params"] = ds.meta.n_params;
  meta["grid"] = ds.meta.grid_desc;
  meta["vqe"] = vqe_config_json(ds.meta.vqe);
  meta["oracle_attached"] = ds.meta.oracle_attached;
  meta["oracle_penalty"] = ds.meta.oracle_penalty;
  meta["theta0_hash"] = ds.meta.theta0_hash;
  meta["generated"] = ds.meta.generated;
  meta["code_version"] = ds.meta.code_version.empty() ? kCodeVersion : ds.meta.code_version;
  meta["config_hash"] = ds.meta.config_hash;
  out += meta.dump();
  out += '\n';

  for (const VqeRecord& rec : ds.records) {
    ordered_json r;
    r["x"] = ordered_json::object();
    for (const auto& [k, v] : rec.x) r["x"][k] = v;
    r["theta"] = rec.theta_star;
    r["energy"] = rec.final_energy;
    if (rec.exact_energy) r["exact_energy"] = *rec.exact_energy;
    if (rec.penalized_exact_energy) r["penalized_exact_energy"] = *rec.penalized_exact_energy;
    if (rec.fid) r["fidelity"] = *rec.fid;
    r["iters"] = rec.iters_used;
    r["converged"] = rec.converged;
    if (rec.failed) {
      r["failed"] = true;
      r["error"] = rec.error;
    }
    out += r.dump();
    out += '\n';
  }
  write_file(path, out);
}

SweepDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path.string());

  ordered_json meta = ordered_json::parse(line);
  if (meta.value("format", "") != "qpl-dataset") {
    throw std::runtime_error("not a qpl dataset: " + path.string());
  }
  SweepDataset ds;
  ds.meta.family = family_from_name(meta.at("family").get<std::string>());
  ds.meta.n_qubits = meta.at("n_qubits").get<int>();
  ds.meta.boundary = boundary_from_name(meta.at("boundary").get<std::string>());
  ds.meta.ansatz_kind = meta.at("ansatz").get<std::string>();
  ds.meta.blocks = meta.at("blocks").get<int>();
  ds.meta.layout_id = meta.at("layout_id").get<std::string>();
  ds.meta.n_params = meta.at("n_params").get<int>();
  ds.meta.grid_desc = meta.at("grid").get<std::string>();
  ds.meta.vqe = vqe_config_from_json(meta.at("vqe"));
  ds.meta.oracle_attached = meta.at("oracle_attached").get<bool>();
  ds.meta.oracle_penalty = meta.at("oracle_penalty").get<double>();
  ds.meta.theta0_hash = meta.at("theta0_hash").get<std::string>();
  ds.meta.generated = meta.at("generated").get<bool>();
  ds.meta.code_version = meta.at("code_version").get<std::string>();
  ds.meta.config_hash = meta.at("config_hash").get<std::string>();

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json r = ordered_json::parse(line);
    VqeRecord rec;
    for (const auto& [k, v] : r.at("x").items()) rec.x[k] = v.get<double>();
    rec.theta_star = r.at("theta").get<std::vector<double>>();
    rec.final_energy = r.at("energy").get<double>();
    if (r.contains("exact_energy")) rec.exact_energy = r["exact_energy"].get<double>();
    if (r.contains("penalized_exact_energy")) {
      rec.penalized_exact_energy = r["penalized_exact_energy"].get<double>();
    }
    if (r.contains("fidelity")) rec.fid = r["fidelity"].get<double>();
    rec.iters_used = r.at("iters").get<int>();
    rec.converged = r.at("converged").get<bool>();
    if (r.value("failed", false)) {
      rec.failed = true;
      rec.error = r.value("error", "");
    }
    if (static_cast<int>(rec.theta_star.size()) != ds.meta.n_params) {
      throw std::runtime_error("dataset record length does not match layout " +
                               ds.meta.layout_id);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'Q', 'P', 'L', 'C', 'K', 'P', 'T', '\0'};

struct TensorEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset;
  std::size_t count;
};

std::string pack_checkpoint(const ordered_json& header, const std::string& payload) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  std::uint32_t version = kCheckpointFormatVersion;
  out.append(reinterpret_cast<const char*>(&version), sizeof version);
  std::string hdr = header.dump();
  std::uint64_t hdr_len = hdr.size();
  out.append(reinterpret_cast<const char*>(&hdr_len), sizeof hdr_len);
  out += hdr;
  out += payload;
  return out;
}

std::pair<ordered_json, std::string> unpack_checkpoint(const std::filesystem::path& path) {
  std::string data = read_file(path);
  if (data.size() < sizeof(kMagic) + 12 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a qpl checkpoint: " + path.string());
  }
  std::uint32_t version;
  std::memcpy(&version, data.data() + 8, sizeof version);
  if (version != kCheckpointFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path.string());
  }
  std::uint64_t hdr_len;
  std::memcpy(&hdr_len, data.data() + 12, sizeof hdr_len);
  std::size_t hdr_start = 20;
  if (hdr_start + hdr_len > data.size()) {
    throw std::runtime_error("truncated checkpoint header in " + path.string());
  }
  ordered_json header = ordered_json::parse(data.substr(hdr_start, hdr_len));
  return {header, data.substr(hdr_start + hdr_len)};
}

void append_payload(std::string& payload, const std::vector<double>& values) {
  payload.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
}

ordered_json tensor_catalog(const LayerParams& params, std::string& payload) {
  ordered_json catalog = ordered_json::array();
  for (const auto& [name, t] : params.tensors) {
    ordered_json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["dtype"] = "f64";
    e["offset"] = payload.size();
    catalog.push_back(e);
    payload.append(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(double));
  }
  return catalog;
}

void load_catalog(const ordered_json& catalog, const std::string& payload, LayerParams& params) {
  for (const auto& e : catalog) {
    std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    std::size_t offset = e.at("offset").get<std::size_t>();
    if (offset + count * sizeof(double) > payload.size()) {
      throw std::runtime_error("checkpoint payload truncated at " +
                               e.at("name").get<std::string>());
    }
    std::vector<double> values(count);
    std::memcpy(values.data(), payload.data() + offset, count * sizeof(double));
    params.add(e.at("name").get<std::string>(),
               Tensor::from_data(std::move(values), std::move(shape), true));
  }
}

ordered_json vae_config_json(const VaeConfig& cfg) {
  ordered_json j;
  j["d_latent"] = cfg.d_latent;
  j["beta"] = cfg.beta;
  j["epochs"] = cfg.epochs;
  j["batch"] = cfg.batch;
  j["learning_rate"] = cfg.learning_rate;
  j["seed"] = cfg.seed;
  j["attention"] = cfg.attention;
  j["heads"] = cfg.heads;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["kernel"] = cfg.kernel;
  j["channels"] = {cfg.channels1, cfg.channels2, cfg.channels3};
  j["n_labels"] = cfg.n_labels;
  return j;
}

VaeConfig vae_config_from_json(const ordered_json& j) {
  VaeConfig cfg;
  cfg.d_latent = j.at("d_latent").get<int>();
  cfg.beta = j.at("beta").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch = j.at("batch").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.attention = j.at("attention").get<bool>();
  cfg.heads = j.at("heads").get<int>();
  cfg.mlp_hidden = j.at("mlp_hidden").get<int>();
  cfg.kernel = j.at("kernel").get<int>();
  auto ch = j.at("channels").get<std::vector<int>>();
  cfg.channels1 = ch.at(0);
  cfg.channels2 = ch.at(1);
  cfg.channels3 = ch.at(2);
  cfg.n_labels = j.at("n_labels").get<int>();
  return cfg;
}

}  // namespace

void write_vae_checkpoint(const std::filesystem::path& path, const VaeModel& model,
                          const std::string& config_hash) {
  std::string payload;
  ordered_json header;
  header["kind"] = "vae";
  header["version"] = kCheckpointFormatVersion;
  header["code_version"] = kCodeVersion;
  header["layout_id"] = model.layout_id;
  header["config_hash"] = config_hash;
  header["input_len"] = model.input_len;
  header["config"] = vae_config_json(model.cfg);
  {
    ordered_json src;
    src["family"] = family_name(model.source.family);
    src["n_qubits"] = model.source.n_qubits;
    src["boundary"] = boundary_name(model.source.boundary);
    src["ansatz"] = model.source.ansatz_kind;
    src["blocks"] = model.source.blocks;
    src["n_params"] = model.source.n_params;
    header["source"] = src;
  }
  header["feat_mean_offset"] = payload.size();
  append_payload(payload, model.feat_mean);
  header["feat_std_offset"] = payload.size();
  append_payload(payload, model.feat_std);
  header["tensors"] = tensor_catalog(model.params, payload);
  write_file(path, pack_checkpoint(header, payload));
}

VaeModel read_vae_checkpoint(const std::filesystem::path& path) {
  auto [header, payload] = unpack_checkpoint(path);
  if (header.value("kind", "") != "vae") {
    throw std::runtime_error("checkpoint is not a VAE model: " + path.string());
  }
  VaeModel model;
  model.cfg = vae_config_from_json(header.at("config"));
  model.input_len = header.at("input_len").get<int>();
  model.layout_id = header.at("layout_id").get<std::string>();
  if (header.contains("source")) {
    const auto& src = header.at("source");
    model.source.family = family_from_name(src.at("family").get<std::string>());
    model.source.n_qubits = src.at("n_qubits").get<int>();
    model.source.boundary = boundary_from_name(src.at("boundary").get<std::string>());
    model.source.ansatz_kind = src.at("ansatz").get<std::string>();
    model.source.blocks = src.at("blocks").get<int>();
    model.source.n_params = src.at("n_params").get<int>();
    model.source.layout_id = model.layout_id;
  }
  auto read_block = [&](std::size_t offset, std::size_t count) {
    std::vector<double> v(count);
    if (offset + count * sizeof(double) > payload.size()) {
      throw std::runtime_error("checkpoint payload truncated: " + path.string());
    }
    std::memcpy(v.data(), payload.data() + offset, count * sizeof(double));
    return v;
  };
  model.feat_mean = read_block(header.at("feat_mean_offset").get<std::size_t>(),
                               model.input_len);
  model.feat_std = read_block(header.at("feat_std_offset").get<std::size_t>(), model.input_len);
  load_catalog(header.at("tensors"), payload, model.params);
  return model;
}

void write_diffusion_checkpoint(const std::filesystem::path& path, const DiffusionModel& model,
                                const std::string& layout_id, const std::string& config_hash) {
  std::string payload;
  ordered_json header;
  header["kind"] = "diffusion";
  header["version"] = kCheckpointFormatVersion;
  header["code_version"] = kCodeVersion;
  header["layout_id"] = layout_id;
  header["config_hash"] = config_hash;
  header["d_latent"] = model.d_latent;
  header["n_labels"] = model.n_labels;
  ordered_json cfg;
  cfg["T"] = model.cfg.T;
  cfg["beta_start"] = model.cfg.beta_start;
  cfg["beta_end"] = model.cfg.beta_end;
  cfg["hidden"] = model.cfg.hidden;
  cfg["time_embed_dim"] = model.cfg.time_embed_dim;
  cfg["epochs"] = model.cfg.epochs;
  cfg["batch"] = model.cfg.batch;
  cfg["learning_rate"] = model.cfg.learning_rate;
  cfg["seed"] = model.cfg.seed;
  header["config"] = cfg;
  header["alphas_offset"] = payload.size();
  append_payload(payload, model.alphas);
  header["alpha_bars_offset"] = payload.size();
  append_payload(payload, model.alpha_bars);
  header["tensors"] = tensor_catalog(model.params, payload);
  write_file(path, pack_checkpoint(header, payload));
}

DiffusionCheckpoint read_diffusion_checkpoint(const std::filesystem::path& path) {
  auto [header, payload] = unpack_checkpoint(path);
  if (header.value("kind", "") != "diffusion") {
    throw std::runtime_error("checkpoint is not a diffusion model: " + path.string());
  }
  DiffusionCheckpoint ckpt;
  DiffusionModel& m = ckpt.model;
  const auto& cfg = header.at("config");
  m.cfg.T = cfg.at("T").get<int>();
  m.cfg.beta_start = cfg.at("beta_start").get<double>();
  m.cfg.beta_end = cfg.at("beta_end").get<double>();
  m.cfg.hidden = cfg.at("hidden").get<int>();
  m.cfg.time_embed_dim = cfg.at("time_embed_dim").get<int>();
  m.cfg.epochs = cfg.at("epochs").get<int>();
  m.cfg.batch = cfg.at("batch").get<int>();
  m.cfg.learning_rate = cfg.at("learning_rate").get<double>();
  m.cfg.seed = cfg.at("seed").get<std::uint64_t>();
  m.d_latent = header.at("d_latent").get<int>();
  m.n_labels = header.at("n_labels").get<int>();
  ckpt.layout_id = header.at("layout_id").get<std::string>();

  auto read_block = [&payload, &path](std::size_t offset, std::size_t count) {
    std::vector<double> v(count);
    if (offset + count * sizeof(double) > payload.size()) {
      throw std::runtime_error("checkpoint payload truncated: " + path.string());
    }
    std::memcpy(v.data(), payload.data() + offset, count * sizeof(double));
    return v;
  };
  m.alphas = read_block(header.at("alphas_offset").get<std::size_t>(), m.cfg.T);
  m.alpha_bars = read_block(header.at("alpha_bars_offset").get<std::size_t>(), m.cfg.T);
  load_catalog(header.at("tensors"), payload, m.params);
  return ckpt;
}

// ---- CSV ----------------------------------------------------------------------

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::string& layout_id, const std::string& config_hash)
    : path_(path), columns_(header.size()) {
  buffer_ = "# qpl-csv v1 layout=" + layout_id + " config=" + config_hash + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += header[i];
  }
  buffer_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: column count mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += cells[i];
  }
  buffer_ += '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

CsvWriter::~CsvWriter() {
  try {
    write_file(path_, buffer_);
  } catch (...) {
    // destructor must not throw; the pipeline checks files after the fact
  }
}

std::string hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) buf[i] = hex[(h >> (60 - 4 * i)) & 0xf];
  buf[16] = '\0';
  return std::string(buf);
}

}  // namespace qpl
