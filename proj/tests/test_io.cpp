#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpl/ansatz.hpp"
#include "qpl/io.hpp"
#include "qpl/rng.hpp"

using namespace qpl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "qpl_io_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SweepDataset tiny_dataset() {
  CircuitTemplate tmpl = tfim_ansatz(4, 1);
  SweepDataset ds;
  ds.meta.family = Family::TFIM;
  ds.meta.n_qubits = 4;
  ds.meta.boundary = Boundary::PERIODIC;
  ds.meta.ansatz_kind = "tfim";
  ds.meta.blocks = 1;
  ds.meta.layout_id = tmpl.layout_id;
  ds.meta.n_params = tmpl.n_params;
  ds.meta.grid_desc = "h:0:1:0.5";
  ds.meta.theta0_hash = "abc";
  ds.meta.code_version = kCodeVersion;
  ds.meta.config_hash = "deadbeef";

  Rng rng(4);
  for (double h : {0.0, 0.5, 1.0}) {
    VqeRecord rec;
    rec.x = {{"h", h}};
    rec.theta_star.resize(tmpl.n_params);
    for (double& v : rec.theta_star) v = rng.uniform(-3.2, 3.2);
    rec.final_energy = -h * 1.7182818284590452;
    rec.exact_energy = rec.final_energy - 1e-9;
    rec.fid = 0.999;
    rec.iters_used = 17;
    rec.converged = h != 0.5;
    ds.records.push_back(std::move(rec));
  }
  ds.records[1].failed = true;
  ds.records[1].error = "synthetic failure";
  return ds;
}

}  // namespace

TEST_CASE("dataset: write -> read -> write is byte-identical and value-exact") {
  fs::path dir = temp_dir();
  SweepDataset ds = tiny_dataset();
  fs::path p1 = dir / "a.jsonl";
  fs::path p2 = dir / "b.jsonl";
  write_dataset(p1, ds);
  SweepDataset back = read_dataset(p1);
  write_dataset(p2, back);
  CHECK(slurp(p1) == slurp(p2));

  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].theta_star == ds.records[i].theta_star);
    CHECK(back.records[i].final_energy == ds.records[i].final_energy);
    CHECK(back.records[i].x == ds.records[i].x);
    CHECK(back.records[i].failed == ds.records[i].failed);
  }
  CHECK(back.meta.layout_id == ds.meta.layout_id);
  CHECK(back.meta.theta0_hash == ds.meta.theta0_hash);
}

TEST_CASE("dataset: record length inconsistent with the layout is rejected") {
  fs::path dir = temp_dir();
  SweepDataset ds = tiny_dataset();
  ds.records[0].theta_star.push_back(0.0);
  fs::path p = dir / "bad.jsonl";
  write_dataset(p, ds);
  CHECK_THROWS_AS(read_dataset(p), std::runtime_error);
}

TEST_CASE("vae checkpoint: bit-exact round trip, encode-identical") {
  fs::path dir = temp_dir();
  VaeConfig cfg;
  cfg.d_latent = 3;
  cfg.mlp_hidden = 16;
  cfg.seed = 9;
  VaeModel model = make_vae(24, cfg);
  Rng rng(2);
  for (auto& v : model.feat_mean) v = rng.normal();
  for (auto& v : model.feat_std) v = std::abs(rng.normal()) + 0.5;
  model.layout_id = "layout42";
  model.source.family = Family::CLUSTER_YY;
  model.source.n_qubits = 7;
  model.source.ansatz_kind = "tfim";
  model.source.blocks = 7;
  model.source.n_params = 24;

  fs::path p = dir / "model.ckpt";
  write_vae_checkpoint(p, model, "cfa1");
  VaeModel back = read_vae_checkpoint(p);

  CHECK(back.layout_id == model.layout_id);
  CHECK(back.input_len == model.input_len);
  CHECK(back.feat_mean == model.feat_mean);
  CHECK(back.feat_std == model.feat_std);
  CHECK(back.source.n_qubits == 7);
  CHECK(back.source.ansatz_kind == "tfim");
  for (const auto& [name, t] : model.params.tensors) {
    const Tensor& u = back.params.at(name);
    REQUIRE(u.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(u.data()[i] == t.data()[i]);
  }

  std::vector<double> x(24);
  for (double& v : x) v = rng.uniform(-3.0, 3.0);
  auto [mu_a, lv_a] = encode(model, x);
  auto [mu_b, lv_b] = encode(back, x);
  CHECK(mu_a == mu_b);
  CHECK(lv_a == lv_b);

  // rewrite is byte-identical
  fs::path p2 = dir / "model2.ckpt";
  write_vae_checkpoint(p2, back, "cfa1");
  CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("diffusion checkpoint: round trip preserves schedule and predictions") {
  fs::path dir = temp_dir();
  DiffusionConfig cfg;
  cfg.T = 50;
  cfg.seed = 77;
  DiffusionModel model = make_diffusion(4, 2, cfg);
  fs::path p = dir / "diff.ckpt";
  write_diffusion_checkpoint(p, model, "layoutZ", "cfg9");
  DiffusionCheckpoint back = read_diffusion_checkpoint(p);
  CHECK(back.layout_id == "layoutZ");
  CHECK(back.model.alphas == model.alphas);
  CHECK(back.model.alpha_bars == model.alpha_bars);

  std::vector<double> z{0.1, -0.2, 0.3, 0.4};
  CHECK(predict_noise(back.model, z, 1, 25) == predict_noise(model, z, 1, 25));
}

TEST_CASE("checkpoint kind mismatch is detected") {
  fs::path dir = temp_dir();
  DiffusionModel model = make_diffusion(2, 2, DiffusionConfig{});
  fs::path p = dir / "kind.ckpt";
  write_diffusion_checkpoint(p, model, "x", "y");
  CHECK_THROWS_AS(read_vae_checkpoint(p), std::runtime_error);
  CHECK_THROWS_AS(read_diffusion_checkpoint(dir / "missing.ckpt"), std::runtime_error);
}

TEST_CASE("format_double: shortest round-trip decimals") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-3.0) == "-3");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv writer: deterministic bytes and column checks") {
  fs::path dir = temp_dir();
  auto write_once = [&dir](const fs::path& p) {
    CsvWriter csv(p, {"a", "b"}, "lay", "cfg");
    csv.row_values({1.5, -0.25});
    csv.row({"x", "y"});
  };
  write_once(dir / "c1.csv");
  write_once(dir / "c2.csv");
  CHECK(slurp(dir / "c1.csv") == slurp(dir / "c2.csv"));
  CHECK(slurp(dir / "c1.csv") ==
        "# qpl-csv v1 layout=lay config=cfg\na,b\n1.5,-0.25\nx,y\n");

  CsvWriter bad(dir / "c3.csv", {"a", "b"}, "", "");
  CHECK_THROWS_AS(bad.row({"only-one"}), std::invalid_argument);
}
