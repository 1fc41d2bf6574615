#include "qpl/generative.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qpl/rng.hpp"

namespace qpl {

void VaeConfig::validate() const {
  if (d_latent < 1) throw std::invalid_argument("VaeConfig: d_latent must be >= 1");
  if (epochs < 1 || batch < 1) throw std::invalid_argument("VaeConfig: epochs/batch must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("VaeConfig: learning_rate must be > 0");
  if (beta < 0) throw std::invalid_argument("VaeConfig: beta must be >= 0");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("VaeConfig: kernel must be odd");
  if (heads < 1 || channels3 % heads != 0) {
    throw std::invalid_argument("VaeConfig: heads must divide channels3");
  }
  if (n_labels < 0) throw std::invalid_argument("VaeConfig: n_labels must be >= 0");
}

namespace {

Tensor xavier(std::vector<int> shape, double fan_in, double fan_out, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
  for (double& v : t.data()) v = std_dev * rng.normal();
  return t;
}

void add_conv(LayerParams& p, const std::string& name, int k, int cin, int cout, Rng& rng) {
  p.add(name + ".w", xavier({k, cin, cout}, k * cin, k * cout, rng));
  p.add(name + ".b", Tensor::zeros({cout}, true));
}

Tensor constant_row(std::span<const double> v) {
  return Tensor::from_data(std::vector<double>(v.begin(), v.end()),
                           {1, static_cast<int>(v.size())});
}

Tensor one_hot_row(int label, int n_labels) {
  if (label < 0 || label >= n_labels) throw std::invalid_argument("label outside trained set");
  Tensor t = Tensor::zeros({1, n_labels});
  t.data()[label] = 1.0;
  return t;
}

// Encoder graph from a standardized input column [len, 1].
std::pair<Tensor, Tensor> encoder_forward(const VaeModel& m, const Tensor& x_col) {
  const VaeConfig& c = m.cfg;
  const LayerParams& p = m.params;
  Tensor h = gelu(conv1d(x_col, p.at("enc.conv1.w"), p.at("enc.conv1.b")));
  h = gelu(conv1d(h, p.at("enc.conv2.w"), p.at("enc.conv2.b")));
  h = gelu(conv1d(h, p.at("enc.conv3.w"), p.at("enc.conv3.b")));
  if (c.attention) {
    Tensor normed = layer_norm(h, p.at("enc.ln.g"), p.at("enc.ln.b"));
    h = add(h, attention(normed, p, "enc.attn", c.heads));
  }
  h = resnet_block(h, p, "enc.res");
  Tensor flat = reshape(h, {1, m.input_len * c.channels3});
  Tensor hid = gelu(add_bias(matmul(flat, p.at("enc.head.w")), p.at("enc.head.b")));
  Tensor mu = add_bias(matmul(hid, p.at("enc.mu.w")), p.at("enc.mu.b"));
  Tensor logvar = add_bias(matmul(hid, p.at("enc.logvar.w")), p.at("enc.logvar.b"));
  return {mu, logvar};
}

// Decoder graph from a latent row [1, d_latent] (+ optional one-hot)
// back to a standardized column [len, 1].
Tensor decoder_forward(const VaeModel& m, const Tensor& z_row, const Tensor* onehot) {
  const VaeConfig& c = m.cfg;
  const LayerParams& p = m.params;
  Tensor in = z_row;
  if (c.n_labels > 0) {
    if (!onehot) throw std::invalid_argument("conditional decoder requires a label");
    in = concat_cols({z_row, *onehot});
  }
  Tensor h = gelu(add_bias(matmul(in, p.at("dec.fc1.w")), p.at("dec.fc1.b")));
  Tensor flat = add_bias(matmul(h, p.at("dec.fc2.w")), p.at("dec.fc2.b"));
  Tensor grid = gelu(reshape(flat, {m.input_len, c.channels3}));
  Tensor t = gelu(conv1d_transposed(grid, p.at("dec.tconv3.w"), p.at("dec.tconv3.b")));
  t = gelu(conv1d_transposed(t, p.at("dec.tconv2.w"), p.at("dec.tconv2.b")));
  return conv1d_transposed(t, p.at("dec.tconv1.w"), p.at("dec.tconv1.b"));
}

std::vector<double> standardize(const VaeModel& m, std::span<const double> raw) {
  if (static_cast<int>(raw.size()) != m.input_len) {
    throw std::invalid_argument("input length mismatch with trained model");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = (raw[i] - m.feat_mean[i]) / m.feat_std[i];
  }
  return out;
}

std::vector<double> destandardize(const VaeModel& m, std::span<const double> std_vals) {
  std::vector<double> out(std_vals.size());
  for (std::size_t i = 0; i < std_vals.size(); ++i) {
    out[i] = std_vals[i] * m.feat_std[i] + m.feat_mean[i];
  }
  return out;
}

}  // namespace

VaeModel make_vae(int input_len, const VaeConfig& cfg) {
  cfg.validate();
  if (input_len < cfg.kernel) throw std::invalid_argument("make_vae: input too short");
  VaeModel m;
  m.cfg = cfg;
  m.input_len = input_len;
  m.feat_mean.assign(input_len, 0.0);
  m.feat_std.assign(input_len, 1.0);

  Rng rng(Rng::derive(cfg.seed, 0x1a7e0));
  LayerParams& p = m.params;
  const int k = cfg.kernel;
  add_conv(p, "enc.conv1", k, 1, cfg.channels1, rng);
  add_conv(p, "enc.conv2", k, cfg.channels1, cfg.channels2, rng);
  add_conv(p, "enc.conv3", k, cfg.channels2, cfg.channels3, rng);
  if (cfg.attention) {
    Tensor g = Tensor::zeros({cfg.channels3}, true);
    std::fill(g.data().begin(), g.data().end(), 1.0);
    p.add("enc.ln.g", g);
    p.add("enc.ln.b", Tensor::zeros({cfg.channels3}, true));
    for (const char* n : {"enc.attn.wq", "enc.attn.wk", "enc.attn.wv", "enc.attn.wo"}) {
      p.add(n, xavier({cfg.channels3, cfg.channels3}, cfg.channels3, cfg.channels3, rng));
    }
  }
  p.add("enc.res.w1", xavier({k, cfg.channels3, cfg.channels3}, k * cfg.channels3,
                             k * cfg.channels3, rng));
  p.add("enc.res.b1", Tensor::zeros({cfg.channels3}, true));
  p.add("enc.res.w2", xavier({k, cfg.channels3, cfg.channels3}, k * cfg.channels3,
                             k * cfg.channels3, rng));
  p.add("enc.res.b2", Tensor::zeros({cfg.channels3}, true));

  const int flat = input_len * cfg.channels3;
  p.add("enc.head.w", xavier({flat, cfg.mlp_hidden}, flat, cfg.mlp_hidden, rng));
  p.add("enc.head.b", Tensor::zeros({cfg.mlp_hidden}, true));
  p.add("enc.mu.w", xavier({cfg.mlp_hidden, cfg.d_latent}, cfg.mlp_hidden, cfg.d_latent, rng));
  p.add("enc.mu.b", Tensor::zeros({cfg.d_latent}, true));
  p.add("enc.logvar.w", xavier({cfg.mlp_hidden, cfg.d_latent}, cfg.mlp_hidden, cfg.d_latent, rng));
  p.add("enc.logvar.b", Tensor::zeros({cfg.d_latent}, true));

  const int dec_in = cfg.d_latent + cfg.n_labels;
  p.add("dec.fc1.w", xavier({dec_in, cfg.mlp_hidden}, dec_in, cfg.mlp_hidden, rng));
  p.add("dec.fc1.b", Tensor::zeros({cfg.mlp_hidden}, true));
  p.add("dec.fc2.w", xavier({cfg.mlp_hidden, flat}, cfg.mlp_hidden, flat, rng));
  p.add("dec.fc2.b", Tensor::zeros({flat}, true));
  add_conv(p, "dec.tconv3", k, cfg.channels3, cfg.channels2, rng);
  add_conv(p, "dec.tconv2", k, cfg.channels2, cfg.channels1, rng);
  add_conv(p, "dec.tconv1", k, cfg.channels1, 1, rng);
  return m;
}

std::pair<std::vector<double>, std::vector<double>> encode(const VaeModel& model,
                                                           std::span<const double> x_raw) {
  std::vector<double> x = standardize(model, x_raw);
  Tensor col = Tensor::from_data(std::move(x), {model.input_len, 1});
  auto [mu, logvar] = encoder_forward(model, col);
  return {std::vector<double>(mu.data().begin(), mu.data().end()),
          std::vector<double>(logvar.data().begin(), logvar.data().end())};
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size()) {
    throw std::invalid_argument("reparameterize: shape mismatch");
  }
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  }
  return z;
}

std::vector<double> decode(const VaeModel& model, std::span<const double> z) {
  if (model.cfg.n_labels > 0) {
    throw std::invalid_argument("decode: model is conditional, use decode_conditional");
  }
  if (static_cast<int>(z.size()) != model.cfg.d_latent) {
    throw std::invalid_argument("decode: latent size mismatch");
  }
  Tensor out = decoder_forward(model, constant_row(z), nullptr);
  return destandardize(model, out.data());
}

std::vector<double> decode_conditional(const VaeModel& model, std::span<const double> z,
                                       int label) {
  if (model.cfg.n_labels == 0) {
    throw std::invalid_argument("decode_conditional: model was trained without labels");
  }
  if (static_cast<int>(z.size()) != model.cfg.d_latent) {
    throw std::invalid_argument("decode_conditional: latent size mismatch");
  }
  Tensor onehot = one_hot_row(label, model.cfg.n_labels);
  Tensor out = decoder_forward(model, constant_row(z), &onehot);
  return destandardize(model, out.data());
}

std::vector<std::vector<double>> encode_means(const VaeModel& model,
                                              const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(encode(model, r).first);
  return out;
}

namespace {

VaeModel train_impl(const std::vector<std::vector<double>>& rows, const std::vector<int>* labels,
                    const VaeConfig& cfg, const std::string& layout_id, TrainReport* report) {
  cfg.validate();
  if (rows.empty()) throw std::invalid_argument("train_vae: empty training set");
  const int len = static_cast<int>(rows[0].size());
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != len) {
      throw std::invalid_argument("train_vae: ragged training rows");
    }
  }
  if (labels) {
    if (labels->size() != rows.size()) {
      throw std::invalid_argument("train_cvae: labels/rows length mismatch");
    }
    for (int l : *labels) {
      if (l < 0 || l >= cfg.n_labels) {
        throw std::invalid_argument("train_cvae: unlabeled or out-of-range record");
      }
    }
  }

  VaeModel model = make_vae(len, cfg);
  model.layout_id = layout_id;

  // Per-feature standardization from the training set; floored so nearly
  // constant features stay bounded.
  for (int j = 0; j < len; ++j) {
    double m = 0.0;
    for (const auto& r : rows) m += r[j];
    m /= rows.size();
    double v = 0.0;
    for (const auto& r : rows) v += (r[j] - m) * (r[j] - m);
    v /= rows.size();
    model.feat_mean[j] = m;
    model.feat_std[j] = std::max(std::sqrt(v), 1e-6);
  }

  std::vector<Tensor> inputs;
  inputs.reserve(rows.size());
  for (const auto& r : rows) {
    inputs.push_back(Tensor::from_data(standardize(model, r), {len, 1}));
  }
  std::vector<Tensor> onehots;
  if (labels) {
    onehots.reserve(rows.size());
    for (int l : *labels) onehots.push_back(one_hot_row(l, cfg.n_labels));
  }

  Rng rng(Rng::derive(cfg.seed, 0x7ae1));
  AdamState adam;
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    double epoch_mse = 0.0, epoch_kl = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::size_t stop = std::min(order.size(), start + cfg.batch);
      model.params.zero_grads();
      Tensor total;
      double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t idx = start; idx < stop; ++idx) {
        std::size_t i = order[idx];
        auto [mu, logvar] = encoder_forward(model, inputs[i]);
        std::vector<double> eps_draw(cfg.d_latent);
        for (double& e : eps_draw) e = rng.normal();
        Tensor eps = constant_row(eps_draw);
        Tensor z = add(mu, mul(exp(scale(logvar, 0.5)), eps));
        Tensor xhat = decoder_forward(model, z, labels ? &onehots[i] : nullptr);
        Tensor rec_loss = mse_loss(xhat, inputs[i]);
        epoch_mse += rec_loss.item();
        Tensor sample_loss = rec_loss;
        if (cfg.beta > 0) {
          Tensor kl = kl_gauss(mu, logvar);
          epoch_kl += kl.item();
          sample_loss = add(rec_loss, scale(kl, cfg.beta));
        }
        total = total.defined() ? add(total, sample_loss) : sample_loss;
      }
      Tensor batch_loss = scale(total, inv);
      double loss_val = batch_loss.item();
      if (!std::isfinite(loss_val)) {
        throw std::runtime_error("train_vae: loss diverged at epoch " + std::to_string(epoch));
      }
      batch_loss.backward();
      adam_step(model.params, adam, cfg.learning_rate);
      epoch_loss += loss_val;
      ++batches;
    }
    if (report) report->loss_history.push_back(epoch_loss / batches);
    if (report) {
      report->final_loss = epoch_loss / batches;
      report->final_mse = epoch_mse / rows.size();
      report->final_kl = epoch_kl / rows.size();
    }
  }
  return model;
}

}  // namespace

VaeModel train_vae(const std::vector<std::vector<double>>& rows, const VaeConfig& cfg,
                   const std::string& layout_id, TrainReport* report) {
  VaeConfig plain = cfg;
  plain.n_labels = 0;
  return train_impl(rows, nullptr, plain, layout_id, report);
}

VaeModel train_cvae(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                    const VaeConfig& cfg, const std::string& layout_id, TrainReport* report) {
  if (cfg.n_labels < 1) throw std::invalid_argument("train_cvae: n_labels must be >= 1");
  return train_impl(rows, &labels, cfg, layout_id, report);
}

// ---- diffusion ---------------------------------------------------------------

void DiffusionConfig::validate() const {
  if (T < 1) throw std::invalid_argument("DiffusionConfig: T must be >= 1");
  if (!(beta_start > 0) || !(beta_end < 1) || beta_start > beta_end) {
    throw std::invalid_argument("DiffusionConfig: need 0 < beta_start <= beta_end < 1");
  }
  if (hidden < 1 || time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw std::invalid_argument("DiffusionConfig: bad net sizes");
  }
  if (epochs < 1 || batch < 1 || !(learning_rate > 0)) {
    throw std::invalid_argument("DiffusionConfig: bad training settings");
  }
}

namespace {

std::vector<double> time_embedding(int t, int dim) {
  std::vector<double> e(dim);
  for (int k = 0; k < dim / 2; ++k) {
    double freq = std::pow(10000.0, -2.0 * k / dim);
    e[2 * k] = std::sin(t * freq);
    e[2 * k + 1] = std::cos(t * freq);
  }
  return e;
}

std::vector<int> eps_net_sizes(const DiffusionModel& m) {
  return {m.d_latent + m.n_labels + m.cfg.time_embed_dim, m.cfg.hidden, m.cfg.hidden, m.d_latent};
}

Tensor eps_net_input(const DiffusionModel& m, std::span<const double> z_t, int label, int t) {
  if (t < 1 || t > m.cfg.T) throw std::invalid_argument("diffusion: t outside [1, T]");
  if (label < 0 || label >= m.n_labels) throw std::invalid_argument("label outside trained set");
  std::vector<double> in;
  in.reserve(m.d_latent + m.n_labels + m.cfg.time_embed_dim);
  in.insert(in.end(), z_t.begin(), z_t.end());
  for (int l = 0; l < m.n_labels; ++l) in.push_back(l == label ? 1.0 : 0.0);
  auto emb = time_embedding(t, m.cfg.time_embed_dim);
  in.insert(in.end(), emb.begin(), emb.end());
  const int width = static_cast<int>(in.size());
  return Tensor::from_data(std::move(in), {1, width});
}

}  // namespace

DiffusionModel make_diffusion(int d_latent, int n_labels, const DiffusionConfig& cfg) {
  cfg.validate();
  if (d_latent < 1 || n_labels < 1) {
    throw std::invalid_argument("make_diffusion: d_latent and n_labels must be >= 1");
  }
  DiffusionModel m;
  m.cfg = cfg;
  m.d_latent = d_latent;
  m.n_labels = n_labels;
  m.alphas.resize(cfg.T);
  m.alpha_bars.resize(cfg.T);
  double bar = 1.0;
  for (int t = 0; t < cfg.T; ++t) {
    double beta = cfg.T == 1 ? cfg.beta_start
                             : cfg.beta_start + (cfg.beta_end - cfg.beta_start) * t / (cfg.T - 1);
    m.alphas[t] = 1.0 - beta;
    bar *= m.alphas[t];
    m.alpha_bars[t] = bar;
  }
  Rng rng(Rng::derive(cfg.seed, 0xd1f0));
  init_mlp(m.params, "eps", eps_net_sizes(m), rng);
  return m;
}

std::vector<double> forward_noise(const DiffusionModel& model, std::span<const double> z0, int t,
                                  std::span<const double> eps) {
  if (t < 1 || t > model.cfg.T) throw std::invalid_argument("forward_noise: t outside [1, T]");
  if (z0.size() != eps.size()) throw std::invalid_argument("forward_noise: shape mismatch");
  double abar = model.alpha_bars[t - 1];
  double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
  std::vector<double> out(z0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

std::vector<double> predict_noise(const DiffusionModel& model, std::span<const double> z_t,
                                  int label, int t) {
  if (static_cast<int>(z_t.size()) != model.d_latent) {
    throw std::invalid_argument("predict_noise: latent size mismatch");
  }
  Tensor out = mlp(eps_net_input(model, z_t, label, t), model.params, "eps",
                   eps_net_sizes(model));
  return std::vector<double>(out.data().begin(), out.data().end());
}

DiffusionModel train_diffusion(const std::vector<LatentRecord>& latents, int n_labels,
                               const DiffusionConfig& cfg, TrainReport* report) {
  cfg.validate();
  if (latents.empty()) throw std::invalid_argument("train_diffusion: empty latent set");
  const int d = static_cast<int>(latents[0].z.size());
  for (const auto& rec : latents) {
    if (static_cast<int>(rec.z.size()) != d) {
      throw std::invalid_argument("train_diffusion: ragged latents");
    }
    if (rec.label < 0 || rec.label >= n_labels) {
      throw std::invalid_argument("train_diffusion: unlabeled latent record");
    }
  }

  DiffusionModel model = make_diffusion(d, n_labels, cfg);
  auto sizes = eps_net_sizes(model);
  Rng rng(Rng::derive(cfg.seed, 0xd1f1));
  AdamState adam;
  std::vector<std::size_t> order(latents.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::size_t stop = std::min(order.size(), start + cfg.batch);
      model.params.zero_grads();
      Tensor total;
      for (std::size_t idx = start; idx < stop; ++idx) {
        const LatentRecord& rec = latents[order[idx]];
        int t = 1 + static_cast<int>(rng.below(cfg.T));
        std::vector<double> eps_draw(d);
        for (double& e : eps_draw) e = rng.normal();
        std::vector<double> z_t = forward_noise(model, rec.z, t, eps_draw);
        Tensor pred = mlp(eps_net_input(model, z_t, rec.label, t), model.params, "eps", sizes);
        Tensor target = constant_row(eps_draw);
        Tensor diff = sub(pred, target);
        Tensor loss = sum(mul(diff, diff));  // summed over latent dims
        total = total.defined() ? add(total, loss) : loss;
      }
      Tensor batch_loss = scale(total, 1.0 / static_cast<double>(stop - start));
      double loss_val = batch_loss.item();
      if (!std::isfinite(loss_val)) {
        throw std::runtime_error("train_diffusion: loss diverged at epoch " +
                                 std::to_string(epoch));
      }
      batch_loss.backward();
      adam_step(model.params, adam, cfg.learning_rate);
      epoch_loss += loss_val;
      ++batches;
    }
    if (report) {
      report->loss_history.push_back(epoch_loss / batches);
      report->final_loss = epoch_loss / batches;
    }
  }
  return model;
}

std::vector<std::vector<double>> sample_diffusion(const DiffusionModel& model, int label,
                                                  int n_samples, std::uint64_t seed) {
  if (n_samples < 0) throw std::invalid_argument("sample_diffusion: negative sample count");
  Rng rng(Rng::derive(seed, 0x5a3f));
  std::vector<std::vector<double>> out;
  out.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    std::vector<double> z(model.d_latent);
    for (double& v : z) v = rng.normal();
    for (int t = model.cfg.T; t >= 1; --t) {
      std::vector<double> eps_hat = predict_noise(model, z, label, t);
      double alpha = model.alphas[t - 1];
      double abar = model.alpha_bars[t - 1];
      double beta = 1.0 - alpha;
      double coef = beta / std::sqrt(1.0 - abar);
      double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
      for (int i = 0; i < model.d_latent; ++i) {
        z[i] = inv_sqrt_alpha * (z[i] - coef * eps_hat[i]);
      }
      if (t > 1) {
        double sigma = std::sqrt(beta);
        for (double& v : z) v += sigma * rng.normal();
      }
    }
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace qpl
