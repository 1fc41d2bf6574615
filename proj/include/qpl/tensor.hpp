#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace qpl {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  // Reads this->grad and accumulates into parents' grad buffers.
  std::function<void(TensorNode&)> backward_fn;
};

// Dense row-major double tensor participating in a reverse-mode tape. Value
// semantics: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from_data(std::vector<double> data, std::vector<int> shape,
                          bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[i]; }
  std::size_t size() const { return node_->value.size(); }
  std::span<double> data() { return node_->value; }
  std::span<const double> data() const { return node_->value; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  // Reverse pass from this (scalar) node; accumulates into grad buffers.
  void backward() const;

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// ---- elementwise / structural ops -----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);        // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_bias(const Tensor& x, const Tensor& b);   // [rows, c] + [c]
Tensor exp(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor slice_cols(const Tensor& a, int begin, int end); // 2-D column range
Tensor concat_cols(const std::vector<Tensor>& parts);   // 2-D column concat
Tensor transpose(const Tensor& a);                      // 2-D

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]

// ---- neural layers ---------------------------------------------------------

// x: [len, ch_in], w: [kernel, ch_in, ch_out], b: [ch_out]; stride 1,
// same padding, odd kernel. Cross-correlation plus bias.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);

// Adjoint of conv1d with respect to its input (kernel roles swapped);
// preserves length, so conv1d_transposed(conv1d(x)) is shape-stable.
// x: [len, ch_in], w: [kernel, ch_in, ch_out], b: [ch_out].
Tensor conv1d_transposed(const Tensor& x, const Tensor& w, const Tensor& b);

// Row-wise softmax over the last dimension of a 2-D tensor.
Tensor softmax_rows(const Tensor& a);

// Per-row normalization over channels: (x - mean) / sqrt(var + eps) * g + b.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Mean of squared elementwise differences.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// 0.5 * sum(mu^2 + exp(logvar) - logvar - 1), the closed-form KL of a
// diagonal Gaussian against the standard normal.
Tensor kl_gauss(const Tensor& mu, const Tensor& logvar);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- parameter containers --------------------------------------------------

// Named trainable tensors; ordered map keeps every iteration deterministic.
struct LayerParams {
  std::map<std::string, Tensor> tensors;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return tensors.count(name) > 0; }
  void zero_grads();
  std::size_t parameter_count() const;
};

struct AdamState {
  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Moments> slots;
  long step = 0;
};

// Standard Adam update over every tensor in `params`, reading accumulated
// gradients. Gradients must have been populated by backward().
void adam_step(LayerParams& params, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// ---- MLP helpers -----------------------------------------------------------

class Rng;

// Xavier-normal initialized affine stack params named <prefix>.w0/.b0, ...
void init_mlp(LayerParams& params, const std::string& prefix, const std::vector<int>& sizes,
              Rng& rng);

// x: [1, sizes.front()] -> [1, sizes.back()]; GELU between layers, linear
// output. Zero-depth (sizes.size() < 2) is the identity.
Tensor mlp(const Tensor& x, const LayerParams& params, const std::string& prefix,
           const std::vector<int>& sizes);

// Multi-head self-attention per the standard scaled-dot-product definition.
// x: [len, d_model]; params <prefix>.wq/.wk/.wv/.wo, each [d_model, d_model].
Tensor attention(const Tensor& x, const LayerParams& params, const std::string& prefix,
                 int heads);

// x + conv(gelu(conv(x))), channels preserved; params <prefix>.w1/b1/w2/b2.
Tensor resnet_block(const Tensor& x, const LayerParams& params, const std::string& prefix);

}  // namespace qpl
