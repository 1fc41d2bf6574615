#include "qpl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "qpl/rng.hpp"

namespace qpl {

namespace {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape entries must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

NodePtr make_node(std::vector<int> shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(shape_size(n->shape), 0.0);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->value.size(), 0.0);
  return n;
}

NodePtr result_node(std::vector<int> shape, std::vector<NodePtr> parents) {
  bool rg = false;
  for (const NodePtr& p : parents) rg = rg || p->requires_grad;
  NodePtr n = make_node(std::move(shape), rg);
  n->parents = std::move(parents);
  return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::from_data(std::vector<double> data, std::vector<int> shape, bool requires_grad) {
  NodePtr n = make_node(std::move(shape), requires_grad);
  if (data.size() != n->value.size()) {
    throw std::invalid_argument("from_data: data length does not match shape");
  }
  n->value = std::move(data);
  return Tensor(n);
}

Tensor Tensor::scalar(double v) { return from_data({v}, {1}); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor is not scalar");
  return node_->value[0];
}

void Tensor::backward() const {
  if (size() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!node_->requires_grad) return;

  // Post-order DFS, then walk in reverse.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* what, Fwd fwd, Bwd bwd) {
  check_same_shape(a, b, what);
  NodePtr out = result_node(a.shape(), {a.node(), b.node()});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = fwd(pa[i], pb[i]);
  if (out->requires_grad) {
    out->backward_fn = [bwd](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      TensorNode& b = *n.parents[1];
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        auto [da, db] = bwd(a.value[i], b.value[i], n.grad[i]);
        if (a.requires_grad) a.grad[i] += da;
        if (b.requires_grad) b.grad[i] += db;
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return std::pair{g, g}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return std::pair{g, -g}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g) { return std::pair{g * y, g * x}; });
}

Tensor scale(const Tensor& a, double c) {
  NodePtr out = result_node(a.shape(), {a.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = c * a.data()[i];
  if (out->requires_grad) {
    out->backward_fn = [c](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += c * n.grad[i];
    };
  }
  return Tensor(out);
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (x.shape().size() != 2 || b.shape().size() != 1 || x.dim(1) != b.dim(0)) {
    throw std::invalid_argument("add_bias: expected [rows, c] + [c]");
  }
  NodePtr out = result_node(x.shape(), {x.node(), b.node()});
  const int rows = x.dim(0), cols = x.dim(1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out->value[r * cols + c] = x.data()[r * cols + c] + b.data()[c];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [rows, cols](TensorNode& n) {
      TensorNode& x = *n.parents[0];
      TensorNode& b = *n.parents[1];
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          double g = n.grad[r * cols + c];
          if (x.requires_grad) x.grad[r * cols + c] += g;
          if (b.requires_grad) b.grad[c] += g;
        }
      }
    };
  }
  return Tensor(out);
}

Tensor exp(const Tensor& a) {
  NodePtr out = result_node(a.shape(), {a.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = std::exp(a.data()[i]);
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.value[i] * n.grad[i];
    };
  }
  return Tensor(out);
}

Tensor gelu(const Tensor& a) {
  NodePtr out = result_node(a.shape(), {a.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) {
    double x = a.data()[i];
    out->value[i] = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
  }
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        double x = a.value[i];
        double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        a.grad[i] += (cdf + x * pdf) * n.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a.size()) throw std::invalid_argument("reshape: size mismatch");
  NodePtr out = result_node(std::move(shape), {a.node()});
  out->value = std::vector<double>(a.data().begin(), a.data().end());
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i];
    };
  }
  return Tensor(out);
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
  if (a.shape().size() != 2) throw std::invalid_argument("slice_cols: 2-D tensor required");
  if (begin < 0 || end > a.dim(1) || begin >= end) {
    throw std::invalid_argument("slice_cols: bad column range");
  }
  const int rows = a.dim(0), cols = a.dim(1), width = end - begin;
  NodePtr out = result_node({rows, width}, {a.node()});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < width; ++c) {
      out->value[r * width + c] = a.data()[r * cols + begin + c];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [rows, cols, width, begin](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < width; ++c) {
          a.grad[r * cols + begin + c] += n.grad[r * width + c];
        }
      }
    };
  }
  return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const int rows = parts[0].dim(0);
  int cols = 0;
  std::vector<NodePtr> parents;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 2 || p.dim(0) != rows) {
      throw std::invalid_argument("concat_cols: row mismatch");
    }
    cols += p.dim(1);
    parents.push_back(p.node());
  }
  NodePtr out = result_node({rows, cols}, std::move(parents));
  int offset = 0;
  for (const Tensor& p : parts) {
    const int w = p.dim(1);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < w; ++c) out->value[r * cols + offset + c] = p.data()[r * w + c];
    }
    offset += w;
  }
  if (out->requires_grad) {
    out->backward_fn = [rows, cols](TensorNode& n) {
      int offset = 0;
      for (const NodePtr& pp : n.parents) {
        TensorNode& p = *pp;
        const int w = p.shape[1];
        if (p.requires_grad) {
          for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < w; ++c) p.grad[r * w + c] += n.grad[r * cols + offset + c];
          }
        }
        offset += w;
      }
    };
  }
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("transpose: 2-D tensor required");
  const int rows = a.dim(0), cols = a.dim(1);
  NodePtr out = result_node({cols, rows}, {a.node()});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out->value[c * rows + r] = a.data()[r * cols + c];
  }
  if (out->requires_grad) {
    out->backward_fn = [rows, cols](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) a.grad[r * cols + c] += n.grad[c * rows + r];
      }
    };
  }
  return Tensor(out);
}

// ---- matmul ----------------------------------------------------------------

namespace {

// C[m,n] += A[m,k] * B[k,n], row-major, ikj order so the inner loop streams.
void mm_accum(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + std::size_t(i) * k;
    double* crow = c + std::size_t(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b + std::size_t(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += A[m,n] * B^T where B is [k,n] (i.e. A times B-transpose).
void mm_accum_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + std::size_t(i) * n;
    double* crow = c + std::size_t(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double* brow = b + std::size_t(kk) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[kk] += acc;
    }
  }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n].
void mm_accum_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + std::size_t(i) * k;
    const double* brow = b + std::size_t(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      double* crow = c + std::size_t(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes");
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  NodePtr out = result_node({m, n}, {a.node(), b.node()});
  mm_accum(a.data().data(), b.data().data(), out->value.data(), m, k, n);
  if (out->requires_grad) {
    out->backward_fn = [m, k, n](TensorNode& node) {
      TensorNode& a = *node.parents[0];
      TensorNode& b = *node.parents[1];
      if (a.requires_grad) {
        mm_accum_nt(node.grad.data(), b.value.data(), a.grad.data(), m, n, k);
      }
      if (b.requires_grad) {
        mm_accum_tn(a.value.data(), node.grad.data(), b.grad.data(), m, k, n);
      }
    };
  }
  return Tensor(out);
}

// ---- convolutions ----------------------------------------------------------

namespace {

void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b, const char* what) {
  if (x.shape().size() != 2 || w.shape().size() != 3 || b.shape().size() != 1) {
    throw std::invalid_argument(std::string(what) + ": expected x[len,cin] w[k,cin,cout] b[cout]");
  }
  if (w.dim(0) % 2 == 0) throw std::invalid_argument(std::string(what) + ": kernel must be odd");
  if (w.dim(1) != x.dim(1) || w.dim(2) != b.dim(0)) {
    throw std::invalid_argument(std::string(what) + ": channel mismatch");
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_conv_args(x, w, b, "conv1d");
  const int len = x.dim(0), cin = x.dim(1), k = w.dim(0), cout = w.dim(2);
  const int c = k / 2;
  NodePtr out = result_node({len, cout}, {x.node(), w.node(), b.node()});
  for (int t = 0; t < len; ++t) {
    double* orow = out->value.data() + std::size_t(t) * cout;
    for (int j = 0; j < cout; ++j) orow[j] = b.data()[j];
    for (int dk = 0; dk < k; ++dk) {
      int s = t + dk - c;
      if (s < 0 || s >= len) continue;
      const double* xrow = x.data().data() + std::size_t(s) * cin;
      const double* wk = w.data().data() + std::size_t(dk) * cin * cout;
      for (int ci = 0; ci < cin; ++ci) {
        double xv = xrow[ci];
        const double* wrow = wk + std::size_t(ci) * cout;
        for (int j = 0; j < cout; ++j) orow[j] += xv * wrow[j];
      }
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [len, cin, k, cout, c](TensorNode& n) {
      TensorNode& x = *n.parents[0];
      TensorNode& w = *n.parents[1];
      TensorNode& b = *n.parents[2];
      for (int t = 0; t < len; ++t) {
        const double* grow = n.grad.data() + std::size_t(t) * cout;
        if (b.requires_grad) {
          for (int j = 0; j < cout; ++j) b.grad[j] += grow[j];
        }
        for (int dk = 0; dk < k; ++dk) {
          int s = t + dk - c;
          if (s < 0 || s >= len) continue;
          const double* wk = w.value.data() + std::size_t(dk) * cin * cout;
          double* wgk = w.requires_grad ? w.grad.data() + std::size_t(dk) * cin * cout : nullptr;
          const double* xrow = x.value.data() + std::size_t(s) * cin;
          double* xgrow = x.requires_grad ? x.grad.data() + std::size_t(s) * cin : nullptr;
          for (int ci = 0; ci < cin; ++ci) {
            const double* wrow = wk + std::size_t(ci) * cout;
            if (xgrow) {
              double acc = 0.0;
              for (int j = 0; j < cout; ++j) acc += wrow[j] * grow[j];
              xgrow[ci] += acc;
            }
            if (wgk) {
              double xv = xrow[ci];
              double* wgrow = wgk + std::size_t(ci) * cout;
              for (int j = 0; j < cout; ++j) wgrow[j] += xv * grow[j];
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor conv1d_transposed(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_conv_args(x, w, b, "conv1d_transposed");
  const int len = x.dim(0), cin = x.dim(1), k = w.dim(0), cout = w.dim(2);
  const int c = k / 2;
  NodePtr out = result_node({len, cout}, {x.node(), w.node(), b.node()});
  for (int t = 0; t < len; ++t) {
    double* orow = out->value.data() + std::size_t(t) * cout;
    for (int j = 0; j < cout; ++j) orow[j] = b.data()[j];
    for (int dk = 0; dk < k; ++dk) {
      int s = t + c - dk;  // flipped taps relative to conv1d
      if (s < 0 || s >= len) continue;
      const double* xrow = x.data().data() + std::size_t(s) * cin;
      const double* wk = w.data().data() + std::size_t(dk) * cin * cout;
      for (int ci = 0; ci < cin; ++ci) {
        double xv = xrow[ci];
        const double* wrow = wk + std::size_t(ci) * cout;
        for (int j = 0; j < cout; ++j) orow[j] += xv * wrow[j];
      }
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [len, cin, k, cout, c](TensorNode& n) {
      TensorNode& x = *n.parents[0];
      TensorNode& w = *n.parents[1];
      TensorNode& b = *n.parents[2];
      for (int t = 0; t < len; ++t) {
        const double* grow = n.grad.data() + std::size_t(t) * cout;
        if (b.requires_grad) {
          for (int j = 0; j < cout; ++j) b.grad[j] += grow[j];
        }
        for (int dk = 0; dk < k; ++dk) {
          int s = t + c - dk;
          if (s < 0 || s >= len) continue;
          const double* wk = w.value.data() + std::size_t(dk) * cin * cout;
          double* wgk = w.requires_grad ? w.grad.data() + std::size_t(dk) * cin * cout : nullptr;
          const double* xrow = x.value.data() + std::size_t(s) * cin;
          double* xgrow = x.requires_grad ? x.grad.data() + std::size_t(s) * cin : nullptr;
          for (int ci = 0; ci < cin; ++ci) {
            const double* wrow = wk + std::size_t(ci) * cout;
            if (xgrow) {
              double acc = 0.0;
              for (int j = 0; j < cout; ++j) acc += wrow[j] * grow[j];
              xgrow[ci] += acc;
            }
            if (wgk) {
              double xv = xrow[ci];
              double* wgrow = wgk + std::size_t(ci) * cout;
              for (int j = 0; j < cout; ++j) wgrow[j] += xv * grow[j];
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- normalization / softmax -----------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("softmax_rows: 2-D tensor required");
  const int rows = a.dim(0), cols = a.dim(1);
  NodePtr out = result_node(a.shape(), {a.node()});
  for (int r = 0; r < rows; ++r) {
    const double* in = a.data().data() + std::size_t(r) * cols;
    double* o = out->value.data() + std::size_t(r) * cols;
    double mx = in[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (int c = 0; c < cols; ++c) o[c] /= z;
  }
  if (out->requires_grad) {
    out->backward_fn = [rows, cols](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (int r = 0; r < rows; ++r) {
        const double* y = n.value.data() + std::size_t(r) * cols;
        const double* gy = n.grad.data() + std::size_t(r) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += gy[c] * y[c];
        double* ga = a.grad.data() + std::size_t(r) * cols;
        for (int c = 0; c < cols; ++c) ga[c] += y[c] * (gy[c] - dot);
      }
    };
  }
  return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.shape().size() != 2 || gain.shape().size() != 1 || bias.shape().size() != 1 ||
      gain.dim(0) != x.dim(1) || bias.dim(0) != x.dim(1)) {
    throw std::invalid_argument("layer_norm: expected x[rows,c], gain[c], bias[c]");
  }
  constexpr double eps = 1e-5;
  const int rows = x.dim(0), cols = x.dim(1);
  NodePtr out = result_node(x.shape(), {x.node(), gain.node(), bias.node()});
  for (int r = 0; r < rows; ++r) {
    const double* in = x.data().data() + std::size_t(r) * cols;
    double* o = out->value.data() + std::size_t(r) * cols;
    double m = 0.0;
    for (int c = 0; c < cols; ++c) m += in[c];
    m /= cols;
    double v = 0.0;
    for (int c = 0; c < cols; ++c) v += (in[c] - m) * (in[c] - m);
    v /= cols;
    double inv = 1.0 / std::sqrt(v + eps);
    for (int c = 0; c < cols; ++c) {
      o[c] = (in[c] - m) * inv * gain.data()[c] + bias.data()[c];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [rows, cols](TensorNode& n) {
      TensorNode& x = *n.parents[0];
      TensorNode& g = *n.parents[1];
      TensorNode& b = *n.parents[2];
      for (int r = 0; r < rows; ++r) {
        const double* in = x.value.data() + std::size_t(r) * cols;
        const double* gy = n.grad.data() + std::size_t(r) * cols;
        double m = 0.0;
        for (int c = 0; c < cols; ++c) m += in[c];
        m /= cols;
        double v = 0.0;
        for (int c = 0; c < cols; ++c) v += (in[c] - m) * (in[c] - m);
        v /= cols;
        double inv = 1.0 / std::sqrt(v + eps);

        // dye = gy * gain (gradient at the normalized value)
        double sum_dye = 0.0, sum_dye_xhat = 0.0;
        for (int c = 0; c < cols; ++c) {
          double xhat = (in[c] - m) * inv;
          double dye = gy[c] * g.value[c];
          sum_dye += dye;
          sum_dye_xhat += dye * xhat;
          if (g.requires_grad) g.grad[c] += gy[c] * xhat;
          if (b.requires_grad) b.grad[c] += gy[c];
        }
        if (x.requires_grad) {
          double* gx = x.grad.data() + std::size_t(r) * cols;
          for (int c = 0; c < cols; ++c) {
            double xhat = (in[c] - m) * inv;
            double dye = gy[c] * g.value[c];
            gx[c] += inv * (dye - sum_dye / cols - xhat * sum_dye_xhat / cols);
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- losses / reductions ---------------------------------------------------

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse_loss");
  NodePtr out = result_node({1}, {pred.node(), target.node()});
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = pred.data()[i] - target.data()[i];
    acc += d * d;
  }
  out->value[0] = acc / static_cast<double>(n);
  if (out->requires_grad) {
    out->backward_fn = [n](TensorNode& node) {
      TensorNode& p = *node.parents[0];
      TensorNode& t = *node.parents[1];
      double g = 2.0 * node.grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        double d = p.value[i] - t.value[i];
        if (p.requires_grad) p.grad[i] += g * d;
        if (t.requires_grad) t.grad[i] -= g * d;
      }
    };
  }
  return Tensor(out);
}

Tensor kl_gauss(const Tensor& mu, const Tensor& logvar) {
  check_same_shape(mu, logvar, "kl_gauss");
  NodePtr out = result_node({1}, {mu.node(), logvar.node()});
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double m = mu.data()[i], lv = logvar.data()[i];
    acc += m * m + std::exp(lv) - lv - 1.0;
  }
  out->value[0] = 0.5 * acc;
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& node) {
      TensorNode& mu = *node.parents[0];
      TensorNode& lv = *node.parents[1];
      double g = node.grad[0];
      for (std::size_t i = 0; i < mu.value.size(); ++i) {
        if (mu.requires_grad) mu.grad[i] += g * mu.value[i];
        if (lv.requires_grad) lv.grad[i] += g * 0.5 * (std::exp(lv.value[i]) - 1.0);
      }
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  NodePtr out = result_node({1}, {a.node()});
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  out->value[0] = acc;
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& n) {
      TensorNode& a = *n.parents[0];
      for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += n.grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

// ---- parameter containers --------------------------------------------------

Tensor& LayerParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("LayerParams: missing tensor " + name);
  return it->second;
}

const Tensor& LayerParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("LayerParams: missing tensor " + name);
  return it->second;
}

void LayerParams::add(const std::string& name, Tensor t) {
  if (!t.requires_grad()) throw std::invalid_argument("LayerParams: tensors must require grad");
  if (!tensors.emplace(name, std::move(t)).second) {
    throw std::invalid_argument("LayerParams: duplicate tensor " + name);
  }
}

void LayerParams::zero_grads() {
  for (auto& [name, t] : tensors) t.zero_grad();
}

std::size_t LayerParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

void adam_step(LayerParams& params, AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  state.step += 1;
  const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto& [name, t] : params.tensors) {
    auto& slot = state.slots[name];
    if (slot.m.size() != t.size()) {
      slot.m.assign(t.size(), 0.0);
      slot.v.assign(t.size(), 0.0);
    }
    auto g = t.grad();
    if (g.empty()) throw std::runtime_error("adam_step: missing gradient for " + name);
    auto val = t.data();
    for (std::size_t i = 0; i < val.size(); ++i) {
      slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g[i];
      slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g[i] * g[i];
      val[i] -= lr * (slot.m[i] / corr1) / (std::sqrt(slot.v[i] / corr2) + eps);
    }
  }
}

// ---- MLP / attention helpers -------------------------------------------------

void init_mlp(LayerParams& params, const std::string& prefix, const std::vector<int>& sizes,
              Rng& rng) {
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    int fan_in = sizes[l], fan_out = sizes[l + 1];
    double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out}, true);
    for (double& v : w.data()) v = std_dev * rng.normal();
    params.add(prefix + ".w" + std::to_string(l), w);
    params.add(prefix + ".b" + std::to_string(l), Tensor::zeros({fan_out}, true));
  }
}

Tensor mlp(const Tensor& x, const LayerParams& params, const std::string& prefix,
           const std::vector<int>& sizes) {
  Tensor h = x;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Tensor& w = params.at(prefix + ".w" + std::to_string(l));
    const Tensor& b = params.at(prefix + ".b" + std::to_string(l));
    h = add_bias(matmul(h, w), b);
    if (l + 2 < sizes.size()) h = gelu(h);
  }
  return h;
}

Tensor attention(const Tensor& x, const LayerParams& params, const std::string& prefix,
                 int heads) {
  if (x.shape().size() != 2) throw std::invalid_argument("attention: 2-D input required");
  const int d_model = x.dim(1);
  if (heads < 1 || d_model % heads != 0) {
    throw std::invalid_argument("attention: d_model must be divisible by heads");
  }
  const int d_k = d_model / heads;
  Tensor q = matmul(x, params.at(prefix + ".wq"));
  Tensor k = matmul(x, params.at(prefix + ".wk"));
  Tensor v = matmul(x, params.at(prefix + ".wv"));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * d_k, (h + 1) * d_k);
    Tensor kh = slice_cols(k, h * d_k, (h + 1) * d_k);
    Tensor vh = slice_cols(v, h * d_k, (h + 1) * d_k);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
    outs.push_back(matmul(softmax_rows(scores), vh));
  }
  return matmul(concat_cols(outs), params.at(prefix + ".wo"));
}

Tensor resnet_block(const Tensor& x, const LayerParams& params, const std::string& prefix) {
  Tensor h = conv1d(x, params.at(prefix + ".w1"), params.at(prefix + ".b1"));
  h = gelu(h);
  h = conv1d(h, params.at(prefix + ".w2"), params.at(prefix + ".b2"));
  return add(x, h);
}

}  // namespace qpl
