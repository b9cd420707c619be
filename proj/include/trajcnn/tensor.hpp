#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajcnn/kernels.hpp"

namespace trajcnn {

/// Dense row-major tensor with an optional gradient accumulator.
///
/// The scalar type is a template parameter: float is the working precision
/// for training and inference, double is used for gradient verification.
template <typename S>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<S> data;
  std::vector<S> grad;  // empty unless requires_grad
  bool requires_grad = false;

  Tensor() = default;

  Tensor(std::vector<std::size_t> shape_in, bool needs_grad)
      : shape(std::move(shape_in)), requires_grad(needs_grad) {
    data.assign(count(shape), S(0));
    if (requires_grad) grad.assign(data.size(), S(0));
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) {
      if (e == 0) throw std::invalid_argument("tensor: zero extent in shape");
      n *= e;
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  S& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const S& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }

  void zero_grad() {
    for (S& g : grad) g = S(0);
  }
};

template <typename S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

template <typename S>
TensorPtr<S> make_tensor(std::vector<std::size_t> shape, bool requires_grad = false) {
  return std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
}

template <typename S>
TensorPtr<S> make_tensor(std::vector<std::size_t> shape, std::vector<S> values,
                         bool requires_grad = false) {
  auto t = std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
  if (values.size() != t->numel()) {
    throw std::invalid_argument("tensor: value count does not match shape");
  }
  t->data = std::move(values);
  return t;
}

template <typename S>
TensorPtr<S> make_tensor(std::vector<std::size_t> shape, std::initializer_list<S> values,
                         bool requires_grad = false) {
  return make_tensor<S>(std::move(shape), std::vector<S>(values), requires_grad);
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

/// Ordered record of executed operations.
///
/// Every op appends one node in execution order; backward() replays the
/// nodes in exact reverse order, which is a valid topological order for any
/// DAG recorded this way. Gradients accumulate into requires_grad tensors,
/// so repeated backward calls without zeroing add up (used for minibatch
/// accumulation). Saved inputs are captured by shared ownership: do not
/// mutate parameter values between recording and backward.
template <typename S>
class Tape {
 public:
  void record(const char* op, std::vector<TensorPtr<S>> inputs, TensorPtr<S> output,
              std::function<void()> backward) {
    nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
  }

  /// Propagates seed through the recorded graph in reverse execution order.
  /// Gradients of op outputs are reset first, so each call contributes
  /// exactly one flow and repeated calls accumulate additively into leaf
  /// tensors (parameters and inputs).
  void backward(const TensorPtr<S>& loss, S seed = S(1)) {
    if (!loss) throw std::invalid_argument("backward: null loss tensor");
    if (loss->numel() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(loss->shape));
    }
    for (const auto& node : nodes_) node.output->zero_grad();
    loss->ensure_grad();
    loss->grad[0] += seed;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->backward) it->backward();
    }
  }

  std::size_t num_ops() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::vector<TensorPtr<S>> inputs;
    TensorPtr<S> output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

namespace detail {

template <typename S>
bool any_requires_grad(const std::vector<TensorPtr<S>>& ts) {
  for (const auto& t : ts) {
    if (t && t->requires_grad) return true;
  }
  return false;
}

// Marks the output differentiable and records the node when any input needs
// gradients; constant subgraphs record nothing.
template <typename S>
void finish_op(Tape<S>& tape, const char* name, std::vector<TensorPtr<S>> inputs,
               const TensorPtr<S>& out, std::function<void()> backward) {
  if (!any_requires_grad(inputs)) return;
  out->requires_grad = true;
  out->ensure_grad();
  for (auto& in : inputs) {
    if (in->requires_grad) in->ensure_grad();
  }
  tape.record(name, std::move(inputs), out, std::move(backward));
}

}  // namespace detail

/// out = x * w + bias, rows of x treated as independent inputs.
template <typename S>
TensorPtr<S> linear(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& w,
                    const TensorPtr<S>& bias) {
  if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[0]) {
    throw std::invalid_argument("linear: dimension mismatch between input " +
                                shape_str(x->shape) + " and weight " + shape_str(w->shape));
  }
  if (bias->numel() != w->shape[1]) {
    throw std::invalid_argument("linear: bias " + shape_str(bias->shape) +
                                " does not match weight " + shape_str(w->shape));
  }
  const std::size_t rows = x->shape[0], din = x->shape[1], dout = w->shape[1];
  auto out = make_tensor<S>({rows, dout});
  kernels::linear_forward(x->data.data(), w->data.data(), bias->data.data(),
                          out->data.data(), rows, din, dout);
  detail::finish_op<S>(tape, "linear", {x, w, bias}, out, [=]() {
    const S* go = out->grad.data();
    if (x->requires_grad) {
      kernels::linear_backward_input(go, w->data.data(), x->grad.data(), rows, din, dout);
    }
    if (w->requires_grad) {
      kernels::linear_backward_weight(go, x->data.data(), w->grad.data(), rows, din, dout);
    }
    if (bias->requires_grad) {
      kernels::linear_backward_bias(go, bias->grad.data(), rows, dout);
    }
  });
  return out;
}

/// Temporal convolution with zero padding on both ends; kernel windows are
/// full (non-causal) and centered when pad = (ksize-1)/2.
template <typename S>
TensorPtr<S> conv1d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& kernel,
                    const TensorPtr<S>& bias, std::size_t pad) {
  if (x->shape.size() != 2 || kernel->shape.size() != 3 || x->shape[1] != kernel->shape[1]) {
    throw std::invalid_argument("conv1d: input " + shape_str(x->shape) +
                                " incompatible with kernel " + shape_str(kernel->shape));
  }
  const std::size_t t_in = x->shape[0], cin = x->shape[1];
  const std::size_t ksize = kernel->shape[0], cout = kernel->shape[2];
  if (ksize % 2 == 0) {
    throw std::invalid_argument("conv1d: kernel size must be odd, got " +
                                std::to_string(ksize));
  }
  if (bias->numel() != cout) {
    throw std::invalid_argument("conv1d: bias " + shape_str(bias->shape) +
                                " does not match kernel " + shape_str(kernel->shape));
  }
  if (ksize > t_in + 2 * pad) {
    throw std::invalid_argument("conv1d: kernel size " + std::to_string(ksize) +
                                " exceeds padded input length " +
                                std::to_string(t_in + 2 * pad) + " (empty output)");
  }
  const std::size_t t_out = t_in + 2 * pad - ksize + 1;
  auto out = make_tensor<S>({t_out, cout});
  kernels::conv1d_forward(x->data.data(), kernel->data.data(), bias->data.data(),
                          out->data.data(), t_in, cin, cout, ksize, pad);
  detail::finish_op<S>(tape, "conv1d", {x, kernel, bias}, out, [=]() {
    const S* go = out->grad.data();
    if (x->requires_grad) {
      kernels::conv1d_backward_input(go, kernel->data.data(), x->grad.data(), t_in, cin,
                                     cout, ksize, pad);
    }
    if (kernel->requires_grad) {
      kernels::conv1d_backward_kernel(go, x->data.data(), kernel->grad.data(), t_in, cin,
                                      cout, ksize, pad);
    }
    if (bias->requires_grad) {
      kernels::conv1d_backward_bias(go, bias->grad.data(), t_out, cout);
    }
  });
  return out;
}

template <typename S>
TensorPtr<S> relu(Tape<S>& tape, const TensorPtr<S>& x) {
  auto out = make_tensor<S>(x->shape);
  kernels::relu_forward(x->data.data(), out->data.data(), x->numel());
  detail::finish_op<S>(tape, "relu", {x}, out, [=]() {
    if (x->requires_grad) {
      kernels::relu_backward(x->data.data(), out->grad.data(), x->grad.data(), x->numel());
    }
  });
  return out;
}

template <typename S>
TensorPtr<S> sigmoid(Tape<S>& tape, const TensorPtr<S>& x) {
  auto out = make_tensor<S>(x->shape);
  kernels::sigmoid_forward(x->data.data(), out->data.data(), x->numel());
  detail::finish_op<S>(tape, "sigmoid", {x}, out, [=]() {
    if (x->requires_grad) {
      kernels::sigmoid_backward(out->data.data(), out->grad.data(), x->grad.data(),
                                x->numel());
    }
  });
  return out;
}

template <typename S>
TensorPtr<S> tanh(Tape<S>& tape, const TensorPtr<S>& x) {
  auto out = make_tensor<S>(x->shape);
  kernels::tanh_forward(x->data.data(), out->data.data(), x->numel());
  detail::finish_op<S>(tape, "tanh", {x}, out, [=]() {
    if (x->requires_grad) {
      kernels::tanh_backward(out->data.data(), out->grad.data(), x->grad.data(),
                             x->numel());
    }
  });
  return out;
}

/// Mean over all elements of the squared difference.
template <typename S>
TensorPtr<S> mse_loss(Tape<S>& tape, const TensorPtr<S>& pred, const TensorPtr<S>& target) {
  if (pred->shape != target->shape) {
    throw std::invalid_argument("mse_loss: shape mismatch between prediction " +
                                shape_str(pred->shape) + " and target " +
                                shape_str(target->shape));
  }
  const std::size_t n = pred->numel();
  auto out = make_tensor<S>({std::size_t{1}});
  out->data[0] = kernels::mse_forward(pred->data.data(), target->data.data(), n);
  detail::finish_op<S>(tape, "mse_loss", {pred, target}, out, [=]() {
    const S up = out->grad[0];
    const S scale = S(2) / static_cast<S>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const S g = up * scale * (pred->data[i] - target->data[i]);
      if (pred->requires_grad) pred->grad[i] += g;
      if (target->requires_grad) target->grad[i] -= g;
    }
  });
  return out;
}

/// Reinterprets the value buffer with a new shape; gradient is the inverse
/// reshape.
template <typename S>
TensorPtr<S> reshape(Tape<S>& tape, const TensorPtr<S>& x, std::vector<std::size_t> shape) {
  auto out = make_tensor<S>(std::move(shape));
  if (out->numel() != x->numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x->shape) + " as " +
                                shape_str(out->shape));
  }
  out->data = x->data;
  detail::finish_op<S>(tape, "reshape", {x}, out, [=]() {
    if (x->requires_grad) {
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
    }
  });
  return out;
}

/// Row-major flatten of a T x C feature map into a single row.
template <typename S>
TensorPtr<S> concat_flatten(Tape<S>& tape, const TensorPtr<S>& x) {
  return reshape(tape, x, {std::size_t{1}, x->numel()});
}

template <typename S>
TensorPtr<S> add(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->shape != b->shape) {
    throw std::invalid_argument("add: shape mismatch " + shape_str(a->shape) + " vs " +
                                shape_str(b->shape));
  }
  auto out = make_tensor<S>(a->shape);
  for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
  detail::finish_op<S>(tape, "add", {a, b}, out, [=]() {
    for (std::size_t i = 0; i < out->numel(); ++i) {
      if (a->requires_grad) a->grad[i] += out->grad[i];
      if (b->requires_grad) b->grad[i] += out->grad[i];
    }
  });
  return out;
}

/// Elementwise (Hadamard) product.
template <typename S>
TensorPtr<S> mul(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->shape != b->shape) {
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a->shape) + " vs " +
                                shape_str(b->shape));
  }
  auto out = make_tensor<S>(a->shape);
  for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
  detail::finish_op<S>(tape, "mul", {a, b}, out, [=]() {
    for (std::size_t i = 0; i < out->numel(); ++i) {
      if (a->requires_grad) a->grad[i] += out->grad[i] * b->data[i];
      if (b->requires_grad) b->grad[i] += out->grad[i] * a->data[i];
    }
  });
  return out;
}

/// Copies row `index` of a matrix into a 1 x C tensor.
template <typename S>
TensorPtr<S> select_row(Tape<S>& tape, const TensorPtr<S>& x, std::size_t index) {
  if (x->shape.size() != 2 || index >= x->shape[0]) {
    throw std::invalid_argument("select_row: row " + std::to_string(index) +
                                " out of range for " + shape_str(x->shape));
  }
  const std::size_t c = x->shape[1];
  auto out = make_tensor<S>({std::size_t{1}, c});
  for (std::size_t j = 0; j < c; ++j) out->data[j] = x->data[index * c + j];
  detail::finish_op<S>(tape, "select_row", {x}, out, [=]() {
    if (x->requires_grad) {
      for (std::size_t j = 0; j < c; ++j) x->grad[index * c + j] += out->grad[j];
    }
  });
  return out;
}

/// Stacks N row vectors (each 1 x C) into an N x C matrix.
template <typename S>
TensorPtr<S> concat_rows(Tape<S>& tape, const std::vector<TensorPtr<S>>& rows) {
  if (rows.empty()) throw std::invalid_argument("concat_rows: empty row list");
  const std::size_t c = rows[0]->numel();
  for (const auto& r : rows) {
    if (r->numel() != c) {
      throw std::invalid_argument("concat_rows: inconsistent row widths");
    }
  }
  auto out = make_tensor<S>({rows.size(), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < c; ++j) out->data[r * c + j] = rows[r]->data[j];
  }
  detail::finish_op<S>(tape, "concat_rows", rows, out, [=]() {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r]->requires_grad) continue;
      for (std::size_t j = 0; j < c; ++j) rows[r]->grad[j] += out->grad[r * c + j];
    }
  });
  return out;
}

}  // namespace trajcnn
