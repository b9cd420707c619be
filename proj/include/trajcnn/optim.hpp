#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trajcnn/tensor.hpp"

namespace trajcnn {

/// Adam with bias correction. Moment accumulators mirror the parameter
/// shapes; the step counter increments once per step() call.
template <typename S>
class Adam {
 public:
  struct Options {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(std::vector<TensorPtr<S>> params, Options opts = {})
      : params_(std::move(params)), opts_(opts) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p->numel(), S(0));
      v_.emplace_back(p->numel(), S(0));
    }
  }

  /// In-place bias-corrected update from the gradients accumulated in the
  /// parameters. Caller zeroes gradients between minibatches.
  void step() {
    for (const auto& p : params_) {
      if (p->grad.size() != p->data.size()) {
        throw std::invalid_argument("adam: parameter with missing gradient");
      }
    }
    ++t_;
    const S b1 = static_cast<S>(opts_.beta1);
    const S b2 = static_cast<S>(opts_.beta2);
    const S corr1 = static_cast<S>(1.0 - std::pow(opts_.beta1, static_cast<double>(t_)));
    const S corr2 = static_cast<S>(1.0 - std::pow(opts_.beta2, static_cast<double>(t_)));
    const S lr = static_cast<S>(opts_.lr);
    const S eps = static_cast<S>(opts_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<S>& p = *params_[k];
      std::vector<S>& m = m_[k];
      std::vector<S>& v = v_[k];
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        const S g = p.grad[i];
        m[i] = b1 * m[i] + (S(1) - b1) * g;
        v[i] = b2 * v[i] + (S(1) - b2) * g * g;
        const S m_hat = m[i] / corr1;
        const S v_hat = v[i] / corr2;
        p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }
  }

  void zero_grad() {
    for (const auto& p : params_) p->zero_grad();
  }

  long long steps_taken() const { return t_; }
  const Options& options() const { return opts_; }

 private:
  std::vector<TensorPtr<S>> params_;
  std::vector<std::vector<S>> m_, v_;
  Options opts_;
  long long t_ = 0;
};

}  // namespace trajcnn
