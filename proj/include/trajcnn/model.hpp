#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajcnn/tensor.hpp"
#include "trajcnn/trajectory.hpp"

namespace trajcnn {

/// multi: the head emits all future steps in one pass.
/// sequential: the head emits one step and the window is rolled forward.
enum class DecodeMode { kMulti, kSequential };

/// offsets: the network sees per-step displacements (translation equivariant).
/// absolute: the network sees raw coordinates.
enum class InputMode { kOffsets, kAbsolute };

inline const char* to_string(DecodeMode m) {
  return m == DecodeMode::kMulti ? "multi" : "sequential";
}
inline const char* to_string(InputMode m) {
  return m == InputMode::kOffsets ? "offsets" : "absolute";
}

inline DecodeMode decode_mode_from_string(const std::string& s) {
  if (s == "multi") return DecodeMode::kMulti;
  if (s == "sequential") return DecodeMode::kSequential;
  throw std::invalid_argument("unknown decode mode '" + s + "' (multi|sequential)");
}
inline InputMode input_mode_from_string(const std::string& s) {
  if (s == "offsets") return InputMode::kOffsets;
  if (s == "absolute") return InputMode::kAbsolute;
  throw std::invalid_argument("unknown input mode '" + s + "' (offsets|absolute)");
}

/// Number of input time steps that can influence one output feature of a
/// stack of stride-1 same-padded convolutions.
constexpr std::size_t receptive_field(std::size_t num_layers, std::size_t kernel_size) {
  return 1 + num_layers * (kernel_size - 1);
}

struct ModelConfig {
  std::size_t obs_len = 8;
  std::size_t pred_len = 12;
  std::size_t embed_dim = 32;
  std::size_t num_layers = 4;
  std::size_t kernel_size = 3;
  DecodeMode decode_mode = DecodeMode::kMulti;
  InputMode input_mode = InputMode::kOffsets;
  std::uint32_t seed = 1;

  std::size_t head_steps() const {
    return decode_mode == DecodeMode::kMulti ? pred_len : 1;
  }

  void validate() const {
    if (obs_len < 1) throw std::invalid_argument("model config: obs_len must be >= 1");
    if (pred_len < 1) throw std::invalid_argument("model config: pred_len must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("model config: embed_dim must be >= 1");
    if (num_layers < 1) throw std::invalid_argument("model config: num_layers must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) {
      throw std::invalid_argument("model config: kernel_size must be odd and >= 1, got " +
                                  std::to_string(kernel_size));
    }
  }
};

/// Non-fatal configuration concern, empty string when there is none.
inline std::string config_warning(const ModelConfig& c) {
  const std::size_t rf = receptive_field(c.num_layers, c.kernel_size);
  if (rf < c.obs_len) {
    return "receptive field " + std::to_string(rf) + " does not cover the " +
           std::to_string(c.obs_len) + "-step observation window";
  }
  return {};
}

/// Learnable scalar count as a closed form of the configuration.
inline std::size_t cnn_param_count(const ModelConfig& c) {
  const std::size_t out = c.head_steps() * 2;
  return (2 * c.embed_dim + c.embed_dim) +
         c.num_layers * (c.kernel_size * c.embed_dim * c.embed_dim + c.embed_dim) +
         (c.obs_len * c.embed_dim * out + out);
}

namespace detail {

// Deterministic uniform draws independent of the standard library's
// distribution implementations, so identical seeds give identical weights
// everywhere.
class InitRng {
 public:
  explicit InitRng(std::uint32_t seed) : rng_(seed) {}

  double next_unit() { return static_cast<double>(rng_()) * (1.0 / 4294967296.0); }

  template <typename S>
  void fill_uniform(Tensor<S>& t, double bound) {
    for (S& v : t.data) v = static_cast<S>((2.0 * next_unit() - 1.0) * bound);
  }

 private:
  std::mt19937 rng_;
};

}  // namespace detail

/// Feed-forward trajectory predictor: per-step embedding, a stack of
/// same-length temporal convolutions, and a fully connected head over the
/// concatenated features.
template <typename S>
struct TrajCnn {
  ModelConfig config;
  TensorPtr<S> embed_w, embed_b;
  std::vector<TensorPtr<S>> conv_w, conv_b;
  TensorPtr<S> head_w, head_b;

  /// Deterministic initialization: weights uniform in +-1/sqrt(fan_in) drawn
  /// in declaration order from the config seed, biases zero.
  static TrajCnn build(const ModelConfig& cfg) {
    cfg.validate();
    TrajCnn m;
    m.config = cfg;
    detail::InitRng rng(cfg.seed);
    const std::size_t e = cfg.embed_dim;
    m.embed_w = make_tensor<S>({2, e}, true);
    rng.fill_uniform(*m.embed_w, 1.0 / std::sqrt(2.0));
    m.embed_b = make_tensor<S>({e}, true);
    const double conv_bound = 1.0 / std::sqrt(static_cast<double>(cfg.kernel_size * e));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      auto w = make_tensor<S>({cfg.kernel_size, e, e}, true);
      rng.fill_uniform(*w, conv_bound);
      m.conv_w.push_back(std::move(w));
      m.conv_b.push_back(make_tensor<S>({e}, true));
    }
    const std::size_t flat = cfg.obs_len * e;
    const std::size_t out = cfg.head_steps() * 2;
    m.head_w = make_tensor<S>({flat, out}, true);
    rng.fill_uniform(*m.head_w, 1.0 / std::sqrt(static_cast<double>(flat)));
    m.head_b = make_tensor<S>({out}, true);
    return m;
  }

  std::vector<std::pair<std::string, TensorPtr<S>>> named_params() const {
    std::vector<std::pair<std::string, TensorPtr<S>>> out;
    out.emplace_back("embed.weight", embed_w);
    out.emplace_back("embed.bias", embed_b);
    for (std::size_t l = 0; l < conv_w.size(); ++l) {
      out.emplace_back("conv" + std::to_string(l) + ".weight", conv_w[l]);
      out.emplace_back("conv" + std::to_string(l) + ".bias", conv_b[l]);
    }
    out.emplace_back("head.weight", head_w);
    out.emplace_back("head.bias", head_b);
    return out;
  }

  std::vector<TensorPtr<S>> params() const {
    std::vector<TensorPtr<S>> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  void zero_grad() const {
    for (auto& p : params()) p->zero_grad();
  }

  /// Embedding + convolution stack on a graph; input is obs_len x 2.
  /// ReLU follows the embedding and every convolution except the last.
  TensorPtr<S> conv_features(Tape<S>& tape, const TensorPtr<S>& input) const {
    if (input->shape.size() != 2 || input->shape[0] != config.obs_len ||
        input->shape[1] != 2) {
      throw std::invalid_argument("forward: expected input shape {" +
                                  std::to_string(config.obs_len) + ",2}, got " +
                                  shape_str(input->shape));
    }
    auto h = relu(tape, linear(tape, input, embed_w, embed_b));
    const std::size_t pad = (config.kernel_size - 1) / 2;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      h = conv1d(tape, h, conv_w[l], conv_b[l], pad);
      if (l + 1 < config.num_layers) h = relu(tape, h);
    }
    return h;
  }

  /// Full graph forward to predicted displacements, head_steps x 2.
  TensorPtr<S> forward_disp(Tape<S>& tape, const TensorPtr<S>& input) const {
    auto flat = concat_flatten(tape, conv_features(tape, input));
    auto row = linear(tape, flat, head_w, head_b);
    return reshape(tape, row, {config.head_steps(), std::size_t{2}});
  }
};

/// Inference engine with preallocated buffers; one instance per thread.
/// Weights are read-only, so any number of predictors may share a model.
template <typename S>
class CnnPredictor {
 public:
  explicit CnnPredictor(const TrajCnn<S>& model) : model_(&model) {
    const ModelConfig& c = model.config;
    in_.resize(c.obs_len * 2);
    emb_.resize(c.obs_len * c.embed_dim);
    buf_a_.resize(c.obs_len * c.embed_dim);
    buf_b_.resize(c.obs_len * c.embed_dim);
    head_out_.resize(c.head_steps() * 2);
    window_.resize(c.obs_len);
  }

  const ModelConfig& config() const { return model_->config; }

  /// Absolute observed positions -> absolute predicted positions.
  std::vector<Vec2> predict(std::span<const Vec2> observed) {
    std::vector<Vec2> out;
    predict(observed, out);
    return out;
  }

  void predict(std::span<const Vec2> observed, std::vector<Vec2>& out) {
    if (model_->config.decode_mode == DecodeMode::kMulti) {
      predict_multi(observed, out);
    } else {
      predict_sequential(observed, out);
    }
  }

  /// One forward pass emitting every future step at once.
  void predict_multi(std::span<const Vec2> observed, std::vector<Vec2>& out) {
    const ModelConfig& c = model_->config;
    if (c.decode_mode != DecodeMode::kMulti) {
      throw std::invalid_argument(
          "predict_multi: model head emits a single step (decode mode mismatch)");
    }
    check_observed(observed, c.obs_len, "forward");
    fill_input(observed);
    run_trunk_head();
    integrate_offsets(observed.back(), head_out_.data(), c.pred_len, out);
  }

  /// Predicts one step at a time, appending each prediction to the window
  /// and dropping the oldest step.
  void predict_sequential(std::span<const Vec2> observed, std::vector<Vec2>& out) {
    const ModelConfig& c = model_->config;
    if (c.decode_mode != DecodeMode::kSequential) {
      throw std::invalid_argument(
          "predict_sequential: model head emits all steps (decode mode mismatch)");
    }
    check_observed(observed, c.obs_len, "forward");
    out.resize(c.pred_len);
    for (std::size_t t = 0; t < c.obs_len; ++t) window_[t] = observed[t];
    for (std::size_t s = 0; s < c.pred_len; ++s) {
      fill_input(window_);
      run_trunk_head();
      const Vec2 last = window_.back();
      const Vec2 next{last.x + static_cast<double>(head_out_[0]),
                      last.y + static_cast<double>(head_out_[1])};
      out[s] = next;
      for (std::size_t t = 0; t + 1 < c.obs_len; ++t) window_[t] = window_[t + 1];
      window_.back() = next;
    }
  }

 private:
  void fill_input(std::span<const Vec2> track) {
    if (model_->config.input_mode == InputMode::kOffsets) {
      offsets_into(track, in_.data());
    } else {
      absolute_into(track, in_.data());
    }
  }

  void run_trunk_head() {
    const ModelConfig& c = model_->config;
    const std::size_t t = c.obs_len, e = c.embed_dim;
    const std::size_t pad = (c.kernel_size - 1) / 2;
    kernels::linear_forward(in_.data(), model_->embed_w->data.data(),
                            model_->embed_b->data.data(), emb_.data(), t, 2, e);
    kernels::relu_forward(emb_.data(), emb_.data(), t * e);
    S* cur = emb_.data();
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      S* dst = (l % 2 == 0) ? buf_a_.data() : buf_b_.data();
      kernels::conv1d_forward(cur, model_->conv_w[l]->data.data(),
                              model_->conv_b[l]->data.data(), dst, t, e, e, c.kernel_size,
                              pad);
      if (l + 1 < c.num_layers) kernels::relu_forward(dst, dst, t * e);
      cur = dst;
    }
    kernels::linear_forward(cur, model_->head_w->data.data(),
                            model_->head_b->data.data(), head_out_.data(), 1,
                            t * e, c.head_steps() * 2);
  }

  const TrajCnn<S>* model_;
  std::vector<S> in_, emb_, buf_a_, buf_b_, head_out_;
  std::vector<Vec2> window_;
};

}  // namespace trajcnn
