#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajcnn/model.hpp"
#include "trajcnn/tensor.hpp"
#include "trajcnn/trajectory.hpp"

namespace trajcnn {

/// Vanilla LSTM predictor: displacement embedding, a single recurrent cell,
/// and a linear projection back to displacements. The hidden width equals
/// embed_dim so speed comparisons against the convolutional model are
/// like-for-like.
template <typename S>
struct LstmModel {
  ModelConfig config;  // obs_len / pred_len / embed_dim / seed are used
  TensorPtr<S> embed_w, embed_b;
  TensorPtr<S> w_f, u_f, b_f;
  TensorPtr<S> w_i, u_i, b_i;
  TensorPtr<S> w_o, u_o, b_o;
  TensorPtr<S> w_c, u_c, b_c;
  TensorPtr<S> proj_w, proj_b;
  TensorPtr<S> zero_bias;  // constant, lets gate halves share the linear op

  std::size_t hidden() const { return config.embed_dim; }

  static LstmModel build(const ModelConfig& cfg) {
    cfg.validate();
    LstmModel m;
    m.config = cfg;
    detail::InitRng rng(cfg.seed);
    const std::size_t e = cfg.embed_dim, h = cfg.embed_dim;
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(e));
    const double rec_bound = 1.0 / std::sqrt(static_cast<double>(h));
    m.embed_w = make_tensor<S>({2, e}, true);
    rng.fill_uniform(*m.embed_w, 1.0 / std::sqrt(2.0));
    m.embed_b = make_tensor<S>({e}, true);
    auto gate = [&](TensorPtr<S>& w, TensorPtr<S>& u, TensorPtr<S>& b) {
      w = make_tensor<S>({e, h}, true);
      rng.fill_uniform(*w, in_bound);
      u = make_tensor<S>({h, h}, true);
      rng.fill_uniform(*u, rec_bound);
      b = make_tensor<S>({h}, true);
    };
    gate(m.w_f, m.u_f, m.b_f);
    gate(m.w_i, m.u_i, m.b_i);
    gate(m.w_o, m.u_o, m.b_o);
    gate(m.w_c, m.u_c, m.b_c);
    m.proj_w = make_tensor<S>({h, 2}, true);
    rng.fill_uniform(*m.proj_w, rec_bound);
    m.proj_b = make_tensor<S>({2}, true);
    m.zero_bias = make_tensor<S>({h}, false);
    return m;
  }

  std::vector<std::pair<std::string, TensorPtr<S>>> named_params() const {
    return {
        {"embed.weight", embed_w}, {"embed.bias", embed_b},
        {"wf", w_f}, {"uf", u_f}, {"bf", b_f},
        {"wi", w_i}, {"ui", u_i}, {"bi", b_i},
        {"wo", w_o}, {"uo", u_o}, {"bo", b_o},
        {"wc", w_c}, {"uc", u_c}, {"bc", b_c},
        {"proj.weight", proj_w}, {"proj.bias", proj_b},
    };
  }

  std::vector<TensorPtr<S>> params() const {
    std::vector<TensorPtr<S>> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  void zero_grad() const {
    for (auto& p : params()) p->zero_grad();
  }
};

template <typename S>
struct LstmState {
  TensorPtr<S> h, c;
};

/// One recurrent step:
///   f = sig(Wf x + Uf h + bf), i and o analogous,
///   c = f.c_prev + i.tanh(Wc x + Uc h + bc), h = o.tanh(c).
template <typename S>
LstmState<S> lstm_cell_step(Tape<S>& tape, const TensorPtr<S>& x,
                            const LstmState<S>& prev, const LstmModel<S>& m) {
  auto gate_pre = [&](const TensorPtr<S>& w, const TensorPtr<S>& u, const TensorPtr<S>& b) {
    return add(tape, linear(tape, x, w, b), linear(tape, prev.h, u, m.zero_bias));
  };
  auto f = sigmoid(tape, gate_pre(m.w_f, m.u_f, m.b_f));
  auto i = sigmoid(tape, gate_pre(m.w_i, m.u_i, m.b_i));
  auto o = sigmoid(tape, gate_pre(m.w_o, m.u_o, m.b_o));
  auto g = tanh(tape, gate_pre(m.w_c, m.u_c, m.b_c));
  auto c = add(tape, mul(tape, f, prev.c), mul(tape, i, g));
  auto h = mul(tape, o, tanh(tape, c));
  return {h, c};
}

template <typename S>
LstmState<S> lstm_initial_state(const LstmModel<S>& m) {
  return {make_tensor<S>({std::size_t{1}, m.hidden()}),
          make_tensor<S>({std::size_t{1}, m.hidden()})};
}

/// Graph forward: encode the observed displacements, then decode pred_len
/// displacements autoregressively, feeding each prediction back as the next
/// input. Returns pred_len x 2 displacements.
template <typename S>
TensorPtr<S> lstm_forward_disp(Tape<S>& tape, const LstmModel<S>& m,
                               const TensorPtr<S>& obs_disp) {
  const ModelConfig& c = m.config;
  if (obs_disp->shape.size() != 2 || obs_disp->shape[0] != c.obs_len ||
      obs_disp->shape[1] != 2) {
    throw std::invalid_argument("lstm forward: expected input shape {" +
                                std::to_string(c.obs_len) + ",2}, got " +
                                shape_str(obs_disp->shape));
  }
  auto state = lstm_initial_state(m);
  for (std::size_t t = 0; t < c.obs_len; ++t) {
    auto x = relu(tape, linear(tape, select_row(tape, obs_disp, t), m.embed_w, m.embed_b));
    state = lstm_cell_step(tape, x, state, m);
  }
  std::vector<TensorPtr<S>> steps;
  steps.reserve(c.pred_len);
  for (std::size_t s = 0; s < c.pred_len; ++s) {
    auto d = linear(tape, state.h, m.proj_w, m.proj_b);
    steps.push_back(d);
    if (s + 1 < c.pred_len) {
      auto x = relu(tape, linear(tape, d, m.embed_w, m.embed_b));
      state = lstm_cell_step(tape, x, state, m);
    }
  }
  return concat_rows(tape, steps);
}

/// Buffer-reusing inference path mirroring lstm_forward_disp arithmetic.
template <typename S>
class LstmPredictor {
 public:
  explicit LstmPredictor(const LstmModel<S>& model) : model_(&model) {
    const std::size_t h = model.hidden();
    x_.resize(2);
    e_.resize(h);
    part_a_.resize(h);
    part_b_.resize(h);
    pre_.resize(h);
    f_.resize(h);
    i_.resize(h);
    o_.resize(h);
    g_.resize(h);
    h_.resize(h);
    c_.resize(h);
    c_next_.resize(h);
    disp_.resize(2);
  }

  const ModelConfig& config() const { return model_->config; }

  std::vector<Vec2> predict(std::span<const Vec2> observed) {
    std::vector<Vec2> out;
    predict(observed, out);
    return out;
  }

  void predict(std::span<const Vec2> observed, std::vector<Vec2>& out) {
    const ModelConfig& c = model_->config;
    check_observed(observed, c.obs_len, "lstm forward");
    std::fill(h_.begin(), h_.end(), S(0));
    std::fill(c_.begin(), c_.end(), S(0));
    for (std::size_t t = 0; t < c.obs_len; ++t) {
      if (t == 0) {
        x_[0] = S(0);
        x_[1] = S(0);
      } else {
        x_[0] = static_cast<S>(observed[t].x - observed[t - 1].x);
        x_[1] = static_cast<S>(observed[t].y - observed[t - 1].y);
      }
      step();
    }
    out.resize(c.pred_len);
    double rel_x = 0.0, rel_y = 0.0;
    const Vec2 anchor = observed.back();
    for (std::size_t s = 0; s < c.pred_len; ++s) {
      kernels::linear_forward(h_.data(), model_->proj_w->data.data(),
                              model_->proj_b->data.data(), disp_.data(), 1,
                              model_->hidden(), 2);
      rel_x += static_cast<double>(disp_[0]);
      rel_y += static_cast<double>(disp_[1]);
      out[s] = Vec2{anchor.x + rel_x, anchor.y + rel_y};
      if (s + 1 < c.pred_len) {
        x_[0] = disp_[0];
        x_[1] = disp_[1];
        step();
      }
    }
  }

 private:
  // embed + one cell update of (h_, c_) from x_
  void step() {
    const std::size_t h = model_->hidden();
    kernels::linear_forward(x_.data(), model_->embed_w->data.data(),
                            model_->embed_b->data.data(), e_.data(), 1, 2, h);
    kernels::relu_forward(e_.data(), e_.data(), h);
    gate(model_->w_f, model_->u_f, model_->b_f);
    kernels::sigmoid_forward(pre_.data(), f_.data(), h);
    gate(model_->w_i, model_->u_i, model_->b_i);
    kernels::sigmoid_forward(pre_.data(), i_.data(), h);
    gate(model_->w_o, model_->u_o, model_->b_o);
    kernels::sigmoid_forward(pre_.data(), o_.data(), h);
    gate(model_->w_c, model_->u_c, model_->b_c);
    kernels::tanh_forward(pre_.data(), g_.data(), h);
    for (std::size_t j = 0; j < h; ++j) c_next_[j] = f_[j] * c_[j] + i_[j] * g_[j];
    std::swap(c_, c_next_);
    kernels::tanh_forward(c_.data(), pre_.data(), h);
    for (std::size_t j = 0; j < h; ++j) h_[j] = o_[j] * pre_[j];
  }

  void gate(const TensorPtr<S>& w, const TensorPtr<S>& u, const TensorPtr<S>& b) {
    const std::size_t h = model_->hidden();
    kernels::linear_forward(e_.data(), w->data.data(), b->data.data(), part_a_.data(), 1,
                            h, h);
    kernels::linear_forward(h_.data(), u->data.data(), static_cast<const S*>(nullptr),
                            part_b_.data(), 1, h, h);
    for (std::size_t j = 0; j < h; ++j) pre_[j] = part_a_[j] + part_b_[j];
  }

  const LstmModel<S>* model_;
  std::vector<S> x_, e_, part_a_, part_b_, pre_, f_, i_, o_, g_, h_, c_, c_next_, disp_;
};

/// Ordinary least squares per axis over the observed window, extrapolated
/// pred_len steps. Exact on noiseless linear motion.
inline std::vector<Vec2> linear_predict(std::span<const Vec2> observed,
                                        std::size_t pred_len) {
  const std::size_t n = observed.size();
  if (n < 2) {
    throw std::invalid_argument("linear_predict: need at least 2 observed points, got " +
                                std::to_string(n));
  }
  double mean_t = 0.0, mean_x = 0.0, mean_y = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    mean_t += static_cast<double>(t);
    mean_x += observed[t].x;
    mean_y += observed[t].y;
  }
  mean_t /= static_cast<double>(n);
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double var_t = 0.0, cov_x = 0.0, cov_y = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double dt = static_cast<double>(t) - mean_t;
    var_t += dt * dt;
    cov_x += dt * (observed[t].x - mean_x);
    cov_y += dt * (observed[t].y - mean_y);
  }
  const double slope_x = cov_x / var_t;
  const double slope_y = cov_y / var_t;
  const double icpt_x = mean_x - slope_x * mean_t;
  const double icpt_y = mean_y - slope_y * mean_t;
  std::vector<Vec2> out(pred_len);
  for (std::size_t s = 0; s < pred_len; ++s) {
    const double t = static_cast<double>(n + s);
    out[s] = Vec2{icpt_x + slope_x * t, icpt_y + slope_y * t};
  }
  return out;
}

}  // namespace trajcnn
