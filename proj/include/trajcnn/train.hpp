#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "trajcnn/baselines.hpp"
#include "trajcnn/checkpoint.hpp"
#include "trajcnn/data.hpp"
#include "trajcnn/metrics.hpp"
#include "trajcnn/model.hpp"
#include "trajcnn/optim.hpp"
#include "trajcnn/tensor.hpp"

namespace trajcnn {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 10;  // epochs without validation improvement
  double lr = 0.001;
  double val_fraction = 0.1;
  std::uint32_t seed = 1;
  ModelKind kind = ModelKind::kCnn;
  ModelConfig model;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
    if (patience > max_epochs) {
      throw std::invalid_argument("train config: patience must be <= max_epochs");
    }
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
      throw std::invalid_argument("train config: val_fraction must be in [0, 1)");
    }
    model.validate();
  }
};

struct TrainLog {
  struct Epoch {
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN when there is no validation set
  };
  std::vector<Epoch> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;

  void to_csv(std::ostream& out) const {
    out << "epoch,train_loss,val_loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      out << i << ',' << epochs[i].train_loss << ',' << epochs[i].val_loss << '\n';
    }
  }
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

namespace detail {

// Displacement input leaf for one window, honoring the input mode.
template <typename S>
TensorPtr<S> make_input_leaf(std::span<const Vec2> window, InputMode mode) {
  auto t = make_tensor<S>({window.size(), std::size_t{2}});
  if (mode == InputMode::kOffsets) {
    offsets_into(window, t->data.data());
  } else {
    absolute_into(window, t->data.data());
  }
  return t;
}

template <typename S>
TensorPtr<S> make_target_leaf(const Vec2& last_observed, std::span<const Vec2> future) {
  auto t = make_tensor<S>({future.size(), std::size_t{2}});
  future_offsets_into(last_observed, future, t->data.data());
  return t;
}

// Loss graphs per model kind. Training minimizes the mean squared error of
// predicted vs true future displacements.
struct CnnMultiObjective {
  TrajCnn<float>* model;

  TensorPtr<float> loss(Tape<float>& tape, const TrajectorySample& s) const {
    auto input = make_input_leaf<float>(s.observed, model->config.input_mode);
    auto target = make_target_leaf<float>(s.observed.back(), s.future);
    return mse_loss(tape, model->forward_disp(tape, input), target);
  }
};

// The sequential head is trained teacher-forced: every window inside the
// sample contributes one single-step prediction from ground-truth history.
struct CnnSequentialObjective {
  TrajCnn<float>* model;

  TensorPtr<float> loss(Tape<float>& tape, const TrajectorySample& s) const {
    const std::size_t obs = model->config.obs_len;
    const std::size_t pred = model->config.pred_len;
    std::vector<Vec2> track;
    track.reserve(obs + pred);
    track.insert(track.end(), s.observed.begin(), s.observed.end());
    track.insert(track.end(), s.future.begin(), s.future.end());

    TensorPtr<float> total;
    for (std::size_t i = 0; i < pred; ++i) {
      std::span<const Vec2> window(track.data() + i, obs);
      auto input = make_input_leaf<float>(window, model->config.input_mode);
      auto target = make_target_leaf<float>(window.back(), {track.data() + i + obs, 1});
      auto step = mse_loss(tape, model->forward_disp(tape, input), target);
      total = total ? add(tape, total, step) : step;
    }
    auto scale = make_tensor<float>({std::size_t{1}},
                                    std::vector<float>{1.0f / static_cast<float>(pred)});
    return mul(tape, total, scale);
  }
};

struct LstmObjective {
  LstmModel<float>* model;

  TensorPtr<float> loss(Tape<float>& tape, const TrajectorySample& s) const {
    auto input = make_input_leaf<float>(s.observed, InputMode::kOffsets);
    auto target = make_target_leaf<float>(s.observed.back(), s.future);
    return mse_loss(tape, lstm_forward_disp(tape, *model, input), target);
  }
};

template <typename Model, typename Objective>
TrainResult run_training(Model& model, const Objective& objective, ModelKind kind,
                         const std::vector<TrajectorySample>& train_set,
                         const std::vector<TrajectorySample>& val_set,
                         const TrainConfig& cfg) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");

  Adam<float> opt(model.params(), {.lr = cfg.lr});
  std::mt19937 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const bool has_val = !val_set.empty();
  TrainLog log;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  std::vector<std::vector<float>> best_weights;
  const auto params = model.params();

  auto snapshot = [&]() {
    best_weights.clear();
    for (const auto& p : params) best_weights.push_back(p->data);
  };
  auto restore = [&]() {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->data = best_weights[i];
  };

  log.stop_reason = "max_epochs";
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    detail::deterministic_shuffle(order, shuffle_rng);
    double train_loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(stop - start);
      opt.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        Tape<float> tape;
        auto loss = objective.loss(tape, train_set[order[k]]);
        tape.backward(loss, inv_batch);
        train_loss_sum += static_cast<double>(loss->data[0]);
      }
      opt.step();
    }
    const double train_loss = train_loss_sum / static_cast<double>(train_set.size());

    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (has_val) {
      double acc = 0.0;
      for (const auto& s : val_set) {
        Tape<float> tape;  // forward value only, never backwarded
        acc += static_cast<double>(objective.loss(tape, s)->data[0]);
      }
      val_loss = acc / static_cast<double>(val_set.size());
    }
    log.epochs.push_back({train_loss, val_loss});

    if (!std::isfinite(train_loss) || (has_val && !std::isfinite(val_loss))) {
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    }

    if (has_val) {
      if (val_loss < best_val) {  // ties keep the earlier epoch
        best_val = val_loss;
        log.best_epoch = epoch;
        epochs_since_best = 0;
        snapshot();
      } else {
        ++epochs_since_best;
        if (epochs_since_best > cfg.patience) {
          log.stop_reason = "validation loss stopped decreasing";
          break;
        }
      }
    }
  }

  if (has_val) {
    restore();
  } else {
    log.best_epoch = log.epochs.empty() ? 0 : log.epochs.size() - 1;
    log.stop_reason = "max_epochs (no validation set)";
  }

  TrainResult result;
  result.checkpoint = detail::checkpoint_from_model(model, kind);
  result.log = std::move(log);
  return result;
}

}  // namespace detail

/// Trains a model of cfg.kind and returns the best-validation-epoch
/// checkpoint plus the per-epoch log. Deterministic for a fixed
/// (seed, data, config) in this single-threaded implementation.
inline TrainResult train(const std::vector<TrajectorySample>& train_set,
                         const std::vector<TrajectorySample>& val_set,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.kind == ModelKind::kLstm) {
    auto model = LstmModel<float>::build(cfg.model);
    return detail::run_training(model, detail::LstmObjective{&model}, cfg.kind, train_set,
                                val_set, cfg);
  }
  auto model = TrajCnn<float>::build(cfg.model);
  if (cfg.model.decode_mode == DecodeMode::kSequential) {
    return detail::run_training(model, detail::CnnSequentialObjective{&model}, cfg.kind,
                                train_set, val_set, cfg);
  }
  return detail::run_training(model, detail::CnnMultiObjective{&model}, cfg.kind,
                              train_set, val_set, cfg);
}

/// A predictor bound to its own workspace; safe to use from one thread.
using PredictFn = std::function<void(std::span<const Vec2>, std::vector<Vec2>&)>;
/// Creates an independent PredictFn per worker thread.
using WorkerFactory = std::function<PredictFn()>;

/// Worker factory over a checkpoint; the model weights are shared
/// (read-only) across all workers.
inline WorkerFactory make_worker_factory(const Checkpoint& ckpt) {
  if (ckpt.kind == ModelKind::kLstm) {
    auto model = std::make_shared<LstmModel<float>>(lstm_from_checkpoint(ckpt));
    return [model]() -> PredictFn {
      auto predictor = std::make_shared<LstmPredictor<float>>(*model);
      return [model, predictor](std::span<const Vec2> obs, std::vector<Vec2>& out) {
        predictor->predict(obs, out);
      };
    };
  }
  auto model = std::make_shared<TrajCnn<float>>(cnn_from_checkpoint(ckpt));
  return [model]() -> PredictFn {
    auto predictor = std::make_shared<CnnPredictor<float>>(*model);
    return [model, predictor](std::span<const Vec2> obs, std::vector<Vec2>& out) {
      predictor->predict(obs, out);
    };
  };
}

struct PerSampleEval {
  const TrajectorySample* sample = nullptr;
  std::vector<Vec2> pred;
  double ade = 0.0;
  double fde = 0.0;
};

/// Predicts every sample (optionally sharded over threads) and aggregates
/// ADE/FDE. Per-sample results are kept in input order, so the aggregate is
/// deterministic regardless of thread count.
inline EvalReport evaluate(const WorkerFactory& factory,
                           const std::vector<TrajectorySample>& samples,
                           unsigned threads = 1,
                           std::vector<PerSampleEval>* per_sample = nullptr) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  std::vector<PerSampleEval> results(samples.size());

  const auto t0 = std::chrono::steady_clock::now();
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    PredictFn predict = factory();
    for (std::size_t i = lo; i < hi; ++i) {
      results[i].sample = &samples[i];
      predict(samples[i].observed, results[i].pred);
      results[i].ade = ade(results[i].pred, samples[i].future);
      results[i].fde = fde(results[i].pred, samples[i].future);
    }
  };
  if (threads <= 1) {
    run_range(0, samples.size());
  } else {
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(samples.size()));
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + n - 1) / n;
    for (unsigned w = 0; w < n; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(samples.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  const auto t1 = std::chrono::steady_clock::now();

  std::vector<ScoredSample> scored(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    scored[i] = ScoredSample{results[i].ade, results[i].fde, samples[i].scene_name};
  }
  EvalReport report = aggregate(scored);
  const double total_s = std::chrono::duration<double>(t1 - t0).count();
  report.timing = TimingStats{total_s, total_s / static_cast<double>(samples.size())};
  if (per_sample) *per_sample = std::move(results);
  return report;
}

struct FoldOutcome {
  EvalReport report;
  TrainResult train_result;
};

/// Leave-one-out experiment: train on every scene but `held_out`, evaluate
/// on the held-out windows.
inline FoldOutcome run_leave_one_out(const std::vector<SceneDataset>& scenes,
                                     const std::string& held_out, const TrainConfig& cfg,
                                     unsigned eval_threads = 1) {
  Split split = leave_one_out(scenes, held_out, cfg.model.obs_len, cfg.model.pred_len,
                              cfg.val_fraction, cfg.seed);
  FoldOutcome out;
  out.train_result = train(split.train, split.val, cfg);
  out.report = evaluate(make_worker_factory(out.train_result.checkpoint), split.test,
                        eval_threads);
  return out;
}

inline FoldOutcome run_leave_one_out(const std::filesystem::path& data_dir,
                                     const std::string& held_out, const TrainConfig& cfg,
                                     unsigned eval_threads = 1,
                                     std::ostream* warn = nullptr) {
  return run_leave_one_out(load_all_scenes(data_dir, warn), held_out, cfg, eval_threads);
}

struct AblationRow {
  std::string variant;
  std::string scene;  // "AVG" for the unweighted cross-fold mean
  double ade = 0.0;
  double fde = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline void append_variant_rows(std::vector<AblationRow>& rows, const std::string& variant,
                                const std::vector<SceneDataset>& scenes,
                                const std::vector<std::string>& folds,
                                const TrainConfig& cfg) {
  double ade_sum = 0.0, fde_sum = 0.0;
  std::size_t n_total = 0;
  for (const auto& held_out : folds) {
    FoldOutcome fold = run_leave_one_out(scenes, held_out, cfg);
    rows.push_back(
        {variant, held_out, fold.report.ade, fold.report.fde, fold.report.n});
    ade_sum += fold.report.ade;
    fde_sum += fold.report.fde;
    n_total += fold.report.n;
  }
  const double k = static_cast<double>(folds.size());
  rows.push_back({variant, "AVG", ade_sum / k, fde_sum / k, n_total});
}

}  // namespace detail

/// Trains one model per layer count with identical seeds and splits and
/// tabulates ADE/FDE per fold plus the cross-fold average.
inline std::vector<AblationRow> ablate_layers(const std::vector<SceneDataset>& scenes,
                                              const std::vector<std::size_t>& layer_counts,
                                              const TrainConfig& base,
                                              const std::vector<std::string>& folds) {
  if (layer_counts.empty()) throw std::invalid_argument("ablate_layers: no layer counts");
  std::vector<AblationRow> rows;
  for (std::size_t layers : layer_counts) {
    TrainConfig cfg = base;
    cfg.kind = ModelKind::kCnn;
    cfg.model.num_layers = layers;
    detail::append_variant_rows(rows, std::to_string(layers), scenes, folds, cfg);
  }
  return rows;
}

/// Multi-output head vs one-step-at-a-time decoding on identical splits.
inline std::vector<AblationRow> ablate_decode_mode(const std::vector<SceneDataset>& scenes,
                                                   const TrainConfig& base,
                                                   const std::vector<std::string>& folds) {
  std::vector<AblationRow> rows;
  for (DecodeMode mode : {DecodeMode::kMulti, DecodeMode::kSequential}) {
    TrainConfig cfg = base;
    cfg.kind = ModelKind::kCnn;
    cfg.model.decode_mode = mode;
    detail::append_variant_rows(rows, to_string(mode), scenes, folds, cfg);
  }
  return rows;
}

inline void ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "variant,scene,ade,fde,n\n";
  out.precision(6);
  out.setf(std::ios::fixed);
  for (const auto& r : rows) {
    out << r.variant << ',' << r.scene << ',' << r.ade << ',' << r.fde << ',' << r.n << '\n';
  }
}

}  // namespace trajcnn
