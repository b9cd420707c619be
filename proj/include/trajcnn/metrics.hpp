#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajcnn/trajectory.hpp"

namespace trajcnn {

/// Mean Euclidean distance between predicted and true positions over all
/// predicted steps. Always computed in double.
inline double ade(std::span<const Vec2> pred, std::span<const Vec2> gt) {
  if (pred.empty() || pred.size() != gt.size()) {
    throw std::invalid_argument("ade: prediction and ground truth must be non-empty and equal length (" +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    acc += std::hypot(gt[t].x - pred[t].x, gt[t].y - pred[t].y);
  }
  return acc / static_cast<double>(pred.size());
}

/// Euclidean distance between the final predicted and true positions.
inline double fde(std::span<const Vec2> pred, std::span<const Vec2> gt) {
  if (pred.empty() || pred.size() != gt.size()) {
    throw std::invalid_argument("fde: prediction and ground truth must be non-empty and equal length (" +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()) + ")");
  }
  return std::hypot(gt.back().x - pred.back().x, gt.back().y - pred.back().y);
}

struct SceneStats {
  double ade = 0.0;
  double fde = 0.0;
  std::size_t n = 0;
};

struct TimingStats {
  double total_s = 0.0;
  double mean_per_sample_s = 0.0;
};

/// Aggregated evaluation result. The top-level ade/fde are sample-weighted
/// means over everything evaluated; per-scene means live in `scenes`.
struct EvalReport {
  double ade = 0.0;
  double fde = 0.0;
  std::size_t n = 0;
  std::map<std::string, SceneStats> scenes;
  std::optional<TimingStats> timing;
};

struct ScoredSample {
  double ade = 0.0;
  double fde = 0.0;
  std::string scene;
};

inline EvalReport aggregate(const std::vector<ScoredSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("aggregate: no samples");
  EvalReport r;
  for (const auto& s : samples) {
    r.ade += s.ade;
    r.fde += s.fde;
    ++r.n;
    auto& sc = r.scenes[s.scene];
    sc.ade += s.ade;
    sc.fde += s.fde;
    ++sc.n;
  }
  r.ade /= static_cast<double>(r.n);
  r.fde /= static_cast<double>(r.n);
  for (auto& [name, sc] : r.scenes) {
    sc.ade /= static_cast<double>(sc.n);
    sc.fde /= static_cast<double>(sc.n);
  }
  return r;
}

inline EvalReport aggregate(const std::vector<std::vector<Vec2>>& preds,
                            const std::vector<std::vector<Vec2>>& gts,
                            const std::vector<std::string>& scene_labels) {
  if (preds.size() != gts.size() || preds.size() != scene_labels.size()) {
    throw std::invalid_argument("aggregate: mismatched prediction/truth/label counts");
  }
  std::vector<ScoredSample> scored(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    scored[i] = ScoredSample{ade(preds[i], gts[i]), fde(preds[i], gts[i]), scene_labels[i]};
  }
  return aggregate(scored);
}

/// Average-row convention used when combining several scenes: the
/// unweighted mean of the per-scene means.
inline std::pair<double, double> avg_row(const EvalReport& r) {
  if (r.scenes.empty()) throw std::invalid_argument("avg_row: report has no scenes");
  double a = 0.0, f = 0.0;
  for (const auto& [name, sc] : r.scenes) {
    a += sc.ade;
    f += sc.fde;
  }
  const double k = static_cast<double>(r.scenes.size());
  return {a / k, f / k};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json scenes = nlohmann::json::object();
  for (const auto& [name, sc] : r.scenes) {
    scenes[name] = {{"ade", sc.ade}, {"fde", sc.fde}, {"n", sc.n}};
  }
  nlohmann::json j = {{"ade", r.ade}, {"fde", r.fde}, {"n", r.n}, {"scenes", scenes}};
  if (r.timing) {
    j["timing"] = {{"total_s", r.timing->total_s},
                   {"mean_per_sample_s", r.timing->mean_per_sample_s}};
  }
  return j;
}

}  // namespace trajcnn
