#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace trajcnn {

/// A planar position in meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool is_finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Per-step displacements of a track, first step defined as (0,0) so the
/// output has as many rows as the input. Differences are taken in double and
/// narrowed to S afterwards.
template <typename S>
void offsets_into(std::span<const Vec2> track, S* out) {
  if (track.empty()) return;
  out[0] = S(0);
  out[1] = S(0);
  for (std::size_t t = 1; t < track.size(); ++t) {
    out[2 * t] = static_cast<S>(track[t].x - track[t - 1].x);
    out[2 * t + 1] = static_cast<S>(track[t].y - track[t - 1].y);
  }
}

template <typename S>
void absolute_into(std::span<const Vec2> track, S* out) {
  for (std::size_t t = 0; t < track.size(); ++t) {
    out[2 * t] = static_cast<S>(track[t].x);
    out[2 * t + 1] = static_cast<S>(track[t].y);
  }
}

/// Rebuilds absolute positions from predicted displacements by cumulative
/// summation (in double) starting at the last observed position.
template <typename S>
void integrate_offsets(const Vec2& anchor, const S* disp, std::size_t steps,
                       std::vector<Vec2>& out) {
  out.resize(steps);
  double rel_x = 0.0, rel_y = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    rel_x += static_cast<double>(disp[2 * t]);
    rel_y += static_cast<double>(disp[2 * t + 1]);
    out[t] = Vec2{anchor.x + rel_x, anchor.y + rel_y};
  }
}

/// Displacement targets for a future segment: the first row is relative to
/// the last observed position, later rows to the previous future position.
template <typename S>
void future_offsets_into(const Vec2& last_observed, std::span<const Vec2> future, S* out) {
  Vec2 prev = last_observed;
  for (std::size_t t = 0; t < future.size(); ++t) {
    out[2 * t] = static_cast<S>(future[t].x - prev.x);
    out[2 * t + 1] = static_cast<S>(future[t].y - prev.y);
    prev = future[t];
  }
}

inline void check_observed(std::span<const Vec2> observed, std::size_t obs_len,
                           const char* who) {
  if (observed.size() != obs_len) {
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(obs_len) +
                                " observed steps, got " + std::to_string(observed.size()));
  }
  for (const Vec2& v : observed) {
    if (!is_finite(v)) {
      throw std::invalid_argument(std::string(who) + ": non-finite observed coordinate");
    }
  }
}

}  // namespace trajcnn
