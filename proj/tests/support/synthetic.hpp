#pragma once

// Synthetic trajectory corpora for tests: constant-velocity pedestrians with
// randomized starts and headings, on a coarse coordinate grid so shifted
// inputs stay exactly representable.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "trajcnn/data.hpp"
#include "trajcnn/trajectory.hpp"

namespace synthetic {

// Snaps to multiples of 1/1024 so float additions of test shifts are exact.
inline double grid(double v) { return std::round(v * 1024.0) / 1024.0; }

inline double unit(std::mt19937& rng) {
  return static_cast<double>(rng()) * (1.0 / 4294967296.0);
}

/// Constant-velocity scene: n_tracks pedestrians of track_len steps,
/// speeds in a pedestrian-like range (~0.2-0.6 m per 0.4 s step).
inline trajcnn::SceneDataset linear_scene(const std::string& name, std::size_t n_tracks,
                                          std::size_t track_len, std::uint32_t seed) {
  std::mt19937 rng(seed);
  trajcnn::SceneDataset ds;
  ds.scene_name = name;
  for (std::size_t p = 0; p < n_tracks; ++p) {
    trajcnn::PedTrack track;
    track.ped_id = static_cast<long long>(p + 1);
    const double x0 = grid(20.0 * unit(rng) - 10.0);
    const double y0 = grid(20.0 * unit(rng) - 10.0);
    const double angle = 2.0 * 3.14159265358979 * unit(rng);
    const double speed = 0.2 + 0.4 * unit(rng);
    const double vx = grid(speed * std::cos(angle));
    const double vy = grid(speed * std::sin(angle));
    for (std::size_t t = 0; t < track_len; ++t) {
      track.points.push_back(trajcnn::TrackPoint{
          static_cast<long long>(10 * t),
          trajcnn::Vec2{x0 + vx * static_cast<double>(t), y0 + vy * static_cast<double>(t)}});
    }
    ds.trajectories.push_back(std::move(track));
  }
  return ds;
}

inline std::vector<trajcnn::SceneDataset> linear_corpus(std::size_t n_tracks,
                                                        std::size_t track_len,
                                                        std::uint32_t seed) {
  std::vector<trajcnn::SceneDataset> scenes;
  std::uint32_t s = seed;
  for (const char* name : {"eth", "hotel", "univ", "zara1", "zara2"}) {
    scenes.push_back(linear_scene(name, n_tracks, track_len, ++s));
  }
  return scenes;
}

/// Writes a corpus in the CLI data-dir layout (one subdirectory per scene).
inline void write_corpus(const std::vector<trajcnn::SceneDataset>& scenes,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& scene : scenes) {
    const auto scene_dir = dir / scene.scene_name;
    std::filesystem::create_directories(scene_dir);
    trajcnn::save_scene(scene, scene_dir / "data.txt");
  }
}

/// Random observation window on the coarse grid (random walk, not linear).
inline std::vector<trajcnn::Vec2> grid_window(std::size_t obs_len, std::mt19937& rng) {
  std::vector<trajcnn::Vec2> obs(obs_len);
  double x = grid(16.0 * unit(rng) - 8.0);
  double y = grid(16.0 * unit(rng) - 8.0);
  for (std::size_t t = 0; t < obs_len; ++t) {
    x = grid(x + 0.6 * unit(rng) - 0.3);
    y = grid(y + 0.6 * unit(rng) - 0.3);
    obs[t] = trajcnn::Vec2{x, y};
  }
  return obs;
}

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("trajcnn_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace synthetic
