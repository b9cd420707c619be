#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajcnn/trajectory.hpp"

namespace trajcnn {

struct TrackPoint {
  long long frame = 0;
  Vec2 pos;
};

struct PedTrack {
  long long ped_id = 0;
  std::vector<TrackPoint> points;  // strictly increasing frames, constant stride
};

/// One crowd scene: per-pedestrian tracks in meters, annotated at a fixed
/// rate (2.5 Hz after the usual preprocessing).
struct SceneDataset {
  std::string scene_name;
  std::vector<PedTrack> trajectories;
  double frame_rate = 2.5;
};

/// One training/evaluation window: obs_len observed positions followed by
/// pred_len future positions, temporally contiguous at the track's stride.
struct TrajectorySample {
  std::vector<Vec2> observed;
  std::vector<Vec2> future;
  std::string scene_name;
  long long ped_id = 0;
  long long start_frame = 0;
};

struct SplitPlan {
  std::vector<std::string> train_scenes;
  std::string test_scene;
  double val_fraction = 0.1;
  std::uint32_t seed = 0;
};

struct Split {
  std::vector<TrajectorySample> train, val, test;
};

struct WindowSummary {
  std::size_t windows = 0;
  std::size_t tracks_too_short = 0;
};

namespace detail {

struct RawRow {
  long long frame, ped;
  Vec2 pos;
};

inline double parse_field(const std::string& tok, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": non-numeric field '" + tok + "'");
  }
  if (used != tok.size() || !std::isfinite(v)) {
    throw std::runtime_error(where + ": non-numeric field '" + tok + "'");
  }
  return v;
}

inline long long parse_id_field(const std::string& tok, const std::string& where) {
  const double v = parse_field(tok, where);
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-6) {
    throw std::runtime_error(where + ": expected integral id, got '" + tok + "'");
  }
  return static_cast<long long>(r);
}

// One observation per line: frame_id pedestrian_id x_meters y_meters.
// '#' starts a comment; blank lines are skipped.
inline void parse_rows(std::istream& in, const std::string& source,
                       std::vector<RawRow>& rows) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> toks;
    std::string tok;
    while (fields >> tok) toks.push_back(tok);
    if (toks.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (toks.size() != 4) {
      throw std::runtime_error(where + ": malformed line, expected 4 fields, got " +
                               std::to_string(toks.size()));
    }
    RawRow r;
    r.frame = parse_id_field(toks[0], where);
    r.ped = parse_id_field(toks[1], where);
    r.pos.x = parse_field(toks[2], where);
    r.pos.y = parse_field(toks[3], where);
    rows.push_back(r);
  }
}

// Fisher-Yates with explicit index derivation so shuffles are identical
// across standard libraries.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

/// Groups raw rows by pedestrian and sorts by frame. Duplicate (frame, ped)
/// observations are an error; pedestrians whose frames are not equally
/// spaced are dropped with a warning rather than failing the load.
inline SceneDataset build_scene(const std::string& scene_name,
                                std::vector<detail::RawRow> rows,
                                std::ostream* warn = nullptr) {
  SceneDataset ds;
  ds.scene_name = scene_name;
  std::map<long long, std::vector<TrackPoint>> by_ped;
  for (const auto& r : rows) by_ped[r.ped].push_back(TrackPoint{r.frame, r.pos});
  for (auto& [ped, pts] : by_ped) {
    std::sort(pts.begin(), pts.end(),
              [](const TrackPoint& a, const TrackPoint& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].frame == pts[i - 1].frame) {
        throw std::runtime_error("scene '" + scene_name + "': duplicate observation for pedestrian " +
                                 std::to_string(ped) + " at frame " +
                                 std::to_string(pts[i].frame));
      }
    }
    bool regular = true;
    if (pts.size() >= 3) {
      const long long stride = pts[1].frame - pts[0].frame;
      for (std::size_t i = 2; i < pts.size(); ++i) {
        if (pts[i].frame - pts[i - 1].frame != stride) {
          regular = false;
          break;
        }
      }
    }
    if (!regular) {
      if (warn) {
        *warn << "warning: scene '" << scene_name << "': pedestrian " << ped
              << " has irregular frame stride, dropped\n";
      }
      continue;
    }
    ds.trajectories.push_back(PedTrack{ped, std::move(pts)});
  }
  return ds;
}

inline SceneDataset load_scene(const std::filesystem::path& file,
                               const std::string& scene_name = "",
                               std::ostream* warn = nullptr) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + file.string());
  std::vector<detail::RawRow> rows;
  detail::parse_rows(in, file.filename().string(), rows);
  const std::string name = scene_name.empty() ? file.stem().string() : scene_name;
  return build_scene(name, std::move(rows), warn);
}

/// Scene directory: every .txt file in `dir` contributes rows; the scene
/// name is the directory name.
inline SceneDataset load_scene_dir(const std::filesystem::path& dir,
                                   std::ostream* warn = nullptr) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("scene directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<detail::RawRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot open trajectory file: " + f.string());
    detail::parse_rows(in, f.filename().string(), rows);
  }
  return build_scene(dir.filename().string(), std::move(rows), warn);
}

/// Data-dir layout: one subdirectory per scene. Scenes are returned sorted
/// by name.
inline std::vector<SceneDataset> load_all_scenes(const std::filesystem::path& data_dir,
                                                 std::ostream* warn = nullptr) {
  if (!std::filesystem::is_directory(data_dir)) {
    throw std::runtime_error("data directory not found: " + data_dir.string());
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(data_dir)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    throw std::runtime_error("data directory has no scene subdirectories: " +
                             data_dir.string());
  }
  std::vector<SceneDataset> scenes;
  scenes.reserve(dirs.size());
  for (const auto& d : dirs) scenes.push_back(load_scene_dir(d, warn));
  return scenes;
}

/// Writes the dataset back in the text format (full double precision), one
/// pedestrian at a time in ascending frame order.
inline void save_scene(const SceneDataset& ds, std::ostream& out) {
  out.precision(17);
  for (const auto& track : ds.trajectories) {
    for (const auto& p : track.points) {
      out << p.frame << ' ' << track.ped_id << ' ' << p.pos.x << ' ' << p.pos.y << '\n';
    }
  }
}

inline void save_scene(const SceneDataset& ds, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + file.string());
  save_scene(ds, out);
}

/// Sliding windows of obs_len + pred_len contiguous positions per
/// pedestrian. Tracks shorter than one window yield nothing and are only
/// counted in the summary.
inline std::vector<TrajectorySample> extract_windows(const SceneDataset& ds,
                                                     std::size_t obs_len = 8,
                                                     std::size_t pred_len = 12,
                                                     std::size_t stride = 1,
                                                     WindowSummary* summary = nullptr) {
  if (obs_len + pred_len < 2) {
    throw std::invalid_argument("extract_windows: window must cover at least 2 steps");
  }
  if (stride < 1) throw std::invalid_argument("extract_windows: stride must be >= 1");
  const std::size_t total = obs_len + pred_len;
  std::vector<TrajectorySample> out;
  for (const auto& track : ds.trajectories) {
    if (track.points.size() < total) {
      if (summary) ++summary->tracks_too_short;
      continue;
    }
    for (std::size_t start = 0; start + total <= track.points.size(); start += stride) {
      TrajectorySample s;
      s.scene_name = ds.scene_name;
      s.ped_id = track.ped_id;
      s.start_frame = track.points[start].frame;
      s.observed.reserve(obs_len);
      s.future.reserve(pred_len);
      for (std::size_t t = 0; t < obs_len; ++t) s.observed.push_back(track.points[start + t].pos);
      for (std::size_t t = 0; t < pred_len; ++t) {
        s.future.push_back(track.points[start + obs_len + t].pos);
      }
      out.push_back(std::move(s));
      if (summary) ++summary->windows;
    }
  }
  return out;
}

inline SplitPlan plan_leave_one_out(const std::vector<std::string>& scene_names,
                                    const std::string& held_out, double val_fraction,
                                    std::uint32_t seed) {
  SplitPlan plan;
  plan.val_fraction = val_fraction;
  plan.seed = seed;
  bool found = false;
  for (const auto& name : scene_names) {
    if (name == held_out) {
      found = true;
    } else {
      plan.train_scenes.push_back(name);
    }
  }
  if (!found) {
    throw std::invalid_argument("leave_one_out: unknown scene '" + held_out + "'");
  }
  plan.test_scene = held_out;
  return plan;
}

/// Test split = every window of the held-out scene; the other scenes'
/// windows are shuffled with the seed and a fixed fraction becomes the
/// validation set.
inline Split leave_one_out(const std::vector<SceneDataset>& scenes,
                           const std::string& held_out, std::size_t obs_len = 8,
                           std::size_t pred_len = 12, double val_fraction = 0.1,
                           std::uint32_t seed = 0, std::size_t stride = 1) {
  std::vector<std::string> names;
  names.reserve(scenes.size());
  for (const auto& s : scenes) names.push_back(s.scene_name);
  const SplitPlan plan = plan_leave_one_out(names, held_out, val_fraction, seed);

  Split split;
  std::vector<TrajectorySample> pool;
  for (const auto& scene : scenes) {
    auto windows = extract_windows(scene, obs_len, pred_len, stride);
    if (scene.scene_name == plan.test_scene) {
      split.test = std::move(windows);
    } else {
      pool.insert(pool.end(), std::make_move_iterator(windows.begin()),
                  std::make_move_iterator(windows.end()));
    }
  }
  std::mt19937 rng(seed);
  detail::deterministic_shuffle(pool, rng);
  const std::size_t n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(pool.size()));
  split.val.assign(std::make_move_iterator(pool.begin()),
                   std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(n_val)));
  split.train.assign(std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(n_val)),
                     std::make_move_iterator(pool.end()));
  return split;
}

}  // namespace trajcnn
