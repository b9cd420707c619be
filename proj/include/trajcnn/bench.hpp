#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "trajcnn/train.hpp"

namespace trajcnn {

struct LatencyReport {
  std::string model;
  std::size_t batch = 0;
  unsigned threads = 1;
  std::size_t iterations = 0;
  std::size_t warmup = 0;
  double mean_s = 0.0;    // arithmetic mean of raw per-iteration timings
  double median_s = 0.0;
  double p95_s = 0.0;
  double per_sample_us = 0.0;
  std::vector<double> raw_s;  // one timing per measured iteration, for audit
};

struct BenchTarget {
  std::string name;
  WorkerFactory make_worker;
};

/// Fixed random observation windows (random-walk tracks) used as benchmark
/// input; identical seed gives identical inputs.
inline std::vector<std::vector<Vec2>> make_bench_inputs(std::size_t obs_len,
                                                        std::size_t batch,
                                                        std::uint32_t seed) {
  std::mt19937 rng(seed);
  auto unit = [&]() { return static_cast<double>(rng()) * (1.0 / 4294967296.0); };
  std::vector<std::vector<Vec2>> out(batch);
  for (auto& track : out) {
    track.resize(obs_len);
    double x = 20.0 * unit() - 10.0;
    double y = 20.0 * unit() - 10.0;
    for (std::size_t t = 0; t < obs_len; ++t) {
      x += 0.8 * unit() - 0.4;
      y += 0.8 * unit() - 0.4;
      track[t] = Vec2{x, y};
    }
  }
  return out;
}

namespace detail {

// Persistent worker pool with a generation barrier; spawning threads inside
// the timed region would dominate the measurement.
class BenchPool {
 public:
  BenchPool(unsigned workers, std::function<void(unsigned)> body)
      : body_(std::move(body)) {
    for (unsigned w = 0; w < workers; ++w) {
      threads_.emplace_back([this, w]() { worker_loop(w); });
    }
  }

  ~BenchPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run_once() {
    std::unique_lock<std::mutex> lock(mu_);
    pending_ = threads_.size();
    ++generation_;
    cv_.notify_all();
    done_cv_.wait(lock, [this]() { return pending_ == 0; });
  }

 private:
  void worker_loop(unsigned id) {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&]() { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      body_(id);
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::function<void(unsigned)> body_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::uint64_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  const std::size_t idx = std::min<std::size_t>(
      n - 1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(n))) - 1);
  return sorted[idx];
}

}  // namespace detail

/// Runs `warmup` untimed then `iters` timed passes over the whole batch.
/// Workspaces are allocated up front so the timed region does no
/// per-iteration allocation. threads > 1 shards the batch over a persistent
/// worker pool and reports the thread count.
inline LatencyReport bench_inference(const BenchTarget& target,
                                     const std::vector<std::vector<Vec2>>& batch_inputs,
                                     std::size_t iters, std::size_t warmup,
                                     unsigned threads = 1) {
  if (iters < 1) throw std::invalid_argument("bench: need at least one timed iteration");
  if (batch_inputs.empty()) throw std::invalid_argument("bench: empty batch");
  const std::size_t batch = batch_inputs.size();
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(batch)));

  LatencyReport rep;
  rep.model = target.name;
  rep.batch = batch;
  rep.threads = n_workers;
  rep.iterations = iters;
  rep.warmup = warmup;
  rep.raw_s.reserve(iters);

  using clock = std::chrono::steady_clock;
  if (n_workers == 1) {
    PredictFn predict = target.make_worker();
    std::vector<Vec2> out;
    out.reserve(64);
    for (std::size_t i = 0; i < warmup; ++i) {
      for (const auto& obs : batch_inputs) predict(obs, out);
    }
    for (std::size_t i = 0; i < iters; ++i) {
      const auto t0 = clock::now();
      for (const auto& obs : batch_inputs) predict(obs, out);
      const auto t1 = clock::now();
      rep.raw_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
  } else {
    struct Shard {
      PredictFn predict;
      std::size_t lo, hi;
      std::vector<Vec2> out;
    };
    std::vector<Shard> shards(n_workers);
    const std::size_t chunk = (batch + n_workers - 1) / n_workers;
    for (unsigned w = 0; w < n_workers; ++w) {
      shards[w].predict = target.make_worker();
      shards[w].lo = std::min<std::size_t>(batch, w * chunk);
      shards[w].hi = std::min<std::size_t>(batch, (w + 1) * chunk);
    }
    detail::BenchPool pool(n_workers, [&](unsigned w) {
      Shard& s = shards[w];
      for (std::size_t i = s.lo; i < s.hi; ++i) s.predict(batch_inputs[i], s.out);
    });
    for (std::size_t i = 0; i < warmup; ++i) pool.run_once();
    for (std::size_t i = 0; i < iters; ++i) {
      const auto t0 = clock::now();
      pool.run_once();
      const auto t1 = clock::now();
      rep.raw_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
  }

  double sum = 0.0;
  for (double t : rep.raw_s) sum += t;
  rep.mean_s = sum / static_cast<double>(rep.raw_s.size());
  std::vector<double> sorted = rep.raw_s;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  rep.median_s = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  rep.p95_s = detail::percentile_sorted(sorted, 0.95);
  rep.per_sample_us = rep.mean_s / static_cast<double>(batch) * 1e6;
  return rep;
}

struct CompareResult {
  std::vector<LatencyReport> reports;
  std::vector<double> speedup_vs_ref;  // ref mean / model mean
  std::size_t ref_index = 0;
};

/// Benchmarks every target on the same inputs and reports speedups against
/// the named reference.
inline CompareResult compare(const std::vector<BenchTarget>& targets,
                             const std::vector<std::vector<Vec2>>& batch_inputs,
                             std::size_t iters, std::size_t warmup,
                             const std::string& ref_name, unsigned threads = 1) {
  if (targets.empty()) throw std::invalid_argument("compare: empty model list");
  CompareResult result;
  result.ref_index = targets.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].name == ref_name) result.ref_index = i;
    result.reports.push_back(bench_inference(targets[i], batch_inputs, iters, warmup, threads));
  }
  if (result.ref_index == targets.size()) {
    throw std::invalid_argument("compare: reference model '" + ref_name + "' not benchmarked");
  }
  const double ref_mean = result.reports[result.ref_index].mean_s;
  for (const auto& rep : result.reports) result.speedup_vs_ref.push_back(ref_mean / rep.mean_s);
  return result;
}

inline void latency_csv(const std::vector<LatencyReport>& reports, std::ostream& out,
                        const std::vector<double>* speedups = nullptr) {
  out << "model,batch,threads,mean_s,median_s,p95_s,per_sample_us";
  if (speedups) out << ",speedup";
  out << '\n';
  out.precision(9);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << r.model << ',' << r.batch << ',' << r.threads << ',' << r.mean_s << ','
        << r.median_s << ',' << r.p95_s << ',' << r.per_sample_us;
    if (speedups) out << ',' << (*speedups)[i];
    out << '\n';
  }
}

}  // namespace trajcnn
