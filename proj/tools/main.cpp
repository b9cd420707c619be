// Command-line front end: train / eval / predict / bench / ablate.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trajcnn/trajcnn.hpp"

namespace {

using namespace trajcnn;

struct ModelFlags {
  std::size_t obs_len = 8;
  std::size_t pred_len = 12;
  std::size_t embed = 32;
  std::size_t layers = 4;
  std::size_t kernel = 3;
  std::string decode_mode = "multi";
  std::string input_mode = "offsets";
  std::uint32_t seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--obs-len", obs_len, "observed steps per window")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--pred-len", pred_len, "predicted steps per window")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--embed", embed, "embedding width")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--layers", layers, "convolution layers")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--kernel", kernel, "convolution kernel size (odd)")
        ->check(CLI::PositiveNumber)
        ->check(CLI::Validator(
            [](std::string& v) -> std::string {
              try {
                if (std::stoll(v) % 2 == 0) return "kernel size must be odd";
              } catch (const std::exception&) {
                return "kernel size must be an odd integer";
              }
              return {};
            },
            "ODD"))
        ->capture_default_str();
    cmd->add_option("--decode-mode", decode_mode, "multi|sequential")
        ->check(CLI::IsMember({"multi", "sequential"}))->capture_default_str();
    cmd->add_option("--input-mode", input_mode, "offsets|absolute")
        ->check(CLI::IsMember({"offsets", "absolute"}))->capture_default_str();
    cmd->add_option("--seed", seed, "rng seed")->capture_default_str();
  }

  ModelConfig to_config() const {
    ModelConfig c;
    c.obs_len = obs_len;
    c.pred_len = pred_len;
    c.embed_dim = embed;
    c.num_layers = layers;
    c.kernel_size = kernel;
    c.decode_mode = decode_mode_from_string(decode_mode);
    c.input_mode = input_mode_from_string(input_mode);
    c.seed = seed;
    return c;
  }
};

struct TrainFlags {
  std::size_t batch = 32;
  std::size_t epochs = 300;
  std::size_t patience = 10;
  double lr = 0.001;
  double val_frac = 0.1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--batch", batch, "minibatch size")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--epochs", epochs, "maximum training epochs")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--patience", patience, "early-stopping patience (epochs)")
        ->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--val-frac", val_frac, "fraction of train windows held for validation")
        ->check(CLI::Range(0.0, 0.999))->capture_default_str();
  }

  TrainConfig to_config(const ModelFlags& model, ModelKind kind) const {
    TrainConfig c;
    c.batch_size = batch;
    c.max_epochs = epochs;
    c.patience = patience;
    c.lr = lr;
    c.val_fraction = val_frac;
    c.seed = model.seed;
    c.kind = kind;
    c.model = model.to_config();
    return c;
  }
};

void warn_if_config_suspect(const ModelConfig& cfg) {
  const std::string w = config_warning(cfg);
  if (!w.empty()) std::cerr << "warning: " << w << "\n";
}

int run_train(const std::string& data_dir, const std::string& hold_out,
              const std::string& out_path, std::string log_path,
              const std::string& model_kind, const ModelFlags& mf, const TrainFlags& tf) {
  const TrainConfig cfg = tf.to_config(mf, model_kind_from_string(model_kind));
  cfg.validate();
  warn_if_config_suspect(cfg.model);

  const auto scenes = load_all_scenes(data_dir, &std::cerr);
  Split split = leave_one_out(scenes, hold_out, cfg.model.obs_len, cfg.model.pred_len,
                              cfg.val_fraction, cfg.seed);
  std::cerr << "training on " << split.train.size() << " windows, validating on "
            << split.val.size() << ", held-out test windows: " << split.test.size() << "\n";
  TrainResult result = train(split.train, split.val, cfg);
  save_checkpoint(result.checkpoint, out_path);

  if (log_path.empty()) log_path = out_path + ".log.csv";
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write train log: " + log_path);
  result.log.to_csv(log);

  const auto& best = result.log.epochs.at(result.log.best_epoch);
  std::cerr << "stopped after " << result.log.epochs.size() << " epochs ("
            << result.log.stop_reason << ")\n";
  std::cerr << "best epoch " << result.log.best_epoch << ", final val loss "
            << best.val_loss << "\n";
  std::cerr << "checkpoint written to " << out_path << ", log to " << log_path << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& hold_out, const std::string& per_sample_path,
             unsigned threads, std::size_t expect_obs, std::size_t expect_pred,
             bool with_timing) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (expect_obs != 0 && expect_obs != ckpt.config.obs_len) {
    throw std::runtime_error("checkpoint obs_len is " + std::to_string(ckpt.config.obs_len) +
                             ", but --obs-len " + std::to_string(expect_obs) + " was requested");
  }
  if (expect_pred != 0 && expect_pred != ckpt.config.pred_len) {
    throw std::runtime_error("checkpoint pred_len is " + std::to_string(ckpt.config.pred_len) +
                             ", but --pred-len " + std::to_string(expect_pred) + " was requested");
  }

  const auto scenes = load_all_scenes(data_dir, &std::cerr);
  const SceneDataset* held = nullptr;
  for (const auto& s : scenes) {
    if (s.scene_name == hold_out) held = &s;
  }
  if (!held) throw std::runtime_error("scene '" + hold_out + "' not found in " + data_dir);
  const auto samples = extract_windows(*held, ckpt.config.obs_len, ckpt.config.pred_len);
  if (samples.empty()) {
    throw std::runtime_error("scene '" + hold_out + "' has no windows of length " +
                             std::to_string(ckpt.config.obs_len + ckpt.config.pred_len));
  }

  std::vector<PerSampleEval> per_sample;
  EvalReport report = evaluate(make_worker_factory(ckpt), samples, threads,
                               per_sample_path.empty() ? nullptr : &per_sample);
  if (!with_timing) report.timing.reset();  // keeps the JSON seed-deterministic
  std::cout << to_json(report).dump() << "\n";

  if (!per_sample_path.empty()) {
    std::ofstream csv(per_sample_path);
    if (!csv) throw std::runtime_error("cannot write per-sample csv: " + per_sample_path);
    csv << "scene,ped,start_frame,ade,fde";
    for (std::size_t t = 0; t < ckpt.config.pred_len; ++t) {
      csv << ",pred_x" << t << ",pred_y" << t;
    }
    for (std::size_t t = 0; t < ckpt.config.pred_len; ++t) {
      csv << ",true_x" << t << ",true_y" << t;
    }
    csv << "\n";
    csv.setf(std::ios::fixed);
    csv.precision(6);
    for (const auto& r : per_sample) {
      csv << r.sample->scene_name << ',' << r.sample->ped_id << ',' << r.sample->start_frame
          << ',' << r.ade << ',' << r.fde;
      for (const auto& p : r.pred) csv << ',' << p.x << ',' << p.y;
      for (const auto& p : r.sample->future) csv << ',' << p.x << ',' << p.y;
      csv << "\n";
    }
    std::cerr << "per-sample predictions written to " << per_sample_path << "\n";
  }
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& obs_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);

  std::vector<Vec2> observed;
  auto parse_obs = [&](std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields(line);
      double x, y;
      if (!(fields >> x >> y)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw std::runtime_error("observation line " + std::to_string(line_no) +
                                 ": expected 'x y'");
      }
      observed.push_back(Vec2{x, y});
    }
  };
  if (obs_path == "-") {
    parse_obs(std::cin);
  } else {
    std::ifstream in(obs_path);
    if (!in) throw std::runtime_error("cannot open observation file: " + obs_path);
    parse_obs(in);
  }
  if (observed.size() != ckpt.config.obs_len) {
    throw std::runtime_error("expected " + std::to_string(ckpt.config.obs_len) +
                             " input lines, got " + std::to_string(observed.size()));
  }

  PredictFn predict = make_worker_factory(ckpt)();
  std::vector<Vec2> pred;
  predict(observed, pred);
  std::cout.setf(std::ios::fixed);
  std::cout.precision(6);
  for (const auto& p : pred) std::cout << p.x << ' ' << p.y << "\n";
  return 0;
}

int run_bench(std::size_t batch, std::size_t iters, std::size_t warmup, unsigned threads,
              const std::string& ref, const std::string& dump_raw, const ModelFlags& mf) {
  const ModelConfig cfg = mf.to_config();
  auto cnn = std::make_shared<TrajCnn<float>>(TrajCnn<float>::build(cfg));
  auto lstm = std::make_shared<LstmModel<float>>(LstmModel<float>::build(cfg));

  std::vector<BenchTarget> targets;
  targets.push_back({"cnn", [cnn]() -> PredictFn {
                       auto p = std::make_shared<CnnPredictor<float>>(*cnn);
                       return [cnn, p](std::span<const Vec2> obs, std::vector<Vec2>& out) {
                         p->predict(obs, out);
                       };
                     }});
  targets.push_back({"lstm", [lstm]() -> PredictFn {
                       auto p = std::make_shared<LstmPredictor<float>>(*lstm);
                       return [lstm, p](std::span<const Vec2> obs, std::vector<Vec2>& out) {
                         p->predict(obs, out);
                       };
                     }});

  const auto inputs = make_bench_inputs(cfg.obs_len, batch, cfg.seed);
  if (ref.empty()) {
    std::vector<LatencyReport> reports;
    for (const auto& t : targets) {
      reports.push_back(bench_inference(t, inputs, iters, warmup, threads));
    }
    latency_csv(reports, std::cout);
    if (!dump_raw.empty()) {
      std::ofstream raw(dump_raw);
      raw << "model,iteration,seconds\n";
      raw.precision(9);
      for (const auto& r : reports) {
        for (std::size_t i = 0; i < r.raw_s.size(); ++i) {
          raw << r.model << ',' << i << ',' << r.raw_s[i] << "\n";
        }
      }
    }
    return 0;
  }

  const CompareResult cmp = compare(targets, inputs, iters, warmup, ref, threads);
  latency_csv(cmp.reports, std::cout, &cmp.speedup_vs_ref);
  if (!dump_raw.empty()) {
    std::ofstream raw(dump_raw);
    raw << "model,iteration,seconds\n";
    raw.precision(9);
    for (const auto& r : cmp.reports) {
      for (std::size_t i = 0; i < r.raw_s.size(); ++i) {
        raw << r.model << ',' << i << ',' << r.raw_s[i] << "\n";
      }
    }
  }
  return 0;
}

int run_ablate(const std::string& mode, const std::string& data_dir,
               const std::string& hold_out, const ModelFlags& mf, const TrainFlags& tf) {
  const TrainConfig base = tf.to_config(mf, ModelKind::kCnn);
  base.validate();
  const auto scenes = load_all_scenes(data_dir, &std::cerr);
  std::vector<std::string> folds;
  if (hold_out.empty()) {
    for (const auto& s : scenes) folds.push_back(s.scene_name);
  } else {
    folds.push_back(hold_out);
  }

  std::vector<AblationRow> rows;
  if (mode == "layers") {
    rows = ablate_layers(scenes, {3, 4, 5}, base, folds);
  } else {
    rows = ablate_decode_mode(scenes, base, folds);
  }
  ablation_csv(rows, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajectory prediction: convolutional predictor, baselines, evaluation"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model with leave-one-out splits");
  std::string train_data, train_hold, train_out, train_log, train_model = "cnn";
  ModelFlags train_mf;
  TrainFlags train_tf;
  train_cmd->add_option("--data-dir", train_data, "dataset root (scene subdirectories)")
      ->required();
  train_cmd->add_option("--hold-out", train_hold, "scene excluded from training")->required();
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--log", train_log, "train log CSV path (default <out>.log.csv)");
  train_cmd->add_option("--model", train_model, "cnn|lstm")
      ->check(CLI::IsMember({"cnn", "lstm"}));
  train_mf.attach(train_cmd);
  train_tf.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a held-out scene");
  std::string eval_ckpt, eval_data, eval_hold, eval_per_sample;
  unsigned eval_threads = 1;
  std::size_t eval_obs = 0, eval_pred = 0;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data-dir", eval_data, "dataset root")->required();
  eval_cmd->add_option("--hold-out", eval_hold, "scene to evaluate")->required();
  eval_cmd->add_option("--per-sample", eval_per_sample, "write per-window predictions CSV");
  eval_cmd->add_option("--threads", eval_threads, "evaluation worker threads")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--obs-len", eval_obs, "must match the checkpoint when given");
  eval_cmd->add_option("--pred-len", eval_pred, "must match the checkpoint when given");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict future steps for one window");
  std::string predict_ckpt, predict_obs = "-";
  predict_cmd->add_option("--ckpt", predict_ckpt, "checkpoint path")->required();
  predict_cmd->add_option("--obs", predict_obs, "observation file ('-' = stdin), one 'x y' per line");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "inference latency comparison");
  std::size_t bench_batch = 32, bench_iters = 1000, bench_warmup = 200;
  unsigned bench_threads = 1;
  std::string bench_ref, bench_dump;
  ModelFlags bench_mf;
  bench_cmd->add_option("--batch", bench_batch, "samples per timed iteration")
      ->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--iters", bench_iters, "timed iterations")
      ->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--warmup", bench_warmup, "untimed warmup iterations")
      ->capture_default_str();
  bench_cmd->add_option("--threads", bench_threads, "worker threads for the parallel mode")
      ->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--ref", bench_ref, "reference model for the speedup column")
      ->check(CLI::IsMember({"cnn", "lstm"}));
  bench_cmd->add_option("--dump-raw", bench_dump, "write raw per-iteration timings CSV");
  bench_mf.attach(bench_cmd);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "layer-count or decode-mode ablation");
  std::string ablate_mode, ablate_data, ablate_hold;
  ModelFlags ablate_mf;
  TrainFlags ablate_tf;
  ablate_cmd->add_option("--mode", ablate_mode, "layers|decode")
      ->required()
      ->check(CLI::IsMember({"layers", "decode"}));
  ablate_cmd->add_option("--data-dir", ablate_data, "dataset root")->required();
  ablate_cmd->add_option("--hold-out", ablate_hold, "single fold (default: all scenes)");
  ablate_mf.attach(ablate_cmd);
  ablate_tf.attach(ablate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\nrun with --help for usage\n";
    return 2;
  }

  try {
    if (*train_cmd) {
      return run_train(train_data, train_hold, train_out, train_log, train_model, train_mf,
                       train_tf);
    }
    if (*eval_cmd) {
      return run_eval(eval_ckpt, eval_data, eval_hold, eval_per_sample, eval_threads,
                      eval_obs, eval_pred);
    }
    if (*predict_cmd) return run_predict(predict_ckpt, predict_obs);
    if (*bench_cmd) {
      return run_bench(bench_batch, bench_iters, bench_warmup, bench_threads, bench_ref,
                       bench_dump, bench_mf);
    }
    if (*ablate_cmd) {
      return run_ablate(ablate_mode, ablate_data, ablate_hold, ablate_mf, ablate_tf);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
