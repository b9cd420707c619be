#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support/synthetic.hpp"
#include "trajcnn/checkpoint.hpp"

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

CmdResult run_cli(const std::string& args, const synthetic::TempDir& tmp) {
  static int counter = 0;
  const auto out_file = tmp.path / ("stdout_" + std::to_string(counter) + ".txt");
  const auto err_file = tmp.path / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(TRAJCNN_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = (status == -1) ? -1 : WEXITSTATUS(status);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) {
    if (c == '\n') ++n;
  }
  return n;
}

struct CliFixture : ::testing::Test {
  synthetic::TempDir tmp{"cli"};
  std::filesystem::path data_dir;

  void SetUp() override {
    data_dir = tmp.path / "data";
    synthetic::write_corpus(synthetic::linear_corpus(4, 20, 77), data_dir);
  }

  std::string train_args(const std::string& extra) {
    return "train --data-dir " + data_dir.string() + " --hold-out eth --embed 8 " +
           "--epochs 3 --patience 2 --batch 4 " + extra;
  }
};

using CliTest = CliFixture;

}  // namespace

TEST_F(CliTest, TrainWritesCheckpointAndLog) {
  const auto ckpt = tmp.path / "m.ckpt";
  const auto r = run_cli(train_args("--out " + ckpt.string() + " --seed 7"), tmp);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(ckpt));
  EXPECT_TRUE(std::filesystem::exists(ckpt.string() + ".log.csv"));
  EXPECT_NE(r.err.find("val loss"), std::string::npos);

  const std::string log = slurp(ckpt.string() + ".log.csv");
  EXPECT_EQ(log.substr(0, 26), "epoch,train_loss,val_loss\n");

  const auto loaded = trajcnn::load_checkpoint(ckpt);
  EXPECT_EQ(loaded.config.embed_dim, 8u);
  EXPECT_EQ(loaded.config.seed, 7u);
}

TEST_F(CliTest, TrainIsByteDeterministicPerSeed) {
  const auto a = tmp.path / "a.ckpt";
  const auto b = tmp.path / "b.ckpt";
  ASSERT_EQ(run_cli(train_args("--out " + a.string() + " --seed 7"), tmp).exit_code, 0);
  ASSERT_EQ(run_cli(train_args("--out " + b.string() + " --seed 7"), tmp).exit_code, 0);
  EXPECT_EQ(slurp(a), slurp(b));

  const auto c = tmp.path / "c.ckpt";
  ASSERT_EQ(run_cli(train_args("--out " + c.string() + " --seed 8"), tmp).exit_code, 0);
  EXPECT_NE(slurp(a), slurp(c));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli(train_args("--out x.ckpt --layers 0"), tmp).exit_code, 2);
  EXPECT_EQ(run_cli(train_args("--out x.ckpt --kernel 4"), tmp).exit_code, 2);
  EXPECT_EQ(run_cli("train --no-such-flag", tmp).exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate", tmp).exit_code, 2);
}

TEST_F(CliTest, EvalEmitsJsonReport) {
  const auto ckpt = tmp.path / "m.ckpt";
  ASSERT_EQ(run_cli(train_args("--out " + ckpt.string()), tmp).exit_code, 0);
  const auto r = run_cli("eval --ckpt " + ckpt.string() + " --data-dir " +
                             data_dir.string() + " --hold-out eth",
                         tmp);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("ade"));
  EXPECT_TRUE(j.contains("fde"));
  EXPECT_TRUE(j.contains("n"));
  EXPECT_TRUE(j.at("scenes").contains("eth"));
  EXPECT_GT(j.at("n").get<std::size_t>(), 0u);
}

TEST_F(CliTest, EvalPerSampleDumpHasPredictedAndTruePoints) {
  const auto ckpt = tmp.path / "m.ckpt";
  ASSERT_EQ(run_cli(train_args("--out " + ckpt.string()), tmp).exit_code, 0);
  const auto csv_path = tmp.path / "per_sample.csv";
  const auto r = run_cli("eval --ckpt " + ckpt.string() + " --data-dir " +
                             data_dir.string() + " --hold-out eth --per-sample " +
                             csv_path.string(),
                         tmp);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::ifstream csv(csv_path);
  std::string header;
  std::getline(csv, header);
  EXPECT_NE(header.find("pred_x0"), std::string::npos);
  EXPECT_NE(header.find("pred_x11"), std::string::npos);
  EXPECT_NE(header.find("true_x11"), std::string::npos);
  std::string row;
  std::getline(csv, row);
  // scene,ped,frame,ade,fde + 24 predicted + 24 true coordinates
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 4 + 48);
}

TEST_F(CliTest, EvalRejectsConfigMismatchAndBadCheckpoints) {
  const auto ckpt = tmp.path / "m.ckpt";
  ASSERT_EQ(run_cli(train_args("--out " + ckpt.string()), tmp).exit_code, 0);
  const auto mismatch = run_cli("eval --ckpt " + ckpt.string() + " --data-dir " +
                                    data_dir.string() + " --hold-out eth --obs-len 6",
                                tmp);
  EXPECT_EQ(mismatch.exit_code, 1);
  EXPECT_NE(mismatch.err.find("obs_len"), std::string::npos);

  const auto junk = tmp.path / "junk.ckpt";
  std::ofstream(junk) << "definitely not weights";
  const auto bad = run_cli("eval --ckpt " + junk.string() + " --data-dir " +
                               data_dir.string() + " --hold-out eth",
                           tmp);
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.err.find("not a checkpoint"), std::string::npos);
}

TEST_F(CliTest, PredictEmitsTwelveFixedPointLines) {
  // a zero-weight model predicts the last observed position everywhere
  trajcnn::ModelConfig cfg;
  auto model = trajcnn::TrajCnn<float>::build(cfg);
  for (const auto& p : model.params()) {
    for (auto& v : p->data) v = 0.0f;
  }
  const auto ckpt = tmp.path / "zero.ckpt";
  trajcnn::save_checkpoint(trajcnn::make_checkpoint(model), ckpt);

  const auto obs_file = tmp.path / "obs.txt";
  {
    std::ofstream obs(obs_file);
    for (int t = 0; t < 8; ++t) obs << "2.5 -1.25\n";
  }
  const auto r = run_cli("predict --ckpt " + ckpt.string() + " --obs " + obs_file.string(),
                         tmp);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out), 12u);
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) EXPECT_EQ(line, "2.500000 -1.250000");
}

TEST_F(CliTest, PredictRejectsWrongLineCount) {
  trajcnn::ModelConfig cfg;
  const auto ckpt = tmp.path / "m8.ckpt";
  trajcnn::save_checkpoint(trajcnn::make_checkpoint(trajcnn::TrajCnn<float>::build(cfg)),
                           ckpt);
  const auto obs_file = tmp.path / "short.txt";
  {
    std::ofstream obs(obs_file);
    for (int t = 0; t < 7; ++t) obs << "0 0\n";
  }
  const auto r = run_cli("predict --ckpt " + ckpt.string() + " --obs " + obs_file.string(),
                         tmp);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("expected 8"), std::string::npos);
}

TEST_F(CliTest, BenchEmitsCsvWithOptionalSpeedup) {
  const auto plain = run_cli("bench --batch 2 --iters 5 --warmup 1 --embed 8", tmp);
  ASSERT_EQ(plain.exit_code, 0) << plain.err;
  std::istringstream lines(plain.out);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "model,batch,threads,mean_s,median_s,p95_s,per_sample_us");
  std::string row1, row2;
  std::getline(lines, row1);
  std::getline(lines, row2);
  EXPECT_EQ(row1.substr(0, 4), "cnn,");
  EXPECT_EQ(row2.substr(0, 5), "lstm,");

  const auto with_ref =
      run_cli("bench --batch 2 --iters 5 --warmup 1 --embed 8 --ref lstm", tmp);
  ASSERT_EQ(with_ref.exit_code, 0) << with_ref.err;
  std::istringstream ref_lines(with_ref.out);
  std::getline(ref_lines, header);
  EXPECT_EQ(header, "model,batch,threads,mean_s,median_s,p95_s,per_sample_us,speedup");
}

TEST_F(CliTest, AblateEmitsRowsPerVariant) {
  const auto layers = run_cli("ablate --mode layers --data-dir " + data_dir.string() +
                                  " --hold-out eth --embed 4 --epochs 2 --patience 1 --batch 4",
                              tmp);
  ASSERT_EQ(layers.exit_code, 0) << layers.err;
  EXPECT_NE(layers.out.find("\n3,"), std::string::npos);
  EXPECT_NE(layers.out.find("\n4,"), std::string::npos);
  EXPECT_NE(layers.out.find("\n5,"), std::string::npos);
  EXPECT_NE(layers.out.find(",AVG,"), std::string::npos);

  const auto decode = run_cli("ablate --mode decode --data-dir " + data_dir.string() +
                                  " --hold-out eth --embed 4 --epochs 2 --patience 1 --batch 4",
                              tmp);
  ASSERT_EQ(decode.exit_code, 0) << decode.err;
  EXPECT_NE(decode.out.find("multi,"), std::string::npos);
  EXPECT_NE(decode.out.find("sequential,"), std::string::npos);
}
