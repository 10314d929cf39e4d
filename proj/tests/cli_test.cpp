// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "distilkit/cli.hpp"
#include "support.hpp"

namespace distilkit {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  Cli() : dir_("cli") {
    nlohmann::json cfg = {
        {"seed", 5},
        {"tasks", {"offense"}},
        {"datasets", {{"offense", "offense.jsonl"}}},
        {"output_dir", "runs"},
        {"train", {{"epochs", 2}, {"batch_size", 8}, {"learning_rate", 0.003}}},
        {"teacher_model", {{"d_model", 8}, {"n_heads", 2}, {"n_layers", 1}, {"d_ff", 16}, {"max_len", 16}}},
        {"student_model", {{"d_model", 8}, {"n_heads", 2}, {"n_layers", 1}, {"d_ff", 16}, {"max_len", 16}}},
        {"synthetic", {{"examples_per_task", 60}, {"vocab_size", 60}, {"keyword_count_per_class", 2}, {"max_tokens", 10}}},
        {"augmentations", {{{"kind", "asda"}}}}};
    config_ = (dir_ / "config.json").string();
    testing::write_file(config_, cfg.dump());
  }
  testing::TempDir dir_;
  std::string config_;
};

TEST_F(Cli, SynthIsReproducible) {
  ASSERT_EQ(cli({"synth", "--config", config_}).code, kExitOk);
  const std::string first = testing::read_file(dir_ / "offense.jsonl");
  EXPECT_FALSE(first.empty());
  ASSERT_EQ(cli({"synth", "--config", config_}).code, kExitOk);
  EXPECT_EQ(testing::read_file(dir_ / "offense.jsonl"), first);
}

TEST_F(Cli, TrainThenEval) {
  ASSERT_EQ(cli({"synth", "--config", config_}).code, kExitOk);
  const CliRun train = cli({"train", "--config", config_, "--format", "machine"});
  ASSERT_EQ(train.code, kExitOk) << train.err;
  EXPECT_EQ(nlohmann::json::parse(train.out)["pipeline"], "finetune");
  const std::string ckpt = (dir_ / "runs/finetune.ckpt").string();
  EXPECT_TRUE(std::filesystem::exists(ckpt + ".vocab"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "runs/finetune.report.txt"));

  const CliRun eval = cli({"eval", "--checkpoint", ckpt, "--data", (dir_ / "offense.jsonl").string()});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  EXPECT_NE(eval.out.find("offense"), std::string::npos) << eval.out;
}

TEST_F(Cli, AugmentWritesMaskReport) {
  ASSERT_EQ(cli({"synth", "--config", config_}).code, kExitOk);
  const std::string in = (dir_ / "offense.jsonl").string(), out = (dir_ / "aug.jsonl").string();
  const std::string masks = (dir_ / "masks.json").string();
  const CliRun r = cli({"augment", "--config", config_, "--input", in, "--output", out, "--mask-report", masks});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(testing::read_file(masks));
  ASSERT_FALSE(doc.empty());
  for (const auto& entry : doc) {
    const auto begin = entry["e2_begin"].get<std::size_t>(), end = entry["e2_end"].get<std::size_t>();
    EXPECT_EQ(entry["masked"].size(), (15 * (end - begin) + 99) / 100);
    for (const auto& m : entry["masked"]) {
      EXPECT_GE(m["position"].get<std::size_t>(), begin);
      EXPECT_LT(m["position"].get<std::size_t>(), end);
    }
  }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  const CliRun missing = cli({"train", "--config", config_});
  EXPECT_EQ(missing.code, kExitValidation);
  EXPECT_NE(missing.err.find("offense.jsonl"), std::string::npos) << missing.err;
  EXPECT_EQ(cli({"train", "--config", (dir_ / "nope.json").string()}).code, kExitValidation);
  EXPECT_EQ(cli({"eval"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

}  // namespace
}  // namespace distilkit
