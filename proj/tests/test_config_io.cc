// Copyright (c) 2026 The oskdft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "oskdft/checkpoint.h"
#include "oskdft/config.h"
#include "oskdft/init.h"
#include "oskdft/optimizer.h"

namespace oskdft {
namespace {

namespace fs = std::filesystem;

// ---- config ------------------------------------------------------------------

TEST(Config, FormatParseRoundTrip) {
  RunConfig c;
  c.mode = RunMode::kKdftSequential;
  c.kd_percent = 30;
  c.ft_percent = 70;
  c.seeds = {3, 9};
  c.schedule.eta_max = 0.1 + 0.2;  // not exactly representable as typed
  c.model.cnn_strides = {5, 4, 2};
  c.augment = true;
  c.data.seed = 77;
  const std::string text = format_run_config(c);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(format_run_config(back), text);
  EXPECT_EQ(back.schedule.eta_max, c.schedule.eta_max);
  EXPECT_EQ(back.seeds, c.seeds);
  EXPECT_EQ(back.model, c.model);
}

TEST(Config, CommentsBlankLinesAndOverrides) {
  const RunConfig c = parse_run_config("# header\n\nepochs = 12   # trailing\n  mode=ft_only\n");
  EXPECT_EQ(c.epochs, 12);
  EXPECT_EQ(c.mode, RunMode::kFtOnly);
  EXPECT_EQ(c.batch_size, RunConfig{}.batch_size);
}

TEST(Config, ErrorsNameTheLineAndKey) {
  auto message = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("epochs = 3\nbogus = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("epochs = 3\nbogus = 1\n").find("bogus"), std::string::npos);
  EXPECT_NE(message("epochs = 3\nepochs = 4\n").find("duplicate"), std::string::npos);
  EXPECT_NE(message("epochs three\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("epochs = x\n").find("epochs"), std::string::npos);
  EXPECT_NE(message("mode = fast\n").find("fast"), std::string::npos);
}

TEST(Config, EveryKeyIsDocumented) {
  const std::string doc = describe_config_keys();
  std::istringstream is(format_run_config(RunConfig{}));
  std::string line;
  while (std::getline(is, line)) {
    const std::string key = line.substr(0, line.find(' '));
    EXPECT_NE(doc.find(key), std::string::npos) << key;
  }
}

TEST(Config, ValidationRejectsBadSplits) {
  RunConfig c;
  c.kd_percent = 70;
  c.ft_percent = 40;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, PhaseLengthsAndAdapters) {
  RunConfig c;
  c.epochs = 40;
  c.kd_percent = 25;
  c.ft_percent = 75;
  EXPECT_EQ(c.kd_epochs(), 10);
  EXPECT_EQ(c.ft_epochs(), 30);
  EXPECT_EQ(c.effective_adapters(), AdapterMode::kSplit);
  c.mode = RunMode::kKdftSequential;
  EXPECT_EQ(c.effective_adapters(), AdapterMode::kNone);
}

TEST(Config, ArmLabels) {
  RunConfig c;
  EXPECT_EQ(arm_label(c), "OS-KDFT (AS, LR)");
  c.lr_policy = LrPolicy::kShared;
  EXPECT_EQ(arm_label(c), "OS-KDFT (AS)");
  c.adapters = AdapterMode::kShared;
  EXPECT_EQ(arm_label(c), "KDFT (AS param)");
  c.adapters = AdapterMode::kNone;
  EXPECT_EQ(arm_label(c), "KDFT");
  c.mode = RunMode::kKdftSequential;
  EXPECT_EQ(arm_label(c), "KD then FT 50:50");
  EXPECT_EQ(arm_slug(c), "kd_then_ft_50_50");
}

// ---- optimizer ---------------------------------------------------------------

TEST(Adam, MatchesTextbookUpdate) {
  ParameterStore p, g;
  p.add("encoder.0.w", Tensor({2}, std::vector<double>{1.0, -2.0}));
  Adam opt;
  double m = 0, v = 0, x = 1.0;
  for (int t = 1; t <= 5; ++t) {
    const double grad = 0.3 * t - 0.5;
    g = ParameterStore();
    g.add("encoder.0.w", Tensor({2}, std::vector<double>{grad, grad}));
    opt.step(p, g, [](const std::string&) { return 0.01; });
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.get("encoder.0.w")[0], x, 1e-15);
}

TEST(Adam, EntriesKeepTheirOwnStepCounts) {
  ParameterStore p, g1, g2;
  p.add("head.w", Tensor({1}, 0.0));
  p.add("adapter.0.w_up", Tensor({1}, 0.0));
  g1.add("head.w", Tensor({1}, 1.0));
  g2.add("adapter.0.w_up", Tensor({1}, 1.0));
  Adam opt;
  opt.step(p, g1, [](const std::string&) { return 0.1; });
  opt.step(p, g1, [](const std::string&) { return 0.1; });
  opt.step(p, g2, [](const std::string&) { return 0.1; });
  // A first step of Adam moves by lr (up to eps) whatever the gradient scale.
  EXPECT_NEAR(p.get("adapter.0.w_up")[0], -0.1, 1e-8);
}

TEST(Adam, StateRoundTrip) {
  ParameterStore p, g, saved;
  p.add("encoder.0.w", Tensor({3}, 1.0));
  g.add("encoder.0.w", Tensor({3}, std::vector<double>{0.1, -0.2, 0.3}));
  Adam a;
  a.step(p, g, [](const std::string&) { return 0.01; });
  std::map<std::string, std::string> meta;
  a.save(saved, meta);
  Adam b;
  b.load(saved, meta);
  EXPECT_TRUE(a == b);
}

TEST(Adam, GroupsFollowNamePrefixes) {
  EXPECT_EQ(group_of("head.class_w"), ParamGroup::kClassifier);
  EXPECT_EQ(group_of("adapter.0.w_down"), ParamGroup::kAdapter);
  EXPECT_EQ(group_of("encoder.0.ffn.w1"), ParamGroup::kBackbone);
  EXPECT_EQ(group_of("cnn.0.w"), ParamGroup::kBackbone);
}

// ---- checkpoints ---------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig cfg;
  Checkpoint c{cfg, random_teacher(cfg, 3), {{"epoch", "4"}, {"note", "two words"}}};
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  EXPECT_TRUE(back.params == c.params);
  EXPECT_EQ(back.params.hash(), c.params.hash());
  EXPECT_EQ(back.config, cfg);
  EXPECT_EQ(back.meta, c.meta);
}

TEST(Checkpoint, CorruptInputIsRejected) {
  ModelConfig cfg;
  const std::string bytes = serialize_checkpoint({cfg, random_teacher(cfg, 1), {}});
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 8)), std::runtime_error);
  EXPECT_THROW(parse_checkpoint("garbage"), std::runtime_error);
}

TEST(Checkpoint, AtomicWriteLeavesNoTemporaries) {
  const fs::path dir = fs::temp_directory_path() / "oskdft_test_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ModelConfig cfg;
  save_checkpoint(dir / "a.ckpt", {cfg, random_teacher(cfg, 2), {}});
  save_checkpoint(dir / "a.ckpt", {cfg, random_teacher(cfg, 3), {}});
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  EXPECT_EQ(files, 1);
  EXPECT_TRUE(load_checkpoint(dir / "a.ckpt").params == random_teacher(cfg, 3));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace oskdft
