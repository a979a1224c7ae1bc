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

#ifndef OSKDFT_CONFIG_H_
#define OSKDFT_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "oskdft/data.h"
#include "oskdft/distillation.h"
#include "oskdft/model.h"
#include "oskdft/schedule.h"
#include "oskdft/speaker_head.h"

namespace oskdft {

enum class RunMode {
  kOsKdft,           // KD and SV losses in every step
  kKdftSequential,   // KD-only epochs, then SV fine-tuning epochs
  kKdThenFreeze,     // KD-only epochs, then head-only epochs on a frozen backbone
  kTunedTeacherKl,   // SV-tune the teacher, then distil its speaker logits
  kFtOnly,           // SV fine-tuning of the student, no teacher signal
  kTeacherPretrain,  // masked-frame pretraining of the teacher
};

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

// per_module: classifier / backbone / adapter schedules differ.
// shared: every group follows the classifier schedule.
enum class LrPolicy { kPerModule, kShared };

std::string to_string(LrPolicy p);
LrPolicy lr_policy_from_string(const std::string& s);

struct PretrainConfig {
  int epochs = 8;
  int batch_size = 16;
  double lr = 1e-3;
  double mask_prob = 0.05;  // chance that a frame starts a masked span
  int mask_span = 4;
  int n_bands = 8;          // log band energies predicted per frame
};

struct RunConfig {
  RunMode mode = RunMode::kOsKdft;
  std::string run_name;  // empty: derived from the arm label
  int epochs = 40;
  // Percent of `epochs` spent in the KD phase and in the second phase of the
  // sequential modes. kd + ft <= 100.
  int kd_percent = 50;
  int ft_percent = 50;
  // tau_tot is overwritten by each phase's length.
  ScheduleParams schedule;
  LossWeights loss;
  std::vector<uint64_t> seeds = {0};
  bool augment = false;
  // Only os_kdft uses adapters; every other mode trains the plain path.
  AdapterMode adapters = AdapterMode::kSplit;
  LrPolicy lr_policy = LrPolicy::kPerModule;
  int batch_size = 16;
  double crop_seconds = 2.0;
  double segment_seconds = 3.0;
  int teacher_tune_epochs = 0;  // 0: same as epochs
  int eval_every = 0;           // 0: evaluate only after the last epoch
  ModelConfig model;
  SpeakerHeadConfig head;       // n_speakers comes from the training corpus
  NoiseAugment noise;
  SpecAugmentParams spec;
  PretrainConfig pretrain;
  DataConfig data;

  int kd_epochs() const;
  int ft_epochs() const;
  int tune_epochs() const { return teacher_tune_epochs > 0 ? teacher_tune_epochs : epochs; }
  AdapterMode effective_adapters() const;
  // Throws ConfigError on the first violated invariant.
  void validate() const;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys, duplicate keys
// and malformed values throw ConfigError naming the line.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
// Every key in documented order; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& cfg);
// One line per key with its default and meaning.
std::string describe_config_keys();

// Human label of the training arm, e.g. "OS-KDFT (AS, LR)".
std::string arm_label(const RunConfig& cfg);
// Label reduced to [a-z0-9_]; the default run name.
std::string arm_slug(const RunConfig& cfg);

}  // namespace oskdft

#endif  // OSKDFT_CONFIG_H_
