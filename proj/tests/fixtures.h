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

// Small end-to-end settings shared by the trainer and CLI tests. Everything
// here runs in well under a second per epoch.

#ifndef OSKDFT_TESTS_FIXTURES_H_
#define OSKDFT_TESTS_FIXTURES_H_

#include <filesystem>
#include <string>

#include "oskdft/config.h"
#include "oskdft/data.h"

namespace fixture {

inline oskdft::RunConfig tiny_run_config() {
  oskdft::RunConfig c;
  c.epochs = 4;
  c.batch_size = 4;
  c.crop_seconds = 0.4;
  c.segment_seconds = 0.8;
  c.schedule.warmup = 2;
  c.model.d_model = 8;
  c.model.n_heads = 2;
  c.model.n_layers_teacher = 2;
  c.model.n_layers_student = 1;
  c.model.adapter_rank = 2;
  c.model.cnn_strides = {4, 2};
  c.head.embed_dim = 8;
  c.pretrain.epochs = 2;
  c.pretrain.batch_size = 4;
  c.pretrain.n_bands = 4;
  c.data.n_train_speakers = 4;
  c.data.train_utts_per_speaker = 3;
  c.data.n_eval_speakers = 3;
  c.data.eval_utts_per_speaker = 3;
  c.data.n_pretrain_speakers = 2;
  c.data.pretrain_utts_per_speaker = 2;
  c.data.n_target_trials = 6;
  c.data.n_nontarget_trials = 10;
  c.data.synth.sample_rate = 2000;
  c.data.synth.min_seconds = 1.0;
  c.data.synth.max_seconds = 1.5;
  return c;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("oskdft_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture

#endif  // OSKDFT_TESTS_FIXTURES_H_
