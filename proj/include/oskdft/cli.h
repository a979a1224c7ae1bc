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

// Command-line surface. Every artifact lives under the --workdir root:
//
//   data/{train,eval,pretrain}/manifest.txt   gen-data
//   data/trials.txt, data/config.txt
//   teacher.ckpt, teacher_config.txt           pretrain-teacher
//   teacher_pretrain.csv
//   runs/<run name>/seed_<s>/                  train
//   benchmark.txt                              benchmark

#ifndef OSKDFT_CLI_H_
#define OSKDFT_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace oskdft {

// args excludes the program name. Returns the process exit code; errors are
// reported on err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Rank of an arm label in the comparison table: ablation arms in experiment
// order after the baselines; unknown labels sort last.
int arm_rank(const std::string& label);

}  // namespace oskdft

#endif  // OSKDFT_CLI_H_
