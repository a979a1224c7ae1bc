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

#ifndef OSKDFT_BENCHMARK_H_
#define OSKDFT_BENCHMARK_H_

#include <cstdint>
#include <string>

#include "oskdft/model.h"
#include "oskdft/parameter_store.h"
#include "oskdft/speaker_head.h"

namespace oskdft {

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;  // population standard deviation over repetitions
  int repetitions = 0;
};

struct BenchmarkOptions {
  double seconds = 2.0;  // fixed input length
  int sample_rate = 4000;
  int warmup = 10;
  int repetitions = 100;
  uint64_t seed = 0;  // input waveform
};

// Wall clock of encoder_forward on one (1, samples) input, warmup runs
// discarded.
LatencyStats time_encoder(const ParameterStore& params, const ModelConfig& cfg, int n_layers,
                          Path path, const BenchmarkOptions& opt);

struct BenchmarkReport {
  LatencyStats teacher;
  LatencyStats student;
  double ratio = 0.0;  // student mean / teacher mean
  int64_t params_teacher = 0;
  int64_t params_student = 0;           // backbone + head, adapters excluded
  int64_t params_student_adapters = 0;  // params_student + adapters
  int64_t params_adapters = 0;
};

// The teacher must hold the teacher layout of cfg and the student the
// student layout (adapters included) plus head.*; anything else throws
// DimensionError. The student runs its SV inference path.
BenchmarkReport benchmark_models(const ParameterStore& teacher, const ParameterStore& student,
                                 const ModelConfig& cfg, const SpeakerHeadConfig& head,
                                 AdapterMode mode, const BenchmarkOptions& opt);

// Closed-form counts from the configuration alone. Student excludes adapters
// and includes the speaker head; teacher is the backbone only.
int64_t analytic_student_params(const ModelConfig& cfg, const SpeakerHeadConfig& head);
int64_t analytic_teacher_params(const ModelConfig& cfg);

// key=value lines, fixed formatting.
std::string format_benchmark(const BenchmarkReport& r);

}  // namespace oskdft

#endif  // OSKDFT_BENCHMARK_H_
