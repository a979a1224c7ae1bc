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

#ifndef OSKDFT_INIT_H_
#define OSKDFT_INIT_H_

#include <cstdint>
#include <string>

#include "oskdft/model.h"
#include "oskdft/speaker_head.h"

namespace oskdft {

struct InitPolicy {
  bool adapter_zero_up = true;
};

// Resamples every entry matching `pattern` (see glob_match):
//   rank-2 -> U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = rows
//   adapter.*.w_up -> zeros under the zero-up policy
//   *.g (norm gains) -> ones; other rank-1 entries -> zeros
// Each entry draws from its own stream derived from (seed, name), so the
// result for one entry does not depend on which others match.
// Throws std::invalid_argument when nothing matches.
ParameterStore init_random(const std::string& pattern, const ParameterStore& store,
                           uint64_t seed, InitPolicy policy = {});

// Zero-filled store with the given layout.
ParameterStore empty_store(const std::vector<ParamSpec>& layout, uint64_t seed);

ParameterStore random_teacher(const ModelConfig& cfg, uint64_t seed);

// Student backbone + adapters + head. Front-end and encoder layers
// 0..n_layers_student-1 are copied from the teacher's layers with the same
// index; adapters and head are drawn from seed. The teacher may hold any
// number of layers >= n_layers_student; extra ones are ignored.
// Throws DimensionError naming the first mismatched entry.
ParameterStore init_student_from_teacher(const ParameterStore& teacher, const ModelConfig& cfg,
                                         const SpeakerHeadConfig& head, uint64_t seed);

std::vector<ParamSpec> student_layout(const ModelConfig& cfg, const SpeakerHeadConfig& head);

}  // namespace oskdft

#endif  // OSKDFT_INIT_H_
