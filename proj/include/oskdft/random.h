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

// Seeded random streams. Draws are built directly on the engine's bit
// output so results do not depend on the standard library's distributions,
// and no draw caches state outside the engine (checkpointing the engine is
// enough to resume a stream).

#ifndef OSKDFT_RANDOM_H_
#define OSKDFT_RANDOM_H_

#include <cstdint>
#include <random>
#include <string>

namespace oskdft {

using Rng = std::mt19937_64;

double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Inclusive range, unbiased.
int64_t uniform_int(Rng& rng, int64_t lo, int64_t hi);
double standard_normal(Rng& rng);

uint64_t derive_seed(uint64_t seed, const std::string& tag);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace oskdft

#endif  // OSKDFT_RANDOM_H_
