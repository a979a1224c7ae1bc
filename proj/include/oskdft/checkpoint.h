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

// Single-file checkpoint container.
//
//   oskdft-checkpoint 1
//   config d_model=16 n_layers_teacher=4 ...
//   seed <uint64>
//   meta <key> <value to end of line>      (zero or more)
//   entry <name> f64 <d0>x<d1>...          (one per array, "scalar" for rank 0)
//   data
//   <raw little-endian float64 arrays in entry order>

#ifndef OSKDFT_CHECKPOINT_H_
#define OSKDFT_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "oskdft/model.h"
#include "oskdft/parameter_store.h"

namespace oskdft {

struct Checkpoint {
  ModelConfig config;
  ParameterStore params;
  std::map<std::string, std::string> meta;
};

std::string model_config_to_string(const ModelConfig& cfg);
ModelConfig model_config_from_string(const std::string& s);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

// Writes to a temporary sibling and renames, so readers never see a partial file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace oskdft

#endif  // OSKDFT_CHECKPOINT_H_
