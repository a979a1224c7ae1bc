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

// Teacher and student networks.
//
// Both share one topology family: a strided convolutional front-end followed
// by pre-norm transformer encoder layers. The student keeps the lowest
// n_layers_student layers and adds one bottleneck adapter per layer:
//
//   plain:   x~ = x + MHA(LN1(x));   y  = x~ + FFN(LN2(x~))
//   adapter: x~ = x + MHA(LN1(x));   y' = x~ + FFN(LN2(x~)) + ReLU(x~ Wdown) Wup
//
// The two paths read the same shared weights; only the adapter path reads
// adapter.<l>.*. A dual-path pass runs the front-end once and the encoder
// stack twice.

#ifndef OSKDFT_MODEL_H_
#define OSKDFT_MODEL_H_

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oskdft/autograd.h"
#include "oskdft/parameter_store.h"

namespace oskdft {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  int d_model = 16;
  int n_layers_teacher = 4;
  int n_layers_student = 1;
  int n_heads = 2;
  int ffn_mult = 2;
  int adapter_rank = 4;
  std::vector<int> cnn_strides = {10, 5, 4};
  int sample_dim = 1;
  // Zero up-projection makes the adapter path start equal to the plain path.
  bool adapter_zero_up = true;

  int ffn_dim() const { return ffn_mult * d_model; }
  int total_stride() const;
  // Throws ConfigError on the first violated invariant.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class Role { kTeacher, kStudent };

enum class AdapterMode {
  kNone,    // no adapters; both losses read the plain path
  kShared,  // adapters inserted, both losses read the adapter path
  kSplit,   // KD reads the plain path, SV reads the adapter path
};

std::string to_string(AdapterMode m);
AdapterMode adapter_mode_from_string(const std::string& s);

struct ParamSpec {
  std::string name;
  Shape shape;
};

// CNN + encoder (+ adapters for the student) layout.
std::vector<ParamSpec> backbone_layout(const ModelConfig& cfg, Role role);
// Throws DimensionError naming the first missing, orphan or misshaped entry.
void validate_layout(const ParameterStore& store, const std::vector<ParamSpec>& layout);

int64_t adapter_param_count(const ModelConfig& cfg);
int64_t backbone_param_count(const ModelConfig& cfg, Role role);

std::string cnn_prefix(int i);
std::string encoder_prefix(int layer);
std::string adapter_prefix(int layer);

struct AdapterWeights {
  Tensor w_down;  // d_model x rank
  Tensor w_up;    // rank x d_model
};

std::vector<AdapterWeights> adapters_of(const ParameterStore& store, const ModelConfig& cfg);
void set_adapters(ParameterStore& store, const ModelConfig& cfg,
                  std::span<const AdapterWeights> adapters);

// Hands out tape variables for named store entries, creating each once.
// Entries accepted by `trainable` become gradient leaves; the rest are
// constants.
class ParamBinder {
 public:
  using Filter = std::function<bool(const std::string&)>;

  ParamBinder(ag::Tape& tape, const ParameterStore& store, Filter trainable = nullptr);

  ag::Var operator()(const std::string& name);
  ag::Tape& tape() { return tape_; }
  const ParameterStore& store() const { return store_; }

  // Gradients of every bound trainable entry (zeros where none arrived).
  ParameterStore gradients() const;

 private:
  ag::Tape& tape_;
  const ParameterStore& store_;
  Filter trainable_;
  std::unordered_map<std::string, ag::Var> bound_;
  std::vector<std::string> order_;
};

// waveform: (batch, samples) or (batch, samples, sample_dim)
//   -> (batch, samples / total_stride, d_model).
// Throws DimensionError ("input too short") when samples < total stride.
ag::Var cnn_forward(ParamBinder& p, const ModelConfig& cfg, ag::Var waveform);

ag::Var encoder_layer_plain(ParamBinder& p, const ModelConfig& cfg, int layer, ag::Var x);
ag::Var encoder_layer_adapter(ParamBinder& p, const ModelConfig& cfg, int layer, ag::Var x);

enum class Path { kPlain, kAdapter };
ag::Var encoder_stack(ParamBinder& p, const ModelConfig& cfg, ag::Var x, int n_layers,
                      Path path);

struct StudentVars {
  ag::Var kd;  // features feeding the distillation loss
  ag::Var sv;  // features feeding the speaker head
};

// One front-end pass, then one or two encoder passes depending on mode.
StudentVars student_forward(ParamBinder& p, const ModelConfig& cfg, ag::Var waveform,
                            AdapterMode mode);

struct DualPathOutput {
  Tensor kd_features;
  Tensor sv_features;
};

// Value-only dual-path pass over a student store (shared + adapter entries).
DualPathOutput dual_path_forward(const Tensor& batch, const ParameterStore& student,
                                 const ModelConfig& cfg);
// Same, with adapters supplied separately from the shared weights.
DualPathOutput dual_path_forward(const Tensor& batch, const ParameterStore& student,
                                 std::span<const AdapterWeights> adapters,
                                 const ModelConfig& cfg);

// Value-only pass through the front-end and the first n_layers encoder layers.
Tensor encoder_forward(const Tensor& batch, const ParameterStore& params,
                       const ModelConfig& cfg, int n_layers, Path path = Path::kPlain);

// (batch, samples) waveform tensor from equal-length rows.
Tensor waveform_batch(std::span<const std::vector<double>> rows);

}  // namespace oskdft

#endif  // OSKDFT_MODEL_H_
