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

#ifndef OSKDFT_TRAINER_H_
#define OSKDFT_TRAINER_H_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oskdft/checkpoint.h"
#include "oskdft/config.h"
#include "oskdft/eval.h"
#include "oskdft/optimizer.h"

namespace oskdft {

enum class PhaseKind {
  kJoint,      // KD + SV on the student
  kKd,         // KD only, backbone trains
  kFt,         // SV only, backbone + head train
  kHead,       // SV only, head trains on a frozen backbone
  kTeacherFt,  // SV only on the full-depth teacher + head
  kKl,         // logit KL against the tuned teacher
};

std::string to_string(PhaseKind k);

struct Phase {
  PhaseKind kind;
  int epochs;
};

// Zero-length phases are dropped.
std::vector<Phase> plan_phases(const RunConfig& cfg);

// What one optimization step computes and which groups it moves.
struct StepSpec {
  bool use_kd = false;
  bool use_sv = false;
  bool use_kl = false;
  AdapterMode adapters = AdapterMode::kNone;
  int n_layers = 1;  // depth of the model being trained
  bool train_backbone = false;
  bool train_head = false;
  bool train_adapters = false;
  bool spec_augment = false;
};

StepSpec step_spec(PhaseKind kind, const RunConfig& cfg);

struct StepInputs {
  Tensor waveform;                      // (B, S)
  std::vector<int> labels;              // training speaker index per row
  const ParameterStore* teacher = nullptr;        // KD target model
  const ParameterStore* tuned_teacher = nullptr;  // KL target model, with head.*
};

struct StepResult {
  double kd = 0.0;  // weighted KD term, or the KL term in KL steps
  double sv = 0.0;  // unweighted speaker loss
  double joint = 0.0;
  double acc = 0.0;
  ParameterStore grads;  // trainable entries only
  double gn_backbone = 0.0;
  double gn_adapter = 0.0;
  double gn_head = 0.0;
};

// Forward + backward on one batch without touching params. `rng` feeds
// SpecAugment and may be null when spec.spec_augment is off.
// Throws NonFiniteLoss naming the failing component.
StepResult compute_step(const StepSpec& spec, const RunConfig& cfg, const ParameterStore& params,
                        const StepInputs& in, Rng* rng);

// Learning rate of each group for epoch tau of a phase lasting tau_tot epochs.
LrTriple phase_lrs(int tau, int tau_tot, const RunConfig& cfg);

// Adam update of every entry in step.grads with its group's learning rate.
void apply_step(ParameterStore& params, const StepResult& step, Adam& opt, const LrTriple& lr);

struct EpochRecord {
  int epoch = 0;  // 1-based, counted across phases
  std::string phase;
  LrTriple lr;
  double kd = 0.0;
  double sv = 0.0;
  double joint = 0.0;
  double acc = 0.0;
  double gn_backbone = 0.0;
  double gn_adapter = 0.0;
  double gn_head = 0.0;
  std::optional<double> eer;
};

std::string metrics_header();
std::string metrics_row(const EpochRecord& r);

struct RunRecord {
  std::vector<EpochRecord> epochs;
  std::optional<double> eer;  // set once the run completed
  int64_t params_student = 0;  // backbone + head, adapters excluded
  int64_t params_adapters = 0;  // 0 when the arm uses none
  double wall_clock_s = 0.0;
  bool complete = false;
  ParameterStore final_params;
};

struct RunInputs {
  const Corpus* train = nullptr;
  const Corpus* eval = nullptr;
  const TrialSet* trials = nullptr;
  const ParameterStore* teacher = nullptr;  // required by every mode but ft_only
};

struct RunOptions {
  bool resume = false;
  int stop_after_epoch = 0;  // > 0: return after checkpointing this epoch
  std::function<void(const EpochRecord&)> on_epoch;
};

// Trains one seed of `cfg` and, when run_dir is non-empty, writes config.txt,
// schedule.csv, metrics.csv, ckpt/epoch_<k>, scores.txt and eer.txt there.
// An existing non-empty run_dir is an error unless resuming; a resume
// continues from the newest checkpoint and reproduces the uninterrupted run.
RunRecord run(const RunConfig& cfg, uint64_t seed, const RunInputs& in,
              const std::filesystem::path& run_dir = {}, const RunOptions& opt = {});

// schedule.csv content for the phases of cfg.
std::string schedule_csv(const RunConfig& cfg);

// Embeds the SV path of a trained store; used for evaluation.
Embedder student_embedder(const ParameterStore& params, const RunConfig& cfg, int n_layers,
                          AdapterMode mode);

// Log band energies of each front-end frame of a (B, S) waveform:
// (B, S / total_stride, n_bands).
Tensor band_energy_targets(const Tensor& waveform, int frame_len, int n_bands);

struct PretrainResult {
  ParameterStore teacher;  // backbone only
  ParameterStore full;     // backbone + recon.* head
  std::vector<double> epoch_losses;
};

// Masked-frame pretraining: spans of front-end frames are replaced by a
// learned embedding and the encoder output must predict the log band
// energies of those frames. Returns the random init when pretrain.epochs == 0.
// Throws std::runtime_error naming the epoch on a non-finite loss.
PretrainResult pretrain_teacher(const Corpus& corpus, const RunConfig& cfg, uint64_t seed,
                                const std::function<void(int, double)>& on_epoch = nullptr);

// Mean masked-reconstruction loss of a store holding recon.* over fixed crops
// and masks drawn from seed.
double pretrain_loss(const ParameterStore& full, const Corpus& corpus, const RunConfig& cfg,
                     uint64_t seed);

}  // namespace oskdft

#endif  // OSKDFT_TRAINER_H_
