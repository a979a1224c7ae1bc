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

#ifndef OSKDFT_DATA_H_
#define OSKDFT_DATA_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oskdft/random.h"
#include "oskdft/tensor.h"

namespace oskdft {

struct Utterance {
  std::string id;
  std::string speaker;
  std::vector<float> samples;
};

struct Corpus {
  int sample_rate = 4000;
  std::vector<Utterance> utterances;

  // Throws std::out_of_range for unknown ids.
  const Utterance& find(const std::string& id) const;
  bool contains(const std::string& id) const;
  // Speakers in order of first appearance.
  std::vector<std::string> speakers() const;
};

struct SynthOptions {
  int sample_rate = 4000;
  double min_seconds = 3.0;
  double max_seconds = 5.0;
  // Background noise mixed into every synthetic utterance.
  double snr_db_min = 10.0;
  double snr_db_max = 25.0;
  // Per-utterance spread of the speaker's pitch and vocal-tract scale.
  double pitch_jitter = 0.08;
  double tract_jitter = 0.04;
  int n_phones = 8;
};

// Each speaker is a latent timbre (pitch range, three resonances, spectral
// tilt, breathiness). Each utterance drives that timbre with a random phone
// sequence, pitch contour and noise. Speaker k gets id "spk<k>", utterance j
// of that speaker "spk<k>_u<j>". Deterministic in seed.
Corpus synth_corpus(int n_speakers, int utts_per_speaker, uint64_t seed,
                    const SynthOptions& opts = {});
// Speakers first .. first + count - 1 of the same population: speaker k has
// the same timbre whichever call generates it.
Corpus synth_speakers(int first, int count, int utts_per_speaker, uint64_t seed,
                      const SynthOptions& opts = {});

struct DataConfig {
  int n_train_speakers = 20;
  int train_utts_per_speaker = 6;
  int n_eval_speakers = 12;
  int eval_utts_per_speaker = 12;
  // Unlabeled speakers seen only by teacher pretraining.
  int n_pretrain_speakers = 100;
  int pretrain_utts_per_speaker = 4;
  int n_target_trials = 600;
  int n_nontarget_trials = 2000;
  uint64_t seed = 1234;
  SynthOptions synth;
  void validate() const;
};

// The first n_train speakers (in speaker order) train, the rest evaluate.
std::pair<Corpus, Corpus> split_speakers(const Corpus& corpus, int n_train);

// Contiguous window of round(seconds * rate) samples at a uniform offset.
// Throws std::invalid_argument when the utterance is too short.
std::vector<double> crop_random(const Utterance& u, double seconds, int sample_rate, Rng& rng,
                                int64_t* offset = nullptr);

struct NoiseAugment {
  double snr_db_min = 5.0;
  double snr_db_max = 20.0;
  double gain_min = 0.5;
  double gain_max = 1.5;
};

// Seeded additive Gaussian noise plus random gain, in place.
void add_noise(std::vector<double>& samples, const NoiseAugment& opts, Rng& rng);

struct SpecAugmentParams {
  int time_masks = 2;
  int time_width = 5;
  int chan_masks = 2;
  int chan_width = 2;
};

// 0/1 mask over (batch, frames, channels): each of time_masks stripes spans
// time_width consecutive frames over all channels, each of chan_masks stripes
// spans chan_width consecutive channels over all frames; offsets uniform per
// batch row. Throws std::invalid_argument when a width exceeds its dimension.
Tensor spec_augment_mask(const Shape& shape, const SpecAugmentParams& p, Rng& rng);
Tensor spec_augment(const Tensor& features, const SpecAugmentParams& p, Rng& rng);

struct TrialRecord {
  int label = 0;
  std::string enroll_id;
  std::string test_id;
  bool operator==(const TrialRecord&) const = default;
};

struct TrialSet {
  std::vector<TrialRecord> records;
};

// Lines of "<label> <enroll_id> <test_id>"; blank lines are skipped.
// Throws std::runtime_error naming the line number of a malformed line, or
// "no trials" when nothing was read.
TrialSet parse_trials(const std::string& text);
TrialSet load_trials(const std::filesystem::path& path);
std::string format_trials(const TrialSet& trials);

// Throws std::runtime_error naming the first id absent from the corpus, or
// when one label class is missing.
void bind_trials(const TrialSet& trials, const Corpus& corpus);

// Random distinct same-speaker and cross-speaker pairs, targets first.
TrialSet make_trials(const Corpus& corpus, int n_target, int n_nontarget, uint64_t seed);

struct Datasets {
  Corpus train;     // labeled
  Corpus eval;      // held-out speakers
  Corpus pretrain;  // train audio plus the unlabeled speakers
  TrialSet trials;  // over eval
};

// Speakers [0, n_train) train, the next n_eval evaluate, the next
// n_pretrain are unlabeled. Deterministic in cfg.seed.
Datasets build_datasets(const DataConfig& cfg);

// Headered raw float32: "oskdft-raw 1 <sample_rate> <n_samples>\n" + samples (LE).
void write_raw(const std::filesystem::path& path, const std::vector<float>& samples,
               int sample_rate);
std::vector<float> read_raw(const std::filesystem::path& path, int* sample_rate = nullptr);

// <dir>/manifest.txt lines "<id> <speaker> <relative path>", audio under <dir>/wav/.
void export_corpus(const Corpus& corpus, const std::filesystem::path& dir);
// Reads a manifest; paths are resolved relative to the manifest's directory.
Corpus load_corpus(const std::filesystem::path& manifest);

}  // namespace oskdft

#endif  // OSKDFT_DATA_H_
