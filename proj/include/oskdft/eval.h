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

#ifndef OSKDFT_EVAL_H_
#define OSKDFT_EVAL_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oskdft/data.h"
#include "oskdft/speaker_head.h"

namespace oskdft {

struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = target
  // Throws std::invalid_argument on length mismatch, labels outside {0, 1},
  // non-finite scores or a missing class.
  void validate() const;
  int64_t n_target() const;
  int64_t n_nontarget() const;
};

// Accept iff score >= t. FRR(t) = P(target < t), FAR(t) = P(nontarget >= t),
// t over every distinct score and +inf. Returns the point where FAR - FRR
// reaches zero, linearly interpolated between the two bracketing thresholds.
double compute_eer(const ScoreSet& s);

// Both embeddings must be normalized and of equal length.
double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Mean cosine over enroll x test.
double trial_score(const std::vector<SpeakerEmbedding>& enroll,
                   const std::vector<SpeakerEmbedding>& test);

using Embedder = std::function<SpeakerEmbedding(const std::vector<double>&)>;

// Start offsets of the five fixed-length windows, evenly spaced over
// [0, n - window]. Empty when n < window.
std::vector<int64_t> segment_offsets(int64_t n, int64_t window);

// Full utterance followed by five windows of segment_seconds. Utterances
// shorter than one window yield the full-utterance embedding only.
std::vector<SpeakerEmbedding> segment_embeddings(const Utterance& u, int sample_rate,
                                                 const Embedder& embed,
                                                 double segment_seconds = 3.0);

struct TrialScores {
  ScoreSet set;
  std::vector<TrialRecord> trials;  // aligned with set.scores
};

// Embeds every utterance referenced by the trials once, then scores.
TrialScores score_trials(const TrialSet& trials, const Corpus& corpus, const Embedder& embed,
                         double segment_seconds = 3.0);

// "<enroll_id> <test_id> <score>" lines, score printed with %.6f.
std::string format_scores(const TrialScores& scores);

// Human-readable table followed by key=value lines.
std::string eer_report(const TrialScores& scores, double eer,
                       const std::map<std::string, std::string>& extra = {});

// Reads the eer=<value> line back from an eer report.
double parse_eer_report(const std::string& text);

}  // namespace oskdft

#endif  // OSKDFT_EVAL_H_
