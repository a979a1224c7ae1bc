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

#include "oskdft/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace oskdft {

void ScoreSet::validate() const {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("score set: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  }
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("score set: label not in {0, 1}");
    if (!std::isfinite(scores[i])) throw std::invalid_argument("score set: non-finite score");
  }
  if (n_target() == 0 || n_nontarget() == 0) {
    throw std::invalid_argument("score set needs both target and non-target trials");
  }
}

int64_t ScoreSet::n_target() const { return std::count(labels.begin(), labels.end(), 1); }

int64_t ScoreSet::n_nontarget() const { return std::count(labels.begin(), labels.end(), 0); }

double compute_eer(const ScoreSet& s) {
  s.validate();
  std::vector<size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return s.scores[a] < s.scores[b]; });
  const auto nt = static_cast<double>(s.n_target());
  const auto nn = static_cast<double>(s.n_nontarget());

  // Walking thresholds upward: below_t / below_n count scores strictly under t.
  int64_t below_t = 0, below_n = 0;
  double x0 = 1.0, y0 = 0.0;  // (FAR, FRR) at the lowest threshold
  size_t i = 0;
  while (true) {
    double x1, y1;
    if (i == order.size()) {
      x1 = 0.0;
      y1 = 1.0;
    } else {
      x1 = static_cast<double>(s.n_nontarget() - below_n) / nn;
      y1 = static_cast<double>(below_t) / nt;
    }
    if (x1 - y1 <= 0.0) {
      if (x1 == y1) return y1;
      // Intersection of the segment (x0,y0)-(x1,y1) with FAR = FRR.
      return (x0 * y1 - x1 * y0) / ((x0 - y0) - (x1 - y1));
    }
    x0 = x1;
    y0 = y1;
    const double t = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == t) {
      (s.labels[order[i]] ? below_t : below_n)++;
      ++i;
    }
  }
}

double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (!a.normalized || !b.normalized) throw std::invalid_argument("cosine_score: embeddings must be normalized");
  if (a.vector.size() != b.vector.size()) {
    throw DimensionError("cosine_score: embedding sizes " + std::to_string(a.vector.size()) +
                         " and " + std::to_string(b.vector.size()));
  }
  double dot = 0.0;
  for (size_t i = 0; i < a.vector.size(); ++i) dot += a.vector[i] * b.vector[i];
  return std::clamp(dot, -1.0, 1.0);
}

double trial_score(const std::vector<SpeakerEmbedding>& enroll,
                   const std::vector<SpeakerEmbedding>& test) {
  if (enroll.empty() || test.empty()) throw std::invalid_argument("trial_score: empty embedding list");
  double sum = 0.0;
  for (const auto& e : enroll)
    for (const auto& t : test) sum += cosine_score(e, t);
  return sum / static_cast<double>(enroll.size() * test.size());
}

std::vector<int64_t> segment_offsets(int64_t n, int64_t window) {
  if (n < window || window <= 0) return {};
  std::vector<int64_t> out;
  for (int k = 0; k < 5; ++k) out.push_back(k * (n - window) / 4);
  return out;
}

std::vector<SpeakerEmbedding> segment_embeddings(const Utterance& u, int sample_rate,
                                                 const Embedder& embed, double segment_seconds) {
  const std::vector<double> full(u.samples.begin(), u.samples.end());
  std::vector<SpeakerEmbedding> out{embed(full)};
  const auto window = static_cast<int64_t>(std::llround(segment_seconds * sample_rate));
  for (int64_t off : segment_offsets(static_cast<int64_t>(full.size()), window)) {
    out.push_back(embed(std::vector<double>(full.begin() + off, full.begin() + off + window)));
  }
  return out;
}

TrialScores score_trials(const TrialSet& trials, const Corpus& corpus, const Embedder& embed,
                         double segment_seconds) {
  bind_trials(trials, corpus);
  std::map<std::string, std::vector<SpeakerEmbedding>> cache;
  auto get = [&](const std::string& id) -> const std::vector<SpeakerEmbedding>& {
    auto it = cache.find(id);
    if (it == cache.end()) {
      it = cache.emplace(id, segment_embeddings(corpus.find(id), corpus.sample_rate, embed,
                                                segment_seconds)).first;
    }
    return it->second;
  };
  TrialScores out;
  out.trials = trials.records;
  for (const auto& r : trials.records) {
    out.set.scores.push_back(trial_score(get(r.enroll_id), get(r.test_id)));
    out.set.labels.push_back(r.label);
  }
  return out;
}

std::string format_scores(const TrialScores& scores) {
  std::string out;
  char buf[64];
  for (size_t i = 0; i < scores.trials.size(); ++i) {
    std::snprintf(buf, sizeof(buf), " %.6f\n", scores.set.scores[i]);
    out += scores.trials[i].enroll_id + " " + scores.trials[i].test_id + buf;
  }
  return out;
}

std::string eer_report(const TrialScores& scores, double eer,
                       const std::map<std::string, std::string>& extra) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "trials     %lld (target %lld, non-target %lld)\nEER        %.4f %%\n",
                static_cast<long long>(scores.set.scores.size()),
                static_cast<long long>(scores.set.n_target()),
                static_cast<long long>(scores.set.n_nontarget()), 100.0 * eer);
  out += buf;
  out += "\n";
  std::snprintf(buf, sizeof(buf), "eer=%.9f\nn_target=%lld\nn_nontarget=%lld\n", eer,
                static_cast<long long>(scores.set.n_target()),
                static_cast<long long>(scores.set.n_nontarget()));
  out += buf;
  for (const auto& [k, v] : extra) out += k + "=" + v + "\n";
  return out;
}

double parse_eer_report(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("eer=", 0) == 0) return std::stod(line.substr(4));
  }
  throw std::runtime_error("eer report has no eer= line");
}

}  // namespace oskdft
