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

// Speaker embedding head and additive angular margin (AAM) softmax.
//
// The true-class logit is s * cos(theta_y + m) and the others s * cos(theta_j).
// When theta_y + m would pass pi, cos(theta_y) - m * sin(m) is used instead so
// the logit stays monotone in theta_y.

#ifndef OSKDFT_SPEAKER_HEAD_H_
#define OSKDFT_SPEAKER_HEAD_H_

#include <string>
#include <vector>

#include "oskdft/model.h"

namespace oskdft {

enum class HeadKind { kLinear, kStatsPool };

std::string to_string(HeadKind k);
HeadKind head_kind_from_string(const std::string& s);

struct SpeakerHeadConfig {
  HeadKind kind = HeadKind::kLinear;
  int embed_dim = 192;
  int n_speakers = 2;
  double margin = 0.15;
  double scale = 20.0;
  void validate() const;
};

struct SpeakerEmbedding {
  std::vector<double> vector;
  bool normalized = false;
};

// head.w (pool_in x embed_dim), head.b (embed_dim), head.class_w (n_speakers x embed_dim)
std::vector<ParamSpec> head_layout(const SpeakerHeadConfig& cfg, int d_model);

// (batch, frames, d_model) -> (batch, embed_dim). Linear: temporal mean, then
// affine. Stats pool: [mean, std] over time, then affine.
ag::Var pool(ParamBinder& p, const SpeakerHeadConfig& cfg, ag::Var features);

// Batch-mean cross-entropy of margin-modified scaled cosine logits.
ag::Var aam_softmax_loss(ag::Var embeddings, const std::vector<int>& labels,
                         ag::Var class_weights, const SpeakerHeadConfig& cfg);
double aam_softmax_loss(const Tensor& embeddings, const std::vector<int>& labels,
                        const Tensor& class_weights, const SpeakerHeadConfig& cfg);

// s * cos(theta_j) for every class, without margin.
ag::Var speaker_logits(ag::Var embeddings, ag::Var class_weights, const SpeakerHeadConfig& cfg);

// Fraction of rows whose argmax matches the label.
double accuracy(const Tensor& logits, const std::vector<int>& labels);

SpeakerEmbedding normalize(std::vector<double> v);

// Front-end, n_layers encoder layers along `path`, pool and L2-normalize.
SpeakerEmbedding extract_embedding(const std::vector<double>& utterance,
                                   const ParameterStore& params, const ModelConfig& model,
                                   const SpeakerHeadConfig& head, int n_layers, Path path);

// Student embedding along the path its adapter mode feeds to the head.
SpeakerEmbedding extract_embedding(const std::vector<double>& utterance,
                                   const ParameterStore& student, const ModelConfig& model,
                                   const SpeakerHeadConfig& head, AdapterMode mode);

Path sv_path(AdapterMode mode);

}  // namespace oskdft

#endif  // OSKDFT_SPEAKER_HEAD_H_
