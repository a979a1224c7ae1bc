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

#include "oskdft/speaker_head.h"

#include <cmath>
#include <numbers>

namespace oskdft {

std::string to_string(HeadKind k) { return k == HeadKind::kLinear ? "linear" : "stats_pool"; }

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "linear") return HeadKind::kLinear;
  if (s == "stats_pool") return HeadKind::kStatsPool;
  throw ConfigError("unknown head kind '" + s + "' (linear|stats_pool)");
}

void SpeakerHeadConfig::validate() const {
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
  if (n_speakers < 2) throw ConfigError("n_speakers must be at least 2");
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2))
    throw ConfigError("margin must lie in [0, pi/2)");
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
}

std::vector<ParamSpec> head_layout(const SpeakerHeadConfig& cfg, int d_model) {
  cfg.validate();
  const int64_t in = cfg.kind == HeadKind::kLinear ? d_model : 2 * d_model;
  return {{"head.w", {in, cfg.embed_dim}},
          {"head.b", {cfg.embed_dim}},
          {"head.class_w", {cfg.n_speakers, cfg.embed_dim}}};
}

ag::Var pool(ParamBinder& p, const SpeakerHeadConfig& cfg, ag::Var features) {
  const Tensor& f = features.value();
  if (f.rank() != 3) throw DimensionError("pool: expected (batch, frames, d), got " + shape_str(f.shape()));
  if (f.dim(1) == 0) throw DimensionError("pool: zero frames");
  ag::Var stats = ag::mean_time(features);
  if (cfg.kind == HeadKind::kStatsPool) stats = ag::concat_last(stats, ag::std_time(features));
  return ag::add_bias(ag::matmul(stats, p("head.w")), p("head.b"));
}

ag::Var speaker_logits(ag::Var embeddings, ag::Var class_weights, const SpeakerHeadConfig& cfg) {
  return ag::cosine_logits(embeddings, class_weights, cfg.scale);
}

ag::Var aam_softmax_loss(ag::Var embeddings, const std::vector<int>& labels,
                         ag::Var class_weights, const SpeakerHeadConfig& cfg) {
  ag::Var cosines = ag::cosine_logits(embeddings, class_weights, 1.0);
  return ag::margin_softmax_xent(cosines, labels, cfg.margin, cfg.scale);
}

double aam_softmax_loss(const Tensor& embeddings, const std::vector<int>& labels,
                        const Tensor& class_weights, const SpeakerHeadConfig& cfg) {
  ag::Tape tape(false);
  return aam_softmax_loss(tape.constant(embeddings), labels, tape.constant(class_weights), cfg)
      .value()
      .item();
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  if (b == 0) return 0.0;
  int64_t hits = 0;
  for (int64_t i = 0; i < b; ++i) {
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    if (best == labels[static_cast<size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(b);
}

SpeakerEmbedding normalize(std::vector<double> v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("cannot normalize a zero or non-finite embedding");
  for (double& x : v) x /= n;
  return {std::move(v), true};
}

Path sv_path(AdapterMode mode) {
  return mode == AdapterMode::kNone ? Path::kPlain : Path::kAdapter;
}

SpeakerEmbedding extract_embedding(const std::vector<double>& utterance,
                                   const ParameterStore& params, const ModelConfig& model,
                                   const SpeakerHeadConfig& head, int n_layers, Path path) {
  ag::Tape tape(false);
  ParamBinder p(tape, params);
  Tensor wave(Shape{1, static_cast<int64_t>(utterance.size())}, utterance);
  ag::Var feats = encoder_stack(p, model, cnn_forward(p, model, tape.constant(std::move(wave))),
                                n_layers, path);
  const Tensor& e = pool(p, head, feats).value();
  return normalize(std::vector<double>(e.data(), e.data() + e.size()));
}

SpeakerEmbedding extract_embedding(const std::vector<double>& utterance,
                                   const ParameterStore& student, const ModelConfig& model,
                                   const SpeakerHeadConfig& head, AdapterMode mode) {
  return extract_embedding(utterance, student, model, head, model.n_layers_student,
                           sv_path(mode));
}

}  // namespace oskdft
