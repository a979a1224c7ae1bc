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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.h"
#include "oskdft/init.h"
#include "oskdft/random.h"
#include "oskdft/schedule.h"

namespace oskdft {
namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

ScheduleParams random_params(Rng& rng) {
  ScheduleParams p;
  p.eta_max = std::pow(10.0, uniform(rng, -5, -2));
  p.eta_min = p.eta_max * uniform(rng, 0.0, 0.1);
  p.warmup = static_cast<int>(uniform_int(rng, 1, 12));
  p.tau_tot = static_cast<int>(uniform_int(rng, 3 * p.warmup, 3 * p.warmup + 60));
  p.beta = uniform(rng, 0.5, 0.999);
  p.theta = uniform(rng, 1.0, 20.0);
  return p;
}

TEST(Schedule, DefaultEndpoints) {
  const ScheduleParams p;
  EXPECT_NEAR(lr_classifier(0, p), p.eta_max, 1e-18);
  EXPECT_NEAR(lr_classifier(p.tau_tot, p), p.eta_min, 1e-18);
  EXPECT_DOUBLE_EQ(lr_adapter(5, p), 10.0 * lr_classifier(5, p));
  EXPECT_DOUBLE_EQ(lr_backbone(p.warmup + 1, p), lr_backbone(p.warmup, p) * p.beta);
}

TEST(Schedule, MatchesClosedForms) {
  Rng rng(1);
  for (int draw = 0; draw < 50; ++draw) {
    const ScheduleParams p = random_params(rng);
    for (int tau = 1; tau <= p.tau_tot; ++tau) {
      const LrTriple t = lr_triple(tau, p);
      ASSERT_LT(rel(t.classifier, oracle::classifier_lr(tau, p.eta_min, p.eta_max, p.tau_tot)), 1e-12);
      ASSERT_LT(rel(t.backbone, oracle::backbone_lr(tau, p)), 1e-12);
      ASSERT_LT(rel(t.adapter, oracle::adapter_lr(tau, p)), 1e-12);
    }
  }
}

TEST(Schedule, Monotonicity) {
  Rng rng(2);
  for (int draw = 0; draw < 50; ++draw) {
    const ScheduleParams p = random_params(rng);
    for (int tau = 1; tau <= p.tau_tot; ++tau) {
      EXPECT_LE(lr_classifier(tau, p), lr_classifier(tau - 1, p));
      EXPECT_GE(lr_classifier(tau, p), p.eta_min);
      if (tau <= p.warmup) EXPECT_LE(lr_backbone(tau, p), lr_classifier(tau, p) * (1 + 1e-12));
      if (tau > 1 && tau <= p.warmup) EXPECT_GT(lr_backbone(tau, p), lr_backbone(tau - 1, p));
      if (tau > p.warmup) EXPECT_LT(lr_backbone(tau, p), lr_backbone(tau - 1, p));
    }
  }
}

TEST(Schedule, RejectsBadParameters) {
  ScheduleParams p;
  EXPECT_THROW(lr_backbone(0, p), std::out_of_range);
  EXPECT_THROW(lr_classifier(p.tau_tot + 1, p), std::out_of_range);
  for (auto mutate : std::vector<std::function<void(ScheduleParams&)>>{
           [](ScheduleParams& q) { q.eta_min = 2 * q.eta_max; },
           [](ScheduleParams& q) { q.beta = 1.5; },
           [](ScheduleParams& q) { q.warmup = 0; },
           [](ScheduleParams& q) { q.tau_tot = 0; },
           [](ScheduleParams& q) { q.theta = -1; }}) {
    ScheduleParams q;
    mutate(q);
    EXPECT_THROW(q.validate(), std::invalid_argument);
  }
}

// ---- random ----------------------------------------------------------------

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(uniform01(a), uniform01(b));
  EXPECT_NE(derive_seed(1, "student"), derive_seed(1, "teacher"));
  EXPECT_NE(derive_seed(1, "student"), derive_seed(2, "student"));
  EXPECT_EQ(derive_seed(1, "student"), derive_seed(1, "student"));
}

TEST(Random, RangesAndMoments) {
  Rng rng(3);
  std::vector<int> counts(6, 0);
  double sum = 0, sq = 0;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const int64_t k = uniform_int(rng, 0, 5);
    ASSERT_GE(k, 0);
    ASSERT_LE(k, 5);
    ++counts[static_cast<size_t>(k)];
    const double z = standard_normal(rng);
    sum += z;
    sq += z * z;
  }
  // Each bucket within five standard deviations of n / 6.
  for (int c : counts) EXPECT_NEAR(c, n / 6.0, 5 * std::sqrt(n * (1.0 / 6) * (5.0 / 6)));
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.03);
}

TEST(Random, StateRoundTrip) {
  Rng a(11);
  for (int i = 0; i < 10; ++i) uniform01(a);
  Rng b;
  set_rng_state(b, rng_state(a));
  for (int i = 0; i < 10; ++i) ASSERT_EQ(standard_normal(a), standard_normal(b));
}

// ---- init ------------------------------------------------------------------

ModelConfig small() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers_teacher = 4;
  c.n_layers_student = 2;
  c.adapter_rank = 2;
  c.cnn_strides = {4, 2};
  return c;
}

SpeakerHeadConfig small_head() {
  SpeakerHeadConfig h;
  h.embed_dim = 4;
  h.n_speakers = 3;
  return h;
}

// The k-th teacher entry (1-based) holds 1000 * (l + 1) + k inside layer l
// and -k in the front-end, so any misplaced copy is visible.
ParameterStore sentinel_teacher(const ModelConfig& cfg) {
  ParameterStore t = empty_store(backbone_layout(cfg, Role::kTeacher), 0);
  int k = 0;
  for (const auto& name : t.names()) {
    double v = -(++k);
    for (int l = 0; l < cfg.n_layers_teacher; ++l) {
      if (name.rfind(encoder_prefix(l), 0) == 0) v = 1000.0 * (l + 1) + k;
    }
    t.get(name).fill(v);
  }
  return t;
}

TEST(Init, StudentLayersCopyTeacherLayersBitExact) {
  const ModelConfig cfg = small();
  const ParameterStore t = sentinel_teacher(cfg);
  const ParameterStore s = init_student_from_teacher(t, cfg, small_head(), 5);
  int copied = 0;
  for (const auto& name : s.names()) {
    if (name.rfind("cnn.", 0) == 0 || name.rfind("encoder.", 0) == 0) {
      ASSERT_TRUE(s.get(name) == t.get(name)) << name;
      ++copied;
    }
  }
  EXPECT_EQ(copied, static_cast<int>(backbone_layout(cfg, Role::kStudent).size()) - 2 * cfg.n_layers_student);
  EXPECT_FALSE(s.contains(encoder_prefix(2) + "ffn.w1"));
}

TEST(Init, HeadAndAdaptersIgnoreTheTeacher) {
  const ModelConfig cfg = small();
  const ParameterStore a = init_student_from_teacher(sentinel_teacher(cfg), cfg, small_head(), 5);
  const ParameterStore b = init_student_from_teacher(random_teacher(cfg, 99), cfg, small_head(), 5);
  for (const auto& name : a.names()) {
    if (name.rfind("head.", 0) == 0 || name.rfind("adapter.", 0) == 0) {
      EXPECT_TRUE(a.get(name) == b.get(name)) << name;
    }
  }
  for (double v : a.get("adapter.0.w_up").values()) EXPECT_EQ(v, 0.0);
  double down = 0;
  for (double v : a.get("adapter.0.w_down").values()) down += std::abs(v);
  EXPECT_GT(down, 0.0);
}

TEST(Init, MismatchedTeacherNamesEntry) {
  ModelConfig cfg = small();
  ModelConfig wide = cfg;
  wide.d_model = 12;
  wide.n_heads = 3;
  try {
    init_student_from_teacher(random_teacher(wide, 1), cfg, small_head(), 2);
    FAIL() << "no throw";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("cnn.0.w"), std::string::npos);
  }
}

TEST(Init, PerEntryStreamsDoNotDependOnTheMatchSet) {
  const ModelConfig cfg = small();
  const ParameterStore base = empty_store(backbone_layout(cfg, Role::kTeacher), 0);
  const ParameterStore all = init_random("*", base, 4);
  const ParameterStore one = init_random("encoder.1.*", base, 4);
  EXPECT_TRUE(all.get("encoder.1.attn.wq") == one.get("encoder.1.attn.wq"));
  EXPECT_TRUE(one.get("encoder.0.attn.wq") == base.get("encoder.0.attn.wq"));
  EXPECT_THROW(init_random("nothing.*", base, 4), std::invalid_argument);
}

TEST(Init, FanInBoundsAndNormDefaults) {
  const ModelConfig cfg = small();
  const ParameterStore t = random_teacher(cfg, 8);
  const Tensor& w = t.get("encoder.0.ffn.w1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.dim(0)));
  for (double v : w.values()) EXPECT_LE(std::abs(v), bound);
  for (double v : t.get("encoder.0.ln1.g").values()) EXPECT_EQ(v, 1.0);
  for (double v : t.get("encoder.0.ffn.b1").values()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace oskdft
