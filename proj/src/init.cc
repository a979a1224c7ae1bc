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

#include "oskdft/init.h"

#include <cmath>

#include "oskdft/random.h"

namespace oskdft {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void resample(const std::string& name, Tensor& t, uint64_t seed, InitPolicy policy) {
  if (glob_match("adapter.*.w_up", name) && policy.adapter_zero_up) {
    t.fill(0.0);
    return;
  }
  if (t.rank() == 2) {
    Rng rng(derive_seed(seed, name));
    const double a = 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
    for (double& v : t.values()) v = uniform(rng, -a, a);
    return;
  }
  t.fill(ends_with(name, ".g") ? 1.0 : 0.0);
}

}  // namespace

ParameterStore init_random(const std::string& pattern, const ParameterStore& store,
                           uint64_t seed, InitPolicy policy) {
  ParameterStore out = store;
  int matched = 0;
  for (const auto& name : store.names()) {
    if (!glob_match(pattern, name)) continue;
    resample(name, out.get(name), seed, policy);
    ++matched;
  }
  if (matched == 0) throw std::invalid_argument("init pattern '" + pattern + "' matches no entry");
  return out;
}

ParameterStore empty_store(const std::vector<ParamSpec>& layout, uint64_t seed) {
  ParameterStore out(seed);
  for (const auto& spec : layout) out.add(spec.name, Tensor(spec.shape));
  return out;
}

ParameterStore random_teacher(const ModelConfig& cfg, uint64_t seed) {
  return init_random("*", empty_store(backbone_layout(cfg, Role::kTeacher), seed), seed);
}

std::vector<ParamSpec> student_layout(const ModelConfig& cfg, const SpeakerHeadConfig& head) {
  std::vector<ParamSpec> out = backbone_layout(cfg, Role::kStudent);
  for (auto& spec : head_layout(head, cfg.d_model)) out.push_back(std::move(spec));
  return out;
}

ParameterStore init_student_from_teacher(const ParameterStore& teacher, const ModelConfig& cfg,
                                         const SpeakerHeadConfig& head, uint64_t seed) {
  ParameterStore student = empty_store(student_layout(cfg, head), seed);
  for (const auto& name : student.names()) {
    const bool shared = name.rfind("cnn.", 0) == 0 || name.rfind("encoder.", 0) == 0;
    if (!shared) continue;
    if (!teacher.contains(name)) {
      throw DimensionError("teacher lacks " + name + " needed by the student topology");
    }
    const Tensor& src = teacher.get(name);
    if (src.shape() != student.get(name).shape()) {
      throw DimensionError("teacher entry " + name + " has shape " + shape_str(src.shape()) +
                           ", student expects " + shape_str(student.get(name).shape()));
    }
    student.set(name, src);
  }
  InitPolicy policy{cfg.adapter_zero_up};
  student = init_random("adapter.*", student, seed, policy);
  return init_random("head.*", student, seed, policy);
}

}  // namespace oskdft
