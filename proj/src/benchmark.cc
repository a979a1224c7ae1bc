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

#include "oskdft/benchmark.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "oskdft/init.h"
#include "oskdft/random.h"

namespace oskdft {
namespace {

int64_t front_end_params(const ModelConfig& cfg) {
  int64_t n = 0, c_in = cfg.sample_dim;
  for (int k : cfg.cnn_strides) {
    n += k * c_in * cfg.d_model + 3 * cfg.d_model;  // kernel, bias, norm gain and shift
    c_in = cfg.d_model;
  }
  return n;
}

// Four attention projections with biases, two norms, two FFN matrices with biases.
int64_t encoder_layer_params(const ModelConfig& cfg) {
  const int64_t d = cfg.d_model, f = cfg.ffn_dim();
  return 4 * (d * d + d) + 4 * d + 2 * d * f + f + d;
}

}  // namespace

int64_t analytic_student_params(const ModelConfig& cfg, const SpeakerHeadConfig& head) {
  cfg.validate();
  head.validate();
  const int64_t pool_in = head.kind == HeadKind::kLinear ? cfg.d_model : 2 * cfg.d_model;
  return front_end_params(cfg) + cfg.n_layers_student * encoder_layer_params(cfg) +
         (pool_in + 1 + head.n_speakers) * head.embed_dim;
}

int64_t analytic_teacher_params(const ModelConfig& cfg) {
  cfg.validate();
  return front_end_params(cfg) + cfg.n_layers_teacher * encoder_layer_params(cfg);
}

LatencyStats time_encoder(const ParameterStore& params, const ModelConfig& cfg, int n_layers,
                          Path path, const BenchmarkOptions& opt) {
  if (opt.repetitions < 1 || opt.warmup < 0) throw std::invalid_argument("benchmark: bad repetition counts");
  const auto n = static_cast<int64_t>(std::llround(opt.seconds * opt.sample_rate));
  Rng rng(opt.seed);
  Tensor input({1, n});
  for (int64_t i = 0; i < n; ++i) input.data()[i] = standard_normal(rng);

  double sink = 0.0;
  for (int i = 0; i < opt.warmup; ++i) sink += encoder_forward(input, params, cfg, n_layers, path).data()[0];
  std::vector<double> ms;
  for (int i = 0; i < opt.repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    sink += encoder_forward(input, params, cfg, n_layers, path).data()[0];
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  if (!std::isfinite(sink)) throw std::runtime_error("benchmark: non-finite encoder output");
  LatencyStats s;
  s.repetitions = opt.repetitions;
  for (double v : ms) s.mean_ms += v;
  s.mean_ms /= static_cast<double>(ms.size());
  for (double v : ms) s.std_ms += (v - s.mean_ms) * (v - s.mean_ms);
  s.std_ms = std::sqrt(s.std_ms / static_cast<double>(ms.size()));
  return s;
}

BenchmarkReport benchmark_models(const ParameterStore& teacher, const ParameterStore& student,
                                 const ModelConfig& cfg, const SpeakerHeadConfig& head,
                                 AdapterMode mode, const BenchmarkOptions& opt) {
  validate_layout(teacher, backbone_layout(cfg, Role::kTeacher));
  validate_layout(student, student_layout(cfg, head));
  BenchmarkReport r;
  r.teacher = time_encoder(teacher, cfg, cfg.n_layers_teacher, Path::kPlain, opt);
  r.student = time_encoder(student, cfg, cfg.n_layers_student, sv_path(mode), opt);
  r.ratio = r.student.mean_ms / r.teacher.mean_ms;
  for (const auto& e : teacher.entries()) r.params_teacher += num_elements(e.value.shape());
  for (const auto& e : student.entries()) {
    const int64_t n = num_elements(e.value.shape());
    r.params_student_adapters += n;
    if (e.name.rfind("adapter.", 0) == 0) r.params_adapters += n;
  }
  r.params_student = r.params_student_adapters - r.params_adapters;
  return r;
}

std::string format_benchmark(const BenchmarkReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "teacher_mean_ms=%.4f\nteacher_std_ms=%.4f\nstudent_mean_ms=%.4f\n"
                "student_std_ms=%.4f\nrepetitions=%d\nratio=%.4f\nparams_teacher=%lld\n"
                "params_student=%lld\nparams_student_adapters=%lld\nparams_adapters=%lld\n",
                r.teacher.mean_ms, r.teacher.std_ms, r.student.mean_ms, r.student.std_ms,
                r.student.repetitions, r.ratio, static_cast<long long>(r.params_teacher),
                static_cast<long long>(r.params_student),
                static_cast<long long>(r.params_student_adapters),
                static_cast<long long>(r.params_adapters));
  return buf;
}

}  // namespace oskdft
