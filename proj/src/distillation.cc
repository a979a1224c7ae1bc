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

#include "oskdft/distillation.h"

#include <cmath>
#include <sstream>

namespace oskdft {

void LossWeights::validate() const {
  if (!std::isfinite(kd_scale) || kd_scale < 0.0)
    throw ConfigError("kd_scale must be finite and non-negative");
  if (!std::isfinite(sv_scale) || sv_scale <= 0.0)
    throw ConfigError("sv_scale must be finite and positive");
}

NonFiniteLoss::NonFiniteLoss(const std::string& component, double value)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "non-finite " << component << " loss (" << value << ")";
        return os.str();
      }()),
      component_(component) {}

void require_finite(double value, const std::string& component) {
  if (!std::isfinite(value)) throw NonFiniteLoss(component, value);
}

void check_kd_compatible(const ModelConfig& teacher, const ModelConfig& student) {
  if (teacher.cnn_strides != student.cnn_strides || teacher.sample_dim != student.sample_dim) {
    throw ConfigError("teacher and student front-ends differ; KD needs aligned frames");
  }
  if (teacher.d_model != student.d_model) {
    throw ConfigError("teacher d_model " + std::to_string(teacher.d_model) +
                      " differs from student d_model " + std::to_string(student.d_model));
  }
}

Tensor teacher_forward(const Tensor& batch, const ParameterStore& teacher,
                       const ModelConfig& cfg) {
  validate_layout(teacher, backbone_layout(cfg, Role::kTeacher));
  return encoder_forward(batch, teacher, cfg, cfg.n_layers_teacher, Path::kPlain);
}

ag::Var kd_loss(ag::Var student_kd, const Tensor& teacher_out, const LossWeights& w) {
  require_same_shape(student_kd.value(), teacher_out, "kd_loss");
  ag::Var target = student_kd.tape()->constant(teacher_out);
  return ag::scale(ag::mse(student_kd, target), w.kd_scale);
}

double kd_loss(const Tensor& student_kd, const Tensor& teacher_out, const LossWeights& w) {
  ag::Tape tape(false);
  return kd_loss(tape.constant(student_kd), teacher_out, w).value().item();
}

ag::Var kl_kd_loss(ag::Var student_logits, const Tensor& teacher_logits) {
  return ag::kl_div(student_logits, teacher_logits);
}

double kl_kd_loss(const Tensor& student_logits, const Tensor& teacher_logits) {
  ag::Tape tape(false);
  return ag::kl_div(tape.constant(student_logits), teacher_logits).value().item();
}

ag::Var joint_loss(ag::Var kd, ag::Var sv, const LossWeights& w) {
  require_finite(kd.value().item(), "kd");
  require_finite(sv.value().item(), "sv");
  return ag::add(ag::scale(sv, w.sv_scale), kd);
}

double joint_loss(double kd, double sv, const LossWeights& w) {
  require_finite(kd, "kd");
  require_finite(sv, "sv");
  return w.sv_scale * sv + kd;
}

}  // namespace oskdft
