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

#ifndef OSKDFT_DISTILLATION_H_
#define OSKDFT_DISTILLATION_H_

#include <stdexcept>
#include <string>

#include "oskdft/model.h"

namespace oskdft {

struct LossWeights {
  double kd_scale = 100.0;
  double sv_scale = 1.0;
  void validate() const;
};

// Raised when a loss term is NaN or infinite; what() names the component.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& component, double value);
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

// KD needs both networks to emit the same number of frames.
void check_kd_compatible(const ModelConfig& teacher, const ModelConfig& student);

// Final encoder output of the frozen teacher. Never records gradients.
Tensor teacher_forward(const Tensor& batch, const ParameterStore& teacher,
                       const ModelConfig& cfg);

// kd_scale * mean((student - teacher)^2).
ag::Var kd_loss(ag::Var student_kd, const Tensor& teacher_out, const LossWeights& w);
double kd_loss(const Tensor& student_kd, const Tensor& teacher_out, const LossWeights& w);

// Batch mean of KL(softmax(teacher) || softmax(student)), temperature 1.
ag::Var kl_kd_loss(ag::Var student_logits, const Tensor& teacher_logits);
double kl_kd_loss(const Tensor& student_logits, const Tensor& teacher_logits);

// sv_scale * sv + kd; kd already carries kd_scale.
ag::Var joint_loss(ag::Var kd, ag::Var sv, const LossWeights& w);
double joint_loss(double kd, double sv, const LossWeights& w);

void require_finite(double value, const std::string& component);

}  // namespace oskdft

#endif  // OSKDFT_DISTILLATION_H_
