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

// Per-module learning-rate schedules, indexed by epoch tau.
//
//   classifier: eta_min + (eta_max - eta_min) * (1 + cos(pi * tau / tau_tot)) / 2
//   backbone:   classifier(tau) * tau / warmup           for 1 <= tau <= warmup
//               backbone(tau - 1) * beta                 for tau > warmup
//   adapter:    classifier(tau) * theta
//
// The backbone schedule is 1-based: tau = 0 is rejected.

#ifndef OSKDFT_SCHEDULE_H_
#define OSKDFT_SCHEDULE_H_

#include <string>

namespace oskdft {

struct ScheduleParams {
  double eta_min = 1e-7;
  double eta_max = 1e-3;
  int tau_tot = 40;
  double beta = 0.93;
  double theta = 10.0;
  int warmup = 10;
  void validate() const;
};

double lr_classifier(int tau, const ScheduleParams& p);
double lr_backbone(int tau, const ScheduleParams& p);
double lr_adapter(int tau, const ScheduleParams& p);

struct LrTriple {
  double classifier = 0.0;
  double backbone = 0.0;
  double adapter = 0.0;
};

LrTriple lr_triple(int tau, const ScheduleParams& p);

}  // namespace oskdft

#endif  // OSKDFT_SCHEDULE_H_
