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

#include "oskdft/schedule.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "oskdft/model.h"

namespace oskdft {

void ScheduleParams::validate() const {
  if (!(eta_min >= 0.0)) throw ConfigError("eta_min must be >= 0");
  if (!(eta_max > eta_min)) throw ConfigError("eta_max must exceed eta_min");
  if (tau_tot <= 0) throw ConfigError("tau_tot must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (warmup <= 0) throw ConfigError("warmup must be positive");
}

namespace {

void check_range(int tau, int lo, const ScheduleParams& p, const char* which) {
  if (tau < lo || tau > p.tau_tot) {
    throw std::out_of_range(std::string(which) + ": epoch " + std::to_string(tau) +
                            " outside [" + std::to_string(lo) + ", " +
                            std::to_string(p.tau_tot) + "]");
  }
}

}  // namespace

double lr_classifier(int tau, const ScheduleParams& p) {
  check_range(tau, 0, p, "lr_classifier");
  const double x = std::numbers::pi * static_cast<double>(tau) / static_cast<double>(p.tau_tot);
  return p.eta_min + 0.5 * (p.eta_max - p.eta_min) * (1.0 + std::cos(x));
}

double lr_backbone(int tau, const ScheduleParams& p) {
  check_range(tau, 1, p, "lr_backbone");
  if (tau <= p.warmup) {
    return lr_classifier(tau, p) * static_cast<double>(tau) / static_cast<double>(p.warmup);
  }
  double lr = lr_classifier(p.warmup, p);
  for (int t = p.warmup + 1; t <= tau; ++t) lr *= p.beta;
  return lr;
}

double lr_adapter(int tau, const ScheduleParams& p) { return lr_classifier(tau, p) * p.theta; }

LrTriple lr_triple(int tau, const ScheduleParams& p) {
  return {lr_classifier(tau, p), lr_backbone(tau, p), lr_adapter(tau, p)};
}

}  // namespace oskdft
