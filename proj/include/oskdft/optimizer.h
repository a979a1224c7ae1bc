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

#ifndef OSKDFT_OPTIMIZER_H_
#define OSKDFT_OPTIMIZER_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "oskdft/parameter_store.h"

namespace oskdft {

enum class ParamGroup { kClassifier, kBackbone, kAdapter };

// head.* -> classifier, adapter.* -> adapter, everything else -> backbone.
ParamGroup group_of(const std::string& name);
std::string to_string(ParamGroup g);

// Adam without weight decay. Moments and step counts are kept per entry, so
// an entry that starts training late gets its own bias correction.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options opts) : opts_(opts) {}

  // Updates every entry present in grads. lr(name) gives its learning rate.
  void step(ParameterStore& params, const ParameterStore& grads,
            const std::function<double(const std::string&)>& lr);

  // State round-trip through a checkpoint: moments as "<prefix>m.<name>" /
  // "<prefix>v.<name>" entries, step counts as "<prefix>t.<name>" meta keys.
  void save(ParameterStore& entries, std::map<std::string, std::string>& meta,
            const std::string& prefix = "adam.") const;
  void load(const ParameterStore& entries, const std::map<std::string, std::string>& meta,
            const std::string& prefix = "adam.");

  bool operator==(const Adam&) const = default;

 private:
  Options opts_;
  ParameterStore m_;
  ParameterStore v_;
  std::map<std::string, int64_t> t_;

  friend bool operator==(const Options& a, const Options& b) {
    return a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps;
  }
};

}  // namespace oskdft

#endif  // OSKDFT_OPTIMIZER_H_
