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

#include "oskdft/optimizer.h"

#include <cmath>

namespace oskdft {

ParamGroup group_of(const std::string& name) {
  if (name.rfind("head.", 0) == 0) return ParamGroup::kClassifier;
  if (name.rfind("adapter.", 0) == 0) return ParamGroup::kAdapter;
  return ParamGroup::kBackbone;
}

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kClassifier:
      return "classifier";
    case ParamGroup::kBackbone:
      return "backbone";
    case ParamGroup::kAdapter:
      return "adapter";
  }
  return "?";
}

void Adam::step(ParameterStore& params, const ParameterStore& grads,
                const std::function<double(const std::string&)>& lr) {
  for (const auto& name : grads.names()) {
    const Tensor& g = grads.get(name);
    Tensor& p = params.get(name);
    require_same_shape(p, g, "adam step " + name);
    if (!m_.contains(name)) {
      m_.add(name, Tensor(g.shape()));
      v_.add(name, Tensor(g.shape()));
    }
    Tensor& m = m_.get(name);
    Tensor& v = v_.get(name);
    const int64_t t = ++t_[name];
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t));
    const double rate = lr(name);
    for (int64_t i = 0; i < g.size(); ++i) {
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      p[i] -= rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts_.eps);
    }
  }
}

void Adam::save(ParameterStore& entries, std::map<std::string, std::string>& meta,
                const std::string& prefix) const {
  for (const auto& name : m_.names()) {
    entries.set(prefix + "m." + name, m_.get(name));
    entries.set(prefix + "v." + name, v_.get(name));
    meta[prefix + "t." + name] = std::to_string(t_.at(name));
  }
}

void Adam::load(const ParameterStore& entries, const std::map<std::string, std::string>& meta,
                const std::string& prefix) {
  m_ = ParameterStore();
  v_ = ParameterStore();
  t_.clear();
  const std::string mp = prefix + "m.";
  for (const auto& key : entries.names()) {
    if (key.rfind(mp, 0) != 0) continue;
    const std::string name = key.substr(mp.size());
    const auto it = meta.find(prefix + "t." + name);
    if (it == meta.end()) throw std::runtime_error("optimizer state lacks step count for " + name);
    m_.add(name, entries.get(key));
    v_.add(name, entries.get(prefix + "v." + name));
    t_[name] = std::stoll(it->second);
  }
}

}  // namespace oskdft
