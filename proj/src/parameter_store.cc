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

#include "oskdft/parameter_store.h"

#include <stdexcept>

namespace oskdft {

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a(const std::string& s, uint64_t h) { return fnv1a(s.data(), s.size(), h); }

bool glob_match(const std::string& pattern, const std::string& name) {
  size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (p < pattern.size() && pattern[p] == name[n]) {
      ++p;
      ++n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

void ParameterStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(value)});
}

void ParameterStore::set(const std::string& name, Tensor value) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    add(name, std::move(value));
    return;
  }
  Tensor& cur = entries_[it->second].value;
  if (cur.shape() != value.shape()) {
    throw DimensionError("parameter " + name + ": shape " + shape_str(value.shape()) +
                         " does not match " + shape_str(cur.shape()));
  }
  cur = std::move(value);
}

bool ParameterStore::contains(const std::string& name) const { return index_.count(name) > 0; }

void ParameterStore::erase(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) return;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
  index_.clear();
  for (size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].name] = i;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("missing parameter " + name);
  return entries_[it->second].value;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("missing parameter " + name);
  return entries_[it->second].value;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

int64_t ParameterStore::num_parameters() const { return num_parameters(""); }

int64_t ParameterStore::num_parameters(const std::string& prefix) const {
  int64_t n = 0;
  for (const auto& e : entries_)
    if (e.name.compare(0, prefix.size(), prefix) == 0) n += e.value.size();
  return n;
}

uint64_t ParameterStore::hash() const {
  uint64_t h = fnv1a(&seed_, sizeof(seed_));
  for (const auto& e : entries_) {
    h = fnv1a(e.name, h);
    for (int64_t d : e.value.shape()) h = fnv1a(&d, sizeof(d), h);
    h = fnv1a(e.value.data(), static_cast<size_t>(e.value.size()) * sizeof(double), h);
  }
  return h;
}

ParameterStore ParameterStore::slice(const std::string& prefix, bool strip) const {
  ParameterStore out(seed_);
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) != 0) continue;
    out.add(strip ? e.name.substr(prefix.size()) : e.name, e.value);
  }
  return out;
}

void ParameterStore::merge(const ParameterStore& other, const std::string& prefix) {
  for (const auto& e : other.entries_) add(prefix + e.name, e.value);
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (seed_ != other.seed_ || entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        !(entries_[i].value == other.entries_[i].value))
      return false;
  }
  return true;
}

}  // namespace oskdft
