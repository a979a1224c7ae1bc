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

#ifndef OSKDFT_PARAMETER_STORE_H_
#define OSKDFT_PARAMETER_STORE_H_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "oskdft/tensor.h"

namespace oskdft {

// Named parameter arrays of one network, in insertion order.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  ParameterStore() = default;
  explicit ParameterStore(uint64_t seed) : seed_(seed) {}

  uint64_t seed() const { return seed_; }
  void set_seed(uint64_t seed) { seed_ = seed; }

  // Throws std::invalid_argument if the name already exists.
  void add(const std::string& name, Tensor value);
  // Replaces an existing entry (shape must match) or adds a new one.
  void set(const std::string& name, Tensor value);
  bool contains(const std::string& name) const;
  void erase(const std::string& name);

  // Throws std::out_of_range naming the missing entry.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  int64_t num_parameters() const;
  // Number of scalars in entries whose name starts with prefix.
  int64_t num_parameters(const std::string& prefix) const;

  // Stable 64-bit FNV-1a over the serialized entries.
  uint64_t hash() const;

  // Entries whose name starts with prefix, with the prefix stripped when
  // strip is true.
  ParameterStore slice(const std::string& prefix, bool strip) const;
  // Adds all of other's entries with prefix prepended.
  void merge(const ParameterStore& other, const std::string& prefix = "");

  bool operator==(const ParameterStore& other) const;

 private:
  uint64_t seed_ = 0;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ULL);
uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ULL);

// Glob match where '*' matches any run of characters (including dots).
bool glob_match(const std::string& pattern, const std::string& name);

}  // namespace oskdft

#endif  // OSKDFT_PARAMETER_STORE_H_
