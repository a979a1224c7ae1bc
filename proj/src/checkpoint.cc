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

#include "oskdft/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace oskdft {

namespace {

constexpr std::string_view kMagic = "oskdft-checkpoint 1";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("checkpoint: bad integer for " + what + ": '" + s + "'");
  }
}

std::string shape_token(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string out;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out;
}

Shape parse_shape(const std::string& tok) {
  if (tok == "scalar") return {};
  Shape out;
  for (const auto& part : split(tok, 'x')) out.push_back(to_int(part, "shape"));
  return out;
}

void put_doubles(std::string& out, const Tensor& t) {
  const size_t n = static_cast<size_t>(t.size());
  const size_t off = out.size();
  out.resize(off + n * 8);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + off, t.data(), n * 8);
  } else {
    for (size_t i = 0; i < n; ++i) {
      auto bits = std::bit_cast<uint64_t>(t[static_cast<int64_t>(i)]);
      for (int b = 0; b < 8; ++b) out[off + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

void get_doubles(std::string_view src, Tensor& t) {
  const size_t n = static_cast<size_t>(t.size());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(t.data(), src.data(), n * 8);
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<uint64_t>(static_cast<unsigned char>(src[i * 8 + b])) << (8 * b);
      t[static_cast<int64_t>(i)] = std::bit_cast<double>(bits);
    }
  }
}

}  // namespace

std::string model_config_to_string(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "d_model=" << cfg.d_model << " n_layers_teacher=" << cfg.n_layers_teacher
     << " n_layers_student=" << cfg.n_layers_student << " n_heads=" << cfg.n_heads
     << " ffn_mult=" << cfg.ffn_mult << " adapter_rank=" << cfg.adapter_rank
     << " cnn_strides=";
  for (size_t i = 0; i < cfg.cnn_strides.size(); ++i) {
    if (i) os << ",";
    os << cfg.cnn_strides[i];
  }
  os << " sample_dim=" << cfg.sample_dim << " adapter_zero_up=" << (cfg.adapter_zero_up ? 1 : 0);
  return os.str();
}

ModelConfig model_config_from_string(const std::string& s) {
  ModelConfig cfg;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad config token " + tok);
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "d_model") cfg.d_model = to_int(val, key);
    else if (key == "n_layers_teacher") cfg.n_layers_teacher = to_int(val, key);
    else if (key == "n_layers_student") cfg.n_layers_student = to_int(val, key);
    else if (key == "n_heads") cfg.n_heads = to_int(val, key);
    else if (key == "ffn_mult") cfg.ffn_mult = to_int(val, key);
    else if (key == "adapter_rank") cfg.adapter_rank = to_int(val, key);
    else if (key == "sample_dim") cfg.sample_dim = to_int(val, key);
    else if (key == "adapter_zero_up") cfg.adapter_zero_up = to_int(val, key) != 0;
    else if (key == "cnn_strides") {
      cfg.cnn_strides.clear();
      for (const auto& part : split(val, ',')) cfg.cnn_strides.push_back(to_int(part, key));
    } else {
      throw std::runtime_error("checkpoint: unknown config key " + key);
    }
  }
  return cfg;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += kMagic;
  out += "\nconfig " + model_config_to_string(ckpt.config) + "\n";
  out += "seed " + std::to_string(ckpt.params.seed()) + "\n";
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint meta key/value not representable: " + k);
    }
    out += "meta " + k + " " + v + "\n";
  }
  for (const auto& e : ckpt.params.entries()) {
    if (e.name.find_first_of(" \n") != std::string::npos) {
      throw std::invalid_argument("checkpoint entry name contains whitespace: " + e.name);
    }
    out += "entry " + e.name + " f64 " + shape_token(e.value.shape()) + "\n";
  }
  out += "data\n";
  for (const auto& e : ckpt.params.entries()) put_doubles(out, e.value);
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Checkpoint ckpt;
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw std::runtime_error("checkpoint: truncated manifest");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw std::runtime_error("checkpoint: bad magic");
  std::vector<std::pair<std::string, Shape>> entries;
  bool have_config = false;
  for (;;) {
    std::string line = next_line();
    if (line == "data") break;
    const auto sp = line.find(' ');
    const std::string kind = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (kind == "config") {
      ckpt.config = model_config_from_string(rest);
      have_config = true;
    } else if (kind == "seed") {
      ckpt.params.set_seed(std::stoull(rest));
    } else if (kind == "meta") {
      const auto s2 = rest.find(' ');
      ckpt.meta[rest.substr(0, s2)] = s2 == std::string::npos ? "" : rest.substr(s2 + 1);
    } else if (kind == "entry") {
      std::istringstream is(rest);
      std::string name, dtype, shape;
      if (!(is >> name >> dtype >> shape)) {
        throw std::runtime_error("checkpoint: malformed entry line '" + line + "'");
      }
      if (dtype != "f64") throw std::runtime_error("checkpoint: unsupported dtype " + dtype);
      entries.emplace_back(name, parse_shape(shape));
    } else {
      throw std::runtime_error("checkpoint: unknown manifest line '" + line + "'");
    }
  }
  if (!have_config) throw std::runtime_error("checkpoint: missing config line");
  for (auto& [name, shape] : entries) {
    Tensor t(shape);
    const size_t nbytes = static_cast<size_t>(t.size()) * 8;
    if (pos + nbytes > bytes.size()) throw std::runtime_error("checkpoint: truncated data for " + name);
    get_doubles(bytes.substr(pos, nbytes), t);
    pos += nbytes;
    ckpt.params.add(name, std::move(t));
  }
  if (pos != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes after data");
  return ckpt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace oskdft
