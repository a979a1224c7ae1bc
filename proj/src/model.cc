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

#include "oskdft/model.h"

#include <unordered_set>

namespace oskdft {

int ModelConfig::total_stride() const {
  int s = 1;
  for (int v : cnn_strides) s *= v;
  return s;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(d_model, "d_model");
  positive(n_layers_teacher, "n_layers_teacher");
  positive(n_layers_student, "n_layers_student");
  positive(n_heads, "n_heads");
  positive(ffn_mult, "ffn_mult");
  positive(adapter_rank, "adapter_rank");
  positive(sample_dim, "sample_dim");
  if (cnn_strides.empty()) throw ConfigError("cnn_strides must not be empty");
  for (int s : cnn_strides) positive(s, "cnn_strides entry");
  if (n_layers_student >= n_layers_teacher) {
    throw ConfigError("n_layers_student (" + std::to_string(n_layers_student) +
                      ") must be smaller than n_layers_teacher (" +
                      std::to_string(n_layers_teacher) + ")");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (adapter_rank >= d_model) {
    throw ConfigError("adapter_rank " + std::to_string(adapter_rank) +
                      " must be below d_model " + std::to_string(d_model));
  }
}

std::string to_string(AdapterMode m) {
  switch (m) {
    case AdapterMode::kNone: return "none";
    case AdapterMode::kShared: return "shared";
    case AdapterMode::kSplit: return "split";
  }
  return "?";
}

AdapterMode adapter_mode_from_string(const std::string& s) {
  if (s == "none") return AdapterMode::kNone;
  if (s == "shared") return AdapterMode::kShared;
  if (s == "split") return AdapterMode::kSplit;
  throw ConfigError("unknown adapter mode '" + s + "' (none|shared|split)");
}

std::string cnn_prefix(int i) { return "cnn." + std::to_string(i) + "."; }
std::string encoder_prefix(int layer) { return "encoder." + std::to_string(layer) + "."; }
std::string adapter_prefix(int layer) { return "adapter." + std::to_string(layer) + "."; }

std::vector<ParamSpec> backbone_layout(const ModelConfig& cfg, Role role) {
  cfg.validate();
  const int64_t d = cfg.d_model, f = cfg.ffn_dim(), r = cfg.adapter_rank;
  std::vector<ParamSpec> out;
  int64_t c_in = cfg.sample_dim;
  for (size_t i = 0; i < cfg.cnn_strides.size(); ++i) {
    const std::string p = cnn_prefix(static_cast<int>(i));
    out.push_back({p + "w", {cfg.cnn_strides[i] * c_in, d}});
    out.push_back({p + "b", {d}});
    out.push_back({p + "ln.g", {d}});
    out.push_back({p + "ln.b", {d}});
    c_in = d;
  }
  const int layers = role == Role::kTeacher ? cfg.n_layers_teacher : cfg.n_layers_student;
  for (int l = 0; l < layers; ++l) {
    const std::string p = encoder_prefix(l);
    out.push_back({p + "ln1.g", {d}});
    out.push_back({p + "ln1.b", {d}});
    for (const char* m : {"q", "k", "v", "o"}) {
      out.push_back({p + "attn.w" + m, {d, d}});
      out.push_back({p + "attn.b" + m, {d}});
    }
    out.push_back({p + "ln2.g", {d}});
    out.push_back({p + "ln2.b", {d}});
    out.push_back({p + "ffn.w1", {d, f}});
    out.push_back({p + "ffn.b1", {f}});
    out.push_back({p + "ffn.w2", {f, d}});
    out.push_back({p + "ffn.b2", {d}});
  }
  if (role == Role::kStudent) {
    for (int l = 0; l < layers; ++l) {
      out.push_back({adapter_prefix(l) + "w_down", {d, r}});
      out.push_back({adapter_prefix(l) + "w_up", {r, d}});
    }
  }
  return out;
}

void validate_layout(const ParameterStore& store, const std::vector<ParamSpec>& layout) {
  std::unordered_set<std::string> expected;
  for (const auto& spec : layout) {
    expected.insert(spec.name);
    if (!store.contains(spec.name)) throw DimensionError("missing parameter " + spec.name);
    const Tensor& t = store.get(spec.name);
    if (t.shape() != spec.shape) {
      throw DimensionError("parameter " + spec.name + " has shape " + shape_str(t.shape()) +
                           ", expected " + shape_str(spec.shape));
    }
  }
  for (const auto& e : store.entries()) {
    if (!expected.count(e.name)) throw DimensionError("unexpected parameter " + e.name);
  }
}

int64_t adapter_param_count(const ModelConfig& cfg) {
  cfg.validate();
  return static_cast<int64_t>(cfg.n_layers_student) * 2 * cfg.d_model * cfg.adapter_rank;
}

int64_t backbone_param_count(const ModelConfig& cfg, Role role) {
  int64_t n = 0;
  for (const auto& spec : backbone_layout(cfg, role)) n += num_elements(spec.shape);
  return n;
}

std::vector<AdapterWeights> adapters_of(const ParameterStore& store, const ModelConfig& cfg) {
  std::vector<AdapterWeights> out;
  for (int l = 0; l < cfg.n_layers_student; ++l) {
    out.push_back({store.get(adapter_prefix(l) + "w_down"), store.get(adapter_prefix(l) + "w_up")});
  }
  return out;
}

void set_adapters(ParameterStore& store, const ModelConfig& cfg,
                  std::span<const AdapterWeights> adapters) {
  if (static_cast<int>(adapters.size()) != cfg.n_layers_student) {
    throw DimensionError("expected " + std::to_string(cfg.n_layers_student) +
                         " adapters, got " + std::to_string(adapters.size()));
  }
  for (int l = 0; l < cfg.n_layers_student; ++l) {
    const auto& a = adapters[static_cast<size_t>(l)];
    if (a.w_down.shape() != Shape{cfg.d_model, cfg.adapter_rank} ||
        a.w_up.shape() != Shape{cfg.adapter_rank, cfg.d_model}) {
      throw DimensionError("adapter " + std::to_string(l) + ": rank mismatch, got " +
                           shape_str(a.w_down.shape()) + " / " + shape_str(a.w_up.shape()));
    }
    store.set(adapter_prefix(l) + "w_down", a.w_down);
    store.set(adapter_prefix(l) + "w_up", a.w_up);
  }
}

ParamBinder::ParamBinder(ag::Tape& tape, const ParameterStore& store, Filter trainable)
    : tape_(tape), store_(store), trainable_(std::move(trainable)) {}

ag::Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& value = store_.get(name);
  const bool train = trainable_ && trainable_(name);
  ag::Var v = train ? tape_.variable(value) : tape_.constant(value);
  bound_.emplace(name, v);
  if (train) order_.push_back(name);
  return v;
}

ParameterStore ParamBinder::gradients() const {
  ParameterStore out;
  for (const auto& name : order_) out.add(name, tape_.grad(bound_.at(name)));
  return out;
}

ag::Var cnn_forward(ParamBinder& p, const ModelConfig& cfg, ag::Var waveform) {
  const Tensor& w = waveform.value();
  ag::Var x = waveform;
  if (w.rank() == 2) {
    if (cfg.sample_dim != 1) {
      throw DimensionError("rank-2 waveform needs sample_dim 1, config has " +
                           std::to_string(cfg.sample_dim));
    }
    x = p.tape().constant(w.reshaped({w.dim(0), w.dim(1), 1}));
  } else if (w.rank() != 3 || w.dim(2) != cfg.sample_dim) {
    throw DimensionError("waveform shape " + shape_str(w.shape()) +
                         " does not match sample_dim " + std::to_string(cfg.sample_dim));
  }
  const int64_t samples = x.value().dim(1);
  if (samples < cfg.total_stride()) {
    throw DimensionError("input too short: " + std::to_string(samples) +
                         " samples, front-end needs at least " +
                         std::to_string(cfg.total_stride()));
  }
  for (size_t i = 0; i < cfg.cnn_strides.size(); ++i) {
    const std::string pre = cnn_prefix(static_cast<int>(i));
    x = ag::frame(x, cfg.cnn_strides[i]);
    x = ag::add_bias(ag::matmul(x, p(pre + "w")), p(pre + "b"));
    x = ag::gelu(ag::layer_norm(x, p(pre + "ln.g"), p(pre + "ln.b")));
  }
  return x;
}

namespace {

void check_width(const ag::Var& x, const ModelConfig& cfg, const char* what) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || v.dim(2) != cfg.d_model) {
    throw DimensionError(std::string(what) + ": input shape " + shape_str(v.shape()) +
                         " does not match d_model " + std::to_string(cfg.d_model));
  }
}

// x + MHA(LN1(x))
ag::Var attention_block(ParamBinder& p, const ModelConfig& cfg, const std::string& pre,
                        ag::Var x) {
  ag::Var h = ag::layer_norm(x, p(pre + "ln1.g"), p(pre + "ln1.b"));
  ag::Var q = ag::add_bias(ag::matmul(h, p(pre + "attn.wq")), p(pre + "attn.bq"));
  ag::Var k = ag::add_bias(ag::matmul(h, p(pre + "attn.wk")), p(pre + "attn.bk"));
  ag::Var v = ag::add_bias(ag::matmul(h, p(pre + "attn.wv")), p(pre + "attn.bv"));
  ag::Var ctx = ag::attention(q, k, v, cfg.n_heads);
  ag::Var o = ag::add_bias(ag::matmul(ctx, p(pre + "attn.wo")), p(pre + "attn.bo"));
  return ag::add(x, o);
}

// FFN(LN2(x))
ag::Var feed_forward(ParamBinder& p, const std::string& pre, ag::Var x) {
  ag::Var h = ag::layer_norm(x, p(pre + "ln2.g"), p(pre + "ln2.b"));
  h = ag::gelu(ag::add_bias(ag::matmul(h, p(pre + "ffn.w1")), p(pre + "ffn.b1")));
  return ag::add_bias(ag::matmul(h, p(pre + "ffn.w2")), p(pre + "ffn.b2"));
}

}  // namespace

ag::Var encoder_layer_plain(ParamBinder& p, const ModelConfig& cfg, int layer, ag::Var x) {
  check_width(x, cfg, "encoder layer");
  const std::string pre = encoder_prefix(layer);
  ag::Var xt = attention_block(p, cfg, pre, x);
  return ag::add(xt, feed_forward(p, pre, xt));
}

ag::Var encoder_layer_adapter(ParamBinder& p, const ModelConfig& cfg, int layer, ag::Var x) {
  check_width(x, cfg, "encoder layer");
  const std::string pre = encoder_prefix(layer);
  const std::string ap = adapter_prefix(layer);
  ag::Var down = p(ap + "w_down");
  ag::Var up = p(ap + "w_up");
  if (down.shape() != Shape{cfg.d_model, cfg.adapter_rank} ||
      up.shape() != Shape{cfg.adapter_rank, cfg.d_model}) {
    throw DimensionError("adapter " + std::to_string(layer) + ": rank mismatch, got " +
                         shape_str(down.shape()) + " / " + shape_str(up.shape()) +
                         " for rank " + std::to_string(cfg.adapter_rank));
  }
  ag::Var xt = attention_block(p, cfg, pre, x);
  ag::Var adapter = ag::matmul(ag::relu(ag::matmul(xt, down)), up);
  return ag::add(ag::add(xt, feed_forward(p, pre, xt)), adapter);
}

ag::Var encoder_stack(ParamBinder& p, const ModelConfig& cfg, ag::Var x, int n_layers,
                      Path path) {
  for (int l = 0; l < n_layers; ++l) {
    x = path == Path::kPlain ? encoder_layer_plain(p, cfg, l, x)
                             : encoder_layer_adapter(p, cfg, l, x);
  }
  return x;
}

StudentVars student_forward(ParamBinder& p, const ModelConfig& cfg, ag::Var waveform,
                            AdapterMode mode) {
  ag::Var feats = cnn_forward(p, cfg, waveform);
  const int n = cfg.n_layers_student;
  switch (mode) {
    case AdapterMode::kNone: {
      ag::Var y = encoder_stack(p, cfg, feats, n, Path::kPlain);
      return {y, y};
    }
    case AdapterMode::kShared: {
      ag::Var y = encoder_stack(p, cfg, feats, n, Path::kAdapter);
      return {y, y};
    }
    case AdapterMode::kSplit:
      return {encoder_stack(p, cfg, feats, n, Path::kPlain),
              encoder_stack(p, cfg, feats, n, Path::kAdapter)};
  }
  throw std::logic_error("unhandled adapter mode");
}

DualPathOutput dual_path_forward(const Tensor& batch, const ParameterStore& student,
                                 const ModelConfig& cfg) {
  ag::Tape tape(false);
  ParamBinder p(tape, student);
  StudentVars out = student_forward(p, cfg, tape.constant(batch), AdapterMode::kSplit);
  return {out.kd.value(), out.sv.value()};
}

DualPathOutput dual_path_forward(const Tensor& batch, const ParameterStore& student,
                                 std::span<const AdapterWeights> adapters,
                                 const ModelConfig& cfg) {
  ParameterStore merged = student;
  set_adapters(merged, cfg, adapters);
  return dual_path_forward(batch, merged, cfg);
}

Tensor encoder_forward(const Tensor& batch, const ParameterStore& params,
                       const ModelConfig& cfg, int n_layers, Path path) {
  ag::Tape tape(false);
  ParamBinder p(tape, params);
  ag::Var x = cnn_forward(p, cfg, tape.constant(batch));
  return encoder_stack(p, cfg, x, n_layers, path).value();
}

Tensor waveform_batch(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw DimensionError("empty waveform batch");
  const size_t len = rows[0].size();
  Tensor out(Shape{static_cast<int64_t>(rows.size()), static_cast<int64_t>(len)});
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != len) throw DimensionError("waveform batch rows differ in length");
    std::copy(rows[i].begin(), rows[i].end(), out.data() + i * len);
  }
  return out;
}

}  // namespace oskdft
