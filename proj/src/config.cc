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

#include "oskdft/config.h"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

namespace oskdft {

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::kOsKdft:
      return "os_kdft";
    case RunMode::kKdftSequential:
      return "kdft_sequential";
    case RunMode::kKdThenFreeze:
      return "kd_then_freeze";
    case RunMode::kTunedTeacherKl:
      return "tuned_teacher_kl";
    case RunMode::kFtOnly:
      return "ft_only";
    case RunMode::kTeacherPretrain:
      return "teacher_pretrain";
  }
  return "?";
}

RunMode run_mode_from_string(const std::string& s) {
  for (RunMode m : {RunMode::kOsKdft, RunMode::kKdftSequential, RunMode::kKdThenFreeze,
                    RunMode::kTunedTeacherKl, RunMode::kFtOnly, RunMode::kTeacherPretrain}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s +
                    "' (os_kdft|kdft_sequential|kd_then_freeze|tuned_teacher_kl|ft_only|"
                    "teacher_pretrain)");
}

std::string to_string(LrPolicy p) { return p == LrPolicy::kPerModule ? "per_module" : "shared"; }

LrPolicy lr_policy_from_string(const std::string& s) {
  if (s == "per_module") return LrPolicy::kPerModule;
  if (s == "shared") return LrPolicy::kShared;
  throw ConfigError("unknown lr_policy '" + s + "' (per_module|shared)");
}

int RunConfig::kd_epochs() const { return epochs * kd_percent / 100; }
int RunConfig::ft_epochs() const { return epochs * ft_percent / 100; }

AdapterMode RunConfig::effective_adapters() const {
  return mode == RunMode::kOsKdft ? adapters : AdapterMode::kNone;
}

void RunConfig::validate() const {
  model.validate();
  schedule.validate();
  loss.validate();
  SpeakerHeadConfig h = head;
  h.n_speakers = std::max(h.n_speakers, 2);
  h.validate();
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (kd_percent < 0 || ft_percent < 0 || kd_percent + ft_percent > 100) {
    throw ConfigError("kd_ft_ratio parts must be >= 0 and sum to at most 100");
  }
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(crop_seconds > 0.0)) throw ConfigError("crop_seconds must be positive");
  if (!(segment_seconds > 0.0)) throw ConfigError("segment_seconds must be positive");
  if (teacher_tune_epochs < 0) throw ConfigError("teacher_tune_epochs must be >= 0");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (pretrain.epochs < 0 || pretrain.batch_size < 1 || !(pretrain.lr > 0.0) ||
      !(pretrain.mask_prob > 0.0 && pretrain.mask_prob < 1.0) || pretrain.mask_span < 1 ||
      pretrain.n_bands < 1) {
    throw ConfigError("pretrain settings out of range");
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (crop_seconds * data.synth.sample_rate < model.total_stride()) {
    throw ConfigError("crop_seconds shorter than one front-end frame");
  }
  if (crop_seconds > data.synth.min_seconds) {
    throw ConfigError("crop_seconds exceeds data.min_seconds");
  }
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("bad number '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("bad boolean '" + s + "' (true|false)");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <typename T>
std::vector<T> split_numbers(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

struct Key {
  std::string name;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define OSKDFT_INT(key, field, doc)                                                   \
  Key {                                                                               \
    key, doc, [](const RunConfig& c) { return std::to_string(c.field); },             \
        [](RunConfig& c, const std::string& v) { c.field = parse_number<int>(v); }    \
  }
#define OSKDFT_DBL(key, field, doc)                                                   \
  Key {                                                                               \
    key, doc, [](const RunConfig& c) { return fmt(c.field); },                        \
        [](RunConfig& c, const std::string& v) { c.field = parse_number<double>(v); } \
  }
#define OSKDFT_BOOL(key, field, doc)                                                  \
  Key {                                                                               \
    key, doc, [](const RunConfig& c) { return fmt_bool(c.field); },                   \
        [](RunConfig& c, const std::string& v) { c.field = parse_bool(v); }           \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"mode", "training mode",
       [](const RunConfig& c) { return to_string(c.mode); },
       [](RunConfig& c, const std::string& v) { c.mode = run_mode_from_string(v); }},
      {"run_name", "run directory name under runs/ (empty: from the arm label)",
       [](const RunConfig& c) { return c.run_name; },
       [](RunConfig& c, const std::string& v) { c.run_name = v; }},
      OSKDFT_INT("epochs", epochs, "student training epochs"),
      {"kd_ft_ratio", "percent split of epochs for the sequential modes, kd:second",
       [](const RunConfig& c) {
         return std::to_string(c.kd_percent) + ":" + std::to_string(c.ft_percent);
       },
       [](RunConfig& c, const std::string& v) {
         const auto colon = v.find(':');
         if (colon == std::string::npos) throw ConfigError("kd_ft_ratio must look like 50:50");
         c.kd_percent = parse_number<int>(v.substr(0, colon));
         c.ft_percent = parse_number<int>(v.substr(colon + 1));
       }},
      {"adapters", "adapter use in os_kdft: none|shared|split",
       [](const RunConfig& c) { return to_string(c.adapters); },
       [](RunConfig& c, const std::string& v) { c.adapters = adapter_mode_from_string(v); }},
      {"lr_policy", "per_module|shared",
       [](const RunConfig& c) { return to_string(c.lr_policy); },
       [](RunConfig& c, const std::string& v) { c.lr_policy = lr_policy_from_string(v); }},
      OSKDFT_BOOL("augment", augment, "noise on crops and SpecAugment on the speaker path"),
      {"seeds", "comma-separated training seeds",
       [](const RunConfig& c) { return join(c.seeds); },
       [](RunConfig& c, const std::string& v) { c.seeds = split_numbers<uint64_t>(v); }},
      OSKDFT_INT("batch_size", batch_size, "utterances per step"),
      OSKDFT_DBL("crop_seconds", crop_seconds, "training crop length"),
      OSKDFT_DBL("segment_seconds", segment_seconds, "evaluation window length"),
      OSKDFT_INT("teacher_tune_epochs", teacher_tune_epochs,
                 "teacher SV-tuning epochs in tuned_teacher_kl (0: epochs)"),
      OSKDFT_INT("eval_every", eval_every, "EER every k epochs (0: end only)"),
      OSKDFT_DBL("schedule.eta_min", schedule.eta_min, "minimum learning rate"),
      OSKDFT_DBL("schedule.eta_max", schedule.eta_max, "maximum learning rate"),
      OSKDFT_DBL("schedule.beta", schedule.beta, "backbone decay per epoch after warmup"),
      OSKDFT_DBL("schedule.theta", schedule.theta, "adapter learning-rate multiplier"),
      OSKDFT_INT("schedule.warmup", schedule.warmup, "backbone warmup epochs"),
      OSKDFT_DBL("loss.kd_scale", loss.kd_scale, "weight of the feature MSE"),
      OSKDFT_DBL("loss.sv_scale", loss.sv_scale, "weight of the speaker loss"),
      OSKDFT_INT("model.d_model", model.d_model, "encoder width"),
      OSKDFT_INT("model.n_layers_teacher", model.n_layers_teacher, "teacher encoder layers"),
      OSKDFT_INT("model.n_layers_student", model.n_layers_student, "student encoder layers"),
      OSKDFT_INT("model.n_heads", model.n_heads, "attention heads"),
      OSKDFT_INT("model.ffn_mult", model.ffn_mult, "feed-forward width / d_model"),
      OSKDFT_INT("model.adapter_rank", model.adapter_rank, "adapter bottleneck width"),
      {"model.cnn_strides", "front-end strides (kernel = stride)",
       [](const RunConfig& c) { return join(c.model.cnn_strides); },
       [](RunConfig& c, const std::string& v) { c.model.cnn_strides = split_numbers<int>(v); }},
      OSKDFT_BOOL("model.adapter_zero_up", model.adapter_zero_up, "zero-initialized adapter up-projection"),
      {"head.kind", "linear|stats_pool",
       [](const RunConfig& c) { return to_string(c.head.kind); },
       [](RunConfig& c, const std::string& v) { c.head.kind = head_kind_from_string(v); }},
      OSKDFT_INT("head.embed_dim", head.embed_dim, "speaker embedding size"),
      OSKDFT_DBL("head.margin", head.margin, "additive angular margin"),
      OSKDFT_DBL("head.scale", head.scale, "logit scale"),
      OSKDFT_DBL("noise.snr_db_min", noise.snr_db_min, "augmentation SNR lower bound"),
      OSKDFT_DBL("noise.snr_db_max", noise.snr_db_max, "augmentation SNR upper bound"),
      OSKDFT_DBL("noise.gain_min", noise.gain_min, "augmentation gain lower bound"),
      OSKDFT_DBL("noise.gain_max", noise.gain_max, "augmentation gain upper bound"),
      OSKDFT_INT("spec.time_masks", spec.time_masks, "SpecAugment time stripes"),
      OSKDFT_INT("spec.time_width", spec.time_width, "frames per time stripe"),
      OSKDFT_INT("spec.chan_masks", spec.chan_masks, "SpecAugment channel stripes"),
      OSKDFT_INT("spec.chan_width", spec.chan_width, "channels per stripe"),
      OSKDFT_INT("pretrain.epochs", pretrain.epochs, "teacher pretraining epochs"),
      OSKDFT_INT("pretrain.batch_size", pretrain.batch_size, "teacher pretraining batch"),
      OSKDFT_DBL("pretrain.lr", pretrain.lr, "teacher pretraining learning rate"),
      OSKDFT_DBL("pretrain.mask_prob", pretrain.mask_prob, "probability a frame starts a mask"),
      OSKDFT_INT("pretrain.mask_span", pretrain.mask_span, "frames per masked span"),
      OSKDFT_INT("pretrain.n_bands", pretrain.n_bands, "log band energies per frame"),
      OSKDFT_INT("data.n_train_speakers", data.n_train_speakers, "training speakers"),
      OSKDFT_INT("data.n_eval_speakers", data.n_eval_speakers, "held-out evaluation speakers"),
      OSKDFT_INT("data.train_utts_per_speaker", data.train_utts_per_speaker, "utterances per training speaker"),
      OSKDFT_INT("data.eval_utts_per_speaker", data.eval_utts_per_speaker, "utterances per evaluation speaker"),
      OSKDFT_INT("data.n_pretrain_speakers", data.n_pretrain_speakers, "unlabeled speakers for teacher pretraining"),
      OSKDFT_INT("data.pretrain_utts_per_speaker", data.pretrain_utts_per_speaker, "utterances per unlabeled speaker"),
      OSKDFT_INT("data.n_target_trials", data.n_target_trials, "same-speaker trials"),
      OSKDFT_INT("data.n_nontarget_trials", data.n_nontarget_trials, "cross-speaker trials"),
      {"data.seed", "corpus synthesis seed",
       [](const RunConfig& c) { return std::to_string(c.data.seed); },
       [](RunConfig& c, const std::string& v) { c.data.seed = parse_number<uint64_t>(v); }},
      OSKDFT_INT("data.sample_rate", data.synth.sample_rate, "samples per second"),
      OSKDFT_DBL("data.min_seconds", data.synth.min_seconds, "shortest utterance"),
      OSKDFT_DBL("data.max_seconds", data.synth.max_seconds, "longest utterance"),
      OSKDFT_DBL("data.snr_db_min", data.synth.snr_db_min, "corpus noise SNR lower bound"),
      OSKDFT_DBL("data.snr_db_max", data.synth.snr_db_max, "corpus noise SNR upper bound"),
      OSKDFT_DBL("data.pitch_jitter", data.synth.pitch_jitter, "per-utterance pitch spread"),
      OSKDFT_DBL("data.tract_jitter", data.synth.tract_jitter, "per-utterance resonance spread"),
      OSKDFT_INT("data.n_phones", data.synth.n_phones, "shared phone inventory size"),
  };
  return k;
}

#undef OSKDFT_INT
#undef OSKDFT_DBL
#undef OSKDFT_BOOL

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& ks = keys();
    auto it = std::find_if(ks.begin(), ks.end(), [&](const Key& k) { return k.name == key; });
    if (it == ks.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->set(base, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return base;
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::string describe_config_keys() {
  const RunConfig def;
  std::string out;
  for (const auto& k : keys()) out += k.name + " (default " + k.get(def) + "): " + k.doc + "\n";
  return out;
}

std::string arm_label(const RunConfig& cfg) {
  const std::string ratio = std::to_string(cfg.kd_percent) + ":" + std::to_string(cfg.ft_percent);
  switch (cfg.mode) {
    case RunMode::kOsKdft: {
      const bool lr = cfg.lr_policy == LrPolicy::kPerModule;
      switch (cfg.adapters) {
        case AdapterMode::kNone:
          return lr ? "KDFT (LR)" : "KDFT";
        case AdapterMode::kShared:
          return lr ? "KDFT (AS param, LR)" : "KDFT (AS param)";
        case AdapterMode::kSplit:
          return lr ? "OS-KDFT (AS, LR)" : "OS-KDFT (AS)";
      }
      break;
    }
    case RunMode::kKdftSequential:
      return "KD then FT " + ratio;
    case RunMode::kKdThenFreeze:
      return "KD then freeze " + ratio;
    case RunMode::kTunedTeacherKl:
      return "Tuned-teacher KL";
    case RunMode::kFtOnly:
      return "FT only";
    case RunMode::kTeacherPretrain:
      return "Teacher pretrain";
  }
  return "?";
}

std::string arm_slug(const RunConfig& cfg) {
  std::string out;
  for (char ch : arm_label(cfg)) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

}  // namespace oskdft
