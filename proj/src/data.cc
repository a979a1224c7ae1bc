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

#include "oskdft/data.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include "oskdft/checkpoint.h"

namespace oskdft {

const Utterance& Corpus::find(const std::string& id) const {
  for (const auto& u : utterances)
    if (u.id == id) return u;
  throw std::out_of_range("unknown utterance id " + id);
}

bool Corpus::contains(const std::string& id) const {
  return std::any_of(utterances.begin(), utterances.end(),
                     [&](const Utterance& u) { return u.id == id; });
}

std::vector<std::string> Corpus::speakers() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& u : utterances)
    if (seen.insert(u.speaker).second) out.push_back(u.speaker);
  return out;
}

namespace {

constexpr int kFormants = 3;

struct Timbre {
  double f0 = 120.0;
  std::array<double, kFormants> freq{};
  std::array<double, kFormants> bw{};
  double tilt_db = -6.0;  // per octave
  double breath = 0.1;
};

// Relative formant shifts that make up the shared phone inventory.
using Phone = std::array<double, kFormants>;

Timbre draw_timbre(Rng& rng, double nyq) {
  Timbre t;
  t.f0 = uniform(rng, 0.045, 0.11) * nyq;
  t.freq[0] = uniform(rng, 0.15, 0.38) * nyq;
  t.freq[1] = uniform(rng, 0.45, 0.72) * nyq;
  t.freq[2] = uniform(rng, 0.76, 0.93) * nyq;
  for (double& b : t.bw) b = uniform(rng, 0.03, 0.07) * nyq;
  t.tilt_db = uniform(rng, -9.0, -3.0);
  t.breath = uniform(rng, 0.03, 0.25);
  return t;
}

double envelope(double f, const Timbre& t, const Phone& ph, double tract) {
  static constexpr std::array<double, kFormants> kGain = {1.0, 0.7, 0.45};
  double a = 0.0;
  for (int i = 0; i < kFormants; ++i) {
    const double fc = t.freq[i] * ph[i] * tract;
    const double x = (f - fc) / t.bw[i];
    a += kGain[i] / (1.0 + x * x);
  }
  return a * std::pow(10.0, t.tilt_db * std::log2(std::max(f, 50.0) / 100.0) / 20.0);
}

std::vector<float> synth_utterance(const Timbre& t, const std::vector<Phone>& phones,
                                   const SynthOptions& opts, Rng& rng) {
  const double rate = opts.sample_rate;
  const double nyq = 0.5 * rate;
  const auto n = static_cast<int64_t>(std::llround(uniform(rng, opts.min_seconds, opts.max_seconds) * rate));
  const double f0 = t.f0 * (1.0 + opts.pitch_jitter * uniform(rng, -1.0, 1.0));
  const double tract = 1.0 + opts.tract_jitter * uniform(rng, -1.0, 1.0);
  const double vib_rate = uniform(rng, 0.5, 2.5);
  const double vib_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double vib_depth = uniform(rng, 0.02, 0.08);

  std::vector<double> out(static_cast<size_t>(n), 0.0);
  constexpr int kBlock = 40;
  const int max_harm = static_cast<int>(0.95 * nyq / (f0 * (1.0 - vib_depth)));
  std::vector<double> amp(static_cast<size_t>(max_harm) + 1, 0.0);
  double phase = 0.0;
  int64_t seg_end = 0;
  size_t phone = 0;
  double seg_gain = 1.0;
  for (int64_t i = 0; i < n; ++i) {
    if (i >= seg_end) {
      seg_end = i + static_cast<int64_t>(uniform(rng, 0.12, 0.35) * rate);
      phone = static_cast<size_t>(uniform_int(rng, 0, static_cast<int64_t>(phones.size()) - 1));
      seg_gain = uniform(rng, 0.6, 1.0);
    }
    const double ts = static_cast<double>(i) / rate;
    const double fi = f0 * (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * ts + vib_phase));
    if (i % kBlock == 0) {
      for (int k = 1; k <= max_harm; ++k) {
        const double fk = k * fi;
        amp[static_cast<size_t>(k)] = fk < 0.95 * nyq ? envelope(fk, t, phones[phone], tract) : 0.0;
      }
    }
    phase += 2.0 * std::numbers::pi * fi / rate;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= max_harm; ++k) s += amp[static_cast<size_t>(k)] * std::sin(k * phase);
    out[static_cast<size_t>(i)] = seg_gain * (s + t.breath * standard_normal(rng));
  }
  double power = 0.0;
  for (double v : out) power += v * v;
  power /= static_cast<double>(n);
  const double snr_db = uniform(rng, opts.snr_db_min, opts.snr_db_max);
  const double noise_sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  const double norm = 1.0 / std::sqrt(power + noise_sd * noise_sd);
  std::vector<float> samples(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    samples[i] = static_cast<float>((out[i] + noise_sd * standard_normal(rng)) * norm);
  }
  return samples;
}

}  // namespace

Corpus synth_corpus(int n_speakers, int utts_per_speaker, uint64_t seed, const SynthOptions& opts) {
  if (n_speakers < 2) throw std::invalid_argument("synth_corpus: need at least 2 speakers");
  return synth_speakers(0, n_speakers, utts_per_speaker, seed, opts);
}

Corpus synth_speakers(int first, int count, int utts_per_speaker, uint64_t seed,
                      const SynthOptions& opts) {
  if (first < 0 || count < 0) throw std::invalid_argument("synth_speakers: negative speaker range");
  if (utts_per_speaker < 1) throw std::invalid_argument("synth_corpus: need at least 1 utterance per speaker");
  if (opts.sample_rate <= 0 || !(opts.min_seconds > 0.0) || opts.max_seconds < opts.min_seconds ||
      opts.n_phones < 1) {
    throw std::invalid_argument("synth_corpus: degenerate synthesis options");
  }
  const double nyq = 0.5 * opts.sample_rate;
  Rng phone_rng(derive_seed(seed, "phones"));
  std::vector<Phone> phones(static_cast<size_t>(opts.n_phones));
  for (auto& ph : phones)
    for (double& f : ph) f = uniform(phone_rng, 0.8, 1.2);

  Corpus corpus;
  corpus.sample_rate = opts.sample_rate;
  for (int k = first; k < first + count; ++k) {
    const std::string spk = "spk" + std::to_string(k);
    Rng timbre_rng(derive_seed(seed, spk));
    const Timbre timbre = draw_timbre(timbre_rng, nyq);
    for (int j = 0; j < utts_per_speaker; ++j) {
      const std::string id = spk + "_u" + std::to_string(j);
      Rng rng(derive_seed(seed, id));
      corpus.utterances.push_back({id, spk, synth_utterance(timbre, phones, opts, rng)});
    }
  }
  return corpus;
}

void DataConfig::validate() const {
  if (n_train_speakers < 2 || n_eval_speakers < 2 || n_pretrain_speakers < 0) {
    throw std::invalid_argument("data: need at least 2 train and 2 eval speakers");
  }
  if (train_utts_per_speaker < 1 || eval_utts_per_speaker < 2 || pretrain_utts_per_speaker < 1) {
    throw std::invalid_argument("data: utterances per speaker out of range");
  }
  if (n_target_trials < 1 || n_nontarget_trials < 1) {
    throw std::invalid_argument("data: need target and non-target trials");
  }
}

Datasets build_datasets(const DataConfig& cfg) {
  cfg.validate();
  Datasets d;
  d.train = synth_speakers(0, cfg.n_train_speakers, cfg.train_utts_per_speaker, cfg.seed, cfg.synth);
  d.eval = synth_speakers(cfg.n_train_speakers, cfg.n_eval_speakers, cfg.eval_utts_per_speaker,
                          cfg.seed, cfg.synth);
  d.pretrain = d.train;
  const Corpus extra = synth_speakers(cfg.n_train_speakers + cfg.n_eval_speakers,
                                      cfg.n_pretrain_speakers, cfg.pretrain_utts_per_speaker,
                                      cfg.seed, cfg.synth);
  d.pretrain.utterances.insert(d.pretrain.utterances.end(), extra.utterances.begin(),
                               extra.utterances.end());
  d.trials = make_trials(d.eval, cfg.n_target_trials, cfg.n_nontarget_trials, cfg.seed);
  return d;
}

std::pair<Corpus, Corpus> split_speakers(const Corpus& corpus, int n_train) {
  const auto spk = corpus.speakers();
  if (n_train < 1 || n_train >= static_cast<int>(spk.size())) {
    throw std::invalid_argument("split_speakers: need 1 <= n_train < " + std::to_string(spk.size()));
  }
  std::unordered_set<std::string> train(spk.begin(), spk.begin() + n_train);
  Corpus a, b;
  a.sample_rate = b.sample_rate = corpus.sample_rate;
  for (const auto& u : corpus.utterances) (train.count(u.speaker) ? a : b).utterances.push_back(u);
  return {std::move(a), std::move(b)};
}

std::vector<double> crop_random(const Utterance& u, double seconds, int sample_rate, Rng& rng,
                                int64_t* offset) {
  const auto len = static_cast<int64_t>(std::llround(seconds * sample_rate));
  const auto n = static_cast<int64_t>(u.samples.size());
  if (len <= 0 || n < len) {
    throw std::invalid_argument("utterance " + u.id + " has " + std::to_string(n) +
                                " samples, crop needs " + std::to_string(len));
  }
  const int64_t off = uniform_int(rng, 0, n - len);
  if (offset) *offset = off;
  return std::vector<double>(u.samples.begin() + off, u.samples.begin() + off + len);
}

void add_noise(std::vector<double>& samples, const NoiseAugment& opts, Rng& rng) {
  if (samples.empty()) return;
  double power = 0.0;
  for (double v : samples) power += v * v;
  power /= static_cast<double>(samples.size());
  const double snr_db = uniform(rng, opts.snr_db_min, opts.snr_db_max);
  const double sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  const double gain = uniform(rng, opts.gain_min, opts.gain_max);
  for (double& v : samples) v = gain * (v + sd * standard_normal(rng));
}

Tensor spec_augment_mask(const Shape& shape, const SpecAugmentParams& p, Rng& rng) {
  if (shape.size() != 3) throw DimensionError("spec_augment: expected (batch, frames, channels)");
  const int64_t b = shape[0], tn = shape[1], c = shape[2];
  if (p.time_masks < 0 || p.chan_masks < 0 || p.time_width < 0 || p.chan_width < 0) {
    throw std::invalid_argument("spec_augment: negative mask count or width");
  }
  if ((p.time_masks > 0 && p.time_width > tn) || (p.chan_masks > 0 && p.chan_width > c)) {
    throw std::invalid_argument("spec_augment: mask width exceeds dimension (" +
                                std::to_string(p.time_width) + "/" + std::to_string(tn) + " frames, " +
                                std::to_string(p.chan_width) + "/" + std::to_string(c) + " channels)");
  }
  Tensor mask(shape, 1.0);
  for (int64_t i = 0; i < b; ++i) {
    for (int m = 0; m < p.time_masks; ++m) {
      const int64_t t0 = uniform_int(rng, 0, tn - p.time_width);
      for (int64_t t = t0; t < t0 + p.time_width; ++t)
        for (int64_t j = 0; j < c; ++j) mask.at(i, t, j) = 0.0;
    }
    for (int m = 0; m < p.chan_masks; ++m) {
      const int64_t c0 = uniform_int(rng, 0, c - p.chan_width);
      for (int64_t t = 0; t < tn; ++t)
        for (int64_t j = c0; j < c0 + p.chan_width; ++j) mask.at(i, t, j) = 0.0;
    }
  }
  return mask;
}

Tensor spec_augment(const Tensor& features, const SpecAugmentParams& p, Rng& rng) {
  Tensor mask = spec_augment_mask(features.shape(), p, rng);
  Tensor out = features;
  for (int64_t i = 0; i < out.size(); ++i)
    if (mask[i] == 0.0) out[i] = 0.0;
  return out;
}

TrialSet parse_trials(const std::string& text) {
  TrialSet out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string label, a, b, extra;
    if (!(ls >> label >> a >> b) || (ls >> extra) || (label != "0" && label != "1")) {
      throw std::runtime_error("trials line " + std::to_string(lineno) +
                               ": expected '<0|1> <enroll_id> <test_id>', got '" + line + "'");
    }
    out.records.push_back({label == "1" ? 1 : 0, a, b});
  }
  if (out.records.empty()) throw std::runtime_error("no trials");
  return out;
}

TrialSet load_trials(const std::filesystem::path& path) { return parse_trials(read_file(path)); }

std::string format_trials(const TrialSet& trials) {
  std::string out;
  for (const auto& r : trials.records)
    out += std::to_string(r.label) + " " + r.enroll_id + " " + r.test_id + "\n";
  return out;
}

void bind_trials(const TrialSet& trials, const Corpus& corpus) {
  std::unordered_set<std::string> ids;
  for (const auto& u : corpus.utterances) ids.insert(u.id);
  bool pos = false, neg = false;
  for (const auto& r : trials.records) {
    for (const auto* id : {&r.enroll_id, &r.test_id}) {
      if (!ids.count(*id)) throw std::runtime_error("trial references unknown utterance " + *id);
    }
    (r.label ? pos : neg) = true;
  }
  if (!pos || !neg) throw std::runtime_error("trial list needs both target and non-target trials");
}

TrialSet make_trials(const Corpus& corpus, int n_target, int n_nontarget, uint64_t seed) {
  const auto& utts = corpus.utterances;
  const auto n = static_cast<int64_t>(utts.size());
  if (n < 2) throw std::invalid_argument("make_trials: corpus too small");
  int64_t max_tgt = 0, max_non = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) (utts[i].speaker == utts[j].speaker ? max_tgt : max_non)++;
  if (n_target > max_tgt || n_nontarget > max_non) {
    throw std::invalid_argument("make_trials: corpus has only " + std::to_string(max_tgt) +
                                " target and " + std::to_string(max_non) + " non-target pairs");
  }
  Rng rng(derive_seed(seed, "trials"));
  TrialSet out;
  std::set<std::pair<int64_t, int64_t>> used;
  auto draw = [&](int want, bool same) {
    int got = 0;
    while (got < want) {
      int64_t i = uniform_int(rng, 0, n - 1), j = uniform_int(rng, 0, n - 1);
      if (i == j || (utts[i].speaker == utts[j].speaker) != same) continue;
      if (!used.insert({std::min(i, j), std::max(i, j)}).second) continue;
      out.records.push_back({same ? 1 : 0, utts[i].id, utts[j].id});
      ++got;
    }
  };
  draw(n_target, true);
  draw(n_nontarget, false);
  return out;
}

void write_raw(const std::filesystem::path& path, const std::vector<float>& samples,
               int sample_rate) {
  std::string bytes = "oskdft-raw 1 " + std::to_string(sample_rate) + " " +
                      std::to_string(samples.size()) + "\n";
  const size_t off = bytes.size();
  bytes.resize(off + samples.size() * 4);
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto bits = std::bit_cast<uint32_t>(samples[i]);
    for (int b = 0; b < 4; ++b) bytes[off + i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  write_file_atomic(path, bytes);
}

std::vector<float> read_raw(const std::filesystem::path& path, int* sample_rate) {
  const std::string bytes = read_file(path);
  const size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw std::runtime_error(path.string() + ": missing raw header");
  std::istringstream hs(bytes.substr(0, nl));
  std::string magic;
  int version = 0, rate = 0;
  size_t n = 0;
  if (!(hs >> magic >> version >> rate >> n) || magic != "oskdft-raw" || version != 1) {
    throw std::runtime_error(path.string() + ": bad raw header");
  }
  if (bytes.size() != nl + 1 + n * 4) throw std::runtime_error(path.string() + ": truncated raw data");
  std::vector<float> out(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[nl + 1 + i * 4 + b])) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  if (sample_rate) *sample_rate = rate;
  return out;
}

void export_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::string manifest;
  for (const auto& u : corpus.utterances) {
    const std::string rel = "wav/" + u.id + ".raw";
    write_raw(dir / rel, u.samples, corpus.sample_rate);
    manifest += u.id + " " + u.speaker + " " + rel + "\n";
  }
  write_file_atomic(dir / "manifest.txt", manifest);
}

Corpus load_corpus(const std::filesystem::path& manifest) {
  const std::string text = read_file(manifest);
  const auto base = manifest.parent_path();
  Corpus corpus;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool have_rate = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Utterance u;
    std::string rel;
    if (!(ls >> u.id >> u.speaker >> rel)) {
      throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) +
                               ": expected '<id> <speaker> <path>'");
    }
    int rate = 0;
    u.samples = read_raw(base / rel, &rate);
    if (have_rate && rate != corpus.sample_rate) {
      throw std::runtime_error(manifest.string() + ": mixed sample rates");
    }
    corpus.sample_rate = rate;
    have_rate = true;
    corpus.utterances.push_back(std::move(u));
  }
  if (corpus.utterances.empty()) throw std::runtime_error(manifest.string() + ": empty manifest");
  return corpus;
}

}  // namespace oskdft
