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

#include "oskdft/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "oskdft/distillation.h"
#include "oskdft/init.h"

namespace oskdft {

namespace fs = std::filesystem;

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::kJoint:
      return "joint";
    case PhaseKind::kKd:
      return "kd";
    case PhaseKind::kFt:
      return "ft";
    case PhaseKind::kHead:
      return "head";
    case PhaseKind::kTeacherFt:
      return "teacher_ft";
    case PhaseKind::kKl:
      return "kl";
  }
  return "?";
}

std::vector<Phase> plan_phases(const RunConfig& cfg) {
  std::vector<Phase> all;
  switch (cfg.mode) {
    case RunMode::kOsKdft:
      all = {{PhaseKind::kJoint, cfg.epochs}};
      break;
    case RunMode::kKdftSequential:
      all = {{PhaseKind::kKd, cfg.kd_epochs()}, {PhaseKind::kFt, cfg.ft_epochs()}};
      break;
    case RunMode::kKdThenFreeze:
      all = {{PhaseKind::kKd, cfg.kd_epochs()}, {PhaseKind::kHead, cfg.ft_epochs()}};
      break;
    case RunMode::kTunedTeacherKl:
      all = {{PhaseKind::kTeacherFt, cfg.tune_epochs()}, {PhaseKind::kKl, cfg.epochs}};
      break;
    case RunMode::kFtOnly:
      all = {{PhaseKind::kFt, cfg.epochs}};
      break;
    case RunMode::kTeacherPretrain:
      throw ConfigError("teacher_pretrain is run by pretrain_teacher, not by run");
  }
  std::vector<Phase> out;
  for (const auto& p : all)
    if (p.epochs > 0) out.push_back(p);
  if (out.empty()) throw ConfigError("run has no training epochs");
  return out;
}

StepSpec step_spec(PhaseKind kind, const RunConfig& cfg) {
  StepSpec s;
  s.n_layers = cfg.model.n_layers_student;
  switch (kind) {
    case PhaseKind::kJoint:
      s.use_kd = s.use_sv = true;
      s.adapters = cfg.effective_adapters();
      s.train_backbone = s.train_head = true;
      s.train_adapters = s.adapters != AdapterMode::kNone;
      s.spec_augment = cfg.augment;
      break;
    case PhaseKind::kKd:
      s.use_kd = true;
      s.train_backbone = true;
      break;
    case PhaseKind::kFt:
      s.use_sv = true;
      s.train_backbone = s.train_head = true;
      s.spec_augment = cfg.augment;
      break;
    case PhaseKind::kHead:
      s.use_sv = true;
      s.train_head = true;
      s.spec_augment = cfg.augment;
      break;
    case PhaseKind::kTeacherFt:
      s.use_sv = true;
      s.n_layers = cfg.model.n_layers_teacher;
      s.train_backbone = s.train_head = true;
      s.spec_augment = cfg.augment;
      break;
    case PhaseKind::kKl:
      s.use_kl = true;
      s.train_backbone = s.train_head = true;
      break;
  }
  return s;
}

namespace {

SpeakerHeadConfig head_for(const RunConfig& cfg, const ParameterStore& params) {
  SpeakerHeadConfig h = cfg.head;
  h.n_speakers = static_cast<int>(params.get("head.class_w").dim(0));
  return h;
}

double group_norm(const ParameterStore& grads, ParamGroup g) {
  double s = 0.0;
  for (const auto& e : grads.entries()) {
    if (group_of(e.name) != g) continue;
    for (double v : e.value.values()) s += v * v;
  }
  return std::sqrt(s);
}

ag::Var features(ParamBinder& p, const ModelConfig& model, const Tensor& wave, int n_layers,
                 AdapterMode mode, ag::Var* kd) {
  ag::Var w = p.tape().constant(wave);
  if (mode == AdapterMode::kNone) {
    ag::Var f = encoder_stack(p, model, cnn_forward(p, model, w), n_layers, Path::kPlain);
    if (kd) *kd = f;
    return f;
  }
  StudentVars v = student_forward(p, model, w, mode);
  if (kd) *kd = v.kd;
  return v.sv;
}

Tensor logits_value(const Tensor& emb, const Tensor& class_w, const SpeakerHeadConfig& head) {
  ag::Tape t(false);
  return speaker_logits(t.constant(emb), t.constant(class_w), head).value();
}

}  // namespace

StepResult compute_step(const StepSpec& spec, const RunConfig& cfg, const ParameterStore& params,
                        const StepInputs& in, Rng* rng) {
  const ModelConfig& model = cfg.model;
  const SpeakerHeadConfig head = (spec.use_sv || spec.use_kl) ? head_for(cfg, params) : cfg.head;
  ag::Tape tape;
  ParamBinder p(tape, params, [&](const std::string& name) {
    switch (group_of(name)) {
      case ParamGroup::kClassifier:
        return spec.train_head;
      case ParamGroup::kAdapter:
        return spec.train_adapters;
      case ParamGroup::kBackbone:
        return spec.train_backbone;
    }
    return false;
  });

  ag::Var kd_feats;
  ag::Var sv_feats = features(p, model, in.waveform, spec.n_layers, spec.adapters, &kd_feats);

  StepResult r;
  ag::Var kd_term, sv_term, joint;
  if (spec.use_kd) {
    if (!in.teacher) throw std::invalid_argument("KD step without a teacher");
    kd_term = kd_loss(kd_feats, teacher_forward(in.waveform, *in.teacher, model), cfg.loss);
    r.kd = kd_term.value().item();
  }
  ag::Var emb;
  if (spec.use_sv || spec.use_kl) {
    ag::Var f = sv_feats;
    if (spec.use_sv && spec.spec_augment) {
      if (!rng) throw std::invalid_argument("SpecAugment step without a random stream");
      f = ag::mul_const(f, spec_augment_mask(f.shape(), cfg.spec, *rng));
    }
    emb = pool(p, head, f);
    r.acc = accuracy(logits_value(emb.value(), params.get("head.class_w"), head), in.labels);
  }
  if (spec.use_sv) {
    sv_term = aam_softmax_loss(emb, in.labels, p("head.class_w"), head);
    r.sv = sv_term.value().item();
  }
  if (spec.use_kl) {
    if (!in.tuned_teacher) throw std::invalid_argument("KL step without a tuned teacher");
    ag::Tape tt(false);
    ParamBinder pt(tt, *in.tuned_teacher);
    ag::Var ft = features(pt, model, in.waveform, model.n_layers_teacher, AdapterMode::kNone,
                          nullptr);
    const Tensor target =
        speaker_logits(pool(pt, head, ft), pt("head.class_w"), head).value();
    kd_term = kl_kd_loss(speaker_logits(emb, p("head.class_w"), head), target);
    r.kd = kd_term.value().item();
  }

  if (spec.use_kd && spec.use_sv) {
    joint = joint_loss(kd_term, sv_term, cfg.loss);
  } else if (spec.use_sv) {
    require_finite(r.sv, "sv");
    joint = ag::scale(sv_term, cfg.loss.sv_scale);
  } else if (spec.use_kd || spec.use_kl) {
    require_finite(r.kd, spec.use_kl ? "kl" : "kd");
    joint = kd_term;
  } else {
    throw std::invalid_argument("step computes no loss");
  }
  r.joint = joint.value().item();
  require_finite(r.joint, "joint");
  tape.backward(joint);
  r.grads = p.gradients();
  r.gn_backbone = group_norm(r.grads, ParamGroup::kBackbone);
  r.gn_adapter = group_norm(r.grads, ParamGroup::kAdapter);
  r.gn_head = group_norm(r.grads, ParamGroup::kClassifier);
  return r;
}

LrTriple phase_lrs(int tau, int tau_tot, const RunConfig& cfg) {
  ScheduleParams p = cfg.schedule;
  p.tau_tot = tau_tot;
  LrTriple lr = lr_triple(tau, p);
  if (cfg.lr_policy == LrPolicy::kShared) lr.backbone = lr.adapter = lr.classifier;
  return lr;
}

void apply_step(ParameterStore& params, const StepResult& step, Adam& opt, const LrTriple& lr) {
  opt.step(params, step.grads, [&](const std::string& name) {
    switch (group_of(name)) {
      case ParamGroup::kClassifier:
        return lr.classifier;
      case ParamGroup::kAdapter:
        return lr.adapter;
      case ParamGroup::kBackbone:
        return lr.backbone;
    }
    return 0.0;
  });
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string metrics_header() {
  return "epoch,phase,lr_classifier,lr_backbone,lr_adapter,kd_loss,sv_loss,joint_loss,train_acc,"
         "gn_backbone,gn_adapter,gn_head,eer\n";
}

std::string metrics_row(const EpochRecord& r) {
  std::string out = std::to_string(r.epoch) + "," + r.phase;
  for (double v : {r.lr.classifier, r.lr.backbone, r.lr.adapter, r.kd, r.sv, r.joint, r.acc,
                   r.gn_backbone, r.gn_adapter, r.gn_head}) {
    out += "," + num(v);
  }
  out += "," + (r.eer ? num(*r.eer) : std::string()) + "\n";
  return out;
}

std::string schedule_csv(const RunConfig& cfg) {
  std::string out = "epoch,lr_classifier,lr_backbone,lr_adapter\n";
  int epoch = 0;
  for (const auto& ph : plan_phases(cfg)) {
    for (int t = 1; t <= ph.epochs; ++t) {
      const LrTriple lr = phase_lrs(t, ph.epochs, cfg);
      out += std::to_string(++epoch) + "," + num(lr.classifier) + "," + num(lr.backbone) + "," +
             num(lr.adapter) + "\n";
    }
  }
  return out;
}

Embedder student_embedder(const ParameterStore& params, const RunConfig& cfg, int n_layers,
                          AdapterMode mode) {
  const SpeakerHeadConfig head = head_for(cfg, params);
  const ModelConfig model = cfg.model;
  const Path path = sv_path(mode);
  return [&params, head, model, n_layers, path](const std::vector<double>& wave) {
    return extract_embedding(wave, params, model, head, n_layers, path);
  };
}

namespace {

struct TrainState {
  ParameterStore params;
  ParameterStore tuned;  // SV-tuned teacher, kKl phase only
  Adam opt;
  Rng rng;
  int epoch = 0;        // completed epochs, global
  size_t phase = 0;     // index into the phase plan
  int phase_epoch = 0;  // completed epochs of that phase
};

constexpr const char* kAdamPrefix = "adam.";

fs::path ckpt_path(const fs::path& dir, int epoch) {
  return dir / "ckpt" / ("epoch_" + std::to_string(epoch));
}

void save_state(const fs::path& dir, const TrainState& s, const RunConfig& cfg, uint64_t seed) {
  Checkpoint c;
  c.config = cfg.model;
  c.params = s.params;
  s.opt.save(c.params, c.meta, kAdamPrefix);
  c.meta["epoch"] = std::to_string(s.epoch);
  c.meta["phase"] = std::to_string(s.phase);
  c.meta["phase_epoch"] = std::to_string(s.phase_epoch);
  c.meta["rng"] = rng_state(s.rng);
  c.meta["seed"] = std::to_string(seed);
  c.meta["mode"] = to_string(cfg.mode);
  save_checkpoint(ckpt_path(dir, s.epoch), c);
}

int newest_checkpoint(const fs::path& dir) {
  int best = 0;
  if (!fs::exists(dir / "ckpt")) return 0;
  for (const auto& e : fs::directory_iterator(dir / "ckpt")) {
    const std::string n = e.path().filename().string();
    if (n.rfind("epoch_", 0) != 0) continue;
    try {
      size_t used = 0;
      const int k = std::stoi(n.substr(6), &used);
      if (used == n.size() - 6) best = std::max(best, k);
    } catch (const std::exception&) {
    }
  }
  return best;
}

void load_state(const fs::path& dir, int epoch, TrainState& s) {
  const Checkpoint c = load_checkpoint(ckpt_path(dir, epoch));
  s.params = ParameterStore(c.params.seed());
  for (const auto& e : c.params.entries()) {
    if (e.name.rfind(kAdamPrefix, 0) != 0) s.params.add(e.name, e.value);
  }
  s.opt.load(c.params, c.meta, kAdamPrefix);
  set_rng_state(s.rng, c.meta.at("rng"));
  s.epoch = std::stoi(c.meta.at("epoch"));
  s.phase = std::stoul(c.meta.at("phase"));
  s.phase_epoch = std::stoi(c.meta.at("phase_epoch"));
}

std::string keep_metrics_rows(const std::string& text, int last_epoch) {
  std::istringstream is(text);
  std::string line, out = metrics_header();
  std::getline(is, line);
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    if (std::stoi(line.substr(0, comma)) <= last_epoch) out += line + "\n";
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

EpochRecord parse_metrics_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (f.size() == 12) f.push_back("");
  if (f.size() != 13) throw std::runtime_error("malformed metrics row: " + line);
  EpochRecord r;
  r.epoch = std::stoi(f[0]);
  r.phase = f[1];
  r.lr = {std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
  r.kd = std::stod(f[5]);
  r.sv = std::stod(f[6]);
  r.joint = std::stod(f[7]);
  r.acc = std::stod(f[8]);
  r.gn_backbone = std::stod(f[9]);
  r.gn_adapter = std::stod(f[10]);
  r.gn_head = std::stod(f[11]);
  if (!f[12].empty()) r.eer = std::stod(f[12]);
  return r;
}

TrialScores evaluate(const ParameterStore& params, const RunConfig& cfg, const RunInputs& in) {
  const Embedder embed =
      student_embedder(params, cfg, cfg.model.n_layers_student, cfg.effective_adapters());
  return score_trials(*in.trials, *in.eval, embed, cfg.segment_seconds);
}

}  // namespace

RunRecord run(const RunConfig& cfg_in, uint64_t seed, const RunInputs& in, const fs::path& run_dir,
              const RunOptions& opt) {
  const auto t_start = std::chrono::steady_clock::now();
  RunConfig cfg = cfg_in;
  cfg.seeds = {seed};
  cfg.validate();
  if (!in.train || !in.eval || !in.trials) throw std::invalid_argument("run: missing corpus or trials");
  const auto phases = plan_phases(cfg);
  const bool needs_teacher = cfg.mode != RunMode::kFtOnly;
  if (needs_teacher && !in.teacher) {
    throw std::runtime_error("mode " + to_string(cfg.mode) + " needs a pretrained teacher (teacher.ckpt)");
  }
  if (in.teacher) validate_layout(*in.teacher, backbone_layout(cfg.model, Role::kTeacher));
  bind_trials(*in.trials, *in.eval);

  const Corpus& train = *in.train;
  const auto speakers = train.speakers();
  std::unordered_map<std::string, int> label_of;
  for (size_t i = 0; i < speakers.size(); ++i) label_of[speakers[i]] = static_cast<int>(i);
  if (static_cast<int>(train.utterances.size()) < cfg.batch_size) {
    throw std::invalid_argument("training corpus has fewer utterances than one batch");
  }
  SpeakerHeadConfig head = cfg.head;
  head.n_speakers = static_cast<int>(speakers.size());
  head.validate();

  const bool write = !run_dir.empty();
  const std::string config_text = format_run_config(cfg);
  TrainState s;
  RunRecord record;
  std::string metrics = metrics_header();
  const uint64_t student_seed = derive_seed(seed, "student");
  const ParameterStore init_source =
      in.teacher ? *in.teacher : random_teacher(cfg.model, derive_seed(seed, "teacher"));

  int resume_epoch = 0;
  if (write) {
    const bool non_empty = fs::exists(run_dir) && !fs::is_empty(run_dir);
    if (non_empty && !opt.resume) {
      throw std::runtime_error("run directory " + run_dir.string() +
                               " already exists; pass --resume to continue it");
    }
    if (opt.resume && fs::exists(run_dir / "config.txt") &&
        read_file(run_dir / "config.txt") != config_text) {
      throw std::runtime_error("resolved config differs from " + (run_dir / "config.txt").string());
    }
    if (opt.resume) resume_epoch = newest_checkpoint(run_dir);
    fs::create_directories(run_dir / "ckpt");
    write_file_atomic(run_dir / "config.txt", config_text);
    write_file_atomic(run_dir / "schedule.csv", schedule_csv(cfg));
  } else if (opt.resume) {
    throw std::invalid_argument("resume needs a run directory");
  }

  if (resume_epoch > 0) {
    load_state(run_dir, resume_epoch, s);
    if (fs::exists(run_dir / "metrics.csv")) {
      metrics = keep_metrics_rows(read_file(run_dir / "metrics.csv"), resume_epoch);
    }
    const auto rows = lines_of(metrics);
    for (size_t i = 1; i < rows.size(); ++i) record.epochs.push_back(parse_metrics_row(rows[i]));
    if (s.phase < phases.size() && phases[s.phase].kind == PhaseKind::kKl && s.phase_epoch > 0) {
      s.tuned = load_checkpoint(run_dir / "tuned_teacher.ckpt").params;
    }
  } else {
    s.rng = Rng(derive_seed(seed, "batches"));
    if (phases.front().kind == PhaseKind::kTeacherFt) {
      ParameterStore p = init_source;
      p.set_seed(student_seed);
      for (const auto& spec : head_layout(head, cfg.model.d_model)) p.add(spec.name, Tensor(spec.shape));
      s.params = init_random("head.*", p, student_seed);
    } else {
      s.params = init_student_from_teacher(init_source, cfg.model, head, student_seed);
    }
  }
  if (write) write_file_atomic(run_dir / "metrics.csv", metrics);

  std::vector<size_t> order(train.utterances.size());
  const int per_epoch = static_cast<int>(order.size()) / cfg.batch_size;

  for (; s.phase < phases.size(); ++s.phase, s.phase_epoch = 0) {
    const Phase& ph = phases[s.phase];
    const StepSpec spec = step_spec(ph.kind, cfg);
    if (s.phase_epoch == 0 && s.phase > 0) {
      s.opt = Adam();
      if (ph.kind == PhaseKind::kKl) {
        s.tuned = s.params;
        if (write) save_checkpoint(run_dir / "tuned_teacher.ckpt", {cfg.model, s.tuned, {}});
        s.params = init_student_from_teacher(s.tuned, cfg.model, head, student_seed);
      }
    }
    StepInputs step_in;
    step_in.teacher = in.teacher;
    step_in.tuned_teacher = ph.kind == PhaseKind::kKl ? &s.tuned : nullptr;

    while (s.phase_epoch < ph.epochs) {
      const int tau = s.phase_epoch + 1;
      const LrTriple lr = phase_lrs(tau, ph.epochs, cfg);
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<size_t>(uniform_int(s.rng, 0, static_cast<int64_t>(i)))]);
      }
      EpochRecord rec;
      rec.epoch = s.epoch + 1;
      rec.phase = to_string(ph.kind);
      rec.lr = lr;
      for (int b = 0; b < per_epoch; ++b) {
        std::vector<std::vector<double>> rows;
        step_in.labels.clear();
        for (int j = 0; j < cfg.batch_size; ++j) {
          const Utterance& u = train.utterances[order[static_cast<size_t>(b * cfg.batch_size + j)]];
          rows.push_back(crop_random(u, cfg.crop_seconds, train.sample_rate, s.rng));
          if (cfg.augment) add_noise(rows.back(), cfg.noise, s.rng);
          step_in.labels.push_back(label_of.at(u.speaker));
        }
        step_in.waveform = waveform_batch(rows);
        StepResult r = compute_step(spec, cfg, s.params, step_in, &s.rng);
        apply_step(s.params, r, s.opt, lr);
        rec.kd += r.kd;
        rec.sv += r.sv;
        rec.joint += r.joint;
        rec.acc += r.acc;
        rec.gn_backbone += r.gn_backbone;
        rec.gn_adapter += r.gn_adapter;
        rec.gn_head += r.gn_head;
      }
      for (double* v : {&rec.kd, &rec.sv, &rec.joint, &rec.acc, &rec.gn_backbone, &rec.gn_adapter,
                        &rec.gn_head}) {
        *v /= per_epoch;
      }
      ++s.epoch;
      ++s.phase_epoch;
      const bool student_model = ph.kind != PhaseKind::kTeacherFt;
      if (cfg.eval_every > 0 && s.epoch % cfg.eval_every == 0 && student_model) {
        rec.eer = compute_eer(evaluate(s.params, cfg, in).set);
      }
      record.epochs.push_back(rec);
      metrics += metrics_row(rec);
      if (write) {
        save_state(run_dir, s, cfg, seed);
        write_file_atomic(run_dir / "metrics.csv", metrics);
      }
      if (opt.on_epoch) opt.on_epoch(rec);
      if (opt.stop_after_epoch > 0 && s.epoch >= opt.stop_after_epoch &&
          !(s.phase + 1 == phases.size() && s.phase_epoch == ph.epochs)) {
        record.final_params = s.params;
        return record;
      }
    }
  }

  const TrialScores scores = evaluate(s.params, cfg, in);
  const double eer = compute_eer(scores.set);
  record.eer = eer;
  record.complete = true;
  record.params_student =
      backbone_param_count(cfg.model, Role::kStudent) - adapter_param_count(cfg.model);
  for (const auto& spec : head_layout(head, cfg.model.d_model)) record.params_student += num_elements(spec.shape);
  record.params_adapters =
      cfg.effective_adapters() == AdapterMode::kNone ? 0 : adapter_param_count(cfg.model);
  record.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  record.final_params = s.params;
  if (write) {
    write_file_atomic(run_dir / "scores.txt", format_scores(scores));
    write_file_atomic(run_dir / "eer.txt",
                      eer_report(scores, eer,
                                 {{"arm", arm_label(cfg)},
                                  {"mode", to_string(cfg.mode)},
                                  {"seed", std::to_string(seed)},
                                  {"params_student", std::to_string(record.params_student)},
                                  {"params_adapters", std::to_string(record.params_adapters)}}));
    // Kept apart from the results so that every other artifact is reproducible.
    write_file_atomic(run_dir / "timing.txt", "wall_clock_s=" + num(record.wall_clock_s) + "\n");
  }
  return record;
}

Tensor band_energy_targets(const Tensor& waveform, int frame_len, int n_bands) {
  if (waveform.rank() != 2) throw DimensionError("band energies need a (batch, samples) waveform");
  const int n_bins = frame_len / 2;
  if (n_bands < 1 || n_bands > n_bins) throw std::invalid_argument("n_bands must lie in [1, frame_len/2]");
  const int64_t b = waveform.dim(0), frames = waveform.dim(1) / frame_len;
  std::vector<double> cos_t(static_cast<size_t>(frame_len)), sin_t(static_cast<size_t>(frame_len));
  for (int i = 0; i < frame_len; ++i) {
    const double a = 2.0 * std::numbers::pi * i / frame_len;
    cos_t[static_cast<size_t>(i)] = std::cos(a);
    sin_t[static_cast<size_t>(i)] = std::sin(a);
  }
  Tensor out({b, frames, n_bands});
  std::vector<double> power(static_cast<size_t>(n_bins));
  for (int64_t r = 0; r < b; ++r) {
    for (int64_t f = 0; f < frames; ++f) {
      const double* x = waveform.data() + r * waveform.dim(1) + f * frame_len;
      for (int k = 1; k <= n_bins; ++k) {
        double re = 0.0, im = 0.0;
        for (int i = 0; i < frame_len; ++i) {
          const auto idx = static_cast<size_t>((static_cast<int64_t>(k) * i) % frame_len);
          re += x[i] * cos_t[idx];
          im -= x[i] * sin_t[idx];
        }
        power[static_cast<size_t>(k - 1)] = (re * re + im * im) / frame_len;
      }
      for (int band = 0; band < n_bands; ++band) {
        const int lo = band * n_bins / n_bands, hi = (band + 1) * n_bins / n_bands;
        double e = 0.0;
        for (int k = lo; k < hi; ++k) e += power[static_cast<size_t>(k)];
        out.at(r, f, band) = std::log(e / (hi - lo) + 1e-6);
      }
    }
  }
  return out;
}

namespace {

std::vector<ParamSpec> recon_layout(const RunConfig& cfg) {
  const int64_t d = cfg.model.d_model;
  return {{"recon.mask_emb", {d}},
          {"recon.w", {d, cfg.pretrain.n_bands}},
          {"recon.b", {cfg.pretrain.n_bands}}};
}

Tensor draw_frame_mask(int64_t b, int64_t frames, const PretrainConfig& p, Rng& rng) {
  Tensor mask({b, frames});
  for (int64_t r = 0; r < b; ++r) {
    bool any = false;
    for (int64_t t = 0; t < frames; ++t) {
      if (uniform01(rng) >= p.mask_prob) continue;
      for (int64_t k = t; k < std::min(frames, t + p.mask_span); ++k) mask.at(r, k) = 1.0;
      any = true;
    }
    if (!any) {
      const int64_t span = std::min<int64_t>(p.mask_span, frames);
      const int64_t t0 = uniform_int(rng, 0, frames - span);
      for (int64_t k = t0; k < t0 + span; ++k) mask.at(r, k) = 1.0;
    }
  }
  return mask;
}

// Masked-reconstruction loss; gradients of trainable entries when tape records.
double recon_loss(ParamBinder& p, const RunConfig& cfg, const Tensor& wave, const Tensor& mask,
                  bool backward) {
  const ModelConfig& m = cfg.model;
  const Tensor target = band_energy_targets(wave, m.total_stride(), cfg.pretrain.n_bands);
  ag::Var x = cnn_forward(p, m, p.tape().constant(wave));
  ag::Var masked = ag::mask_frames(x, mask, p("recon.mask_emb"));
  ag::Var h = encoder_stack(p, m, masked, m.n_layers_teacher, Path::kPlain);
  ag::Var pred = ag::add_bias(ag::matmul(h, p("recon.w")), p("recon.b"));
  ag::Var loss = ag::masked_mse(pred, target, mask);
  if (backward) p.tape().backward(loss);
  return loss.value().item();
}

}  // namespace

PretrainResult pretrain_teacher(const Corpus& corpus, const RunConfig& cfg, uint64_t seed,
                                const std::function<void(int, double)>& on_epoch) {
  cfg.validate();
  PretrainResult out;
  out.teacher = random_teacher(cfg.model, seed);
  ParameterStore full = out.teacher;
  for (const auto& spec : recon_layout(cfg)) full.add(spec.name, Tensor(spec.shape));
  full = init_random("recon.*", full, seed);
  const auto& pc = cfg.pretrain;
  const int64_t n = static_cast<int64_t>(corpus.utterances.size());
  if (pc.epochs > 0 && n < pc.batch_size) throw std::invalid_argument("corpus smaller than one pretraining batch");

  Rng rng(derive_seed(seed, "pretrain"));
  Adam opt;
  std::vector<size_t> order(static_cast<size_t>(n));
  for (int epoch = 1; epoch <= pc.epochs; ++epoch) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<size_t>(uniform_int(rng, 0, static_cast<int64_t>(i)))]);
    }
    const int64_t batches = n / pc.batch_size;
    double total = 0.0;
    for (int64_t b = 0; b < batches; ++b) {
      std::vector<std::vector<double>> rows;
      for (int j = 0; j < pc.batch_size; ++j) {
        rows.push_back(crop_random(corpus.utterances[order[static_cast<size_t>(b * pc.batch_size + j)]],
                                   cfg.crop_seconds, corpus.sample_rate, rng));
      }
      const Tensor wave = waveform_batch(rows);
      const Tensor mask = draw_frame_mask(wave.dim(0), wave.dim(1) / cfg.model.total_stride(), pc, rng);
      ag::Tape tape;
      ParamBinder p(tape, full, [](const std::string&) { return true; });
      const double loss = recon_loss(p, cfg, wave, mask, true);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("teacher pretraining diverged at epoch " + std::to_string(epoch));
      }
      opt.step(full, p.gradients(), [&](const std::string&) { return pc.lr; });
      total += loss;
    }
    out.epoch_losses.push_back(total / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch, out.epoch_losses.back());
  }
  out.full = full;
  out.teacher = full.slice("cnn.", false);
  out.teacher.merge(full.slice("encoder.", false));
  out.teacher.set_seed(seed);
  return out;
}

double pretrain_loss(const ParameterStore& full, const Corpus& corpus, const RunConfig& cfg,
                     uint64_t seed) {
  Rng rng(derive_seed(seed, "heldout"));
  const int bs = cfg.pretrain.batch_size;
  const size_t n = corpus.utterances.size();
  double total = 0.0;
  int count = 0;
  for (size_t start = 0; start < n; start += static_cast<size_t>(bs)) {
    std::vector<std::vector<double>> rows;
    for (size_t i = start; i < std::min(n, start + static_cast<size_t>(bs)); ++i) {
      rows.push_back(crop_random(corpus.utterances[i], cfg.crop_seconds, corpus.sample_rate, rng));
    }
    const Tensor wave = waveform_batch(rows);
    const Tensor mask =
        draw_frame_mask(wave.dim(0), wave.dim(1) / cfg.model.total_stride(), cfg.pretrain, rng);
    ag::Tape tape(false);
    ParamBinder p(tape, full);
    total += recon_loss(p, cfg, wave, mask, false);
    ++count;
  }
  return total / count;
}

}  // namespace oskdft
