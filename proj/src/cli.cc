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

#include "oskdft/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "oskdft/benchmark.h"
#include "oskdft/checkpoint.h"
#include "oskdft/config.h"
#include "oskdft/init.h"
#include "oskdft/trainer.h"

namespace oskdft {
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::string workdir = ".";
  bool dry_run = false;
  bool resume = false;
  std::string mode;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = parse_run_config(read_file(c.config));
  if (!c.mode.empty()) cfg.mode = run_mode_from_string(c.mode);
  if (c.seed) cfg.seeds = {*c.seed};
  cfg.validate();
  return cfg;
}

fs::path data_dir(const Common& c) { return fs::path(c.workdir) / "data"; }
fs::path teacher_path(const Common& c) { return fs::path(c.workdir) / "teacher.ckpt"; }

std::string run_name(const RunConfig& cfg) {
  return cfg.run_name.empty() ? arm_slug(cfg) : cfg.run_name;
}

fs::path run_rel(const RunConfig& cfg, uint64_t seed) {
  return fs::path("runs") / run_name(cfg) / ("seed_" + std::to_string(seed));
}

// Lines of a formatted config whose key starts with one of the prefixes.
std::string section(const std::string& formatted, const std::vector<std::string>& prefixes) {
  std::istringstream is(formatted);
  std::string line, out;
  while (std::getline(is, line)) {
    for (const auto& p : prefixes) {
      if (line.rfind(p, 0) == 0) {
        out += line + "\n";
        break;
      }
    }
  }
  return out;
}

// Artifacts produced by an earlier command must come from the same settings,
// so the resolved config of a run reproduces them.
void require_same(const RunConfig& cfg, const fs::path& recorded,
                  const std::vector<std::string>& prefixes) {
  const std::string want = section(format_run_config(cfg), prefixes);
  const std::string have = section(read_file(recorded), prefixes);
  if (want != have) {
    std::string keys;
    for (const auto& p : prefixes) keys += (keys.empty() ? "" : ", ") + p + "*";
    throw ConfigError("keys " + keys + " differ from " + recorded.string());
  }
}

// Resolved config with the CLI seed override folded in, loaded from disk.
RunConfig read_recorded_config(const fs::path& path) { return parse_run_config(read_file(path)); }

struct LoadedData {
  Corpus train, eval;
  TrialSet trials;
};

LoadedData load_data(const Common& c, const RunConfig& cfg) {
  const fs::path d = data_dir(c);
  if (!fs::exists(d / "config.txt")) {
    throw std::runtime_error("no generated data under " + d.string() + "; run gen-data first");
  }
  require_same(cfg, d / "config.txt", {"data."});
  return {load_corpus(d / "train" / "manifest.txt"), load_corpus(d / "eval" / "manifest.txt"),
          load_trials(d / "trials.txt")};
}

void refuse_existing(const fs::path& p) {
  if (fs::exists(p) && !(fs::is_directory(p) && fs::is_empty(p))) {
    throw std::runtime_error(p.string() + " already exists; refusing to overwrite it");
  }
}

int newest_epoch(const fs::path& run_dir) {
  int best = 0;
  if (!fs::exists(run_dir / "ckpt")) return 0;
  for (const auto& e : fs::directory_iterator(run_dir / "ckpt")) {
    const std::string n = e.path().filename().string();
    if (n.rfind("epoch_", 0) != 0) continue;
    try {
      best = std::max(best, std::stoi(n.substr(6)));
    } catch (const std::exception&) {
    }
  }
  return best;
}

ParameterStore without_prefix(const ParameterStore& store, const std::string& prefix) {
  ParameterStore out(store.seed());
  for (const auto& e : store.entries()) {
    if (e.name.rfind(prefix, 0) != 0) out.add(e.name, e.value);
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---- commands --------------------------------------------------------------

int cmd_gen_data(const Common& c, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const fs::path d = data_dir(c);
  if (c.dry_run) {
    out << section(format_run_config(cfg), {"data."});
    out << "# would write " << (fs::path("data") / "{train,eval,pretrain}").string()
        << " and data/trials.txt\n";
    return 0;
  }
  refuse_existing(d);
  const Datasets ds = build_datasets(cfg.data);
  export_corpus(ds.train, d / "train");
  export_corpus(ds.eval, d / "eval");
  export_corpus(ds.pretrain, d / "pretrain");
  write_file_atomic(d / "trials.txt", format_trials(ds.trials));
  write_file_atomic(d / "config.txt", format_run_config(cfg));
  out << "train " << ds.train.utterances.size() << " utterances, " << ds.train.speakers().size()
      << " speakers\n"
      << "eval " << ds.eval.utterances.size() << " utterances, " << ds.eval.speakers().size()
      << " speakers\n"
      << "pretrain " << ds.pretrain.utterances.size() << " utterances\n"
      << "trials " << ds.trials.records.size() << "\n";
  return 0;
}

int cmd_pretrain(const Common& c, std::ostream& out) {
  RunConfig cfg = resolve_config(c);
  cfg.mode = RunMode::kTeacherPretrain;
  // The teacher seed follows the data so a run config pins it down.
  const uint64_t seed = derive_seed(cfg.data.seed, "pretrain");
  if (c.dry_run) {
    out << section(format_run_config(cfg), {"model.", "pretrain.", "data."});
    out << "# teacher seed " << seed << "\n";
    return 0;
  }
  const fs::path d = data_dir(c);
  if (!fs::exists(d / "config.txt")) {
    throw std::runtime_error("no generated data under " + d.string() + "; run gen-data first");
  }
  require_same(cfg, d / "config.txt", {"data."});
  refuse_existing(teacher_path(c));
  const Corpus corpus = load_corpus(d / "pretrain" / "manifest.txt");
  std::string csv = "epoch,loss\n";
  const PretrainResult r = pretrain_teacher(corpus, cfg, seed, [&](int epoch, double loss) {
    out << "epoch " << epoch << " loss " << fmt("%.6f", loss) << "\n" << std::flush;
    csv += std::to_string(epoch) + "," + fmt("%.10g", loss) + "\n";
  });
  Checkpoint ckpt{cfg.model, r.teacher, {{"pretrain_seed", std::to_string(seed)}}};
  save_checkpoint(teacher_path(c), ckpt);
  write_file_atomic(fs::path(c.workdir) / "teacher_config.txt", format_run_config(cfg));
  write_file_atomic(fs::path(c.workdir) / "teacher_pretrain.csv", csv);
  out << "wrote " << teacher_path(c).string() << "\n";
  return 0;
}

int cmd_train(const Common& c, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  if (cfg.mode == RunMode::kTeacherPretrain) {
    throw ConfigError("mode teacher_pretrain is trained by the pretrain-teacher command");
  }
  plan_phases(cfg);
  if (c.dry_run) {
    out << "# resolved config\n" << format_run_config(cfg) << "# run directories\n";
    for (uint64_t s : cfg.seeds) out << run_rel(cfg, s).string() << "\n";
    out << "# schedule\n" << schedule_csv(cfg);
    return 0;
  }
  const LoadedData data = load_data(c, cfg);
  std::optional<ParameterStore> teacher;
  if (cfg.mode != RunMode::kFtOnly) {
    if (!fs::exists(teacher_path(c))) {
      throw std::runtime_error("missing teacher checkpoint " + teacher_path(c).string() +
                               "; run pretrain-teacher first");
    }
    require_same(cfg, fs::path(c.workdir) / "teacher_config.txt", {"model.", "pretrain.", "data."});
    Checkpoint ck = load_checkpoint(teacher_path(c));
    if (!(ck.config == cfg.model)) throw ConfigError("teacher.ckpt was built for a different model config");
    teacher = std::move(ck.params);
  }
  RunInputs in{&data.train, &data.eval, &data.trials, teacher ? &*teacher : nullptr};
  for (uint64_t s : cfg.seeds) {
    const fs::path rel = run_rel(cfg, s);
    out << "run " << rel.string() << "\n" << std::flush;
    RunOptions opt;
    opt.resume = c.resume;
    opt.on_epoch = [&](const EpochRecord& r) {
      out << "epoch " << r.epoch << " " << r.phase << " kd=" << fmt("%.5f", r.kd)
          << " sv=" << fmt("%.5f", r.sv) << " acc=" << fmt("%.3f", r.acc);
      if (r.eer) out << " eer=" << fmt("%.4f", *r.eer);
      out << "\n" << std::flush;
    };
    const RunRecord rec = run(cfg, s, in, fs::path(c.workdir) / rel, opt);
    out << "seed " << s << " eer=" << fmt("%.6f", *rec.eer) << "\n";
  }
  return 0;
}

Embedder teacher_embedder(const ParameterStore& teacher, const ModelConfig& cfg) {
  return [&teacher, cfg](const std::vector<double>& wave) {
    const std::vector<std::vector<double>> rows{wave};
    const Tensor f = encoder_forward(waveform_batch(rows), teacher, cfg, cfg.n_layers_teacher);
    std::vector<double> v(static_cast<size_t>(f.dim(2)), 0.0);
    for (int64_t t = 0; t < f.dim(1); ++t)
      for (int64_t j = 0; j < f.dim(2); ++j) v[static_cast<size_t>(j)] += f.data()[t * f.dim(2) + j];
    return normalize(std::move(v));
  };
}

int cmd_evaluate(const Common& c, const std::string& run, bool use_teacher, std::ostream& out) {
  if (use_teacher == !run.empty()) throw std::invalid_argument("evaluate needs exactly one of --run or --teacher");
  if (use_teacher) {
    const RunConfig cfg = resolve_config(c);
    const LoadedData data = load_data(c, cfg);
    const Checkpoint ck = load_checkpoint(teacher_path(c));
    if (c.dry_run) {
      out << "# would score " << data.trials.records.size() << " trials with teacher.ckpt\n";
      return 0;
    }
    const TrialScores s = score_trials(data.trials, data.eval, teacher_embedder(ck.params, ck.config),
                                       cfg.segment_seconds);
    out << eer_report(s, compute_eer(s.set), {{"model", "teacher"}});
    return 0;
  }
  const fs::path dir = fs::path(c.workdir) / run;
  if (!fs::exists(dir / "config.txt")) throw std::runtime_error(dir.string() + " has no config.txt");
  const RunConfig cfg = read_recorded_config(dir / "config.txt");
  const int epoch = newest_epoch(dir);
  if (epoch == 0) throw std::runtime_error(dir.string() + " has no checkpoint");
  const LoadedData data = load_data(c, cfg);
  if (c.dry_run) {
    out << "# would score " << data.trials.records.size() << " trials with epoch " << epoch << "\n";
    return 0;
  }
  const ParameterStore params =
      without_prefix(load_checkpoint(dir / "ckpt" / ("epoch_" + std::to_string(epoch))).params, "adam.");
  const TrialScores s = score_trials(
      data.trials, data.eval,
      student_embedder(params, cfg, cfg.model.n_layers_student, cfg.effective_adapters()),
      cfg.segment_seconds);
  out << eer_report(s, compute_eer(s.set),
                    {{"arm", arm_label(cfg)}, {"epoch", std::to_string(epoch)}});
  return 0;
}

int cmd_benchmark(const Common& c, const std::string& run, int reps, int warmup, double seconds,
                  std::ostream& out) {
  RunConfig cfg = resolve_config(c);
  ParameterStore teacher, student;
  SpeakerHeadConfig head = cfg.head;
  AdapterMode mode = cfg.effective_adapters();
  if (fs::exists(teacher_path(c))) {
    const Checkpoint ck = load_checkpoint(teacher_path(c));
    if (!(ck.config == cfg.model)) throw ConfigError("teacher.ckpt was built for a different model config");
    teacher = ck.params;
  } else {
    out << "# no teacher.ckpt, timing a randomly initialized teacher\n";
    teacher = random_teacher(cfg.model, derive_seed(cfg.data.seed, "pretrain"));
  }
  if (!run.empty()) {
    const fs::path dir = fs::path(c.workdir) / run;
    const RunConfig rc = read_recorded_config(dir / "config.txt");
    if (!(rc.model == cfg.model)) throw ConfigError(run + " was trained with a different model config");
    const int epoch = newest_epoch(dir);
    if (epoch == 0) throw std::runtime_error(dir.string() + " has no checkpoint");
    student = without_prefix(load_checkpoint(dir / "ckpt" / ("epoch_" + std::to_string(epoch))).params,
                             "adam.");
    head = rc.head;
    head.n_speakers = static_cast<int>(num_elements(student.get("head.class_w").shape()) / head.embed_dim);
    mode = rc.effective_adapters();
  } else {
    head.n_speakers = cfg.data.n_train_speakers;
    student = init_student_from_teacher(teacher, cfg.model, head, derive_seed(cfg.data.seed, "student"));
  }
  BenchmarkOptions opt;
  opt.repetitions = reps;
  opt.warmup = warmup;
  opt.seconds = seconds > 0 ? seconds : cfg.crop_seconds;
  opt.sample_rate = cfg.data.synth.sample_rate;
  if (c.dry_run) {
    out << "# would time " << opt.repetitions << " repetitions after " << opt.warmup
        << " warmup, input " << fmt("%g", opt.seconds) << " s\n";
    return 0;
  }
  const BenchmarkReport r = benchmark_models(teacher, student, cfg.model, head, mode, opt);
  const std::string text = format_benchmark(r);
  out << text;
  write_file_atomic(fs::path(c.workdir) / "benchmark.txt", text);
  return 0;
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && line.find(' ') > eq) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int cmd_compare(const Common& c, const std::vector<std::string>& runs, const std::string& csv_path,
                std::ostream& out, std::ostream& err) {
  const fs::path root(c.workdir);
  std::vector<std::string> dirs = runs;
  if (dirs.empty() && fs::exists(root / "runs")) {
    for (const auto& arm : fs::directory_iterator(root / "runs")) {
      if (!arm.is_directory()) continue;
      for (const auto& s : fs::directory_iterator(arm.path())) {
        if (s.is_directory()) dirs.push_back(fs::relative(s.path(), root).generic_string());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());

  struct Arm {
    std::string label;
    std::vector<double> eers;
    int64_t params = 0;
  };
  std::map<std::string, Arm> arms;
  std::vector<std::string> skipped;
  for (const auto& d : dirs) {
    const fs::path p = root / d / "eer.txt";
    if (!fs::exists(p)) {
      err << "warning: skipping incomplete run " << d << "\n";
      skipped.push_back(d);
      continue;
    }
    auto kv = key_values(read_file(p));
    Arm& a = arms[kv.at("arm")];
    a.label = kv.at("arm");
    a.eers.push_back(std::stod(kv.at("eer")));
    a.params = std::stoll(kv.at("params_student")) + std::stoll(kv.at("params_adapters"));
  }
  std::optional<double> latency, teacher_latency;
  if (fs::exists(root / "benchmark.txt")) {
    auto kv = key_values(read_file(root / "benchmark.txt"));
    latency = std::stod(kv.at("student_mean_ms"));
    teacher_latency = std::stod(kv.at("teacher_mean_ms"));
  }

  std::vector<const Arm*> rows;
  for (const auto& [k, a] : arms) rows.push_back(&a);
  std::stable_sort(rows.begin(), rows.end(), [](const Arm* x, const Arm* y) {
    return arm_rank(x->label) < arm_rank(y->label);
  });

  std::string table, csv = "order,arm,n_seeds,eer_mean,eer_std,params,latency_ms\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-3s %-24s %5s %9s %20s %12s\n", "#", "arm", "seeds", "params",
                "EER % (mean +/- sd)", "latency ms");
  table += buf;
  int i = 0;
  for (const Arm* a : rows) {
    double mean = 0.0, sd = 0.0;
    for (double e : a->eers) mean += e;
    mean /= static_cast<double>(a->eers.size());
    for (double e : a->eers) sd += (e - mean) * (e - mean);
    sd = a->eers.size() > 1 ? std::sqrt(sd / static_cast<double>(a->eers.size() - 1)) : 0.0;
    const std::string lat = latency ? fmt("%.3f", *latency) : "-";
    std::snprintf(buf, sizeof(buf), "%-3d %-24s %5zu %9lld %12.3f +/- %5.3f %12s\n", ++i,
                  a->label.c_str(), a->eers.size(), static_cast<long long>(a->params), 100.0 * mean,
                  100.0 * sd, lat.c_str());
    table += buf;
    std::snprintf(buf, sizeof(buf), "%d,%s,%zu,%.9f,%.9f,%lld,%s\n", i, a->label.c_str(),
                  a->eers.size(), mean, sd, static_cast<long long>(a->params), lat.c_str());
    csv += buf;
  }
  if (teacher_latency) table += "teacher latency ms: " + fmt("%.3f", *teacher_latency) + "\n";
  for (const auto& s : skipped) table += "skipped (incomplete): " + s + "\n";
  out << table;
  if (!csv_path.empty()) {
    const fs::path target = root / csv_path;
    if (target.lexically_normal().generic_string().find("runs/") != std::string::npos) {
      throw std::runtime_error("compare never writes inside a run directory");
    }
    write_file_atomic(target, csv);
  }
  return 0;
}

}  // namespace

int arm_rank(const std::string& label) {
  static const std::vector<std::string> order = {
      "FT only",  "KD then freeze", "KD then FT",          "Tuned-teacher KL",   "KDFT",
      "KDFT (LR)", "KDFT (AS param)", "KDFT (AS param, LR)", "OS-KDFT (AS)", "OS-KDFT (AS, LR)"};
  for (size_t i = 0; i < order.size(); ++i) {
    if (label == order[i]) return static_cast<int>(i);
    // Ratio families ("KD then FT 50:50") keep their family slot.
    if (i < 3 && label.rfind(order[i] + " ", 0) == 0) return static_cast<int>(i);
  }
  return static_cast<int>(order.size());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"oskdft: one-step distillation and fine-tuning of speaker encoders"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "run config file (key = value)");
    sub->add_option("--seed", c.seed, "override the config's seed list with one seed");
    sub->add_option("--workdir", c.workdir, "root of every artifact")->capture_default_str();
    sub->add_flag("--dry-run", c.dry_run, "print the resolved settings, write nothing");
    sub->add_flag("--resume", c.resume, "continue existing run directories");
    sub->add_option("--mode", c.mode, "override the config's mode");
  };
  auto* gen = app.add_subcommand("gen-data", "synthesize train, eval and pretraining corpora");
  auto* pre = app.add_subcommand("pretrain-teacher", "masked-frame pretraining of the teacher");
  auto* train = app.add_subcommand("train", "train every seed of a run config");
  auto* eval = app.add_subcommand("evaluate", "score the trials with a trained run or the teacher");
  auto* bench = app.add_subcommand("benchmark", "batch-1 encoder latency and parameter counts");
  auto* cmp = app.add_subcommand("compare", "table and plot data over completed runs");
  for (auto* s : {gen, pre, train, eval, bench, cmp}) add_common(s);

  std::string run;
  bool use_teacher = false;
  eval->add_option("--run", run, "run directory relative to the workdir");
  eval->add_flag("--teacher", use_teacher, "score mean-pooled teacher.ckpt features");
  int reps = 100, warmup = 10;
  double seconds = 0.0;
  bench->add_option("--run", run, "student run directory; default initializes from the teacher");
  bench->add_option("--reps", reps, "timed repetitions")->capture_default_str();
  bench->add_option("--warmup", warmup, "discarded repetitions")->capture_default_str();
  bench->add_option("--seconds", seconds, "input length; default crop_seconds");
  std::vector<std::string> runs;
  std::string csv;
  cmp->add_option("--runs", runs, "run directories relative to the workdir; default runs/*/seed_*");
  cmp->add_option("--csv", csv, "write plot data here, relative to the workdir");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    if (*gen) return cmd_gen_data(c, out);
    if (*pre) return cmd_pretrain(c, out);
    if (*train) return cmd_train(c, out);
    if (*eval) return cmd_evaluate(c, run, use_teacher, out);
    if (*bench) return cmd_benchmark(c, run, reps, warmup, seconds, out);
    if (*cmp) return cmd_compare(c, runs, csv, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace oskdft
