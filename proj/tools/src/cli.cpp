// SPDX-License-Identifier: Apache-2.0
#include "distilkit/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "distilkit/augment.hpp"
#include "distilkit/checkpoint.hpp"
#include "distilkit/config.hpp"
#include "distilkit/error.hpp"
#include "distilkit/report.hpp"
#include "distilkit/rng.hpp"
#include "distilkit/trainer.hpp"

namespace distilkit {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> temperature;
  std::optional<std::uint64_t> lambda_steps;
  std::string tasks;
  std::string output_dir;
  std::string format = "table";
  // eval
  std::string checkpoint;
  std::string data;
  std::string vocab;
  std::string task;
  // distill
  std::string teacher;
  // augment
  std::string input;
  std::string output;
  std::string mask_report;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "experiment configuration (JSON)");
  cmd->add_option("--seed", o.seed, "override the run seed");
  cmd->add_option("--alpha", o.alpha, "override the distillation weight alpha");
  cmd->add_option("--temperature", o.temperature, "override the distillation temperature");
  cmd->add_option("--lambda-steps", o.lambda_steps, "annealing steps until lambda reaches 1");
  cmd->add_option("--tasks", o.tasks, "comma-separated active tasks");
  cmd->add_option("--output-dir", o.output_dir, "directory for checkpoints and reports");
  cmd->add_option("--format", o.format, "report format: table or machine")->check(CLI::IsMember({"table", "machine"}));
}

std::vector<TaskId> parse_task_list(const std::string& text) {
  std::vector<TaskId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_task(item));
  }
  if (out.empty()) throw ValidationError("--tasks: no task names given");
  return out;
}

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig e = o.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config);
  if (o.seed) e.train.seed = *o.seed;
  if (o.alpha) e.train.distill.alpha = *o.alpha;
  if (o.temperature) e.train.distill.temperature = *o.temperature;
  if (o.lambda_steps) e.train.anneal = AnnealPlan{*o.lambda_steps};
  if (!o.tasks.empty()) e.train.active_tasks = parse_task_list(o.tasks);
  if (!o.output_dir.empty()) e.output_dir = o.output_dir;
  e.train.validate();
  return e;
}

ReportFormat format_of(const Options& o) { return o.format == "machine" ? ReportFormat::machine : ReportFormat::table; }

DatasetMap load_datasets(const ExperimentConfig& e) {
  e.require_datasets();
  DatasetMap out;
  for (TaskId t : e.train.active_tasks) {
    const TaskSpec spec = e.task_spec(t);
    out.emplace(t, split_dataset(load_dataset(e.datasets.at(t), spec), spec, e.train.seed));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

// Saves checkpoint, vocabulary and both report forms under output_dir/name.*
void persist(const ExperimentConfig& e, const std::string& name, TrainResult& result, const Options& o, std::ostream& out) {
  const fs::path ckpt = e.output_dir / (name + ".ckpt");
  save_checkpoint(ckpt, result.params);
  result.vocab.save(e.output_dir / (name + ".ckpt.vocab"));
  result.record.checkpoint_path = ckpt.string();
  write_text(e.output_dir / (name + ".report.json"), render_report(result.record, ReportFormat::machine));
  write_text(e.output_dir / (name + ".report.txt"), render_report(result.record, ReportFormat::table));
  out << render_report(result.record, format_of(o));
}

int run_train(const Options& o, std::ostream& out) {
  ExperimentConfig e = load_config(o);
  const TaskId task = main_task_of(e.train.active_tasks);
  e.train.active_tasks = {task};
  const DatasetMap data = load_datasets(e);
  TrainResult r = fine_tune(e.task_spec(task), data.at(task), e.train);
  persist(e, "finetune", r, o, out);
  return kExitOk;
}

int run_distill(const Options& o, std::ostream& out) {
  ExperimentConfig e = load_config(o);
  const TaskId task = main_task_of(e.train.active_tasks);
  e.train.active_tasks = {task};
  const DatasetMap data = load_datasets(e);
  const TaskSpec spec = e.task_spec(task);
  TrainResult teacher;
  if (!o.teacher.empty()) {
    teacher.params = load_checkpoint(o.teacher);
    teacher.vocab = Vocab::load(o.teacher + ".vocab");
  } else {
    teacher = fine_tune(spec, data.at(task), e.train);
    persist(e, "teacher", teacher, o, out);
  }
  TrainResult student = distill(teacher, spec, data.at(task), e.train);
  persist(e, "kd", student, o, out);
  return kExitOk;
}

int run_multi(Pipeline p, const Options& o, std::ostream& out) {
  ExperimentConfig e = load_config(o);
  if (p == Pipeline::mtkd_ta && !e.train.anneal) e.train.anneal = AnnealPlan{};
  const DatasetMap data = load_datasets(e);
  TrainResult r;
  if (p == Pipeline::mtl) {
    r = train_mtl(data, e.train);
  } else {
    const TeacherBundle teachers = train_teachers(data, e.train);
    r = p == Pipeline::mtkd ? train_mtkd(teachers, data, e.train) : train_mtkd_ta(teachers, data, e.train);
  }
  persist(e, std::string(pipeline_name(p)), r, o, out);
  return kExitOk;
}

int run_eval(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty() || o.data.empty()) throw CLI::ValidationError("eval", "--checkpoint and --data are required");
  const ModelParams params = load_checkpoint(o.checkpoint);
  const Vocab vocab = Vocab::load(o.vocab.empty() ? o.checkpoint + ".vocab" : o.vocab);
  if (vocab.hash() != params.vocab_hash) throw ValidationError("eval: vocabulary does not match the checkpoint");
  TaskId task = params.heads.front().task;
  if (!o.task.empty()) task = parse_task(o.task);
  const TaskSpec spec = TaskSpec::defaults(task);
  const auto examples = load_dataset(o.data, spec);
  const MetricsReport m = evaluate(params, vocab, spec, examples, params.config.max_len);
  out << render_metrics(std::string(task_name(task)), m, format_of(o));
  return kExitOk;
}

int run_augment(const Options& o, std::ostream& out) {
  if (o.input.empty() || o.output.empty()) throw CLI::ValidationError("augment", "--input and --output are required");
  const ExperimentConfig e = load_config(o);
  const TaskId task = o.task.empty() ? main_task_of(e.train.active_tasks) : parse_task(o.task);
  const TaskSpec spec = e.task_spec(task);
  const auto corpus = load_dataset(o.input, spec);
  const Vocab vocab = build_vocab(corpus, e.train.min_frequency);
  std::optional<NgramGenerator> generator;

  std::vector<Example> result = corpus;
  nlohmann::json masks = nlohmann::json::array();
  for (std::size_t a = 0; a < e.train.augmentations.size(); ++a) {
    const AugmentConfig& aug = e.train.augmentations[a];
    const auto rng_for = [&](std::size_t i) { return SeededRng(SeededRng::derive(e.train.seed, {task_index(task), i, a})); };
    switch (aug.kind) {
      case AugmentKind::asda: {
        std::map<std::string, std::vector<std::size_t>> by_label;
        for (std::size_t i = 0; i < corpus.size(); ++i) by_label[corpus[i].label].push_back(i);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          const auto& pool = by_label[corpus[i].label];
          if (pool.size() < 2) continue;
          SeededRng rng = rng_for(i);
          const std::size_t self = static_cast<std::size_t>(std::lower_bound(pool.begin(), pool.end(), i) - pool.begin());
          std::size_t pick = static_cast<std::size_t>(rng.uniform_int(pool.size() - 1));
          if (pick >= self) ++pick;
          const AsdaResult r = asda_augment(corpus[i], corpus[pool[pick]], vocab, aug.asda_mask_rate, rng);
          nlohmann::json positions = nlohmann::json::array();
          for (const auto& m : r.masked) positions.push_back({{"position", m.position}, {"original", m.original}});
          masks.push_back({{"line", result.size() + 1}, {"e2_begin", r.e2_begin}, {"e2_end", r.e2_end}, {"masked", positions}});
          result.push_back({join_tokens(r.tokens), r.label, task});
        }
        break;
      }
      case AugmentKind::continuation:
        if (!generator) generator = fit_ngram_generator(corpus);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          if (normalize_tokens(corpus[i].text).size() < 4) continue;
          SeededRng rng = rng_for(i);
          result.push_back(generative_continuation(corpus[i], *generator, aug.continuation_keep_fraction, rng));
        }
        break;
      case AugmentKind::noisy:
        for (std::size_t i = 0; i < result.size(); ++i) {
          SeededRng rng = rng_for(i);
          if (rng.bernoulli(0.5)) {
            result[i].text = sentence_drop(result[i].text, aug.noisy_gate_alpha, rng);
          } else {
            const auto tokens = normalize_tokens(result[i].text);
            result[i].text = join_tokens(word_drop(tokens, aug.noisy_gate_alpha, rng, aug.word_drop_rate, aug.word_drop_min,
                                                   aug.word_drop_max));
          }
        }
        break;
      case AugmentKind::mixup_encoder:
      case AugmentKind::mixup_sentence:
        throw ValidationError("augment: mixup operates on batches during training, not on corpus files");
    }
  }
  write_dataset(o.output, result);
  if (!o.mask_report.empty()) write_text(o.mask_report, masks.dump(2) + "\n");
  out << "wrote " << result.size() << " examples (" << corpus.size() << " original) to " << o.output << "\n";
  return kExitOk;
}

int run_ablate(const Options& o, std::ostream& out) {
  ExperimentConfig e = load_config(o);
  std::vector<TaskId> all;
  for (const auto& subset : e.ablation_subsets) {
    for (TaskId t : subset) {
      if (std::find(all.begin(), all.end(), t) == all.end()) all.push_back(t);
    }
  }
  e.train.active_tasks = all;
  const DatasetMap data = load_datasets(e);
  const AblationResult result = run_ablation(data, e.train, e.ablation_subsets);
  write_text(e.output_dir / "ablation.txt", render_ablation(result, ReportFormat::table));
  write_text(e.output_dir / "ablation.json", render_ablation(result, ReportFormat::machine));
  out << render_ablation(result, format_of(o));
  return kExitOk;
}

int run_synth(const Options& o, std::ostream& out) {
  const ExperimentConfig e = load_config(o);
  for (TaskId t : e.train.active_tasks) {
    const TaskSpec spec = e.task_spec(t);
    auto it = e.datasets.find(t);
    const fs::path path = it != e.datasets.end() ? it->second : e.output_dir / (std::string(task_name(t)) + ".jsonl");
    const auto examples = generate_synthetic(e.synthetic.spec_for(spec), spec, e.train.seed);
    write_dataset(path, examples);
    out << "wrote " << examples.size() << " " << task_name(t) << " examples to " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"distilkit: distillation, multi-task and augmentation training toolkit", "distilkit"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "fine-tune a single-task model");
  auto* kd = app.add_subcommand("distill", "distil a fine-tuned teacher into a smaller student");
  auto* mtl = app.add_subcommand("mtl", "multi-task training with a shared encoder");
  auto* mtkd = app.add_subcommand("mtkd", "multi-task student distilled from single-task teachers");
  auto* mtkd_ta = app.add_subcommand("mtkd-ta", "multi-teacher distillation with teacher annealing");
  auto* augment = app.add_subcommand("augment", "apply the configured text augmentations to a corpus file");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a corpus file");
  auto* ablate = app.add_subcommand("ablate", "run the auxiliary-task ablation grid");
  auto* synth = app.add_subcommand("synth", "generate synthetic corpora");
  for (auto* cmd : {train, kd, mtl, mtkd, mtkd_ta, augment, eval, ablate, synth}) add_common(cmd, o);
  kd->add_option("--teacher", o.teacher, "teacher checkpoint (vocabulary at <path>.vocab)");
  eval->add_option("--checkpoint", o.checkpoint, "model checkpoint");
  eval->add_option("--data", o.data, "corpus file (JSON lines)");
  eval->add_option("--vocab", o.vocab, "vocabulary file (default <checkpoint>.vocab)");
  eval->add_option("--task", o.task, "task head to evaluate (default: the first head)");
  augment->add_option("--input", o.input, "input corpus file");
  augment->add_option("--output", o.output, "output corpus file");
  augment->add_option("--task", o.task, "task of the corpus (default: the main active task)");
  augment->add_option("--mask-report", o.mask_report, "write ASDA mask positions as JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(o, out);
    if (kd->parsed()) return run_distill(o, out);
    if (mtl->parsed()) return run_multi(Pipeline::mtl, o, out);
    if (mtkd->parsed()) return run_multi(Pipeline::mtkd, o, out);
    if (mtkd_ta->parsed()) return run_multi(Pipeline::mtkd_ta, o, out);
    if (augment->parsed()) return run_augment(o, out);
    if (eval->parsed()) return run_eval(o, out);
    if (ablate->parsed()) return run_ablate(o, out);
    if (synth->parsed()) return run_synth(o, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace distilkit
