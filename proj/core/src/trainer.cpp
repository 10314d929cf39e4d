// SPDX-License-Identifier: Apache-2.0
#include "distilkit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "distilkit/adamw.hpp"
#include "distilkit/config.hpp"
#include "distilkit/error.hpp"
#include "distilkit/hash.hpp"
#include "distilkit/ops.hpp"
#include "distilkit/rng.hpp"

namespace distilkit {

namespace {

// Independent random streams, keyed off the run seed.
enum Stream : std::uint64_t { kInit = 1, kShuffle = 2, kDropout = 3, kAugment = 4, kMixup = 5 };

enum class Objective { supervised, kd, anneal };

struct TaskData {
  TaskSpec spec;
  const DatasetSplit* split = nullptr;
  std::vector<LabeledTokens> clean;
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  std::optional<NgramGenerator> generator;
};

struct EngineSpec {
  Pipeline pipeline = Pipeline::finetune;
  std::vector<TaskSpec> tasks;
  const DatasetMap* datasets = nullptr;
  TrainConfig config;
  ModelConfig model;
  std::size_t epochs = 0;
  Objective objective = Objective::supervised;
  const TeacherBundle* teachers = nullptr;
  std::optional<std::uint64_t> required_vocab_hash;
};

class TeacherCache {
 public:
  explicit TeacherCache(const TrainResult& teacher) : teacher_(&teacher) {}

  // Frozen teacher logits in eval mode, computed with the teacher's own
  // vocabulary and memoised by token id sequence.
  Tensor logits(const TaskSpec& spec, std::span<const LabeledTokens* const> items) {
    const std::size_t max_len = teacher_->params.config.max_len;
    const std::size_t k = spec.num_classes();
    std::vector<std::vector<std::int32_t>> keys;
    std::vector<LabeledTokens> missing;
    std::vector<std::vector<std::int32_t>> missing_keys;
    for (const auto* item : items) {
      keys.push_back(encode_tokens(item->tokens, teacher_->vocab, max_len));
      if (!cache_.count(keys.back()) &&
          std::find(missing_keys.begin(), missing_keys.end(), keys.back()) == missing_keys.end()) {
        missing.push_back(*item);
        missing_keys.push_back(keys.back());
      }
    }
    if (!missing.empty()) {
      const Tensor out = forward_logits(teacher_->params, make_batch(missing, teacher_->vocab, spec, max_len));
      for (std::size_t i = 0; i < missing.size(); ++i) {
        const auto row = out.row(i);
        cache_.emplace(std::move(missing_keys[i]), std::vector<double>(row.begin(), row.end()));
      }
    }
    Tensor result(Shape{items.size(), k});
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& row = cache_.at(keys[i]);
      std::copy(row.begin(), row.end(), result.data().begin() + static_cast<std::ptrdiff_t>(i * k));
    }
    return result;
  }

 private:
  const TrainResult* teacher_;
  std::map<std::vector<std::int32_t>, std::vector<double>> cache_;
};

void require_splits(const TaskSpec& spec, const DatasetSplit& split) {
  const std::string name(task_name(spec.id));
  if (split.train.empty()) throw ValidationError("task " + name + ": empty training split");
  if (split.validation.empty()) throw ValidationError("task " + name + ": empty validation split");
  if (split.test.empty()) throw ValidationError("task " + name + ": empty test split");
}

void check_epochs(std::size_t epochs, const char* what) {
  if (epochs < 2 || epochs > 30) {
    throw ValidationError(std::string(what) + " must lie in [2, 30], got " + std::to_string(epochs));
  }
}

bool has_kind(const TrainConfig& c, AugmentKind kind) {
  return std::any_of(c.augmentations.begin(), c.augmentations.end(), [kind](const auto& a) { return a.kind == kind; });
}

// Items added per epoch by ASDA and continuation. Independent of the epoch.
std::size_t extra_items(const TaskData& td, const TrainConfig& c) {
  std::size_t extra = 0;
  for (const auto& aug : c.augmentations) {
    if (aug.kind == AugmentKind::asda) {
      for (const auto& item : td.clean) extra += td.by_class.at(item.label).size() >= 2 ? 1 : 0;
    } else if (aug.kind == AugmentKind::continuation) {
      for (const auto& item : td.clean) extra += item.tokens.size() >= 4 ? 1 : 0;
    }
  }
  return extra;
}

TaskData prepare_task(const TaskSpec& spec, const DatasetSplit& split, const TrainConfig& c) {
  require_splits(spec, split);
  TaskData td;
  td.spec = spec;
  td.split = &split;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    td.clean.push_back(to_labeled_tokens(split.train[i], spec));
    td.by_class[td.clean.back().label].push_back(i);
  }
  if (has_kind(c, AugmentKind::continuation)) td.generator = fit_ngram_generator(split.train);
  return td;
}

std::vector<LabeledTokens> epoch_items(const TaskData& td, const TrainConfig& c, const Vocab& vocab, std::size_t epoch) {
  std::vector<LabeledTokens> items = td.clean;
  const std::uint64_t task = task_index(td.spec.id);
  const auto& train = td.split->train;
  for (std::size_t a = 0; a < c.augmentations.size(); ++a) {
    const AugmentConfig& aug = c.augmentations[a];
    const auto rng_for = [&](std::size_t i) { return SeededRng(SeededRng::derive(c.seed, {kAugment, task, epoch, i, a})); };
    switch (aug.kind) {
      case AugmentKind::asda:
        for (std::size_t i = 0; i < td.clean.size(); ++i) {
          const auto& pool = td.by_class.at(td.clean[i].label);
          if (pool.size() < 2) continue;
          SeededRng rng = rng_for(i);
          const std::size_t self = static_cast<std::size_t>(std::lower_bound(pool.begin(), pool.end(), i) - pool.begin());
          std::size_t pick = static_cast<std::size_t>(rng.uniform_int(pool.size() - 1));
          if (pick >= self) ++pick;
          AsdaResult r = asda_augment(train[i], train[pool[pick]], vocab, aug.asda_mask_rate, rng);
          items.push_back({std::move(r.tokens), td.clean[i].label});
        }
        break;
      case AugmentKind::continuation:
        for (std::size_t i = 0; i < td.clean.size(); ++i) {
          if (td.clean[i].tokens.size() < 4) continue;
          SeededRng rng = rng_for(i);
          const Example out = generative_continuation(train[i], *td.generator, aug.continuation_keep_fraction, rng);
          items.push_back({normalize_tokens(out.text), td.clean[i].label});
        }
        break;
      case AugmentKind::noisy:
        for (std::size_t i = 0; i < items.size(); ++i) {
          SeededRng rng = rng_for(i);
          auto& tokens = items[i].tokens;
          if (rng.bernoulli(0.5)) {
            tokens = normalize_tokens(sentence_drop(join_tokens(tokens), aug.noisy_gate_alpha, rng));
          } else {
            tokens = word_drop(tokens, aug.noisy_gate_alpha, rng, aug.word_drop_rate, aug.word_drop_min, aug.word_drop_max);
          }
        }
        break;
      case AugmentKind::mixup_encoder:
      case AugmentKind::mixup_sentence:
        break;
    }
  }
  return items;
}

struct Slot {
  std::size_t task_slot = 0;  // index into the engine's task list
  std::vector<std::size_t> rows;
};

// Each task's batches sit at evenly spaced positions (j + 0.5) / n_batches of
// the epoch; ties go to the task listed first.
std::vector<Slot> interleave(const std::vector<std::vector<std::vector<std::size_t>>>& per_task) {
  struct Keyed {
    double position;
    std::size_t task;
    std::size_t j;
  };
  std::vector<Keyed> keys;
  for (std::size_t t = 0; t < per_task.size(); ++t) {
    const double n = static_cast<double>(per_task[t].size());
    for (std::size_t j = 0; j < per_task[t].size(); ++j) keys.push_back({(static_cast<double>(j) + 0.5) / n, t, j});
  }
  std::stable_sort(keys.begin(), keys.end(), [](const Keyed& a, const Keyed& b) {
    return a.position != b.position ? a.position < b.position : a.task < b.task;
  });
  std::vector<Slot> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back({k.task, per_task[k.task][k.j]});
  return out;
}

std::size_t batches_for(std::size_t items, std::size_t batch_size) { return (items + batch_size - 1) / batch_size; }

std::uint64_t steps_per_epoch(std::size_t total_batches, std::size_t n_tasks, Accumulation acc) {
  return acc == Accumulation::per_batch ? total_batches : (total_batches + n_tasks - 1) / n_tasks;
}

void accumulate(ParamMap& into, const ParamMap& grads) {
  if (into.empty()) {
    into = grads;
    return;
  }
  for (auto& [name, g] : into) {
    const Tensor& add = grads.at(name);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += add[i];
  }
}

std::vector<TaskId> unique_tasks(std::span<const TaskId> tasks) {
  std::vector<TaskId> out;
  for (TaskId t : tasks) {
    if (std::find(out.begin(), out.end(), t) != out.end()) throw ValidationError("task " + std::string(task_name(t)) + " listed twice");
    out.push_back(t);
  }
  return out;
}

Vocab union_vocab(const std::vector<TaskSpec>& tasks, const DatasetMap& datasets, std::size_t min_frequency) {
  std::vector<Example> all;
  for (const auto& spec : tasks) {
    const auto& train = datasets.at(spec.id).train;
    all.insert(all.end(), train.begin(), train.end());
  }
  return build_vocab(all, min_frequency);
}

TrainResult run_engine(const EngineSpec& es) {
  const auto started = std::chrono::steady_clock::now();
  const TrainConfig& c = es.config;
  c.validate();
  check_epochs(es.epochs, "epochs");
  if (es.tasks.empty()) throw ValidationError("no tasks to train");

  std::vector<TaskId> ids;
  for (const auto& spec : es.tasks) {
    if (!es.datasets->count(spec.id)) throw ValidationError("no dataset for task " + std::string(task_name(spec.id)));
    ids.push_back(spec.id);
  }
  unique_tasks(ids);
  const TaskId main = main_task_of(ids);

  std::vector<TaskData> data;
  for (const auto& spec : es.tasks) data.push_back(prepare_task(spec, es.datasets->at(spec.id), c));

  Vocab vocab = union_vocab(es.tasks, *es.datasets, c.min_frequency);
  if (es.required_vocab_hash && *es.required_vocab_hash != vocab.hash()) {
    throw ValidationError("teacher and student vocabularies differ (hash mismatch)");
  }

  std::vector<std::optional<TeacherCache>> teachers(es.tasks.size());
  RunRecord record;
  if (es.objective != Objective::supervised) {
    for (std::size_t t = 0; t < es.tasks.size(); ++t) {
      if (!es.teachers->has(ids[t])) throw ValidationError("missing teacher for task " + std::string(task_name(ids[t])));
      const TrainResult& teacher = es.teachers->at(ids[t]);
      if (!teacher.params.has_head(ids[t])) {
        throw ValidationError("teacher for task " + std::string(task_name(ids[t])) + " has no matching head");
      }
      teachers[t].emplace(teacher);
      record.teacher_fingerprints[ids[t]] = teacher.params.fingerprint();
    }
  }

  ModelConfig model = es.model;
  model.vocab_size = vocab.size();
  std::vector<HeadSpec> heads;
  for (const auto& spec : es.tasks) heads.push_back({spec.id, spec.num_classes()});
  SeededRng init_rng(SeededRng::derive(c.seed, {kInit}));
  ModelParams params = init_params(model, heads, vocab.hash(), init_rng);

  std::size_t total_batches = 0;
  for (const auto& td : data) total_batches += batches_for(td.clean.size() + extra_items(td, c), c.batch_size);
  const std::uint64_t planned = steps_per_epoch(total_batches, data.size(), c.accumulation) * es.epochs;
  AnnealSchedule schedule;
  if (es.objective == Objective::anneal) {
    const AnnealPlan& plan = *c.anneal;
    schedule.total_steps = plan.total_steps.value_or(std::max<std::uint64_t>(1, planned - 1));
    schedule.validate();
  }

  AdamW optimizer(AdamWConfig{c.learning_rate, c.weight_decay});
  std::vector<AugmentConfig> mixups;
  for (const auto& a : c.augmentations) {
    if (a.kind == AugmentKind::mixup_encoder || a.kind == AugmentKind::mixup_sentence) mixups.push_back(a);
  }

  record.pipeline = std::string(pipeline_name(es.pipeline));
  record.config_snapshot = config_snapshot(c, es.pipeline, ids);
  record.config_hash = fnv1a64(record.config_snapshot);
  record.main_task = main;

  std::uint64_t batch_counter = 0;
  std::uint64_t opt_step = 0;
  std::optional<ModelParams> best;
  double best_f1 = -1.0;

  for (std::size_t epoch = 0; epoch < es.epochs; ++epoch) {
    std::vector<std::vector<LabeledTokens>> items(data.size());
    std::vector<std::vector<std::vector<std::size_t>>> chunks(data.size());
    for (std::size_t t = 0; t < data.size(); ++t) {
      items[t] = epoch_items(data[t], c, vocab, epoch);
      SeededRng shuffle(SeededRng::derive(c.seed, {kShuffle, epoch, task_index(ids[t])}));
      const auto order = shuffle.permutation(items[t].size());
      for (std::size_t s = 0; s < order.size(); s += c.batch_size) {
        chunks[t].emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                               order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + c.batch_size)));
      }
    }
    const std::vector<Slot> schedule_slots = interleave(chunks);

    std::map<TaskId, double> loss_sum;
    std::map<TaskId, std::size_t> loss_count;
    ParamMap pending;
    std::size_t in_round = 0;

    for (std::size_t si = 0; si < schedule_slots.size(); ++si) {
      const Slot& slot = schedule_slots[si];
      const std::size_t t = slot.task_slot;
      const TaskSpec& spec = data[t].spec;
      std::vector<const LabeledTokens*> rows;
      std::vector<LabeledTokens> picked;
      for (std::size_t r : slot.rows) {
        rows.push_back(&items[t][r]);
        picked.push_back(items[t][r]);
      }
      const TokenBatch batch = make_batch(picked, vocab, spec, model.max_len);

      Tape tape;
      ModelGraph graph(tape, params, true);
      SeededRng dropout_rng(SeededRng::derive(c.seed, {kDropout, batch_counter}));
      Var pooled = graph.encode(batch, true, dropout_rng);
      Var logits = graph.logits(pooled, spec.id);

      std::optional<Tensor> teacher_logits;
      if (teachers[t]) teacher_logits = teachers[t]->logits(spec, rows);

      const bool supervised_on = es.objective == Objective::supervised || c.supervised_scope == SupervisedScope::all_tasks ||
                                 spec.id == main;
      double weight = 1.0;
      if (es.objective == Objective::kd) weight = c.distill.alpha;
      if (es.objective == Objective::anneal) weight = schedule.lambda(opt_step);

      struct Terms {
        Var loss;
        double supervised = 0.0;
        double distill = 0.0;
      };
      const auto objective = [&](Var lg, const Tensor& targets, const std::optional<Tensor>& tl) {
        Terms out;
        std::optional<Var> sup;
        if (supervised_on) {
          sup = supervised_loss(lg, targets, spec.loss_kind);
          out.supervised = sup->value().item();
        }
        if (es.objective == Objective::supervised) {
          out.loss = *sup;
          return out;
        }
        Var kl = kl_kd_loss(tape.constant(*tl), lg, c.distill.temperature_for(spec.id));
        out.distill = kl.value().item();
        Var distill_part = ops::scale(kl, 1.0 - weight);
        out.loss = sup ? ops::add(ops::scale(*sup, weight), distill_part) : distill_part;
        return out;
      };

      const Terms clean = objective(logits, batch.targets, teacher_logits);
      std::vector<Var> terms;
      if (mixups.empty() || c.mixup_mode == MixupMode::supplement) terms.push_back(clean.loss);
      for (std::size_t m = 0; m < mixups.size(); ++m) {
        SeededRng mix_rng(SeededRng::derive(c.seed, {kMixup, batch_counter, m}));
        const auto pairing = mix_rng.permutation(batch.batch);
        const double lam = mixups[m].mixup_lambda;
        std::optional<Tensor> mixed_teacher;
        if (teacher_logits) mixed_teacher = mix_rows(*teacher_logits, pairing, lam);
        if (mixups[m].kind == AugmentKind::mixup_encoder) {
          MixedBatch mb = mixup_encoder_level(pooled, batch.targets, pairing, lam);
          terms.push_back(objective(graph.logits(mb.values, spec.id), mb.labels, mixed_teacher).loss);
        } else {
          MixedBatch mb = mixup_sentence_level(logits, batch.targets, pairing, lam);
          terms.push_back(objective(mb.values, mb.labels, mixed_teacher).loss);
        }
      }
      Var loss = terms.front();
      for (std::size_t i = 1; i < terms.size(); ++i) loss = ops::add(loss, terms[i]);
      if (terms.size() > 1) loss = ops::scale(loss, 1.0 / static_cast<double>(terms.size()));

      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) throw NumericalError("non-finite training loss at step " + std::to_string(opt_step));
      tape.backward(loss);

      record.steps.push_back({opt_step, spec.id, loss_value, clean.supervised, clean.distill, weight});
      loss_sum[spec.id] += loss_value;
      ++loss_count[spec.id];
      ++batch_counter;

      if (c.accumulation == Accumulation::per_batch) {
        optimizer.step(params.tensors, graph.gradients());
        ++opt_step;
      } else {
        accumulate(pending, graph.gradients());
        if (++in_round == data.size() || si + 1 == schedule_slots.size()) {
          optimizer.step(params.tensors, pending);
          pending.clear();
          in_round = 0;
          ++opt_step;
        }
      }
    }
    if (!params.all_finite()) throw NumericalError("non-finite parameters after epoch " + std::to_string(epoch + 1));

    EpochRow row;
    row.epoch = epoch + 1;
    for (const auto& [task, sum] : loss_sum) row.train_loss[task] = sum / static_cast<double>(loss_count[task]);
    for (const auto& td : data) {
      row.validation[td.spec.id] = evaluate(params, vocab, td.spec, td.split->validation, model.max_len);
    }
    const double f1 = row.validation.at(main).weighted_f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best = params;
      record.best_epoch = epoch + 1;
    }
    record.epochs.push_back(std::move(row));
  }

  params = std::move(*best);
  for (const auto& td : data) record.test[td.spec.id] = evaluate(params, vocab, td.spec, td.split->test, model.max_len);
  record.main_test = record.test.at(main);
  record.params_fingerprint = params.fingerprint();
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return TrainResult{std::move(params), std::move(vocab), std::move(record)};
}

std::vector<TaskSpec> specs_for(const TrainConfig& config) {
  std::vector<TaskSpec> out;
  for (TaskId t : unique_tasks(config.active_tasks)) out.push_back(TaskSpec::defaults(t));
  return out;
}

EngineSpec multi_task_spec(Pipeline p, const DatasetMap& datasets, const TrainConfig& config, const ModelConfig& model) {
  EngineSpec es;
  es.pipeline = p;
  es.tasks = specs_for(config);
  es.datasets = &datasets;
  es.config = config;
  es.model = model;
  es.epochs = config.student_epoch_count();
  return es;
}

}  // namespace

std::string_view pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::finetune: return "finetune";
    case Pipeline::kd: return "kd";
    case Pipeline::mtl: return "mtl";
    case Pipeline::mtkd: return "mtkd";
    case Pipeline::mtkd_ta: return "mtkd_ta";
  }
  return "?";
}

Pipeline parse_pipeline(std::string_view name) {
  for (Pipeline p : {Pipeline::finetune, Pipeline::kd, Pipeline::mtl, Pipeline::mtkd, Pipeline::mtkd_ta}) {
    if (pipeline_name(p) == name) return p;
  }
  throw ValidationError("unknown pipeline '" + std::string(name) + "'");
}

TrainConfig TrainConfig::paper_preset() {
  TrainConfig c;
  c.learning_rate = 2e-5;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("train: learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ValidationError("train: weight_decay must be non-negative");
  if (batch_size == 0) throw ValidationError("train: batch_size must be positive");
  check_epochs(epochs, "train: epochs");
  if (student_epochs) check_epochs(*student_epochs, "train: student_epochs");
  if (min_frequency == 0) throw ValidationError("train: min_frequency must be positive");
  distill.validate();
  if (anneal && anneal->total_steps && *anneal->total_steps == 0) throw ValidationError("anneal: total_steps must be positive");
  for (const auto& a : augmentations) a.validate();
  if (active_tasks.empty()) throw ValidationError("train: no active tasks");
  unique_tasks(active_tasks);
  if (std::find(active_tasks.begin(), active_tasks.end(), TaskId::offense) == active_tasks.end()) {
    throw ValidationError("train: active tasks must include offense");
  }
  teacher_model.validate();
  student_model.validate();
}

bool RunRecord::same_results(const RunRecord& o) const {
  return pipeline == o.pipeline && config_snapshot == o.config_snapshot && config_hash == o.config_hash &&
         main_task == o.main_task && epochs == o.epochs && steps == o.steps && best_epoch == o.best_epoch &&
         test == o.test && main_test == o.main_test && teacher_fingerprints == o.teacher_fingerprints &&
         params_fingerprint == o.params_fingerprint && checkpoint_path == o.checkpoint_path;
}

TeacherBundle::TeacherBundle(std::map<TaskId, TrainResult> teachers) : teachers_(std::move(teachers)) {}

const TrainResult& TeacherBundle::at(TaskId task) const {
  auto it = teachers_.find(task);
  if (it == teachers_.end()) throw ValidationError("missing teacher for task " + std::string(task_name(task)));
  return it->second;
}

std::vector<TaskId> TeacherBundle::tasks() const {
  std::vector<TaskId> out;
  for (const auto& [t, _] : teachers_) out.push_back(t);
  return out;
}

std::map<TaskId, std::uint64_t> TeacherBundle::fingerprints() const {
  std::map<TaskId, std::uint64_t> out;
  for (const auto& [t, r] : teachers_) out[t] = r.params.fingerprint();
  return out;
}

TaskId main_task_of(std::span<const TaskId> tasks) {
  if (tasks.empty()) throw ValidationError("no tasks");
  return std::find(tasks.begin(), tasks.end(), TaskId::offense) != tasks.end() ? TaskId::offense : tasks.front();
}

std::uint64_t planned_steps(const DatasetMap& datasets, const TrainConfig& config, std::size_t epochs) {
  std::size_t total = 0;
  const auto specs = specs_for(config);
  for (const auto& spec : specs) {
    auto it = datasets.find(spec.id);
    if (it == datasets.end()) throw ValidationError("no dataset for task " + std::string(task_name(spec.id)));
    const TaskData td = prepare_task(spec, it->second, TrainConfig{});
    total += batches_for(td.clean.size() + extra_items(td, config), config.batch_size);
  }
  return steps_per_epoch(total, specs.size(), config.accumulation) * epochs;
}

TrainResult fine_tune(const TaskSpec& task, const DatasetSplit& data, const TrainConfig& config) {
  return fine_tune(task, data, config, config.teacher_model);
}

TrainResult fine_tune(const TaskSpec& task, const DatasetSplit& data, const TrainConfig& config,
                      const ModelConfig& model) {
  const DatasetMap datasets{{task.id, data}};
  EngineSpec es;
  es.pipeline = Pipeline::finetune;
  es.tasks = {task};
  es.datasets = &datasets;
  es.config = config;
  es.model = model;
  es.epochs = config.epochs;
  return run_engine(es);
}

TrainResult distill(const TrainResult& teacher, const TaskSpec& task, const DatasetSplit& data,
                    const TrainConfig& config) {
  const DatasetMap datasets{{task.id, data}};
  const TeacherBundle bundle({{task.id, teacher}});
  EngineSpec es;
  es.pipeline = Pipeline::kd;
  es.tasks = {task};
  es.datasets = &datasets;
  es.config = config;
  es.model = config.student_model;
  es.epochs = config.student_epoch_count();
  es.objective = Objective::kd;
  es.teachers = &bundle;
  es.required_vocab_hash = teacher.vocab.hash();
  return run_engine(es);
}

TrainResult train_mtl(const DatasetMap& datasets, const TrainConfig& config) {
  return train_mtl(datasets, config, config.student_model);
}

TrainResult train_mtl(const DatasetMap& datasets, const TrainConfig& config, const ModelConfig& model) {
  return run_engine(multi_task_spec(Pipeline::mtl, datasets, config, model));
}

TeacherBundle train_teachers(const DatasetMap& datasets, const TrainConfig& config) {
  config.validate();
  std::map<TaskId, TrainResult> out;
  for (TaskId t : unique_tasks(config.active_tasks)) {
    auto it = datasets.find(t);
    if (it == datasets.end()) throw ValidationError("no dataset for task " + std::string(task_name(t)));
    out.emplace(t, fine_tune(TaskSpec::defaults(t), it->second, config));
  }
  return TeacherBundle(std::move(out));
}

TrainResult train_mtkd(const TeacherBundle& teachers, const DatasetMap& datasets, const TrainConfig& config) {
  EngineSpec es = multi_task_spec(Pipeline::mtkd, datasets, config, config.student_model);
  es.objective = Objective::kd;
  es.teachers = &teachers;
  return run_engine(es);
}

TrainResult train_mtkd_ta(const TeacherBundle& teachers, const DatasetMap& datasets, const TrainConfig& config) {
  if (!config.anneal) throw ValidationError("mtkd_ta: an anneal schedule is required");
  EngineSpec es = multi_task_spec(Pipeline::mtkd_ta, datasets, config, config.student_model);
  es.objective = Objective::anneal;
  es.teachers = &teachers;
  return run_engine(es);
}

}  // namespace distilkit
